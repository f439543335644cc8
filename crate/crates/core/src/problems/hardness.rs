//! The clump/secret-set hardness family and its scripted near-optimal
//! policy.
//!
//! An instance hides one positive clump among `num_clumps` identical clumps;
//! each point of the positive clump carries a distinct target class. A
//! secret set of isolated points encodes the positive clump's index: subset
//! `i` encodes bit `b_i` as the XOR of its groups' OR-bits, and group labels
//! are drawn i.i.d. positive with probability `p_isolated = 1 - 0.5^(1/g)`
//! so every OR-bit is marginally fair. Points outside clumps and the secret
//! set are independently positive (one shared target class) at the same
//! rate. k-NN posteriors only propagate within clumps, so a model-based
//! policy learns nothing about the clump location from the secret set,
//! while a policy that knows the construction reads the secret set, decodes
//! the index, and harvests the clump.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::model::{PosteriorModel, PriorVector};
use crate::observed::{ClassCounts, LabelId};
use crate::policy::{QueryPolicy, ScanStats, Selection};
use crate::rewards::RewardFamily;

use super::{InstanceMetadata, ProblemInstance};

/// Structural parameters of a hardness instance. All sizes are explicit so
/// that desk-scale families can keep the encoding structure even where the
/// asymptotic scaling is non-integral or astronomically large.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HardnessParams {
    pub m: u32,
    /// Number of clumps; must equal `2^subsets` so the clump index is
    /// exactly encodable by the subset bits.
    pub num_clumps: usize,
    /// Points per clump; the positive clump carries this many distinct
    /// target classes, and the intended search budget `T` equals it.
    pub clump_size: usize,
    /// Number of secret subsets (one virtual bit each); `2m` at paper
    /// scaling.
    pub subsets: usize,
    /// Groups per subset (XOR arity); `m` at paper scaling.
    pub groups_per_subset: usize,
    /// Points per group (OR arity).
    pub group_size: usize,
    /// Independent leftover points.
    pub isolated: usize,
}

impl HardnessParams {
    /// The published scaling for free parameter `m`: `4^m` clumps of size
    /// `2^(m+1)`, a secret set of `2^m` points in `2m` subsets of `m` groups
    /// of `2^m / (2 m^2)` points, and `16^m - 2·8^m - 2^m` isolated points.
    /// Errors when the group size is non-integral.
    pub fn paper_scaling(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("m must be >= 1".into()));
        }
        let two_m2 = 2 * (m as usize) * (m as usize);
        let pow2m = 1usize << m;
        if pow2m % two_m2 != 0 {
            return Err(Error::InvalidParams(format!(
                "group size 2^m / (2 m^2) = {pow2m}/{two_m2} is not integral at m = {m}; \
                 use a desk preset or explicit parameters"
            )));
        }
        let n = 16usize.pow(m);
        let clumps_total = 2 * 8usize.pow(m);
        Ok(Self {
            m,
            num_clumps: 4usize.pow(m),
            clump_size: 1 << (m + 1),
            subsets: 2 * m as usize,
            groups_per_subset: m as usize,
            group_size: pow2m / two_m2,
            isolated: n - clumps_total - pow2m,
        })
    }

    /// Desk-scale preset for free parameter `m`: keeps the subset/group/XOR
    /// structure, overrides the group size to the nearest feasible integer
    /// (2 where the paper value is fractional), and sizes the clump to twice
    /// the secret set so the intended budget still splits evenly between
    /// reading the secret set and harvesting the clump.
    pub fn desk(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("m must be >= 1".into()));
        }
        let subsets = 2 * m as usize;
        let groups = m as usize;
        let two_m2 = 2 * (m as usize) * (m as usize);
        let pow2m = 1usize << m;
        let group_size = if pow2m % two_m2 == 0 { pow2m / two_m2 } else { 2 };
        let secret = subsets * groups * group_size;
        Ok(Self {
            m,
            num_clumps: 1 << subsets,
            clump_size: 2 * secret,
            subsets,
            groups_per_subset: groups,
            group_size,
            isolated: 7 * secret,
        })
    }

    pub fn secret_size(&self) -> usize {
        self.subsets * self.groups_per_subset * self.group_size
    }

    /// Marginal positive probability of secret and isolated points, chosen
    /// so each group's OR-bit is 1 with probability exactly 0.5:
    /// `1 - 0.5^(1/g)`.
    pub fn p_isolated(&self) -> f64 {
        1.0 - 0.5f64.powf(1.0 / self.group_size as f64)
    }

    /// One target class per positive-clump point, plus the negative class.
    pub fn num_classes(&self) -> usize {
        self.clump_size + 1
    }

    pub fn total_points(&self) -> usize {
        self.num_clumps * self.clump_size + self.secret_size() + self.isolated
    }

    /// The intended search budget: the clump size, half of which the
    /// scripted policy spends reading the secret set.
    pub fn budget(&self) -> usize {
        self.clump_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsets == 0 || self.groups_per_subset == 0 || self.group_size == 0 {
            return Err(Error::InvalidParams(
                "subsets, groups, and group size must be positive".into(),
            ));
        }
        if self.subsets >= usize::BITS as usize {
            return Err(Error::InvalidParams("too many subsets".into()));
        }
        if self.num_clumps != 1 << self.subsets {
            return Err(Error::InvalidParams(format!(
                "num_clumps = {} must equal 2^subsets = {}",
                self.num_clumps,
                1usize << self.subsets
            )));
        }
        if self.clump_size < 2 {
            return Err(Error::InvalidParams("clump_size must be >= 2".into()));
        }
        if self.clump_size != 2 * self.secret_size() {
            return Err(Error::InvalidParams(format!(
                "clump_size = {} must equal twice the secret size {}",
                self.clump_size,
                self.secret_size()
            )));
        }
        if self.total_points() > 5_000_000 {
            return Err(Error::InvalidParams(format!(
                "instance with {} points is too large to materialize",
                self.total_points()
            )));
        }
        Ok(())
    }
}

/// Ground truth the generator hands to the scripted policy and to tests:
/// where everything is and which bits were drawn.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardnessAnnotation {
    pub positive_clump: usize,
    /// Point indices of every clump.
    pub clumps: Vec<Vec<usize>>,
    /// `secret[i][j]` lists the points of group `j` in subset `i`.
    pub secret: Vec<Vec<Vec<usize>>>,
    /// Virtual bit of each subset (bit `i` of the positive clump index).
    pub subset_bits: Vec<bool>,
    /// OR-bit of each group.
    pub group_bits: Vec<Vec<bool>>,
    pub isolated: Vec<usize>,
    /// The single target class shared by all secret/isolated positives.
    pub isolated_class: LabelId,
}

impl HardnessAnnotation {
    /// Recovers the positive clump index from point positivity: group
    /// OR-bits, subset XORs, then bit assembly.
    pub fn decode(&self, is_target: impl Fn(usize) -> bool) -> usize {
        let mut index = 0usize;
        for (i, subset) in self.secret.iter().enumerate() {
            let mut b_i = false;
            for group in subset {
                let or_bit = group.iter().any(|&p| is_target(p));
                b_i ^= or_bit;
            }
            if b_i {
                index |= 1 << i;
            }
        }
        index
    }

    /// Flat secret-set reading order: subset-major, then group, then member.
    pub fn secret_plan(&self) -> Vec<usize> {
        self.secret
            .iter()
            .flat_map(|s| s.iter().flat_map(|g| g.iter().copied()))
            .collect()
    }
}

/// Generates a hardness instance plus its ground-truth annotation. Point
/// indices are shuffled so position reveals nothing about role.
pub fn gen_hardness(
    params: &HardnessParams,
    seed: u64,
) -> Result<(ProblemInstance, HardnessAnnotation)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = params.total_points();
    let num_classes = params.num_classes();
    let p_iso = params.p_isolated();

    // Conceptual slot -> physical index.
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(&mut rng);
    let mut next = 0usize;
    let mut take = |count: usize| {
        let slice = perm[next..next + count].to_vec();
        next += count;
        slice
    };

    let clumps: Vec<Vec<usize>> = (0..params.num_clumps)
        .map(|_| take(params.clump_size))
        .collect();
    let secret: Vec<Vec<Vec<usize>>> = (0..params.subsets)
        .map(|_| {
            (0..params.groups_per_subset)
                .map(|_| take(params.group_size))
                .collect()
        })
        .collect();
    let isolated = take(params.isolated);
    debug_assert_eq!(next, total);

    let positive_clump = rng.gen_range(0..params.num_clumps);
    let subset_bits: Vec<bool> = (0..params.subsets)
        .map(|i| (positive_clump >> i) & 1 == 1)
        .collect();

    // Group OR-bits: free fair coins except the last of each subset, which
    // fixes the XOR to the subset bit.
    let mut group_bits = Vec::with_capacity(params.subsets);
    for &b_i in &subset_bits {
        let mut bits: Vec<bool> = (0..params.groups_per_subset - 1)
            .map(|_| rng.gen_bool(0.5))
            .collect();
        let parity = bits.iter().fold(false, |acc, &b| acc ^ b);
        bits.push(b_i ^ parity);
        group_bits.push(bits);
    }

    let isolated_class = LabelId::new(2, num_classes)?;
    let mut labels = vec![LabelId::NEGATIVE; total];

    // Positive clump: one point per target class, in stored order.
    for (j, &p) in clumps[positive_clump].iter().enumerate() {
        labels[p] = LabelId::new(2 + j as u32, num_classes)?;
    }

    // Secret groups: i.i.d. positives conditioned on the required OR-bit,
    // via rejection (the conditional distribution exactly).
    for (i, subset) in secret.iter().enumerate() {
        for (j, group) in subset.iter().enumerate() {
            let want = group_bits[i][j];
            let draws = loop {
                let draws: Vec<bool> = (0..params.group_size)
                    .map(|_| rng.gen_bool(p_iso))
                    .collect();
                if draws.iter().any(|&d| d) == want {
                    break draws;
                }
            };
            for (&p, &positive) in group.iter().zip(&draws) {
                if positive {
                    labels[p] = isolated_class;
                }
            }
        }
    }

    for &p in &isolated {
        if rng.gen_bool(p_iso) {
            labels[p] = isolated_class;
        }
    }

    // Neighbor structure: complete within clumps at unit weight, nothing
    // anywhere else. Observing a clump point moves only its clump-mates;
    // observing a secret or isolated point moves nothing.
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
    for clump in &clumps {
        for &p in clump {
            lists[p] = clump
                .iter()
                .filter(|&&q| q != p)
                .map(|&q| (q, 1.0))
                .collect();
        }
    }
    let graph = NeighborGraph::new(lists, params.clump_size - 1)?;

    // Pseudocounts from expected class prevalences: each target class
    // appears exactly once in the positive clump; class 2 additionally
    // collects the independent positives.
    let n_f = total as f64;
    let mut targets = vec![1.0 / n_f; num_classes - 1];
    targets[0] = (1.0 + (params.secret_size() + params.isolated) as f64 * p_iso) / n_f;
    let mut targets: Vec<f64> = targets
        .iter()
        .map(|&g| ((g * 1000.0).round() / 1000.0).max(0.001))
        .collect();
    let sum: f64 = targets.iter().sum();
    if sum > 0.9 {
        for g in &mut targets {
            *g *= 0.9 / sum;
        }
    }
    let prior = PriorVector::from_target_gammas(&targets)?;

    let metadata = InstanceMetadata {
        generator: "hardness".into(),
        params: serde_json::to_value(params)?,
        seed,
        notes: vec![format!(
            "p_isolated = {}, intended budget T = {}",
            p_iso,
            params.budget()
        )],
    };
    let annotation = HardnessAnnotation {
        positive_clump,
        clumps,
        secret,
        subset_bits,
        group_bits,
        isolated,
        isolated_class,
    };
    let instance = ProblemInstance::new(num_classes, labels, graph, prior, None, metadata)?;
    Ok((instance, annotation))
}

/// The scripted near-optimal policy: reads the whole secret set, decodes the
/// positive clump index, then harvests that clump; any leftover budget goes
/// to isolated points. Realized utility is at least `(T/2)·f(1)` whenever
/// the budget covers the secret set and half the clump.
pub struct ScriptedOracle {
    annotation: HardnessAnnotation,
    plan_secret: Vec<usize>,
    seen: HashMap<usize, bool>,
    decoded: Option<usize>,
}

impl ScriptedOracle {
    pub fn new(annotation: HardnessAnnotation) -> Self {
        let plan_secret = annotation.secret_plan();
        Self {
            annotation,
            plan_secret,
            seen: HashMap::new(),
            decoded: None,
        }
    }

    pub fn decoded_clump(&self) -> Option<usize> {
        self.decoded
    }

    /// The guaranteed lower bound on realized utility at the intended
    /// budget: half the budget spent on the clump, one discovery per
    /// distinct class.
    pub fn utility_lower_bound(params: &HardnessParams, rewards: &RewardFamily) -> f64 {
        let picks = params.budget() / 2;
        (0..picks.min(rewards.num_classes() - 1))
            .map(|i| rewards.class_reward(i + 1, 1.0))
            .sum()
    }
}

impl QueryPolicy for ScriptedOracle {
    fn id(&self) -> &str {
        "scripted_oracle"
    }

    fn select(
        &mut self,
        model: &mut PosteriorModel,
        _counts: &ClassCounts,
        t: usize,
        budget: usize,
    ) -> Result<Selection> {
        if t >= budget {
            return Err(Error::BudgetExhausted { t, budget });
        }
        let pick = |point: usize| Selection {
            point,
            lookahead: None,
            stats: ScanStats::default(),
        };
        for &p in &self.plan_secret {
            if !model.is_observed(p) {
                return Ok(pick(p));
            }
        }
        if self.decoded.is_none() {
            let seen = &self.seen;
            self.decoded = Some(
                self.annotation
                    .decode(|x| *seen.get(&x).expect("secret point observed")),
            );
        }
        let clump = self.decoded.expect("decoded above");
        for &p in &self.annotation.clumps[clump] {
            if !model.is_observed(p) {
                return Ok(pick(p));
            }
        }
        for &p in &self.annotation.isolated {
            if !model.is_observed(p) {
                return Ok(pick(p));
            }
        }
        (0..model.num_points())
            .find(|&x| !model.is_observed(x))
            .map(pick)
            .ok_or(Error::NoCandidates)
    }

    fn observe(&mut self, point: usize, label: LabelId) {
        self.seen.insert(point, label.is_target());
    }
}
