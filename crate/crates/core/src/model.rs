//! Incremental k-NN class-probability model with pseudocount priors.
//!
//! The posterior at a point is the pseudocount-smoothed, edge-weighted class
//! proportion among its labeled neighbors:
//!
//! ```text
//! p_c(x | D) = (gamma_c + s_c(x)) / (1 + W(x))
//! ```
//!
//! where `s_c(x)` sums the weights of labeled neighbors of `x` carrying class
//! `c` and `W(x)` is the total labeled-neighbor weight. With unit weights
//! this is the plain labeled-neighbor count model; a point with no labeled
//! neighbors sits at the prior. Observations apply in O(in-degree) and can
//! be reversed exactly, which is what lets policies fantasize labels cheaply.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::observed::LabelId;

/// Class pseudocounts `gamma_c`, each in (0, 1) and summing to 1 so that
/// posteriors normalize.
#[derive(Clone, Debug)]
pub struct PriorVector {
    gamma: Vec<f64>,
}

impl PriorVector {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() < 2 {
            return Err(Error::InvalidPrior(format!(
                "need at least 2 classes, got {}",
                gamma.len()
            )));
        }
        if gamma.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
            return Err(Error::InvalidPrior(format!(
                "every gamma_c must lie in (0, 1): {gamma:?}"
            )));
        }
        let sum: f64 = gamma.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPrior(format!(
                "gamma must sum to 1, got {sum}"
            )));
        }
        Ok(Self { gamma })
    }

    /// Builds a prior from target-class pseudocounts (classes 2..=C); the
    /// negative class absorbs the remainder `1 - sum(targets)`.
    pub fn from_target_gammas(targets: &[f64]) -> Result<Self> {
        let sum: f64 = targets.iter().sum();
        let mut gamma = Vec::with_capacity(targets.len() + 1);
        gamma.push(1.0 - sum);
        gamma.extend_from_slice(targets);
        Self::new(gamma)
    }

    /// A single shared pseudocount for every target class.
    pub fn uniform_targets(num_classes: usize, gamma_target: f64) -> Result<Self> {
        Self::from_target_gammas(&vec![gamma_target; num_classes - 1])
    }

    pub fn num_classes(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

/// Token returned by [`PosteriorModel::update`]; reverses that update when
/// passed back to [`PosteriorModel::downdate`]. Reversals must follow stack
/// discipline (most recent first).
#[derive(Debug)]
#[must_use = "an unreversed fantasy permanently conditions the model"]
pub struct UpdateToken {
    point: usize,
    label: LabelId,
    stack_pos: usize,
}

impl UpdateToken {
    pub fn point(&self) -> usize {
        self.point
    }

    pub fn label(&self) -> LabelId {
        self.label
    }
}

/// The incremental posterior model over a fixed neighbor graph.
#[derive(Clone, Debug)]
pub struct PosteriorModel {
    graph: Arc<NeighborGraph>,
    prior: PriorVector,
    num_classes: usize,
    /// Flattened per-point weighted class counts, `s[x * C + c]`.
    s: Vec<f64>,
    /// Total labeled-neighbor weight per point.
    w: Vec<f64>,
    observed: Vec<bool>,
    stack: Vec<StackEntry>,
    undo: Vec<UndoEntry>,
}

#[derive(Clone, Copy, Debug)]
struct StackEntry {
    point: usize,
    label: LabelId,
    undo_start: usize,
}

#[derive(Clone, Copy, Debug)]
struct UndoEntry {
    point: u32,
    old_s: f64,
    old_w: f64,
}

impl PosteriorModel {
    pub fn new(graph: impl Into<Arc<NeighborGraph>>, prior: PriorVector) -> Self {
        let graph = graph.into();
        let n = graph.num_points();
        let c = prior.num_classes();
        Self {
            graph,
            prior,
            num_classes: c,
            s: vec![0.0; n * c],
            w: vec![0.0; n],
            observed: vec![false; n],
            stack: Vec::new(),
            undo: Vec::new(),
        }
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> Arc<NeighborGraph> {
        Arc::clone(&self.graph)
    }

    pub fn prior(&self) -> &PriorVector {
        &self.prior
    }

    pub fn num_points(&self) -> usize {
        self.graph.num_points()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_observed(&self, x: usize) -> bool {
        self.observed[x]
    }

    pub fn num_observed(&self) -> usize {
        self.stack.len()
    }

    /// Posterior class probabilities of `x`.
    pub fn posterior(&self, x: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes];
        self.posterior_into(x, &mut out);
        out
    }

    /// Writes the posterior of `x` into `out` without allocating.
    #[inline]
    pub fn posterior_into(&self, x: usize, out: &mut [f64]) {
        let denom = 1.0 + self.w[x];
        let gamma = self.prior.gamma();
        let s = &self.s[x * self.num_classes..(x + 1) * self.num_classes];
        for c in 0..self.num_classes {
            out[c] = (gamma[c] + s[c]) / denom;
        }
    }

    /// Conditions the model on the observation `(x, y)`. Every point with
    /// `x` in its neighbor list has its class statistics bumped by the edge
    /// weight; cost is O(in-degree of x).
    pub fn update(&mut self, x: usize, y: LabelId) -> Result<UpdateToken> {
        if self.observed[x] {
            return Err(Error::DuplicateObservation(x));
        }
        let c = y.index0();
        let undo_start = self.undo.len();
        for &(p, weight) in self.graph.in_neighbors(x) {
            let p = p as usize;
            // Saving the exact prior statistics makes reversal bit-exact;
            // subtracting the weight back would not be under rounding.
            self.undo.push(UndoEntry {
                point: p as u32,
                old_s: self.s[p * self.num_classes + c],
                old_w: self.w[p],
            });
            self.s[p * self.num_classes + c] += weight;
            self.w[p] += weight;
        }
        self.observed[x] = true;
        self.stack.push(StackEntry {
            point: x,
            label: y,
            undo_start,
        });
        Ok(UpdateToken {
            point: x,
            label: y,
            stack_pos: self.stack.len() - 1,
        })
    }

    /// Exactly reverses the most recent unreversed [`update`](Self::update).
    ///
    /// Reversal is bit-exact: it subtracts the identical edge weights last
    /// added for this point, and stack discipline guarantees no other change
    /// to the same statistics interleaves.
    pub fn downdate(&mut self, token: UpdateToken) -> Result<()> {
        if token.stack_pos + 1 != self.stack.len() {
            return Err(Error::OutOfOrderDowndate {
                token: token.stack_pos,
                top: self.stack.len().saturating_sub(1),
            });
        }
        let entry = self.stack.pop().expect("stack nonempty");
        debug_assert_eq!(entry.point, token.point);
        let c = entry.label.index0();
        for u in self.undo.drain(entry.undo_start..).rev() {
            let p = u.point as usize;
            self.s[p * self.num_classes + c] = u.old_s;
            self.w[p] = u.old_w;
        }
        self.observed[entry.point] = false;
        Ok(())
    }

    /// Conditions on a real (non-fantasy) observation, with no reversal
    /// token. Later fantasies stack on top as usual.
    pub fn observe(&mut self, x: usize, y: LabelId) -> Result<()> {
        self.update(x, y).map(|_| ())
    }

    /// Total labeled-neighbor weight `W(x)`.
    #[inline]
    pub fn labeled_weight(&self, x: usize) -> f64 {
        self.w[x]
    }

    /// Upper bounds `p*_c(y, D)` on the posterior any unlabeled point can
    /// reach after one further observation with label `y`, regardless of
    /// which point is queried.
    ///
    /// For each unlabeled `x'` the optimistic case is that the queried point
    /// is an additional neighbor of `x'` carrying label `y` at `x'`'s largest
    /// incident edge weight; the no-change case `p_c(x' | D)` covers labels
    /// other than `y` and points unaffected by the query.
    pub fn posterior_bound(&self, y: LabelId) -> Vec<f64> {
        let c_y = y.index0();
        let gamma = self.prior.gamma();
        let mut bound = vec![0.0; self.num_classes];
        for x in 0..self.num_points() {
            if self.observed[x] {
                continue;
            }
            let denom = 1.0 + self.w[x];
            let wmax = self.graph.max_incident_weight(x);
            let denom_opt = denom + wmax;
            let s = &self.s[x * self.num_classes..(x + 1) * self.num_classes];
            for c in 0..self.num_classes {
                let cur = (gamma[c] + s[c]) / denom;
                let opt = if c == c_y {
                    (gamma[c] + s[c] + wmax) / denom_opt
                } else {
                    cur
                };
                let v = cur.max(opt);
                if v > bound[c] {
                    bound[c] = v;
                }
            }
        }
        bound
    }

    /// Rebuilds a model from scratch by replaying `entries` in order.
    /// Reference implementation for incremental-equals-batch checks.
    pub fn rebuilt_from(
        graph: impl Into<Arc<NeighborGraph>>,
        prior: PriorVector,
        entries: &[(usize, LabelId)],
    ) -> Result<Self> {
        let mut model = Self::new(graph, prior);
        for &(x, y) in entries {
            let _ = model.update(x, y)?;
        }
        Ok(model)
    }

    /// Current observation sequence, oldest first.
    pub fn observations(&self) -> Vec<(usize, LabelId)> {
        self.stack.iter().map(|e| (e.point, e.label)).collect()
    }
}
