//! Budget-aware lookahead scoring with branch-and-bound pruning.
//!
//! The score of a candidate query `x` with `b` queries remaining after it is
//!
//! ```text
//! alpha(x) = Σ_y p_y(x) · ubar(X_y)
//! ```
//!
//! where `X_y` is the greedy lookahead batch of size `b` built after
//! fantasizing the observation `(x, y)`, and `ubar` is the Jensen bound
//! under the updated counts. Evaluating `alpha` for every candidate and
//! label from scratch would collapse and re-rank the whole pool `C·n` times
//! per iteration; instead the scorer collapses the pool once and exploits
//! the fact that a fantasy only moves the posteriors of the queried point's
//! in-neighbors: those few points are patched on top of the shared base
//! pool, whose zero-mass greedy gains are presorted per putative label.
//!
//! Pruning never changes the selected query. Candidate score upper bounds
//! come from optimistic posterior bounds (`ubar_cap`), candidates are
//! scanned in descending bound order with an early stop, and a partially
//! summed score is abandoned as soon as the remaining labels' conditional
//! caps cannot lift it past the incumbent. A small slack keeps every
//! rejection strict under floating-point rounding, so the pruned scan
//! returns bit-identical choices to the full scan.

use std::collections::HashMap;

use crate::batch::{greedy_select, sort_entries, EngineSlots, GreedyWorkspace, SortedEntry};
use crate::error::{Error, Result};
use crate::model::PosteriorModel;
use crate::observed::{ClassCounts, LabelId};
use crate::rewards::RewardFamily;

/// Absolute slack applied to every pruning comparison. Large enough to
/// swallow accumulated rounding in bound computations, small enough to keep
/// pruning effective (score gaps between candidates are far larger).
const PRUNE_SLACK: f64 = 1e-9;

/// Evaluation status of one candidate during a pruned scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalStatus {
    /// Score fully evaluated over all putative labels.
    Exact,
    /// Skipped outright: score upper bound below the incumbent.
    Pruned,
    /// Marginalization abandoned partway through the labels.
    PartiallyEvaluated,
}

/// A candidate with its score and (when pruning) score upper bound.
#[derive(Clone, Debug)]
pub struct ScoredCandidate {
    pub point: usize,
    pub score: Option<f64>,
    pub score_bound: Option<f64>,
    pub status: EvalStatus,
}

/// Counters describing how much work one selection took.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub candidates: usize,
    pub fully_scored: usize,
    pub partially_scored: usize,
    pub pruned: usize,
}

/// One-iteration scoring workspace over a mutable model.
///
/// Construction snapshots posteriors of all unlabeled points, collapses them
/// into a base pool, and presorts zero-mass greedy gains for each putative
/// label's updated counts. `score` then fantasizes per label, runs the lazy
/// greedy over the patched pool, and reverses the fantasy.
pub struct Lookahead<'m, 'r> {
    model: &'m mut PosteriorModel,
    rewards: &'r RewardFamily,
    b: usize,
    num_classes: usize,
    counts_by_label: Vec<Vec<f64>>,
    posteriors: Vec<f64>,
    unlabeled: Vec<u32>,
    slot_of: Vec<u32>,
    base_probs: Vec<f64>,
    base_mult: Vec<u32>,
    base_rep: Vec<u32>,
    base_total: usize,
    sorted_by_label: Vec<Vec<SortedEntry>>,
    decrements: Vec<u32>,
    dirty_decr: Vec<u32>,
    patch_probs: Vec<f64>,
    patch_rep: Vec<u32>,
    ws: GreedyWorkspace,
    probs_buf: Vec<f64>,
    active: Vec<usize>,
}

impl<'m, 'r> Lookahead<'m, 'r> {
    /// `b` is the lookahead batch size: the budget remaining after the query
    /// being scored. It is clamped to the available pool during scoring.
    pub fn new(
        model: &'m mut PosteriorModel,
        counts: &ClassCounts,
        rewards: &'r RewardFamily,
        b: usize,
    ) -> Self {
        let n = model.num_points();
        let c = model.num_classes();
        debug_assert_eq!(c, rewards.num_classes());
        debug_assert_eq!(c, counts.num_classes());

        let mut posteriors = vec![0.0; n * c];
        let mut unlabeled = Vec::with_capacity(n - model.num_observed());
        let mut slot_of = vec![u32::MAX; n];
        let mut base_probs = Vec::new();
        let mut base_mult: Vec<u32> = Vec::new();
        let mut base_rep: Vec<u32> = Vec::new();
        let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
        for x in 0..n {
            if model.is_observed(x) {
                continue;
            }
            unlabeled.push(x as u32);
            let row = &mut posteriors[x * c..(x + 1) * c];
            model.posterior_into(x, row);
            let key: Vec<u64> = row.iter().map(|p| p.to_bits()).collect();
            match index.get(&key) {
                Some(&slot) => {
                    base_mult[slot as usize] += 1;
                    slot_of[x] = slot;
                }
                None => {
                    let slot = base_mult.len() as u32;
                    index.insert(key, slot);
                    base_probs.extend_from_slice(row);
                    base_mult.push(1);
                    base_rep.push(x as u32);
                    slot_of[x] = slot;
                }
            }
        }
        let base_total = unlabeled.len();

        let mut counts_by_label = Vec::with_capacity(c);
        for y in 0..c {
            let mut real = counts.to_real();
            real[y] += 1.0;
            counts_by_label.push(real);
        }

        let num_slots = base_mult.len();
        let zero_q = vec![0.0; c];
        let active = rewards.active_targets();
        let mut sorted_by_label = Vec::with_capacity(c);
        for counts_real in &counts_by_label {
            let mut entries: Vec<SortedEntry> = (0..num_slots)
                .map(|s| SortedEntry {
                    gain: crate::batch::slot_gain(
                        &base_probs[s * c..(s + 1) * c],
                        &zero_q,
                        counts_real,
                        rewards,
                        &active,
                    ),
                    slot: s as u32,
                })
                .collect();
            sort_entries(&mut entries, &base_rep);
            sorted_by_label.push(entries);
        }

        Self {
            model,
            rewards,
            b,
            num_classes: c,
            counts_by_label,
            posteriors,
            unlabeled,
            slot_of,
            base_probs,
            base_mult,
            base_rep,
            base_total,
            sorted_by_label,
            decrements: vec![0; num_slots],
            dirty_decr: Vec::new(),
            patch_probs: Vec::new(),
            patch_rep: Vec::new(),
            ws: GreedyWorkspace::default(),
            probs_buf: vec![0.0; c],
            active,
        }
    }

    pub fn candidates(&self) -> &[u32] {
        &self.unlabeled
    }

    /// Effective lookahead batch size after clamping to the pool that
    /// remains once the scored candidate is removed.
    pub fn effective_lookahead(&self) -> usize {
        self.b.min(self.base_total.saturating_sub(1))
    }

    /// Posterior of `x` snapshotted at construction.
    pub fn posterior_of(&self, x: usize) -> &[f64] {
        &self.posteriors[x * self.num_classes..(x + 1) * self.num_classes]
    }

    /// Full score `alpha(x) = Σ_y p_y(x) · alpha(x | y)`.
    pub fn score(&mut self, x: usize) -> f64 {
        let c = self.num_classes;
        let mut alpha = 0.0;
        for y in 0..c {
            let p_y = self.posteriors[x * c + y];
            alpha += p_y * self.score_given_label(x, y);
        }
        alpha
    }

    /// `alpha(x | y)`: fantasize `(x, y)`, build the greedy lookahead batch
    /// over the collapsed pool (excluding `x`), evaluate the Jensen bound
    /// under the updated counts, and reverse the fantasy.
    fn score_given_label(&mut self, x: usize, y_idx: usize) -> f64 {
        let c = self.num_classes;
        let y = LabelId::new(y_idx as u32 + 1, c).expect("label in range");
        let token = self.model.update(x, y).expect("candidate is unlabeled");

        // The fantasy removes x from the pool and moves its unlabeled
        // in-neighbors onto fresh posterior vectors.
        let x_slot = self.slot_of[x] as usize;
        self.decrements[x_slot] += 1;
        self.dirty_decr.push(x_slot as u32);
        self.patch_probs.clear();
        self.patch_rep.clear();
        let graph = self.model.graph_arc();
        for &(p, _) in graph.in_neighbors(x) {
            let p = p as usize;
            if self.model.is_observed(p) {
                continue;
            }
            let slot = self.slot_of[p] as usize;
            self.decrements[slot] += 1;
            self.dirty_decr.push(slot as u32);
            self.model.posterior_into(p, &mut self.probs_buf);
            self.patch_probs.extend_from_slice(&self.probs_buf);
            self.patch_rep.push(p as u32);
        }

        let avail = self.base_total - 1;
        let b_eff = self.b.min(avail);
        let slots = EngineSlots {
            num_classes: c,
            base_probs: &self.base_probs,
            base_mult: &self.base_mult,
            base_rep: &self.base_rep,
            decrements: &self.decrements,
            patch_probs: &self.patch_probs,
            patch_rep: &self.patch_rep,
        };
        let ubar = greedy_select(
            &slots,
            &self.sorted_by_label[y_idx],
            b_eff,
            &self.counts_by_label[y_idx],
            self.rewards,
            &self.active,
            &mut self.ws,
            |_| {},
        );

        for &s in &self.dirty_decr {
            self.decrements[s as usize] = 0;
        }
        self.dirty_decr.clear();
        self.model.downdate(token).expect("stack discipline");
        ubar
    }

    /// Bound tables for the pruned scan.
    ///
    /// For each target class: descending-sorted prefix sums of current
    /// posteriors over unlabeled points, and of the optimistic boost
    /// increments `boosted - current` (the extra class mass a point would
    /// gain if the fantasized query were one more of its labeled neighbors
    /// at its largest incident weight).
    ///
    /// The class-`c` mass a lookahead batch can carry after observing
    /// `(x, y)` is then at most `cur_prefix[c][b]`, plus — when `c = y` —
    /// `incr_prefix[c][min(d_x, b)]`, where `d_x` counts the unlabeled
    /// in-neighbors of `x`: only those points' posteriors can move.
    fn cap_tables(&self) -> CapTables {
        let c = self.num_classes;
        let b_eff = self.effective_lookahead();
        let graph = self.model.graph_arc();
        let n_u = self.unlabeled.len();
        let mut cur_prefix = vec![Vec::new(); c];
        let mut incr_prefix = vec![Vec::new(); c];
        let mut scratch: Vec<f64> = Vec::with_capacity(n_u);
        let mut scratch2: Vec<f64> = Vec::with_capacity(n_u);
        for &cls in &self.active {
            scratch.clear();
            scratch2.clear();
            for &x in &self.unlabeled {
                let x = x as usize;
                let p = self.posteriors[x * c + cls];
                let denom = 1.0 + self.model.labeled_weight(x);
                let wmax = graph.max_incident_weight(x);
                let boosted = (p * denom + wmax) / (denom + wmax);
                scratch.push(p);
                scratch2.push((boosted - p).max(0.0));
            }
            cur_prefix[cls] = desc_prefix_sums(&mut scratch, b_eff);
            incr_prefix[cls] = desc_prefix_sums(&mut scratch2, b_eff);
        }
        CapTables {
            cur_prefix,
            incr_prefix,
            b_eff,
        }
    }

    /// Per-label score caps for one candidate: `cap_y >= alpha(x | y)`.
    fn candidate_caps(&self, x: usize, tables: &CapTables, caps: &mut [f64]) {
        let d_x = self
            .model
            .graph()
            .in_neighbors(x)
            .iter()
            .filter(|&&(p, _)| !self.model.is_observed(p as usize))
            .count();
        let d = d_x.min(tables.b_eff);
        for y in 0..self.num_classes {
            let mut cap = 0.0;
            for &cls in &self.active {
                let mut mass = *tables.cur_prefix[cls].last().expect("nonempty");
                if cls == y {
                    mass += tables.incr_prefix[cls][d];
                }
                cap += self
                    .rewards
                    .class_reward(cls, self.counts_by_label[y][cls] + mass);
            }
            caps[y] = cap;
        }
    }

    /// Argmax of `alpha` over all candidates by full evaluation.
    /// Ties break toward the lowest point index.
    pub fn select_full(&mut self) -> Result<(usize, ScanStats)> {
        if self.unlabeled.is_empty() {
            return Err(Error::NoCandidates);
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_point = usize::MAX;
        for i in 0..self.unlabeled.len() {
            let x = self.unlabeled[i] as usize;
            let alpha = self.score(x);
            if alpha > best || (alpha == best && x < best_point) {
                best = alpha;
                best_point = x;
            }
        }
        let n = self.unlabeled.len();
        Ok((
            best_point,
            ScanStats {
                candidates: n,
                fully_scored: n,
                partially_scored: 0,
                pruned: 0,
            },
        ))
    }

    /// Argmax of `alpha` with branch-and-bound pruning; returns the same
    /// point as [`select_full`].
    pub fn select_pruned(&mut self) -> Result<(usize, ScanStats)> {
        let (point, stats, _) = self.pruned_scan(false)?;
        Ok((point, stats))
    }

    /// Pruned scan optionally keeping per-candidate diagnostics.
    pub fn pruned_scan(
        &mut self,
        keep_candidates: bool,
    ) -> Result<(usize, ScanStats, Vec<ScoredCandidate>)> {
        if self.unlabeled.is_empty() {
            return Err(Error::NoCandidates);
        }
        let c = self.num_classes;
        let tables = self.cap_tables();
        let mut caps = vec![0.0; c];

        // Candidate bounds, scanned in descending order (ties: lower index).
        let mut order: Vec<(f64, u32)> = Vec::with_capacity(self.unlabeled.len());
        for i in 0..self.unlabeled.len() {
            let x = self.unlabeled[i] as usize;
            self.candidate_caps(x, &tables, &mut caps);
            let row = &self.posteriors[x * c..(x + 1) * c];
            let bound: f64 = row.iter().zip(&caps).map(|(p, cap)| p * cap).sum();
            order.push((bound, x as u32));
        }
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

        let mut stats = ScanStats {
            candidates: order.len(),
            ..ScanStats::default()
        };
        let mut detail = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut best_point = usize::MAX;
        for (rank, &(bound, x)) in order.iter().enumerate() {
            let x = x as usize;
            if bound < best - PRUNE_SLACK {
                // Sorted by bound: nothing further can beat the incumbent.
                stats.pruned += order.len() - rank;
                if keep_candidates {
                    for &(b2, x2) in &order[rank..] {
                        detail.push(ScoredCandidate {
                            point: x2 as usize,
                            score: None,
                            score_bound: Some(b2),
                            status: EvalStatus::Pruned,
                        });
                    }
                }
                break;
            }
            // Evaluate labels in descending p_y·cap_y order (stronger terms
            // first makes the abandonment test bite sooner); the final score
            // is assembled in canonical label order so completed candidates
            // carry bit-identical values to the full scan.
            self.candidate_caps(x, &tables, &mut caps);
            let row_off = x * c;
            let mut label_order: Vec<usize> = (0..c).collect();
            label_order.sort_by(|&a, &b| {
                let wa = self.posteriors[row_off + a] * caps[a];
                let wb = self.posteriors[row_off + b] * caps[b];
                wb.total_cmp(&wa).then(a.cmp(&b))
            });
            let mut vals = vec![f64::NAN; c];
            let mut abandoned = false;
            for (i, &y) in label_order.iter().enumerate() {
                vals[y] = self.score_given_label(x, y);
                if i + 1 < c {
                    let mut bound_rest = 0.0;
                    for yy in 0..c {
                        let p_yy = self.posteriors[row_off + yy];
                        bound_rest += p_yy * if vals[yy].is_nan() { caps[yy] } else { vals[yy] };
                    }
                    if bound_rest < best - PRUNE_SLACK {
                        abandoned = true;
                        break;
                    }
                }
            }
            let mut partial = 0.0;
            if !abandoned {
                for y in 0..c {
                    partial += self.posteriors[row_off + y] * vals[y];
                }
            }
            if abandoned {
                stats.partially_scored += 1;
                if keep_candidates {
                    detail.push(ScoredCandidate {
                        point: x,
                        score: None,
                        score_bound: Some(bound),
                        status: EvalStatus::PartiallyEvaluated,
                    });
                }
                continue;
            }
            stats.fully_scored += 1;
            if keep_candidates {
                detail.push(ScoredCandidate {
                    point: x,
                    score: Some(partial),
                    score_bound: Some(bound),
                    status: EvalStatus::Exact,
                });
            }
            if partial > best || (partial == best && x < best_point) {
                best = partial;
                best_point = x;
            }
        }
        Ok((best_point, stats, detail))
    }
}

struct CapTables {
    cur_prefix: Vec<Vec<f64>>,
    incr_prefix: Vec<Vec<f64>>,
    b_eff: usize,
}

/// Prefix sums of the `k` largest values, `k = 0..=min(b, len)`:
/// `out[j]` is the sum of the `j` largest. Consumes the scratch ordering.
fn desc_prefix_sums(values: &mut [f64], b: usize) -> Vec<f64> {
    let keep = b.min(values.len());
    if keep < values.len() {
        values.select_nth_unstable_by(keep, |a, b| b.total_cmp(a));
    }
    let head = &mut values[..keep];
    head.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::with_capacity(keep + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for v in head {
        acc += *v;
        out.push(acc);
    }
    out
}

/// Lookahead score of a single candidate: the expected Jensen-bound terminal
/// utility after spending `b` further queries greedily, averaged over the
/// candidate's putative labels.
pub fn das_score(
    x: usize,
    model: &mut PosteriorModel,
    counts: &ClassCounts,
    b: usize,
    rewards: &RewardFamily,
) -> Result<f64> {
    if model.is_observed(x) {
        return Err(Error::DuplicateObservation(x));
    }
    let mut scorer = Lookahead::new(model, counts, rewards, b);
    Ok(scorer.score(x))
}
