//! Expected utility of a simultaneous batch of queries, and the greedy
//! submodular batch builder used for lookahead.
//!
//! Labels inside a batch are treated as independent with their marginals
//! frozen at the conditioning data set (no intra-batch model updates). Under
//! that assumption the exact expectation needs `C^b` outcomes; the Jensen
//! bound `ubar(X) = Σ_{c>1} f_c(m_c + Σ_{x in X} p_c(x))` replaces it at
//! O(b·C) cost and is exact for linear rewards. `ubar` is monotone
//! submodular, so a lazily evaluated greedy builder carries the usual
//! (1 - 1/e) guarantee.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

/// Engine work counters for performance probes (test/bench diagnostics).
pub static ENGINE_CALLS: AtomicU64 = AtomicU64::new(0);
pub static ENGINE_STEPS: AtomicU64 = AtomicU64::new(0);
pub static ENGINE_RECOMPUTES: AtomicU64 = AtomicU64::new(0);
pub static ENGINE_CURSOR_CONSUMED: AtomicU64 = AtomicU64::new(0);
pub static ENGINE_BULK: AtomicU64 = AtomicU64::new(0);

pub fn engine_counters() -> (u64, u64, u64, u64, u64) {
    (
        ENGINE_CALLS.load(AtomicOrdering::Relaxed),
        ENGINE_STEPS.load(AtomicOrdering::Relaxed),
        ENGINE_RECOMPUTES.load(AtomicOrdering::Relaxed),
        ENGINE_CURSOR_CONSUMED.load(AtomicOrdering::Relaxed),
        ENGINE_BULK.load(AtomicOrdering::Relaxed),
    )
}

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::PosteriorModel;
use crate::observed::ClassCounts;
use crate::rewards::RewardFamily;

/// Default cap on `C^b` outcomes for exact enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1 << 24;

/// One pool entry: a point (or a group of interchangeable points collapsed
/// into a single slot) with its frozen class probabilities.
#[derive(Clone, Debug)]
pub struct PoolSlot {
    /// Representative point index (lowest member index for collapsed groups).
    pub point: usize,
    pub probs: Vec<f64>,
    pub multiplicity: usize,
}

/// Candidate set for batch construction.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    slots: Vec<PoolSlot>,
}

impl CandidatePool {
    pub fn new(slots: Vec<PoolSlot>) -> Result<Self> {
        for slot in &slots {
            if slot.multiplicity == 0 {
                return Err(Error::InvalidProbability(format!(
                    "slot {} has zero multiplicity",
                    slot.point
                )));
            }
            let sum: f64 = slot.probs.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProbability(format!(
                    "slot {} probabilities sum to {sum}",
                    slot.point
                )));
            }
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[PoolSlot] {
        &self.slots
    }

    pub fn total_multiplicity(&self) -> usize {
        self.slots.iter().map(|s| s.multiplicity).sum()
    }
}

/// A chosen batch: ordered members with their frozen probabilities.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub members: Vec<BatchMember>,
}

#[derive(Clone, Debug)]
pub struct BatchMember {
    pub point: usize,
    pub probs: Vec<f64>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn from_members(members: Vec<BatchMember>) -> Self {
        Self { members }
    }

    /// Expected per-class count mass added by the batch.
    pub fn expected_mass(&self, num_classes: usize) -> Vec<f64> {
        let mut mass = vec![0.0; num_classes];
        for m in &self.members {
            for (c, p) in m.probs.iter().enumerate() {
                mass[c] += p;
            }
        }
        mass
    }
}

/// Groups unlabeled points whose posterior vectors are exactly equal into
/// multiplicity-weighted slots. Points with no labeled neighbors all sit at
/// the prior and collapse into one slot; the representative of each slot is
/// its first (lowest) point index.
pub fn collapse_pool(points: &[usize], model: &PosteriorModel) -> CandidatePool {
    let c = model.num_classes();
    let mut probs = vec![0.0; c];
    let mut slots: Vec<PoolSlot> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    for &x in points {
        model.posterior_into(x, &mut probs);
        let key: Vec<u64> = probs.iter().map(|p| p.to_bits()).collect();
        match index.get(&key) {
            Some(&slot) => slots[slot].multiplicity += 1,
            None => {
                index.insert(key, slots.len());
                slots.push(PoolSlot {
                    point: x,
                    probs: probs.clone(),
                    multiplicity: 1,
                });
            }
        }
    }
    CandidatePool { slots }
}

/// Exact expected utility of the batch under label independence, by
/// enumerating all `C^b` label assignments.
pub fn exact_batch_expectation(
    batch: &Batch,
    counts: &ClassCounts,
    rewards: &RewardFamily,
    limit: u64,
) -> Result<f64> {
    let c = rewards.num_classes() as u128;
    let outcomes = c
        .checked_pow(batch.size() as u32)
        .unwrap_or(u128::MAX);
    if outcomes > limit as u128 {
        return Err(Error::EnumerationLimit { outcomes, limit });
    }
    let mut counts_real = counts.to_real();
    Ok(enumerate(batch, 0, 1.0, &mut counts_real, rewards))
}

fn enumerate(
    batch: &Batch,
    idx: usize,
    prob: f64,
    counts_real: &mut [f64],
    rewards: &RewardFamily,
) -> f64 {
    if idx == batch.members.len() {
        return prob * rewards.utility_real(counts_real);
    }
    let mut total = 0.0;
    for (c, &p) in batch.members[idx].probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        counts_real[c] += 1.0;
        total += enumerate(batch, idx + 1, prob * p, counts_real, rewards);
        counts_real[c] -= 1.0;
    }
    total
}

/// Monte Carlo estimate of the batch expected utility: the sample mean of
/// the utility over independently drawn label vectors. Deterministic given
/// the seed.
pub fn mc_batch_expectation(
    batch: &Batch,
    counts: &ClassCounts,
    rewards: &RewardFamily,
    samples: usize,
    seed: u64,
) -> f64 {
    assert!(samples >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = counts.to_real();
    let mut counts_real = base.clone();
    let mut total = 0.0;
    for _ in 0..samples {
        counts_real.copy_from_slice(&base);
        for m in &batch.members {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut drawn = m.probs.len() - 1;
            for (c, &p) in m.probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    drawn = c;
                    break;
                }
            }
            counts_real[drawn] += 1.0;
        }
        total += rewards.utility_real(&counts_real);
    }
    total / samples as f64
}

/// Jensen upper bound on the batch expected utility:
/// `Σ_{c>1} f_c(m_c + Σ_{x in X} p_c(x))`. Exact for linear rewards.
pub fn jensen_bound(batch: &Batch, counts: &ClassCounts, rewards: &RewardFamily) -> f64 {
    let mut expected = counts.to_real();
    for m in &batch.members {
        for (c, &p) in m.probs.iter().enumerate() {
            expected[c] += p;
        }
    }
    rewards.utility_real(&expected)
}

// ---------------------------------------------------------------------------
// Greedy engine
//
// Shared by the public batch builder and the policy scorer. Works over a
// base slot arena (sorted once by zero-mass gain) plus optional per-call
// patch slots and multiplicity decrements, so a caller fantasizing one
// observation only pays for the handful of slots that observation touched.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub(crate) struct SortedEntry {
    pub gain: f64,
    pub slot: u32,
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    gain: f64,
    rep: u32,
    slot: u32,
    epoch: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.slot == other.slot && self.gain == other.gain
    }
}
impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on gain; ties prefer the lower representative index, then
        // the lower slot id.
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.rep.cmp(&self.rep))
            .then_with(|| other.slot.cmp(&self.slot))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Slot storage visible to the engine. Slots `0..base_mult.len()` live in the
/// base arena; higher ids are per-call patches with multiplicity 1.
pub(crate) struct EngineSlots<'a> {
    pub num_classes: usize,
    pub base_probs: &'a [f64],
    pub base_mult: &'a [u32],
    pub base_rep: &'a [u32],
    /// Per-call multiplicity reductions of base slots (same length).
    pub decrements: &'a [u32],
    pub patch_probs: &'a [f64],
    pub patch_rep: &'a [u32],
}

impl<'a> EngineSlots<'a> {
    #[inline]
    fn probs(&self, slot: usize) -> &[f64] {
        let c = self.num_classes;
        let nb = self.base_mult.len();
        if slot < nb {
            &self.base_probs[slot * c..(slot + 1) * c]
        } else {
            let p = slot - nb;
            &self.patch_probs[p * c..(p + 1) * c]
        }
    }

    #[inline]
    fn rep(&self, slot: usize) -> u32 {
        let nb = self.base_mult.len();
        if slot < nb {
            self.base_rep[slot]
        } else {
            self.patch_rep[slot - nb]
        }
    }

    #[inline]
    fn capacity(&self, slot: usize) -> u32 {
        let nb = self.base_mult.len();
        if slot < nb {
            self.base_mult[slot].saturating_sub(self.decrements[slot])
        } else {
            1
        }
    }

    fn num_slots(&self) -> usize {
        self.base_mult.len() + self.patch_rep.len()
    }
}

/// Reusable scratch for [`greedy_select`]; cleared cheaply between calls.
#[derive(Default)]
pub(crate) struct GreedyWorkspace {
    taken: Vec<u32>,
    dirty: Vec<u32>,
    q: Vec<f64>,
    /// Cached `class_reward(c, counts + q)` per class, refreshed after each
    /// selection; shared by every gain evaluation at that mass.
    base_f: Vec<f64>,
    overlay: BinaryHeap<HeapEntry>,
}

impl GreedyWorkspace {
    fn reset(&mut self, num_slots: usize, num_classes: usize) {
        for &s in &self.dirty {
            self.taken[s as usize] = 0;
        }
        self.dirty.clear();
        if self.taken.len() < num_slots {
            self.taken.resize(num_slots, 0);
        }
        self.q.clear();
        self.q.resize(num_classes, 0.0);
        self.base_f.clear();
        self.base_f.resize(num_classes, 0.0);
        self.overlay.clear();
    }

    fn refresh_base_f(&mut self, counts_real: &[f64], rewards: &RewardFamily, active: &[usize]) {
        for &c in active {
            self.base_f[c] = rewards.class_reward(c, counts_real[c] + self.q[c]);
        }
    }
}

/// Marginal `ubar` gain of adding one copy of a slot on top of mass `q`,
/// over the classes in `active` (targets with nonzero weight).
///
/// Unweighted log rewards take a product form, `ln Π (1+a+p)/(1+a)`, one
/// logarithm instead of one per class. Gain values shift by at most an ulp
/// or two versus the sum form; both greedy variants share this function, so
/// selections stay mutually consistent.
#[inline]
pub(crate) fn slot_gain(
    probs: &[f64],
    q: &[f64],
    counts_real: &[f64],
    rewards: &RewardFamily,
    active: &[usize],
) -> f64 {
    if rewards.is_plain_log() {
        let mut ratio = 1.0;
        for &c in active {
            if probs[c] == 0.0 {
                continue;
            }
            let at = 1.0 + counts_real[c] + q[c];
            ratio *= (at + probs[c]) / at;
        }
        return ratio.ln();
    }
    let mut g = 0.0;
    for &c in active {
        if probs[c] == 0.0 {
            continue;
        }
        let at = counts_real[c] + q[c];
        g += rewards.class_reward(c, at + probs[c]) - rewards.class_reward(c, at);
    }
    g
}

/// [`slot_gain`] against a cached table of `class_reward(c, counts + q)`
/// values; bit-identical to the uncached form.
#[inline]
fn slot_gain_cached(
    probs: &[f64],
    q: &[f64],
    base_f: &[f64],
    counts_real: &[f64],
    rewards: &RewardFamily,
    active: &[usize],
    plain_log: bool,
) -> f64 {
    if plain_log {
        let mut ratio = 1.0;
        for &c in active {
            if probs[c] == 0.0 {
                continue;
            }
            let at = 1.0 + counts_real[c] + q[c];
            ratio *= (at + probs[c]) / at;
        }
        return ratio.ln();
    }
    let mut g = 0.0;
    for &c in active {
        if probs[c] == 0.0 {
            continue;
        }
        let at = counts_real[c] + q[c];
        g += rewards.class_reward(c, at + probs[c]) - base_f[c];
    }
    g
}

/// Greedily selects `b` slot copies maximizing `ubar`, using the lazy
/// priority-queue strategy: `sorted` holds base slots in descending order of
/// their zero-mass gains (valid upper bounds, since gains only shrink as
/// mass accumulates), and an overlay heap carries re-evaluated and patch
/// entries. Ties break toward the lowest representative point index.
///
/// Returns `ubar` of the selected batch under `counts_real`; `on_select` is
/// invoked with each chosen slot id in selection order.
pub(crate) fn greedy_select(
    slots: &EngineSlots,
    sorted: &[SortedEntry],
    b: usize,
    counts_real: &[f64],
    rewards: &RewardFamily,
    active: &[usize],
    ws: &mut GreedyWorkspace,
    mut on_select: impl FnMut(usize),
) -> f64 {
    ENGINE_CALLS.fetch_add(1, AtomicOrdering::Relaxed);
    let plain_log = rewards.is_plain_log();
    ws.reset(slots.num_slots(), slots.num_classes);
    if !plain_log {
        ws.refresh_base_f(counts_real, rewards, active);
    }
    // Patch slots enter the overlay with gains fresh at zero mass (epoch 0).
    let nb = slots.base_mult.len();
    for p in 0..slots.patch_rep.len() {
        let slot = nb + p;
        let gain = slot_gain_cached(slots.probs(slot), &ws.q, &ws.base_f, counts_real, rewards, active, plain_log);
        ws.overlay.push(HeapEntry {
            gain,
            rep: slots.patch_rep[p],
            slot: slot as u32,
            epoch: 0,
        });
    }

    let mut cursor = 0usize;
    let mut step = 0u32;
    while (step as usize) < b {
        let (slot, _sel_gain) = loop {
            while cursor < sorted.len() {
                let s = sorted[cursor].slot as usize;
                if slots.capacity(s) > ws.taken[s] {
                    break;
                }
                cursor += 1;
            }
            let base = sorted.get(cursor);
            let take_base = match (base, ws.overlay.peek()) {
                (None, None) => panic!("greedy_select: ran out of capacity"),
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(be), Some(oe)) => {
                    let bk = HeapEntry {
                        gain: be.gain,
                        rep: slots.rep(be.slot as usize),
                        slot: be.slot,
                        epoch: 0,
                    };
                    bk > *oe
                }
            };
            let (slot, rep, gain) = if take_base {
                let e = sorted[cursor];
                cursor += 1;
                ENGINE_CURSOR_CONSUMED.fetch_add(1, AtomicOrdering::Relaxed);
                if step == 0 {
                    break (e.slot as usize, e.gain);
                }
                ENGINE_RECOMPUTES.fetch_add(1, AtomicOrdering::Relaxed);
                let gain = slot_gain_cached(
                    slots.probs(e.slot as usize),
                    &ws.q,
                    &ws.base_f,
                    counts_real,
                    rewards,
                    active,
                    plain_log,
                );
                (e.slot, slots.rep(e.slot as usize), gain)
            } else {
                let e = ws.overlay.pop().expect("peeked");
                if e.epoch == step {
                    break (e.slot as usize, e.gain);
                }
                ENGINE_RECOMPUTES.fetch_add(1, AtomicOrdering::Relaxed);
                let gain = slot_gain_cached(
                    slots.probs(e.slot as usize),
                    &ws.q,
                    &ws.base_f,
                    counts_real,
                    rewards,
                    active,
                    plain_log,
                );
                (e.slot, e.rep, gain)
            };
            // Fresh value in hand: if it still beats every stored bound,
            // select without a round trip through the heap.
            let me = HeapEntry {
                gain,
                rep,
                slot,
                epoch: step,
            };
            let mut c2 = cursor;
            while c2 < sorted.len() {
                let s = sorted[c2].slot as usize;
                if slots.capacity(s) > ws.taken[s] {
                    break;
                }
                c2 += 1;
            }
            cursor = c2;
            let beats_base = match sorted.get(cursor) {
                None => true,
                Some(be) => {
                    me > HeapEntry {
                        gain: be.gain,
                        rep: slots.rep(be.slot as usize),
                        slot: be.slot,
                        epoch: 0,
                    }
                }
            };
            let beats_overlay = match ws.overlay.peek() {
                None => true,
                Some(oe) => me > *oe,
            };
            if beats_base && beats_overlay {
                break (slot as usize, gain);
            }
            ws.overlay.push(me);
        };

        on_select(slot);
        let probs = slots.probs(slot);
        for c in 0..slots.num_classes {
            ws.q[c] += probs[c];
        }
        if ws.taken[slot] == 0 {
            ws.dirty.push(slot as u32);
        }
        ws.taken[slot] += 1;
        step += 1;
        ENGINE_STEPS.fetch_add(1, AtomicOrdering::Relaxed);
        if !plain_log {
            ws.refresh_base_f(counts_real, rewards, active);
        }

        // Bulk continuation: while this slot has copies left and its fresh
        // next-copy gain still beats every other candidate's stored upper
        // bound, keep taking copies without touching the heap. This is what
        // makes long runs on one collapsed slot (the untouched-prior pool)
        // O(C) per copy instead of a full re-verification cascade.
        let rep = slots.rep(slot);

        // Tail fast-forward: if this slot alone can fill the remaining
        // budget and even its final copy's gain beats every other stored
        // bound, all remaining picks are provably this slot. Mass still
        // accumulates copy-by-copy so the result is bit-identical.
        let remaining = b - step as usize;
        if remaining > 1 && slots.capacity(slot) as usize >= ws.taken[slot] as usize + remaining {
            // Gain of this slot's final copy, at the mass the stepwise path
            // would have accumulated by then.
            let gain_last = {
                let mut q_end = ws.q.clone();
                for _ in 0..remaining - 1 {
                    for c in 0..slots.num_classes {
                        q_end[c] += probs[c];
                    }
                }
                slot_gain(probs, &q_end, counts_real, rewards, active)
            };
            while cursor < sorted.len() {
                let s = sorted[cursor].slot as usize;
                if slots.capacity(s) > ws.taken[s] {
                    break;
                }
                cursor += 1;
            }
            // Require a clear margin over every other stored bound so
            // rounding in intermediate gain evaluations cannot flip the
            // order; near-ties fall back to the stepwise path.
            let margin = 1e-9;
            let best_other_gain = match (sorted.get(cursor), ws.overlay.peek()) {
                (None, None) => f64::NEG_INFINITY,
                (Some(be), None) => be.gain,
                (None, Some(oe)) => oe.gain,
                (Some(be), Some(oe)) => be.gain.max(oe.gain),
            };
            if gain_last > best_other_gain + margin {
                // Fills the whole remaining budget; the outer loop ends here.
                for _ in 0..remaining {
                    on_select(slot);
                    for c in 0..slots.num_classes {
                        ws.q[c] += probs[c];
                    }
                    ws.taken[slot] += 1;
                    ENGINE_BULK.fetch_add(1, AtomicOrdering::Relaxed);
                }
                break;
            }
        }

        while (step as usize) < b && slots.capacity(slot) > ws.taken[slot] {
            let gain = slot_gain_cached(probs, &ws.q, &ws.base_f, counts_real, rewards, active, plain_log);
            let me = HeapEntry {
                gain,
                rep,
                slot: slot as u32,
                epoch: step,
            };
            while cursor < sorted.len() {
                let s = sorted[cursor].slot as usize;
                if slots.capacity(s) > ws.taken[s] {
                    break;
                }
                cursor += 1;
            }
            let best_other = match (sorted.get(cursor), ws.overlay.peek()) {
                (None, None) => None,
                (Some(be), None) => Some(HeapEntry {
                    gain: be.gain,
                    rep: slots.rep(be.slot as usize),
                    slot: be.slot,
                    epoch: 0,
                }),
                (None, Some(oe)) => Some(*oe),
                (Some(be), Some(oe)) => {
                    let bk = HeapEntry {
                        gain: be.gain,
                        rep: slots.rep(be.slot as usize),
                        slot: be.slot,
                        epoch: 0,
                    };
                    Some(if bk > *oe { bk } else { *oe })
                }
            };
            match best_other {
                Some(other) if other > me => {
                    // Someone's bound beats the fresh gain: fall back to the
                    // verified path, re-entering with a fresh entry.
                    ws.overlay.push(me);
                    break;
                }
                _ => {
                    on_select(slot);
                    for c in 0..slots.num_classes {
                        ws.q[c] += probs[c];
                    }
                    ws.taken[slot] += 1;
                    step += 1;
                    ENGINE_BULK.fetch_add(1, AtomicOrdering::Relaxed);
                    if !plain_log {
                        ws.refresh_base_f(counts_real, rewards, active);
                    }
                }
            }
        }
    }

    let mut ubar = 0.0;
    for c in 1..slots.num_classes {
        ubar += rewards.class_reward(c, counts_real[c] + ws.q[c]);
    }
    ubar
}

/// Builds base-arena inputs from a pool and sorts zero-mass gains.
fn pool_engine_inputs(
    pool: &CandidatePool,
    counts_real: &[f64],
    rewards: &RewardFamily,
) -> (Vec<f64>, Vec<u32>, Vec<u32>, Vec<SortedEntry>) {
    let c = rewards.num_classes();
    let s = pool.slots.len();
    let mut probs = Vec::with_capacity(s * c);
    let mut mult = Vec::with_capacity(s);
    let mut rep = Vec::with_capacity(s);
    let zero_q = vec![0.0; c];
    let active = rewards.active_targets();
    let mut sorted = Vec::with_capacity(s);
    for (i, slot) in pool.slots.iter().enumerate() {
        probs.extend_from_slice(&slot.probs);
        mult.push(slot.multiplicity as u32);
        rep.push(slot.point as u32);
        let gain = slot_gain(&slot.probs, &zero_q, counts_real, rewards, &active);
        sorted.push(SortedEntry {
            gain,
            slot: i as u32,
        });
    }
    sort_entries(&mut sorted, &rep);
    (probs, mult, rep, sorted)
}

pub(crate) fn sort_entries(entries: &mut [SortedEntry], rep: &[u32]) {
    entries.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then_with(|| rep[a.slot as usize].cmp(&rep[b.slot as usize]))
            .then_with(|| a.slot.cmp(&b.slot))
    });
}

/// Greedy `(1 - 1/e)` batch construction over a candidate pool, maximizing
/// the Jensen bound. Ties break toward the lowest point index.
pub fn greedy_batch(
    pool: &CandidatePool,
    b: usize,
    counts: &ClassCounts,
    rewards: &RewardFamily,
) -> Result<Batch> {
    let available = pool.total_multiplicity();
    if b > available {
        return Err(Error::BatchTooLarge {
            requested: b,
            available,
        });
    }
    let counts_real = counts.to_real();
    let (probs, mult, rep, sorted) = pool_engine_inputs(pool, &counts_real, rewards);
    let decrements = vec![0u32; mult.len()];
    let slots = EngineSlots {
        num_classes: rewards.num_classes(),
        base_probs: &probs,
        base_mult: &mult,
        base_rep: &rep,
        decrements: &decrements,
        patch_probs: &[],
        patch_rep: &[],
    };
    let mut ws = GreedyWorkspace::default();
    let active = rewards.active_targets();
    let mut members = Vec::with_capacity(b);
    greedy_select(&slots, &sorted, b, &counts_real, rewards, &active, &mut ws, |slot| {
        members.push(BatchMember {
            point: pool.slots[slot].point,
            probs: pool.slots[slot].probs.clone(),
        });
    });
    Ok(Batch { members })
}

/// Plain rescanning greedy, kept as the reference implementation the lazy
/// variant must reproduce exactly.
pub fn greedy_batch_naive(
    pool: &CandidatePool,
    b: usize,
    counts: &ClassCounts,
    rewards: &RewardFamily,
) -> Result<Batch> {
    let available = pool.total_multiplicity();
    if b > available {
        return Err(Error::BatchTooLarge {
            requested: b,
            available,
        });
    }
    let counts_real = counts.to_real();
    let c = rewards.num_classes();
    let active = rewards.active_targets();
    let mut q = vec![0.0; c];
    let mut taken = vec![0usize; pool.slots.len()];
    let mut members = Vec::with_capacity(b);
    for _ in 0..b {
        let mut best: Option<(f64, usize)> = None;
        for (i, slot) in pool.slots.iter().enumerate() {
            if taken[i] >= slot.multiplicity {
                continue;
            }
            let gain = slot_gain(&slot.probs, &q, &counts_real, rewards, &active);
            let better = match best {
                None => true,
                Some((bg, bi)) => {
                    gain > bg
                        || (gain == bg && slot.point < pool.slots[bi].point)
                }
            };
            if better {
                best = Some((gain, i));
            }
        }
        let (_, i) = best.expect("capacity checked");
        taken[i] += 1;
        for (cc, &p) in pool.slots[i].probs.iter().enumerate() {
            q[cc] += p;
        }
        members.push(BatchMember {
            point: pool.slots[i].point,
            probs: pool.slots[i].probs.clone(),
        });
    }
    Ok(Batch { members })
}
