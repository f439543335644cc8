//! The concave per-class reward family and the utility it induces.
//!
//! A search outcome is valued as `u(D) = Σ_{c>1} w_c · f_c(m_c)`, where `m_c`
//! counts discoveries of class `c` and each `f_c` is nonnegative,
//! nondecreasing, and concave. Class 1 is the abundant negative class and
//! never contributes. Concavity makes repeat discoveries in a well-covered
//! class worth less, which is what pushes policies toward diverse data sets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::observed::ClassCounts;

/// A user-supplied per-class reward function, used by [`RewardKind::Custom`].
pub type CustomReward = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of the per-class reward curves.
#[derive(Clone)]
pub enum RewardKind {
    /// f(x) = x. No diminishing returns; counts raw discoveries.
    Linear,
    /// f(x) = ln(1 + x).
    Log,
    /// f(x) = sqrt(x).
    Sqrt,
    /// One arbitrary concave function per class (entry 0, for the negative
    /// class, is present for indexing but never evaluated).
    Custom(Vec<CustomReward>),
}

impl fmt::Debug for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardKind::Linear => write!(f, "Linear"),
            RewardKind::Log => write!(f, "Log"),
            RewardKind::Sqrt => write!(f, "Sqrt"),
            RewardKind::Custom(fs) => write!(f, "Custom({} classes)", fs.len()),
        }
    }
}

/// Per-class concave rewards with optional nonnegative weights.
///
/// Reward functions accept real (not just integer) arguments: batch
/// expectation bounds evaluate them at fractional expected counts.
#[derive(Clone, Debug)]
pub struct RewardFamily {
    kind: RewardKind,
    /// Length-C weight vector; `weights[0]` belongs to the negative class and
    /// is ignored.
    weights: Vec<f64>,
}

/// Grid used to sanity-check custom reward functions.
const CHECK_GRID: [f64; 9] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const CHECK_DELTAS: [f64; 2] = [0.25, 1.0];

impl RewardFamily {
    /// Builds a family with unit weights for `num_classes` classes.
    pub fn new(kind: RewardKind, num_classes: usize) -> Result<Self> {
        Self::with_weights(kind, vec![1.0; num_classes])
    }

    /// Linear rewards with unit weights.
    pub fn linear(num_classes: usize) -> Self {
        Self::new(RewardKind::Linear, num_classes).expect("unit weights are valid")
    }

    /// Logarithmic rewards ln(1 + x) with unit weights.
    pub fn log(num_classes: usize) -> Self {
        Self::new(RewardKind::Log, num_classes).expect("unit weights are valid")
    }

    /// Square-root rewards with unit weights.
    pub fn sqrt(num_classes: usize) -> Self {
        Self::new(RewardKind::Sqrt, num_classes).expect("unit weights are valid")
    }

    /// Builds a family with explicit per-class weights (index 0 = negative
    /// class, ignored). Custom functions are checked on a grid for
    /// nonnegativity, monotonicity, and concavity.
    pub fn with_weights(kind: RewardKind, weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidReward(format!(
                "need at least 2 classes, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidReward(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if let RewardKind::Custom(fs) = &kind {
            if fs.len() != weights.len() {
                return Err(Error::ClassMismatch {
                    expected: weights.len(),
                    got: fs.len(),
                });
            }
            for (c, f) in fs.iter().enumerate().skip(1) {
                check_custom(c, f.as_ref())?;
            }
        }
        Ok(Self { kind, weights })
    }

    /// A family that rewards only `class` (1-based), linearly with unit
    /// weight. Used by round-robin lookahead on a single-class subproblem.
    pub fn linear_single_class(num_classes: usize, class: usize) -> Result<Self> {
        if class < 2 || class > num_classes {
            return Err(Error::InvalidReward(format!(
                "single-class reward needs a target class in [2, {num_classes}], got {class}"
            )));
        }
        let mut weights = vec![0.0; num_classes];
        weights[class - 1] = 1.0;
        Self::with_weights(RewardKind::Linear, weights)
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw reward curve for class index `idx0` (0-based; 0 = negative class)
    /// evaluated at a nonnegative real count, without the weight.
    #[inline]
    pub fn f(&self, idx0: usize, x: f64) -> f64 {
        match &self.kind {
            RewardKind::Linear => x,
            RewardKind::Log => x.ln_1p(),
            RewardKind::Sqrt => x.sqrt(),
            RewardKind::Custom(fs) => (fs[idx0])(x),
        }
    }

    /// Weighted reward contribution of class index `idx0` at count `x`.
    /// Index 0 (the negative class) contributes 0.
    #[inline]
    pub fn class_reward(&self, idx0: usize, x: f64) -> f64 {
        if idx0 == 0 {
            return 0.0;
        }
        self.weights[idx0] * self.f(idx0, x)
    }

    /// Log rewards with every weight exactly 1; gains then admit a
    /// single-logarithm product form.
    pub fn is_plain_log(&self) -> bool {
        matches!(self.kind, RewardKind::Log) && self.weights.iter().all(|&w| w == 1.0)
    }

    /// Target-class indices (0-based) with nonzero weight; the only classes
    /// that can contribute to utility.
    pub fn active_targets(&self) -> Vec<usize> {
        (1..self.weights.len())
            .filter(|&c| self.weights[c] != 0.0)
            .collect()
    }

    /// Utility of a real-valued count vector: `Σ_{c>1} w_c f_c(x_c)`.
    #[inline]
    pub fn utility_real(&self, counts: &[f64]) -> f64 {
        debug_assert_eq!(counts.len(), self.weights.len());
        let mut total = 0.0;
        for idx0 in 1..counts.len() {
            total += self.class_reward(idx0, counts[idx0]);
        }
        total
    }
}

fn check_custom(class: usize, f: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<()> {
    for &x in &CHECK_GRID {
        let v = f(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidReward(format!(
                "class {class}: f({x}) = {v} is not a finite nonnegative value"
            )));
        }
    }
    for &delta in &CHECK_DELTAS {
        for i in 0..CHECK_GRID.len() {
            for j in (i + 1)..CHECK_GRID.len() {
                let (a, b) = (CHECK_GRID[i], CHECK_GRID[j]);
                let gain_a = f(a + delta) - f(a);
                let gain_b = f(b + delta) - f(b);
                if gain_b < -1e-12 {
                    return Err(Error::InvalidReward(format!(
                        "class {class}: decreasing on [{b}, {}]",
                        b + delta
                    )));
                }
                if gain_a < gain_b - 1e-12 {
                    return Err(Error::InvalidReward(format!(
                        "class {class}: not concave between {a} and {b}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Search utility of an observed data set: `Σ_{c>1} w_c f_c(m_c)`.
pub fn utility(counts: &ClassCounts, rewards: &RewardFamily) -> Result<f64> {
    if counts.num_classes() != rewards.num_classes() {
        return Err(Error::ClassMismatch {
            expected: rewards.num_classes(),
            got: counts.num_classes(),
        });
    }
    let mut total = 0.0;
    for idx0 in 1..counts.num_classes() {
        total += rewards.class_reward(idx0, counts.count_at(idx0) as f64);
    }
    Ok(total)
}

/// Expected one-observation marginal utility gain
/// `Σ_{c>1} p_c · [f_c(m_c + 1) − f_c(m_c)]` for a point with class
/// probabilities `point_probs`.
pub fn marginal_gain(
    point_probs: &[f64],
    counts: &ClassCounts,
    rewards: &RewardFamily,
) -> Result<f64> {
    if point_probs.len() != rewards.num_classes() {
        return Err(Error::ClassMismatch {
            expected: rewards.num_classes(),
            got: point_probs.len(),
        });
    }
    if counts.num_classes() != rewards.num_classes() {
        return Err(Error::ClassMismatch {
            expected: rewards.num_classes(),
            got: counts.num_classes(),
        });
    }
    let sum: f64 = point_probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(marginal_gain_unchecked(point_probs, counts, rewards))
}

/// Hot-path variant of [`marginal_gain`] without validation.
#[inline]
pub(crate) fn marginal_gain_unchecked(
    point_probs: &[f64],
    counts: &ClassCounts,
    rewards: &RewardFamily,
) -> f64 {
    let mut gain = 0.0;
    for idx0 in 1..point_probs.len() {
        let m = counts.count_at(idx0) as f64;
        gain += point_probs[idx0] * (rewards.class_reward(idx0, m + 1.0) - rewards.class_reward(idx0, m));
    }
    gain
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(values: &[u32]) -> ClassCounts {
        ClassCounts::from_counts(values.to_vec())
    }

    #[test]
    fn utility_all_zero_is_zero() {
        let r = RewardFamily::log(3);
        assert_eq!(utility(&counts(&[5, 0, 0]), &r).unwrap(), 0.0);
    }

    #[test]
    fn utility_log_hand_value() {
        // m2 = 3, m3 = 1 under ln(1+x): ln 4 + ln 2.
        let r = RewardFamily::log(3);
        let u = utility(&counts(&[0, 3, 1]), &r).unwrap();
        assert!((u - (4.0f64.ln() + 2.0f64.ln())).abs() < 1e-12);
        assert!((u - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn utility_sqrt_hand_value() {
        let r = RewardFamily::sqrt(3);
        let u = utility(&counts(&[0, 3, 1]), &r).unwrap();
        assert!((u - (3.0f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!((u - 2.7321).abs() < 1e-4);
    }

    #[test]
    fn utility_linear_counts_discoveries() {
        let r = RewardFamily::linear(2);
        assert_eq!(utility(&counts(&[0, 7]), &r).unwrap(), 7.0);
    }

    #[test]
    fn utility_rejects_class_mismatch() {
        let r = RewardFamily::log(3);
        assert!(utility(&counts(&[0, 1]), &r).is_err());
    }

    #[test]
    fn marginal_gain_certain_empty_class() {
        let r = RewardFamily::log(2);
        let g = marginal_gain(&[0.0, 1.0], &counts(&[0, 0]), &r).unwrap();
        assert!((g - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_gain_hand_value() {
        // p2 = 0.6 at m2 = 4 plus p3 = 0.3 at m3 = 0.
        let r = RewardFamily::log(3);
        let g = marginal_gain(&[0.1, 0.6, 0.3], &counts(&[0, 4, 0]), &r).unwrap();
        let expect = 0.6 * (6.0f64.ln() - 5.0f64.ln()) + 0.3 * 2.0f64.ln();
        assert!((g - expect).abs() < 1e-12);
        assert!((g - 0.3173).abs() < 1e-4);
    }

    #[test]
    fn marginal_gain_linear_is_positive_mass() {
        let r = RewardFamily::linear(4);
        let probs = [0.4, 0.3, 0.2, 0.1];
        let g = marginal_gain(&probs, &counts(&[9, 3, 1, 0]), &r).unwrap();
        assert!((g - 0.6).abs() < 1e-12);
    }

    #[test]
    fn marginal_gain_rejects_bad_probs() {
        let r = RewardFamily::log(2);
        assert!(marginal_gain(&[0.5, 0.6], &counts(&[0, 0]), &r).is_err());
    }

    #[test]
    fn marginal_gain_one_hot_matches_utility_difference() {
        let r = RewardFamily::log(4);
        let base = counts(&[2, 5, 0, 3]);
        for c in 1..4 {
            let mut probs = vec![0.0; 4];
            probs[c] = 1.0;
            let g = marginal_gain(&probs, &base, &r).unwrap();
            let mut bumped = base.clone();
            bumped.increment(c);
            let diff = utility(&bumped, &r).unwrap() - utility(&base, &r).unwrap();
            assert!((g - diff).abs() < 1e-12);
        }
    }

    #[test]
    fn diminishing_returns_for_concave_kinds() {
        for r in [RewardFamily::log(2), RewardFamily::sqrt(2)] {
            let probs = [0.3, 0.7];
            let mut last = f64::INFINITY;
            for m in 0..6 {
                let g = marginal_gain(&probs, &counts(&[0, m]), &r).unwrap();
                assert!(g < last, "gain should strictly decrease in m_c");
                last = g;
            }
        }
    }

    #[test]
    fn weight_scaling_scales_contribution() {
        let lambda = 3.5;
        let base = RewardFamily::log(3);
        let scaled = RewardFamily::with_weights(RewardKind::Log, vec![1.0, lambda, 1.0]).unwrap();
        let cs = counts(&[0, 4, 2]);
        let u_base = utility(&cs, &base).unwrap();
        let u_scaled = utility(&cs, &scaled).unwrap();
        let class2 = 5.0f64.ln();
        assert!((u_scaled - (u_base + (lambda - 1.0) * class2)).abs() < 1e-12);
    }

    #[test]
    fn utility_nondecreasing_in_counts() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for r in [
            RewardFamily::linear(5),
            RewardFamily::log(5),
            RewardFamily::sqrt(5),
        ] {
            let mut cs = counts(&[0, 0, 0, 0, 0]);
            let mut last = 0.0;
            for _ in 0..50 {
                cs.increment(rng.gen_range(0..5));
                let u = utility(&cs, &r).unwrap();
                assert!(u >= last - 1e-12);
                last = u;
            }
        }
    }

    #[test]
    fn custom_rewards_validated() {
        // A valid concave custom function.
        let ok: CustomReward = Arc::new(|x: f64| (1.0 + x).ln());
        let fam = RewardFamily::with_weights(
            RewardKind::Custom(vec![ok.clone(), ok.clone()]),
            vec![1.0, 1.0],
        );
        assert!(fam.is_ok());

        // Convex: marginal gains increase.
        let convex: CustomReward = Arc::new(|x: f64| x * x);
        let fam = RewardFamily::with_weights(
            RewardKind::Custom(vec![ok.clone(), convex]),
            vec![1.0, 1.0],
        );
        assert!(fam.is_err());

        // Decreasing.
        let dec: CustomReward = Arc::new(|x: f64| 10.0 - x);
        let fam = RewardFamily::with_weights(RewardKind::Custom(vec![ok, dec]), vec![1.0, 1.0]);
        assert!(fam.is_err());
    }

    #[test]
    fn single_class_family_zeroes_other_classes() {
        let r = RewardFamily::linear_single_class(4, 3).unwrap();
        assert_eq!(r.class_reward(2, 5.0), 5.0);
        assert_eq!(r.class_reward(1, 5.0), 0.0);
        assert_eq!(r.class_reward(3, 5.0), 0.0);
    }
}
