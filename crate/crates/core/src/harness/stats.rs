//! Paired significance testing and summary statistics.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Result of a two-sided paired t-test.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    /// All-zero or zero-variance differences; `t` and `p` are then reported
    /// by convention rather than computed from the t distribution.
    pub degenerate: bool,
}

/// Two-sided paired t-test on per-seed utilities. The statistic is
/// `mean(d) / (sd(d) / sqrt(n))` with the sample standard deviation
/// (`n - 1` denominator) and `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Stats(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Stats(format!("need n >= 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        // Identical trajectories give all-zero differences (t = 0, p = 1);
        // constant nonzero differences have an undefined statistic and are
        // flagged with p = 0.
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                p: 1.0,
                degenerate: true,
            }
        } else {
            TTest {
                t: if mean > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Stats(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest {
        t,
        p,
        degenerate: false,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean with the sample standard deviation; 0 for a
/// single observation.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_differences() {
        let t = paired_t_test(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.t, 0.0);
        assert!((t.p - 1.0).abs() < 1e-12);
        assert!(!t.degenerate);
    }

    #[test]
    fn all_zero_differences_degenerate() {
        let t = paired_t_test(&[2.0, 3.0], &[2.0, 3.0]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.t, 0.0);
        assert_eq!(t.p, 1.0);
    }

    #[test]
    fn constant_nonzero_differences_degenerate() {
        let t = paired_t_test(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(t.degenerate);
        assert!(t.t.is_infinite() && t.t > 0.0);
        assert_eq!(t.p, 0.0);
    }

    #[test]
    fn hand_computed_example() {
        // d = (2, 0, 1, 1): mean 1, sd ~ 0.8165, t ~ 2.449, p ~ 0.0918.
        let t = paired_t_test(&[2.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((t.t - 2.449).abs() < 1e-3, "t = {}", t.t);
        assert!((t.p - 0.0918).abs() < 1e-3, "p = {}", t.p);
    }

    #[test]
    fn input_validation() {
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn summary_helpers() {
        assert_eq!(standard_error(&[5.0]), 0.0);
        assert!((mean(&[1.0, 2.0, 3.0]) - 2.0).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
