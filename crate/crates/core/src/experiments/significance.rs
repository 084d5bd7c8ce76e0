use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric: String,
    pub method_a: String,
    pub method_b: String,
    pub n: usize,
    /// Mean of `a - b`.
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    /// Set when the differences have zero variance.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`. Both maps must cover the same users.
pub fn paired_ttest(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<(usize, f64, f64, f64, bool)> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::InvalidParameter("paired samples cover different users".into()));
    }
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("paired t-test needs at least 2 users, got {n}")));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            (n, mean, 0.0, 1.0, true)
        } else {
            (n, mean, mean.signum() * f64::INFINITY, 0.0, true)
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok((n, mean, t, p, false))
}

/// Paired test for one metric between two labelled methods.
pub fn compare_methods(
    metric: &str,
    method_a: &str,
    a: &BTreeMap<String, f64>,
    method_b: &str,
    b: &BTreeMap<String, f64>,
) -> Result<SignificanceResult> {
    let (n, mean_diff, t, p, degenerate) = paired_ttest(a, b)?;
    Ok(SignificanceResult {
        metric: metric.to_owned(),
        method_a: method_a.to_owned(),
        method_b: method_b.to_owned(),
        n,
        mean_diff,
        t,
        p,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(xs: &[f64]) -> BTreeMap<String, f64> {
        xs.iter().enumerate().map(|(i, x)| (format!("u{i}"), *x)).collect()
    }

    #[test]
    fn identical_samples() {
        let a = map(&[0.1, 0.5, 0.3]);
        let (_, mean, t, p, degenerate) = paired_ttest(&a, &a).unwrap();
        assert_eq!((mean, t, p), (0.0, 0.0, 1.0));
        assert!(degenerate);
    }

    #[test]
    fn hand_example() {
        let a = map(&[3.0, 5.0, 4.0, 6.0, 7.0]);
        let b = map(&[1.0, 4.0, 2.0, 5.0, 3.0]);
        // diffs 2, 1, 2, 1, 4: mean 2, sample variance 1.5
        let (n, mean, t, p, _) = paired_ttest(&a, &b).unwrap();
        assert_eq!(n, 5);
        assert!((mean - 2.0).abs() < 1e-12);
        let want_t = 2.0 / (1.5f64 / 5.0).sqrt();
        assert!((t - want_t).abs() < 1e-12);
        // two-sided p for t = 3.6515 at 4 dof
        assert!((p - 0.02174).abs() < 1e-4, "{p}");
    }

    #[test]
    fn antisymmetric() {
        let a = map(&[0.2, 0.4, 0.9, 0.1]);
        let b = map(&[0.3, 0.1, 0.5, 0.0]);
        let (_, _, t_ab, p_ab, _) = paired_ttest(&a, &b).unwrap();
        let (_, _, t_ba, p_ba, _) = paired_ttest(&b, &a).unwrap();
        assert_eq!(t_ab, -t_ba);
        assert_eq!(p_ab, p_ba);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let a = map(&[1.0, 2.0, 3.0]);
        let b = map(&[0.5, 1.5, 2.5]);
        let (_, mean, _, p, degenerate) = paired_ttest(&a, &b).unwrap();
        assert!(degenerate && p == 0.0 && mean == 0.5);
    }

    #[test]
    fn mismatched_users() {
        let a = map(&[1.0, 2.0]);
        let mut b = a.clone();
        b.insert("other".into(), 1.0);
        assert!(paired_ttest(&a, &b).is_err());
    }
}
