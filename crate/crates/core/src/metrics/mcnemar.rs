use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::MetricsError;

/// Discordant-pair count below which the exact binomial test is used.
pub const EXACT_CUTOFF: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Pairs where A is correct and B is wrong.
    pub b: u64,
    /// Pairs where A is wrong and B is correct.
    pub c: u64,
    /// `min(b, c)` for the exact test, the corrected chi-square otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
    pub note: Option<String>,
}

/// Two-sided exact binomial p-value for `b` vs `c` discordant pairs:
/// `min(1, 2 * P(X <= min(b, c)))` with `X ~ Binomial(b + c, 1/2)`.
pub fn exact_binomial_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let tail = if n <= 1000 {
        let mut pmf = 0.5f64.powi(n as i32);
        let mut sum = pmf;
        for i in 0..k {
            pmf *= (n - i) as f64 / (i + 1) as f64;
            sum += pmf;
        }
        sum
    } else {
        // log space keeps 0.5^n from underflowing
        let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
        let mut ln_choose = 0.0f64;
        let mut sum = ln_half_n.exp();
        for i in 0..k {
            ln_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            sum += (ln_choose + ln_half_n).exp();
        }
        sum
    };
    (2.0 * tail).min(1.0)
}

/// McNemar's test from discordant counts.
///
/// Exact binomial when `b + c < 25`; otherwise the continuity-corrected
/// statistic `(|b - c| - 1)^2 / (b + c)` against chi-square with one degree
/// of freedom. The corrected difference is floored at zero.
pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemarResult {
    let n = b + c;
    if n == 0 {
        return McNemarResult {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::ExactBinomial,
            note: Some("no discordant pairs; classifiers agree on every sample".into()),
        };
    }
    if n < EXACT_CUTOFF {
        return McNemarResult {
            b,
            c,
            statistic: b.min(c) as f64,
            p_value: exact_binomial_p(b, c),
            method: McNemarMethod::ExactBinomial,
            note: None,
        };
    }
    let diff = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    let statistic = diff * diff / n as f64;
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    McNemarResult {
        b,
        c,
        statistic,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
        method: McNemarMethod::ChiSquareCorrected,
        note: None,
    }
}

/// McNemar's test on paired per-sample correctness of classifiers A and B.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemarResult, MetricsError> {
    if correct_a.len() != correct_b.len() {
        return Err(MetricsError::LengthMismatch { truth: correct_a.len(), pred: correct_b.len() });
    }
    let b = correct_a.iter().zip(correct_b).filter(|(a, b)| **a && !**b).count() as u64;
    let c = correct_a.iter().zip(correct_b).filter(|(a, b)| !**a && **b).count() as u64;
    Ok(mcnemar_from_counts(b, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_vs_fifteen() {
        // 2 * (1 + 20 + 190 + 1140 + 4845 + 15504) / 2^20
        let r = mcnemar_from_counts(5, 15);
        assert_eq!(r.method, McNemarMethod::ExactBinomial);
        assert!((r.p_value - 43400.0 / 1048576.0).abs() < 1e-15);
        assert!((r.p_value - 0.0414).abs() < 1e-4);
    }

    #[test]
    fn no_discordance() {
        let same = [true, false, true];
        let r = mcnemar(&same, &same).unwrap();
        assert_eq!((r.b, r.c, r.p_value, r.statistic), (0, 0, 1.0, 0.0));
        assert!(r.note.is_some());
    }

    #[test]
    fn corrected_chi_square() {
        let r = mcnemar_from_counts(40, 60);
        assert_eq!(r.method, McNemarMethod::ChiSquareCorrected);
        assert!((r.statistic - 3.61).abs() < 1e-12);
        assert!((r.p_value - 0.0574).abs() < 1e-4);
    }

    #[test]
    fn cutoff_switches_method() {
        assert_eq!(mcnemar_from_counts(12, 12).method, McNemarMethod::ExactBinomial);
        assert_eq!(mcnemar_from_counts(12, 13).method, McNemarMethod::ChiSquareCorrected);
        assert_eq!(mcnemar_from_counts(13, 13).p_value, 1.0);
    }

    #[test]
    fn counts_from_pairs() {
        let a = [true, true, false, false, true];
        let b = [false, true, true, true, true];
        let r = mcnemar(&a, &b).unwrap();
        assert_eq!((r.b, r.c), (1, 2));
        assert!(mcnemar(&a, &b[..2]).is_err());
    }

    #[test]
    fn large_n_log_space_is_a_probability() {
        let p = exact_binomial_p(1500, 1600);
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(exact_binomial_p(2000, 2000), 1.0);
    }
}
