//! Normal tail probabilities, Bonferroni selection and Kolmogorov-Smirnov
//! goodness of fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    Upper,
    #[default]
    Two,
}

/// Standard normal CDF, `0.5 * erfc(-x / sqrt 2)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_pvalue(statistic: f64, sided: Sided) -> Result<f64> {
    if !statistic.is_finite() {
        return Err(Error::NonFinite(format!("test statistic {statistic}")));
    }
    Ok(match sided {
        Sided::Upper => normal_sf(statistic),
        Sided::Two => (2.0 * normal_sf(statistic.abs())).min(1.0),
    })
}

/// Rejects hypothesis `j` iff `pvalues[j] <= alpha / p`.
pub fn bonferroni_select(pvalues: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if pvalues.is_empty() {
        return Err(Error::InvalidArgument("no p-values to select from".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(bad) = pvalues.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("p-value {bad} outside (0, 1]")));
    }
    let cutoff = alpha / pvalues.len() as f64;
    Ok(pvalues.iter().map(|&p| p <= cutoff).collect())
}

/// Result of a one-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

/// One-sample KS test of `sample` against a continuous CDF.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KS sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult {
        statistic: d,
        pvalue: kolmogorov_sf(lambda),
    })
}

pub fn ks_test_normal(sample: &[f64]) -> Result<KsResult> {
    ks_test(sample, normal_cdf)
}

pub fn ks_test_uniform(sample: &[f64]) -> Result<KsResult> {
    ks_test(sample, |u| u.clamp(0.0, 1.0))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi theta form, converges fast for small arguments.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let odd = (2 * k - 1) as f64;
            cdf += (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Binomial Monte Carlo standard error of a proportion.
pub fn binomial_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn upper_tail_at_zero_is_half() {
        assert_eq!(normal_pvalue(0.0, Sided::Upper).unwrap(), 0.5);
    }

    #[test]
    fn upper_tail_at_standard_quantile() {
        let p = normal_pvalue(1.6449, Sided::Upper).unwrap();
        assert!((p - 0.05).abs() < 1e-4, "{p}");
    }

    #[test]
    fn two_sided_is_symmetric() {
        let a = normal_pvalue(-1.0, Sided::Two).unwrap();
        let b = normal_pvalue(1.0, Sided::Two).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.317_310_507_862_914_1).abs() < 1e-12);
    }

    #[test]
    fn cdf_matches_reference_values() {
        // Values from a high-precision table.
        let cases = [
            (-3.0, 0.001_349_898_031_630_094_6),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (2.326_347_874_040_841, 0.99),
        ];
        for (x, want) in cases {
            assert!((normal_cdf(x) - want).abs() < 1e-12, "x={x}");
        }
        assert!((normal_sf(8.0) - 6.220_960_574_271_785e-16).abs() < 1e-25);
    }

    #[test]
    fn non_finite_statistic_is_rejected() {
        assert!(normal_pvalue(f64::NAN, Sided::Upper).is_err());
        assert!(normal_pvalue(f64::INFINITY, Sided::Two).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni_select(&[0.0001, 0.5], 0.05).unwrap(), vec![true, false]);
        assert_eq!(bonferroni_select(&[1.0; 7], 0.5).unwrap(), vec![false; 7]);
        assert!(bonferroni_select(&[], 0.05).is_err());
        assert!(bonferroni_select(&[0.1], 1.1).is_err());
        assert!(bonferroni_select(&[0.0], 0.05).is_err());
    }

    #[test]
    fn bonferroni_controls_fwer_under_uniform_nulls() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let reps = 400;
        let p = 50;
        let mut hits = 0;
        for _ in 0..reps {
            let ps: Vec<f64> = (0..p).map(|_| 1.0 - rng.random::<f64>()).collect();
            if bonferroni_select(&ps, 0.05).unwrap().iter().any(|&r| r) {
                hits += 1;
            }
        }
        let rate = hits as f64 / reps as f64;
        assert!(rate <= 0.05 + 2.0 * binomial_se(0.05, reps), "{rate}");
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q_KS(1.36) ~ 0.0505 and Q_KS(1.628) ~ 0.0100.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
        // The two series agree where they meet.
        assert!((kolmogorov_sf(0.999_999) - kolmogorov_sf(1.000_001)).abs() < 1e-5);
    }

    #[test]
    fn ks_accepts_normal_sample() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_test_normal(&xs).unwrap().pvalue > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.3).collect();
        assert!(ks_test_normal(&shifted).unwrap().pvalue < 1e-6);
    }

    proptest! {
        #[test]
        fn bonferroni_is_monotone(
            ps in proptest::collection::vec(1e-6f64..=1.0, 1..20),
            idx in 0usize..20,
            factor in 0.0f64..1.0,
        ) {
            let idx = idx % ps.len();
            let before = bonferroni_select(&ps, 0.05).unwrap();
            let mut lowered = ps.clone();
            lowered[idx] = (lowered[idx] * factor).max(1e-12);
            let after = bonferroni_select(&lowered, 0.05).unwrap();
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(!b || *a);
            }
        }
    }
}
