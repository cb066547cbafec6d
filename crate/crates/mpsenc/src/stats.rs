//! KL divergence and one-sample Kolmogorov-Smirnov tests for encoded densities.

use serde::{Deserialize, Serialize};

use crate::funcspace::DistributionSpec;
use crate::{Error, Result};

/// Probabilities below this are replaced by it inside the logarithm.
pub const Q_FLOOR: f64 = 1e-300;

/// Result of [`kl_divergence`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    /// Natural-log divergence.
    pub value: f64,
    /// Bins where `q` was below [`Q_FLOOR`] while `p > 0`.
    pub floored_bins: usize,
}

/// `Σ p_i ln(p_i/q_i)` over bins with `p_i > 0`.
///
/// `p` is the ideal distribution and `q` the encoded one.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<KlResult> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch(q.len(), p.len()));
    }
    let mut value = 0.0;
    let mut floored_bins = 0;
    for (&qi, &pi) in q.iter().zip(p) {
        if pi > 0.0 {
            let qf = if qi < Q_FLOOR {
                floored_bins += 1;
                Q_FLOOR
            } else {
                qi
            };
            value += pi * (pi / qf).ln();
        }
    }
    Ok(KlResult {
        value,
        floored_bins,
    })
}

/// Outcome of a one-sample KS test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form of the CDF converges fast for small λ.
        let a = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (a * m * m).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// KS statistic of `samples` against an arbitrary continuous CDF, with the
/// asymptotic p-value at `√n·D`.
pub fn ks_test_cdf(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Degenerate(
            "KS test needs at least one sample".into(),
        ));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

/// One-sample KS test against the truncated, renormalized CDF of `dist`.
pub fn ks_test(samples: &[f64], dist: &DistributionSpec) -> Result<KsResult> {
    ks_test_cdf(samples, |x| dist.truncated_cdf(x))
}

/// Statistical and structural summary of one encoding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Absent when the register is too large for dense amplitudes.
    #[serde(rename = "kl_divergence")]
    pub kl: Option<f64>,
    pub kl_log_base: String,
    pub kl_floored_bins: usize,
    pub ks_statistic: f64,
    #[serde(rename = "ks_test_p_value")]
    pub ks_pvalue: f64,
    pub n_samples: usize,
    pub fidelity: f64,
    pub depth: usize,
    #[serde(rename = "cnots")]
    pub cnot_count: usize,
}

impl ValidationReport {
    pub fn new(
        kl: Option<KlResult>,
        ks: KsResult,
        n_samples: usize,
        fidelity: f64,
        depth: usize,
        cnot_count: usize,
    ) -> Self {
        Self {
            kl: kl.map(|k| k.value),
            kl_log_base: "e".into(),
            kl_floored_bins: kl.map_or(0, |k| k.floored_bins),
            ks_statistic: ks.statistic,
            ks_pvalue: ks.p_value,
            n_samples,
            fidelity,
            depth,
            cnot_count,
        }
    }

    /// True when the KS test does not reject at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.ks_pvalue > alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let r = kl_divergence(&p, &p).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.floored_bins, 0);
    }

    #[test]
    fn kl_two_bin_closed_form() {
        let r = kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        let want = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert_relative_eq!(r.value, want, max_relative = 1e-15);
    }

    #[test]
    fn kl_counts_floored_bins_and_skips_empty_ideal_bins() {
        let r = kl_divergence(&[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0]).unwrap();
        assert_eq!(r.floored_bins, 1);
        assert_relative_eq!(
            r.value,
            0.5 * 0.5f64.ln() + 0.5 * (0.5 / Q_FLOOR).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn kl_rejects_length_mismatch() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn kolmogorov_tail_matches_tabulated_quantiles() {
        // Standard critical values of the limiting distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.2239) - 0.10).abs() < 1e-4);
        // Both series agree where they meet.
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(10.0) < 1e-80);
    }

    #[test]
    fn quantile_samples_give_small_statistic() {
        let dist = DistributionSpec::normal(0.5, 0.1, 1.0);
        let n = 400;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                bisect_quantile(&dist, u)
            })
            .collect();
        let r = ks_test(&xs, &dist).unwrap();
        assert!(r.statistic <= 0.5 / n as f64 + 1e-9, "D = {}", r.statistic);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn shifted_samples_are_rejected() {
        let dist = DistributionSpec::normal(0.5, 0.05, 1.0);
        let shifted = DistributionSpec::normal(0.65, 0.05, 1.0);
        let xs = draw(&shifted, 200, 3);
        let r = ks_test(&xs, &dist).unwrap();
        assert!(r.p_value < 1e-6, "p = {}", r.p_value);
    }

    #[test]
    fn empty_sample_is_an_error() {
        let dist = DistributionSpec::normal(0.5, 0.1, 1.0);
        assert!(ks_test(&[], &dist).is_err());
    }

    #[test]
    fn null_rejection_rate_is_near_nominal() {
        let dist = DistributionSpec::levy(1.0, 64.0);
        let reps = 200;
        let rejected = (0..reps)
            .filter(|&r| ks_test(&draw(&dist, 200, 1000 + r), &dist).unwrap().p_value < 0.05)
            .count();
        let frac = rejected as f64 / reps as f64;
        assert!((0.01..=0.12).contains(&frac), "rejection fraction {frac}");
    }

    #[test]
    fn report_json_uses_table_column_names() {
        let rep = ValidationReport::new(
            Some(KlResult {
                value: 1e-3,
                floored_bins: 0,
            }),
            KsResult {
                statistic: 0.05,
                p_value: 0.4,
            },
            200,
            0.999,
            25,
            17,
        );
        let js = serde_json::to_value(&rep).unwrap();
        for key in [
            "kl_divergence",
            "ks_test_p_value",
            "depth",
            "cnots",
            "kl_log_base",
        ] {
            assert!(js.get(key).is_some(), "missing {key}");
        }
        let back: ValidationReport = serde_json::from_value(js).unwrap();
        assert_eq!(back, rep);
        assert!(rep.passes(0.05));
    }

    fn bisect_quantile(dist: &DistributionSpec, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, dist.support_length);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dist.truncated_cdf(mid).unwrap() < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn draw(dist: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| bisect_quantile(dist, rng.random::<f64>()))
            .collect()
    }

    proptest! {
        #[test]
        fn gibbs_inequality(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40)) {
            let sp: f64 = raw.iter().map(|t| t.0).sum();
            let sq: f64 = raw.iter().map(|t| t.1).sum();
            prop_assume!(sp > 1e-6 && sq > 1e-6);
            let p: Vec<f64> = raw.iter().map(|t| t.0 / sp).collect();
            let q: Vec<f64> = raw.iter().map(|t| t.1 / sq).collect();
            prop_assert!(kl_divergence(&q, &p).unwrap().value >= -1e-12);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap().value, 0.0);
        }

        #[test]
        fn ks_statistic_and_pvalue_are_in_unit_interval(xs in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let dist = DistributionSpec::normal(0.5, 0.2, 1.0);
            let r = ks_test(&xs, &dist).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.statistic));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
