//! Asymptotic entanglement predictions for smooth functions.
//!
//! Everything is evaluated on the unit-rescaled function `F(u) = √L f(Lu)`,
//! so bond indices are shared with the grid and `g1`, `g2` scale as `L²`, `L⁴`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::funcspace::{DistKind, DistributionSpec, FunctionOracle};
use crate::mps::EntanglementProfile;
use crate::quad::integrate_complex;
use crate::C64;

/// Asymptotic window threshold: bonds with `g1/4^k` at or below this value
/// are deep enough in the smoothness-controlled regime for leading-order
/// comparisons.
pub const ASYMPTOTIC_MARGIN: f64 = 1e-2;

/// Gram entries `h_{n,m}` for `n, m ≤ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProducts {
    pub h: [[C64; 3]; 3],
}

/// Leading-order spectrum at one bond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub bond: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub purity: f64,
    /// Whether `g1/4^k < 1`, the condition for the expansion to make sense.
    pub in_regime: bool,
}

fn derivative(oracle: &FunctionOracle, n: usize, x: f64) -> C64 {
    match n {
        0 => oracle.eval(x),
        1 => oracle.deriv1(x),
        _ => oracle.deriv2(x),
    }
}

/// `h_{n,m} = ∫₀¹ F^{(n)}(u) conj(F^{(m)}(u)) du` for the unit-rescaled oracle.
pub fn inner_h(oracle: &FunctionOracle, support: f64, n: usize, m: usize) -> Result<C64> {
    if n > 2 || m > 2 {
        return Err(Error::Precondition(format!(
            "derivative orders must be <= 2, got ({n}, {m})"
        )));
    }
    let l = support;
    let integrand = |x: f64| derivative(oracle, n, x) * derivative(oracle, m, x).conj();
    // Coarse pass fixes the scale, then refine to ~1e-10 relative (absolute when small).
    let coarse = integrate_complex(integrand, 0.0, l, f64::INFINITY);
    let tol = 1e-11 * coarse.norm().max(1.0 / l.powi((n + m) as i32));
    let v = integrate_complex(integrand, 0.0, l, tol);
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Numerical(format!("h_({n},{m}) is not finite")));
    }
    Ok(v * l.powi((n + m) as i32))
}

/// All `h_{n,m}` for `n, m ≤ 2`.
pub fn inner_products(oracle: &FunctionOracle, support: f64) -> Result<InnerProducts> {
    let mut h = [[C64::new(0.0, 0.0); 3]; 3];
    for n in 0..3 {
        for m in n..3 {
            h[n][m] = inner_h(oracle, support, n, m)?;
            h[m][n] = h[n][m].conj();
        }
    }
    Ok(InnerProducts { h })
}

fn clamp_nonnegative(value: f64, scale: f64, what: &str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -1e-9 * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "{what} = {value:e} is negative beyond tolerance"
        )))
    }
}

impl InnerProducts {
    /// `⟨F′|P₀|F′⟩` of the normalized function.
    pub fn g1(&self) -> Result<f64> {
        let h00 = self.h[0][0].re;
        if !(h00 > 0.0) {
            return Err(Error::Degenerate("oracle has zero norm".into()));
        }
        let h11 = self.h[1][1].re / h00;
        let g = h11 - self.h[1][0].norm_sqr() / (h00 * h00);
        clamp_nonnegative(g, h11, "g1")
    }

    /// `⟨F″|P₁|F″⟩`: squared norm of `F″` after projecting out `span{F, F′}`.
    pub fn g2(&self) -> Result<f64> {
        let h = &self.h;
        let h00 = h[0][0].re;
        if !(h00 > 0.0) {
            return Err(Error::Degenerate("oracle has zero norm".into()));
        }
        // Gram matrix G_ij = ⟨e_i|e_j⟩ = h_{j,i} over e = (F, F′), target F″.
        let g = nalgebra::Matrix2::new(h[0][0], h[1][0], h[0][1], h[1][1]);
        let w = nalgebra::Vector2::new(h[2][0], h[2][1]);
        let eig = g.symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut proj = 0.0;
        for i in 0..2 {
            let lam = eig.eigenvalues[i];
            if lam > 1e-12 * top {
                let v = eig.eigenvectors.column(i);
                let c = v.dotc(&w);
                proj += c.norm_sqr() / lam;
            }
        }
        let h22 = h[2][2].re;
        clamp_nonnegative((h22 - proj) / h00, h22 / h00, "g2")
    }
}

/// `g1` of an oracle on `[0, L]`.
pub fn g1(oracle: &FunctionOracle, support: f64) -> Result<f64> {
    let h00 = inner_h(oracle, support, 0, 0)?;
    let h11 = inner_h(oracle, support, 1, 1)?;
    let h10 = inner_h(oracle, support, 1, 0)?;
    let mut ip = InnerProducts {
        h: [[C64::new(0.0, 0.0); 3]; 3],
    };
    ip.h[0][0] = h00;
    ip.h[1][1] = h11;
    ip.h[1][0] = h10;
    ip.h[0][1] = h10.conj();
    ip.g1()
}

/// `g2` of an oracle on `[0, L]`.
pub fn g2(oracle: &FunctionOracle, support: f64) -> Result<f64> {
    inner_products(oracle, support)?.g2()
}

/// Leading-order `Λ₀, Λ₁, Λ₂, p_k` at bond `k`.
pub fn predicted_spectrum(g1: f64, g2: f64, k: usize) -> AsymptoticPrediction {
    let q = 4f64.powi(k as i32);
    AsymptoticPrediction {
        bond: k,
        lambda0: 1.0 - g1 / (24.0 * q),
        lambda1: (g1 / 12.0).sqrt() / 2f64.powi(k as i32),
        lambda2: (g2 / (720.0 * q * q)).sqrt(),
        purity: 1.0 - g1 / (6.0 * q),
        in_regime: g1 / q < 1.0,
    }
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `det H_{m+1} / det H_m` for Hilbert matrices `H_{nl} = 1/(n+l+1)`, as a
/// reduced fraction `(numerator, denominator)`; equals `(m!)⁴ / ((2m)! (2m+1)!)`.
pub fn hilbert_det_ratio(m: u32) -> (u128, u128) {
    assert!(m <= 10, "ratio overflows u128 beyond m = 10");
    let f = factorial(m);
    let num = f * f * f * f;
    let den = factorial(2 * m) * factorial(2 * m + 1);
    let g = gcd(num, den);
    (num / g, den / g)
}

/// Eigenvalue `ρ_{k,m} = g_m / ((m!)² 4^{km}) · det H_{m+1}/det H_m`.
pub fn eigenvalue_scaling(gm: f64, m: u32, k: usize) -> f64 {
    assert!(m >= 1, "order must be at least 1");
    let (num, den) = hilbert_det_ratio(m);
    let f = factorial(m) as f64;
    gm / (f * f * 4f64.powi((k as i32) * m as i32)) * (num as f64 / den as f64)
}

/// Closed-form `g1` of the truncated normal (centred at `L/2`), log-normal and
/// Lévy (location 0) square-root densities.
pub fn closed_form_g1(dist: &DistributionSpec) -> Result<f64> {
    dist.validate()?;
    let l = dist.support_length;
    let s = dist.scale;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    match dist.kind {
        DistKind::Normal => {
            if (dist.mu - 0.5 * l).abs() > 1e-12 * l {
                return Err(Error::Unsupported(
                    "closed-form normal g1 needs mu = L/2".into(),
                ));
            }
            let y = l * l / (8.0 * s * s);
            // Γ(1/2) − Γ(1/2, y)
            let lower = sqrt_pi * (1.0 - gamma_ur(0.5, y));
            Ok(l * l / (4.0 * s * s) * (1.0 - (l * l / (2.0 * s * s)).sqrt() * (-y).exp() / lower))
        }
        DistKind::LogNormal => {
            let mu = dist.mu;
            let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let cdf = |z: f64| 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
            let zl = (l.ln() - mu) / s;
            let a = zl + 2.0 * s;
            let big =
                l * l * (-2.0 * mu + 2.0 * s * s).exp() * ((1.0 + s * s) * cdf(a) - zl * phi(a))
                    / (4.0 * s * s * cdf(zl));
            let boundary = phi(zl) * phi(zl) / (4.0 * s * s * cdf(zl) * cdf(zl));
            Ok(big - boundary)
        }
        DistKind::Levy => {
            if dist.mu != 0.0 {
                return Err(Error::Unsupported(
                    "closed-form Levy g1 needs location 0".into(),
                ));
            }
            let c = s;
            let y = c / (2.0 * l);
            // Γ(1/2, y)
            let upper = sqrt_pi * gamma_ur(0.5, y);
            let poly = 21.0 / 16.0 * y.sqrt()
                + 7.0 / 8.0 * y.powf(1.5)
                + 1.0 / 8.0 * y.powf(2.5)
                + 0.25 * y.powf(3.5);
            let l2c2 = l * l / (c * c);
            Ok(21.0 * l2c2 / 8.0 + 4.0 * l2c2 * (-y).exp() / upper * poly
                - l2c2 * y.powi(3) * (-2.0 * y).exp() / (upper * upper))
        }
        other => Err(Error::Unsupported(format!(
            "no closed-form g1 for {other:?}"
        ))),
    }
}

/// Estimated infidelity of a single exact layer truncated to `χ = 2`:
/// `Σ_{k ≥ k₀} g2/(720·16^k) = g2 / (720·15·16^{k₀−1})` with `k₀ = max(m_first, window_start)`.
pub fn one_layer_infidelity_estimate(
    g2: f64,
    m_first: usize,
    window_start: Option<usize>,
) -> Result<f64> {
    if m_first < 2 {
        return Err(Error::Precondition(format!(
            "first truncated bond must be >= 2, got {m_first}"
        )));
    }
    let k0 = m_first.max(window_start.unwrap_or(0));
    Ok(g2 / (720.0 * 15.0 * 16f64.powi(k0 as i32 - 1)))
}

/// Default localization window start `⌈log₂(L / 2σ_eff)⌉`, clamped to at least 1.
pub fn window_start(dist: &DistributionSpec) -> usize {
    let v = (dist.support_length / (2.0 * dist.effective_scale()))
        .log2()
        .ceil();
    if v.is_finite() && v >= 1.0 {
        v as usize
    } else {
        1
    }
}

/// Smallest bond with `g1/4^k < threshold` (at least 1).
pub fn first_bond_below(g1: f64, threshold: f64) -> usize {
    let mut k = 1usize;
    while g1 / 4f64.powi(k as i32) >= threshold && k < 200 {
        k += 1;
    }
    k
}

/// Bond range `[k_lo, k_hi]` where leading-order predictions are compared:
/// `g1/4^k ≤` [`ASYMPTOTIC_MARGIN`] from below, and the last two bonds
/// excluded because the finite grid shifts their spectra by `O(4^{k−N})`.
pub fn asymptotic_window(g1: f64, n_qubits: usize) -> (usize, usize) {
    let lo = first_bond_below(g1, ASYMPTOTIC_MARGIN * (1.0 + 1e-12));
    (lo, n_qubits.saturating_sub(3).max(1))
}

/// Outcome of [`entropy_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBoundReport {
    pub pass: bool,
    /// Smallest relative slack `(C k/4^k − S_k)/(C k/4^k)` over the window.
    pub margin: f64,
    pub constant: f64,
    pub first_bond: usize,
}

/// Checks `S_k ≤ C·k/4^k` for bonds with `g1/4^k < 1`, with `C` fitted at the
/// first such bond.
pub fn entropy_bound_check(profile: &EntanglementProfile, g1: f64) -> EntropyBoundReport {
    let n_bonds = profile.n_bonds();
    let start = first_bond_below(g1, 1.0);
    if start + 1 > n_bonds {
        return EntropyBoundReport {
            pass: true,
            margin: f64::INFINITY,
            constant: 0.0,
            first_bond: start,
        };
    }
    let bound = |k: usize| k as f64 / 4f64.powi(k as i32);
    let constant = profile.entropies[start - 1] / bound(start);
    let mut margin = f64::INFINITY;
    for k in start + 1..=n_bonds {
        let b = constant * bound(k);
        let s = profile.entropies[k - 1];
        let m = if b > 0.0 {
            (b - s) / b
        } else if s <= 1e-14 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        margin = margin.min(m);
    }
    EntropyBoundReport {
        pass: margin >= -1e-9,
        margin,
        constant,
        first_bond: start,
    }
}

/// Prediction table with columns `bond,lambda0,lambda1,lambda2,purity,in_regime`.
pub fn write_prediction_csv<W: Write>(w: W, g1: f64, g2: f64, n_bonds: usize) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "bond",
        "lambda0",
        "lambda1",
        "lambda2",
        "purity",
        "in_regime",
    ])?;
    for k in 1..=n_bonds {
        let p = predicted_spectrum(g1, g2, k);
        wr.write_record([
            k.to_string(),
            format!("{:.17e}", p.lambda0),
            format!("{:.17e}", p.lambda1),
            format!("{:.17e}", p.lambda2),
            format!("{:.17e}", p.purity),
            p.in_regime.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{discretize, sqrt_pdf_oracle, Grid};
    use crate::mps::mps_from_vector;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine() -> FunctionOracle {
        FunctionOracle::real(1.0, |x| (PI * x).sin())
            .with_real_derivatives(|x| PI * (PI * x).cos(), |x| -PI * PI * (PI * x).sin())
    }

    #[test]
    fn sine_g1_is_pi_squared() {
        assert_relative_eq!(g1(&sine(), 1.0).unwrap(), PI * PI, max_relative = 1e-10);
        // Without analytic derivatives the stencils still land close.
        let plain = FunctionOracle::real(1.0, |x| (PI * x).sin());
        assert_relative_eq!(g1(&plain, 1.0).unwrap(), PI * PI, max_relative = 1e-7);
    }

    #[test]
    fn normalized_oracle_has_unit_h00() {
        let f = sqrt_pdf_oracle(&DistributionSpec::normal(0.5, 0.1, 1.0)).unwrap();
        assert_relative_eq!(inner_h(&f, 1.0, 0, 0).unwrap().re, 1.0, epsilon = 1e-8);
        let f = sqrt_pdf_oracle(&DistributionSpec::levy(1.0, 32.0)).unwrap();
        assert_relative_eq!(inner_h(&f, 32.0, 0, 0).unwrap().re, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_g1_and_g2() {
        for sigma in [0.02, 0.05] {
            let f = FunctionOracle::real(1.0, move |x| {
                (-(x - 0.5f64).powi(2) / (4.0 * sigma * sigma)).exp()
            });
            assert_relative_eq!(
                g1(&f, 1.0).unwrap(),
                1.0 / (4.0 * sigma * sigma),
                max_relative = 1e-2
            );
            let f = sqrt_pdf_oracle(&DistributionSpec::normal(0.5, sigma, 1.0)).unwrap();
            assert_relative_eq!(
                g2(&f, 1.0).unwrap(),
                1.0 / (8.0 * sigma.powi(4)),
                max_relative = 1e-2
            );
        }
    }

    #[test]
    fn exponentials_have_vanishing_g() {
        for b in [-3.0, 0.5, 2.0] {
            let f = FunctionOracle::real(1.0, move |x| 1.7 * (b * x).exp()).with_real_derivatives(
                move |x| 1.7 * b * (b * x).exp(),
                move |x| 1.7 * b * b * (b * x).exp(),
            );
            assert!(g1(&f, 1.0).unwrap() < 1e-9);
            assert!(g2(&f, 1.0).unwrap() < 1e-9);
        }
        let lin =
            FunctionOracle::real(1.0, |x| 1.0 + 2.0 * x).with_real_derivatives(|_| 2.0, |_| 0.0);
        assert_relative_eq!(g1(&lin, 1.0).unwrap(), 12.0 / 169.0, max_relative = 1e-10);
        assert!(g2(&lin, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn prediction_examples() {
        let p = predicted_spectrum(PI * PI, 0.0, 8);
        assert_relative_eq!(
            p.lambda1,
            (PI * PI / 12.0).sqrt() / 256.0,
            max_relative = 1e-15
        );
        assert!(p.in_regime);
        let z = predicted_spectrum(0.0, 0.0, 3);
        assert_eq!((z.lambda1, z.purity), (0.0, 1.0));
        assert!(!predicted_spectrum(100.0, 0.0, 2).in_regime);
    }

    #[test]
    fn prediction_matches_svd_for_normal() {
        let d = DistributionSpec::normal(0.5, 0.125, 1.0);
        let f = sqrt_pdf_oracle(&d).unwrap();
        let gg = g1(&f, 1.0).unwrap();
        let v = discretize(&f, &Grid::new(20, 1.0).unwrap()).unwrap();
        let m = mps_from_vector(&v, 64, 0.0).unwrap();
        let lam = m.schmidt().unwrap()[9][1];
        assert_relative_eq!(
            lam,
            predicted_spectrum(gg, 0.0, 10).lambda1,
            max_relative = 0.05
        );
    }

    #[test]
    fn hilbert_ratios() {
        assert_eq!(hilbert_det_ratio(1), (1, 12));
        assert_eq!(hilbert_det_ratio(2), (1, 180));
        // Direct determinants of the s×s Hilbert matrices.
        let det = |s: usize| {
            nalgebra::DMatrix::from_fn(s, s, |n, l| 1.0 / (n + l + 1) as f64).determinant()
        };
        for m in 1..=4u32 {
            let (a, b) = hilbert_det_ratio(m);
            let direct = det(m as usize + 1) / det(m as usize);
            assert_relative_eq!(a as f64 / b as f64, direct, max_relative = 1e-9);
        }
        assert_relative_eq!(
            eigenvalue_scaling(3.0, 1, 2),
            3.0 / (12.0 * 16.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            eigenvalue_scaling(5.0, 2, 3),
            5.0 / (720.0 * 4096.0),
            max_relative = 1e-15
        );
        assert_eq!(eigenvalue_scaling(0.0, 2, 3), 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            DistributionSpec::normal(0.5, 0.125, 1.0),
            DistributionSpec::normal(4.0, 3.0, 8.0),
            DistributionSpec::log_normal(0.0, 0.5, 4.0),
            DistributionSpec::log_normal(1.0, 1.2, 16.0),
            DistributionSpec::levy(1.0, 32.0),
            DistributionSpec::levy(0.15, 1.0),
        ];
        for d in cases {
            let q = g1(&sqrt_pdf_oracle(&d).unwrap(), d.support_length).unwrap();
            let cf = closed_form_g1(&d).unwrap();
            assert_relative_eq!(cf, q, max_relative = 1e-6);
        }
        let d = DistributionSpec::levy(2.0, 1e6);
        assert_relative_eq!(
            closed_form_g1(&d).unwrap(),
            21.0 * 1e12 / 32.0,
            max_relative = 1e-2
        );
        let d = DistributionSpec::normal(0.5, 0.01, 1.0);
        assert_relative_eq!(closed_form_g1(&d).unwrap(), 2500.0, max_relative = 1e-12);
        assert!(closed_form_g1(&DistributionSpec::normal(0.2, 0.1, 1.0)).is_err());
        assert!(closed_form_g1(&DistributionSpec::gamma(2.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn infidelity_estimate() {
        assert_eq!(one_layer_infidelity_estimate(0.0, 2, None).unwrap(), 0.0);
        let a = one_layer_infidelity_estimate(10.0, 2, Some(3)).unwrap();
        let b = one_layer_infidelity_estimate(10.0, 2, Some(5)).unwrap();
        assert_relative_eq!(a / b, 256.0, max_relative = 1e-14);
        let direct: f64 = (3..200).map(|k| 10.0 / (720.0 * 16f64.powi(k))).sum();
        assert_relative_eq!(a, direct, max_relative = 1e-12);
        assert!(one_layer_infidelity_estimate(1.0, 1, None).is_err());
    }

    #[test]
    fn windows() {
        assert_eq!(window_start(&DistributionSpec::normal(8.0, 2.0, 16.0)), 2);
        assert_eq!(
            window_start(&DistributionSpec::normal(128.0, 2.0, 256.0)),
            6
        );
        assert_eq!(window_start(&DistributionSpec::levy(4.0, 1.0)), 1);
        assert_eq!(asymptotic_window(16.0, 20), (6, 17));
    }

    #[test]
    fn entropy_bounds() {
        let product = EntanglementProfile::from_spectra(vec![vec![1.0]; 9]);
        assert!(entropy_bound_check(&product, 0.0).pass);

        let v = discretize(&sine(), &Grid::new(16, 1.0).unwrap()).unwrap();
        let p = mps_from_vector(&v, 64, 0.0)
            .unwrap()
            .entanglement_profile()
            .unwrap();
        assert!(entropy_bound_check(&p, PI * PI).pass);

        let step = FunctionOracle::real(1.0, |x| if x < 0.3 { 1.0 } else { 0.0 });
        let v = discretize(&step, &Grid::new(16, 1.0).unwrap()).unwrap();
        let p = mps_from_vector(&v, 64, 0.0)
            .unwrap()
            .entanglement_profile()
            .unwrap();
        let gs = g1(
            &FunctionOracle::real(1.0, |x| 1.0 / (1.0 + (-(x - 0.3) * 1e4).exp())),
            1.0,
        )
        .unwrap();
        assert!(!entropy_bound_check(&p, gs).pass);
        assert!(!entropy_bound_check(&p, 1.0).pass);
    }

    #[test]
    fn residual_order_before_grid_floor() {
        // Remainder shrinks fast until it reaches the O(g1/4^N) grid correction.
        let d = DistributionSpec::normal(0.5, 0.125, 1.0);
        let f = sqrt_pdf_oracle(&d).unwrap();
        let gg = closed_form_g1(&d).unwrap();
        let n = 18;
        let v = discretize(&f, &Grid::new(n, 1.0).unwrap()).unwrap();
        let p = mps_from_vector(&v, 64, 0.0)
            .unwrap()
            .entanglement_profile()
            .unwrap();
        let r = |k: usize| (p.purities[k - 1] - predicted_spectrum(gg, 0.0, k).purity).abs();
        let floor = gg / (6.0 * 4f64.powi(n as i32));
        let mut k = window_start(&d) + 2;
        while r(k + 1) > 100.0 * floor {
            assert!(r(k + 1) / r(k) <= 0.2, "k={k}");
            k += 1;
        }
        assert!(k >= 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn g1_nonnegative_for_smooth_functions(a in -2.0f64..2.0, b in -2.0f64..2.0, w in 0.5f64..6.0) {
            let f = FunctionOracle::real(1.0, move |x| 1.5 + a * (w * x).sin() + b * x * x);
            let g = g1(&f, 1.0);
            prop_assume!(g.is_ok());
            prop_assert!(g.unwrap() >= 0.0);
        }
    }
}
