//! Binary grids, function oracles and the named distributions used as encoding targets.

use std::f64::consts::PI;
use std::sync::Arc;

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::C64;

/// Largest qubit count for which dense vectors are materialized.
pub const DENSE_MAX_QUBITS: usize = 28;

/// Dyadic grid on `[0, L)` with `2^N` left endpoints.
///
/// Qubit 0 carries the most significant bit, so flipping it moves a point by `L/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_qubits: usize,
    support_length: f64,
}

impl Grid {
    pub fn new(n_qubits: usize, support_length: f64) -> Result<Self> {
        if !(1..=64).contains(&n_qubits) {
            return Err(Error::Precondition(format!(
                "grid needs 1 <= N <= 64, got {n_qubits}"
            )));
        }
        if !(support_length.is_finite() && support_length > 0.0) {
            return Err(Error::Precondition(format!(
                "support length must be positive, got {support_length}"
            )));
        }
        Ok(Self {
            n_qubits,
            support_length,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn support_length(&self) -> f64 {
        self.support_length
    }

    pub fn step(&self) -> f64 {
        self.support_length * 2f64.powi(-(self.n_qubits as i32))
    }

    /// Number of grid points; only meaningful for `N < 64`.
    pub fn len(&self) -> u64 {
        1u64 << self.n_qubits.min(63)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of the grid point with the given big-endian index.
    pub fn point(&self, index: u64) -> f64 {
        index as f64 * self.step()
    }

    /// Bits `σ_1 … σ_N` of an index, most significant first.
    pub fn index_to_bits(&self, index: u64) -> Vec<u8> {
        (0..self.n_qubits)
            .map(|q| ((index >> (self.n_qubits - 1 - q)) & 1) as u8)
            .collect()
    }

    pub fn bits_to_index(&self, bits: &[u8]) -> u64 {
        bits.iter()
            .fold(0u64, |acc, &b| (acc << 1) | (b as u64 & 1))
    }

    /// Position `L · Σ σ_i 2^{-i}` of a bitstring.
    pub fn bits_to_point(&self, bits: &[u8]) -> f64 {
        let mut x = 0.0;
        let mut w = 0.5 * self.support_length;
        for &b in bits {
            if b != 0 {
                x += w;
            }
            w *= 0.5;
        }
        x
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Black-box function on `[0, L]` with optional analytic derivatives.
///
/// Missing derivatives fall back to 5-point central stencils, which may sample
/// the function up to two stencil steps outside the support.
#[derive(Clone)]
pub struct FunctionOracle {
    support: f64,
    eval: ScalarFn,
    deriv1: Option<ScalarFn>,
    deriv2: Option<ScalarFn>,
    is_real: bool,
}

impl std::fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("support", &self.support)
            .field("is_real", &self.is_real)
            .field("deriv1", &self.deriv1.is_some())
            .field("deriv2", &self.deriv2.is_some())
            .finish()
    }
}

impl FunctionOracle {
    pub fn new(support: f64, f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        Self {
            support,
            eval: Arc::new(f),
            deriv1: None,
            deriv2: None,
            is_real: false,
        }
    }

    /// Real-valued oracle; the imaginary part is identically zero.
    pub fn real(support: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            support,
            eval: Arc::new(move |x| C64::new(f(x), 0.0)),
            deriv1: None,
            deriv2: None,
            is_real: true,
        }
    }

    pub fn with_real_derivatives(
        mut self,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.deriv1 = Some(Arc::new(move |x| C64::new(d1(x), 0.0)));
        self.deriv2 = Some(Arc::new(move |x| C64::new(d2(x), 0.0)));
        self
    }

    pub fn with_derivatives(
        mut self,
        d1: impl Fn(f64) -> C64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        self.deriv1 = Some(Arc::new(d1));
        self.deriv2 = Some(Arc::new(d2));
        self
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.deriv1.is_some() && self.deriv2.is_some()
    }

    pub fn eval(&self, x: f64) -> C64 {
        (self.eval)(x)
    }

    pub fn deriv1(&self, x: f64) -> C64 {
        match &self.deriv1 {
            Some(d) => d(x),
            None => {
                let h = self.support * f64::EPSILON.cbrt();
                let f = |t: f64| self.eval(t);
                (f(x - 2.0 * h) - f(x + 2.0 * h) + (f(x + h) - f(x - h)) * 8.0) / (12.0 * h)
            }
        }
    }

    pub fn deriv2(&self, x: f64) -> C64 {
        match &self.deriv2 {
            Some(d) => d(x),
            None => {
                let h = self.support * f64::EPSILON.powf(0.25);
                let f = |t: f64| self.eval(t);
                (-f(x - 2.0 * h) - f(x + 2.0 * h) + (f(x + h) + f(x - h)) * 16.0 - f(x) * 30.0)
                    / (12.0 * h * h)
            }
        }
    }
}

/// Evaluates the oracle on every grid point and rescales to unit Euclidean norm.
///
/// Entry `i` corresponds to the bitstring of `i` read big-endian.
pub fn discretize(oracle: &FunctionOracle, grid: &Grid) -> Result<Vec<C64>> {
    let n = grid.n_qubits();
    if n > DENSE_MAX_QUBITS {
        return Err(Error::SizeLimit(format!(
            "dense discretization limited to {DENSE_MAX_QUBITS} qubits, got {n}"
        )));
    }
    let mut v = Vec::with_capacity(1usize << n);
    for i in 0..(1u64 << n) {
        let x = grid.point(i);
        let y = oracle.eval(x);
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::NonFiniteEvaluation { x });
        }
        v.push(y);
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(
            "oracle vanishes on every grid point".into(),
        ));
    }
    for z in &mut v {
        *z /= norm;
    }
    Ok(v)
}

/// Named target densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Normal,
    LogNormal,
    Levy,
    Gamma,
    /// Density proportional to `sin²(πx/L)`, whose square root is `sin(πx/L)`.
    SinTest,
    /// Exponential density with mean `scale`; its square root has MPS rank one.
    ExpTest,
    Constant,
}

fn default_shape() -> f64 {
    1.0
}

/// Parameters of a (truncated) density on `[0, L]`.
///
/// `mu` is the location for normal and Lévy and the log-mean for log-normal;
/// `scale` is σ, c, θ or the exponential mean; `shape` is the Gamma shape k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: DistKind,
    #[serde(default)]
    pub mu: f64,
    pub scale: f64,
    #[serde(default = "default_shape")]
    pub shape: f64,
    #[serde(rename = "L")]
    pub support_length: f64,
}

impl DistributionSpec {
    pub fn new(kind: DistKind, mu: f64, scale: f64, shape: f64, support_length: f64) -> Self {
        Self {
            kind,
            mu,
            scale,
            shape,
            support_length,
        }
    }

    pub fn normal(mu: f64, sigma: f64, support_length: f64) -> Self {
        Self::new(DistKind::Normal, mu, sigma, 1.0, support_length)
    }

    pub fn log_normal(mu: f64, sigma: f64, support_length: f64) -> Self {
        Self::new(DistKind::LogNormal, mu, sigma, 1.0, support_length)
    }

    pub fn levy(c: f64, support_length: f64) -> Self {
        Self::new(DistKind::Levy, 0.0, c, 1.0, support_length)
    }

    pub fn gamma(shape: f64, theta: f64, support_length: f64) -> Self {
        Self::new(DistKind::Gamma, 0.0, theta, shape, support_length)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.scale) {
            return Err(Error::Precondition(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !ok(self.support_length) {
            return Err(Error::Precondition(format!(
                "support length must be positive, got {}",
                self.support_length
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::Precondition("location must be finite".into()));
        }
        if self.kind == DistKind::Gamma && !ok(self.shape) {
            return Err(Error::Precondition(format!(
                "gamma shape must be positive, got {}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Untruncated density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (mu, s, l) = (self.mu, self.scale, self.support_length);
        match self.kind {
            DistKind::Normal => {
                let z = (x - mu) / s;
                (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt())
            }
            DistKind::LogNormal => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu) / s;
                (-0.5 * z * z).exp() / (x * s * (2.0 * PI).sqrt())
            }
            DistKind::Levy => {
                let y = x - mu;
                if y <= 0.0 {
                    return 0.0;
                }
                (s / (2.0 * PI)).sqrt() * (-s / (2.0 * y)).exp() / (y * y.sqrt())
            }
            DistKind::Gamma => {
                let k = self.shape;
                if x < 0.0 {
                    return 0.0;
                }
                if x == 0.0 {
                    return if k < 1.0 {
                        f64::INFINITY
                    } else if k == 1.0 {
                        1.0 / s
                    } else {
                        0.0
                    };
                }
                ((k - 1.0) * x.ln() - x / s - ln_gamma(k) - k * s.ln()).exp()
            }
            DistKind::SinTest => {
                let t = (PI * x / l).sin();
                2.0 / l * t * t
            }
            DistKind::ExpTest => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x / s).exp() / s
                }
            }
            DistKind::Constant => {
                if (0.0..=l).contains(&x) {
                    1.0 / l
                } else {
                    0.0
                }
            }
        }
    }

    fn cdf_unchecked(&self, x: f64) -> f64 {
        let (mu, s, l) = (self.mu, self.scale, self.support_length);
        match self.kind {
            DistKind::Normal => 0.5 * erfc(-(x - mu) / (s * std::f64::consts::SQRT_2)),
            DistKind::LogNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - mu) / (s * std::f64::consts::SQRT_2))
                }
            }
            DistKind::Levy => {
                let y = x - mu;
                if y <= 0.0 {
                    0.0
                } else {
                    erfc((s / (2.0 * y)).sqrt())
                }
            }
            DistKind::Gamma => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(self.shape, x / s)
                }
            }
            DistKind::SinTest => x / l - (2.0 * PI * x / l).sin() / (2.0 * PI),
            DistKind::ExpTest => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / s).exp_m1()
                }
            }
            DistKind::Constant => (x / l).clamp(0.0, 1.0),
        }
    }

    /// Mass `cdf(L) − cdf(0)` retained by truncation to the support.
    pub fn truncation_mass(&self) -> f64 {
        self.cdf_unchecked(self.support_length) - self.cdf_unchecked(0.0)
    }

    /// Cdf of the truncated, renormalized law on `[0, L]`.
    pub fn truncated_cdf(&self, x: f64) -> Result<f64> {
        let c = distribution_cdf(self, x)?;
        let r2 = self.truncation_mass();
        Ok(((c - self.cdf_unchecked(0.0)) / r2).clamp(0.0, 1.0))
    }

    /// Characteristic width used for the localization window (σ, c or θ·√k).
    pub fn effective_scale(&self) -> f64 {
        match self.kind {
            DistKind::Gamma => self.scale * self.shape.sqrt(),
            _ => self.scale,
        }
    }

    /// Derivatives of `ln p` at `x`, used for the analytic derivatives of `√p`.
    fn log_pdf_derivatives(&self, x: f64) -> Option<(f64, f64)> {
        let (mu, s) = (self.mu, self.scale);
        match self.kind {
            DistKind::Normal => Some((-(x - mu) / (s * s), -1.0 / (s * s))),
            DistKind::LogNormal => {
                if x <= 0.0 {
                    return Some((0.0, 0.0));
                }
                let z = x.ln() - mu;
                let s2 = s * s;
                Some((
                    -1.0 / x - z / (s2 * x),
                    1.0 / (x * x) + (z - 1.0) / (s2 * x * x),
                ))
            }
            DistKind::Levy => {
                let y = x - mu;
                if y <= 0.0 {
                    return Some((0.0, 0.0));
                }
                Some((
                    -1.5 / y + s / (2.0 * y * y),
                    1.5 / (y * y) - s / (y * y * y),
                ))
            }
            DistKind::Gamma => {
                if x <= 0.0 {
                    return Some((0.0, 0.0));
                }
                let k = self.shape;
                Some(((k - 1.0) / x - 1.0 / s, -(k - 1.0) / (x * x)))
            }
            DistKind::ExpTest => Some((-1.0 / s, 0.0)),
            DistKind::Constant => Some((0.0, 0.0)),
            DistKind::SinTest => None,
        }
    }
}

/// Cdf of the untruncated law at `x ∈ [0, L]`.
pub fn distribution_cdf(dist: &DistributionSpec, x: f64) -> Result<f64> {
    if !(0.0..=dist.support_length).contains(&x) {
        return Err(Error::Domain {
            x,
            support: dist.support_length,
        });
    }
    Ok(dist.cdf_unchecked(x))
}

/// Oracle for `√(p(x)/R²)` on `[0, L]`, with `R² = cdf(L) − cdf(0)`.
pub fn sqrt_pdf_oracle(dist: &DistributionSpec) -> Result<FunctionOracle> {
    dist.validate()?;
    let r2 = dist.truncation_mass();
    if !(r2 > f64::EPSILON) {
        return Err(Error::UnsupportedTruncation(r2));
    }
    let inv_r = 1.0 / r2.sqrt();
    let l = dist.support_length;
    let d = *dist;
    let f = move |x: f64| d.pdf(x).sqrt() * inv_r;

    if d.kind == DistKind::SinTest {
        let a = PI / l;
        let amp = (2.0 / l).sqrt() * inv_r;
        return Ok(
            FunctionOracle::real(l, move |x| amp * (a * x).sin()).with_real_derivatives(
                move |x| amp * a * (a * x).cos(),
                move |x| -amp * a * a * (a * x).sin(),
            ),
        );
    }

    let d1 = move |x: f64| {
        let v = f(x);
        if v == 0.0 {
            return 0.0;
        }
        let (l1, _) = d.log_pdf_derivatives(x).unwrap_or((0.0, 0.0));
        v * 0.5 * l1
    };
    let d2 = move |x: f64| {
        let v = f(x);
        if v == 0.0 {
            return 0.0;
        }
        let (l1, l2) = d.log_pdf_derivatives(x).unwrap_or((0.0, 0.0));
        v * (0.25 * l1 * l1 + 0.5 * l2)
    };
    Ok(FunctionOracle::real(l, f).with_real_derivatives(d1, d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_endpoints_and_bits() {
        let g = Grid::new(3, 8.0).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(7), 8.0 - g.step());
        assert_eq!(g.index_to_bits(5), vec![1, 0, 1]);
        assert_eq!(g.bits_to_index(&[1, 0, 1]), 5);
        assert_eq!(g.bits_to_point(&[1, 0, 0]), 4.0);
        assert_eq!(g.bits_to_point(&[0, 0, 1]), g.step());
        assert!(Grid::new(0, 1.0).is_err());
        assert!(Grid::new(65, 1.0).is_err());
        assert!(Grid::new(4, -1.0).is_err());
    }

    #[test]
    fn constant_function_is_uniform() {
        let g = Grid::new(2, 1.0).unwrap();
        let v = discretize(&FunctionOracle::real(1.0, |_| 1.0), &g).unwrap();
        for z in v {
            assert_relative_eq!(z.re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta_function_gives_basis_vector() {
        let g = Grid::new(3, 1.0).unwrap();
        let step = g.step();
        let o = FunctionOracle::real(1.0, move |x| {
            if ((x / step).round() as i64) == 5 {
                1.0
            } else {
                0.0
            }
        });
        let v = discretize(&o, &g).unwrap();
        for (i, z) in v.iter().enumerate() {
            assert_eq!(z.re, if i == 5 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn discretize_errors() {
        let g = Grid::new(3, 1.0).unwrap();
        let zero = FunctionOracle::real(1.0, |_| 0.0);
        assert!(matches!(discretize(&zero, &g), Err(Error::Degenerate(_))));
        let bad = FunctionOracle::real(1.0, |x| if x > 0.5 { f64::NAN } else { 1.0 });
        match discretize(&bad, &g) {
            Err(Error::NonFiniteEvaluation { x }) => assert_eq!(x, 0.625),
            other => panic!("unexpected {other:?}"),
        }
        assert!(discretize(&zero, &Grid::new(29, 1.0).unwrap()).is_err());
    }

    #[test]
    fn normal_peak_value() {
        let d = DistributionSpec::normal(0.5, 0.125, 1.0);
        let r2 = d.truncation_mass();
        // R² = erf(4/√2) for a ±4σ window.
        assert_relative_eq!(r2, libm::erf(4.0 / 2f64.sqrt()), epsilon = 1e-14);
        let f = sqrt_pdf_oracle(&d).unwrap();
        let expected = (2.0 * PI * 0.125f64.powi(2)).powf(-0.25) / r2.sqrt();
        assert_relative_eq!(f.eval(0.5).re, expected, max_relative = 1e-14);
        assert_eq!(distribution_cdf(&d, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn levy_limits() {
        let d = DistributionSpec::levy(1.0, 1e12);
        let f = sqrt_pdf_oracle(&d).unwrap();
        assert_eq!(f.eval(0.0).re, 0.0);
        assert!(f.eval(1e-3).re < 1e-100);
        assert!(distribution_cdf(&d, 1e12).unwrap() > 1.0 - 1e-6);
        assert!(distribution_cdf(&d, 2e12).is_err());
    }

    #[test]
    fn levy_cdf_matches_quadrature() {
        let d = DistributionSpec::levy(1.0, 4.0);
        let q = crate::quad::integrate(|x| d.pdf(x), 0.0, 1.0, 1e-14);
        assert_relative_eq!(distribution_cdf(&d, 1.0).unwrap(), q, epsilon = 1e-12);
        assert_relative_eq!(q, erfc((0.5f64).sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn gamma_shape_one_is_exponential() {
        let g = DistributionSpec::gamma(1.0, 0.7, 3.0);
        let e = DistributionSpec::new(DistKind::ExpTest, 0.0, 0.7, 1.0, 3.0);
        let fg = sqrt_pdf_oracle(&g).unwrap();
        let fe = sqrt_pdf_oracle(&e).unwrap();
        for i in 0..30 {
            let x = 0.1 * i as f64;
            assert_relative_eq!(fg.eval(x).re, fe.eval(x).re, max_relative = 1e-12);
            assert_relative_eq!(
                distribution_cdf(&g, x).unwrap(),
                distribution_cdf(&e, x).unwrap(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn analytic_derivatives_match_stencils() {
        let specs = [
            DistributionSpec::normal(0.5, 0.2, 1.0),
            DistributionSpec::log_normal(0.0, 0.5, 4.0),
            DistributionSpec::levy(1.0, 8.0),
            DistributionSpec::gamma(3.0, 0.5, 6.0),
            DistributionSpec::new(DistKind::SinTest, 0.0, 1.0, 1.0, 2.0),
            DistributionSpec::new(DistKind::ExpTest, 0.0, 0.5, 1.0, 2.0),
        ];
        for d in specs {
            let f = sqrt_pdf_oracle(&d).unwrap();
            let l = d.support_length;
            let g = FunctionOracle::real(l, {
                let f = f.clone();
                move |x| f.eval(x).re
            });
            for i in 1..10 {
                let x = l * i as f64 / 10.0;
                let scale = f.eval(x).norm().max(1e-3);
                assert!(
                    (f.deriv1(x) - g.deriv1(x)).norm() < 1e-6 * scale / l.min(1.0),
                    "{d:?} d1 at {x}"
                );
                assert!(
                    (f.deriv2(x) - g.deriv2(x)).norm() < 1e-3 * scale / (l * l).min(1.0),
                    "{d:?} d2 at {x}"
                );
            }
        }
    }

    #[test]
    fn truncation_error() {
        let d = DistributionSpec::normal(100.0, 0.1, 1.0);
        assert!(matches!(
            sqrt_pdf_oracle(&d),
            Err(Error::UnsupportedTruncation(_))
        ));
        let bad = DistributionSpec::normal(0.5, -1.0, 1.0);
        assert!(sqrt_pdf_oracle(&bad).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let d = DistributionSpec::gamma(2.0, 0.5, 8.0);
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"L\":8.0"));
        assert_eq!(serde_json::from_str::<DistributionSpec>(&s).unwrap(), d);
        let extra = r#"{"kind":"normal","mu":0.5,"scale":0.1,"L":1,"colour":1}"#;
        assert!(serde_json::from_str::<DistributionSpec>(extra).is_err());
    }

    #[test]
    fn grid_sums_converge_to_truncation_mass() {
        let d = DistributionSpec::normal(0.4, 0.15, 1.0);
        let r2 = d.truncation_mass();
        let mut prev = f64::INFINITY;
        for n in [6, 8, 10, 12] {
            let g = Grid::new(n, 1.0).unwrap();
            let s: f64 = (0..g.len()).map(|i| d.pdf(g.point(i)) * g.step()).sum();
            let err = (s - r2).abs();
            assert!(err <= 2.0 * g.step(), "N={n} err={err}");
            assert!(err < prev);
            prev = err;
        }
    }

    proptest! {
        #[test]
        fn discretized_norm_is_one(mu in 0.1f64..0.9, sigma in 0.05f64..0.5, n in 2usize..12) {
            let d = DistributionSpec::normal(mu, sigma, 1.0);
            let v = discretize(&sqrt_pdf_oracle(&d).unwrap(), &Grid::new(n, 1.0).unwrap()).unwrap();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }

        #[test]
        fn bit_flips_move_points(n in 2usize..40, idx in any::<u64>()) {
            let g = Grid::new(n, 3.0).unwrap();
            let i = idx & ((1u64 << n) - 1);
            let mut bits = g.index_to_bits(i);
            let x = g.bits_to_point(&bits);
            bits[0] ^= 1;
            let dx = (g.bits_to_point(&bits) - x).abs();
            prop_assert!((dx - 1.5).abs() < 1e-12);
            bits[0] ^= 1;
            bits[n - 1] ^= 1;
            let dx = (g.bits_to_point(&bits) - x).abs();
            prop_assert!((dx - g.step()).abs() < 1e-12 * 3.0);
        }

        #[test]
        fn cdf_is_monotone(kind in 0usize..5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let specs = [
                DistributionSpec::normal(0.5, 0.2, 4.0),
                DistributionSpec::log_normal(0.0, 0.6, 4.0),
                DistributionSpec::levy(0.5, 4.0),
                DistributionSpec::gamma(2.5, 0.4, 4.0),
                DistributionSpec::new(DistKind::SinTest, 0.0, 1.0, 1.0, 4.0),
            ];
            let d = specs[kind];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (clo, chi) = (distribution_cdf(&d, 4.0 * lo).unwrap(), distribution_cdf(&d, 4.0 * hi).unwrap());
            prop_assert!(clo <= chi + 1e-15);
            prop_assert!((0.0..=1.0).contains(&clo) && (0.0..=1.0).contains(&chi));
            prop_assert!(d.pdf(4.0 * lo) >= 0.0);
        }
    }
}
