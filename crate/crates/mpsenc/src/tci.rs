//! Tensor cross interpolation of a black-box oracle into an MPS.
//!
//! Each bond `b` carries matched pivot sets: left prefixes `I_b` (the first
//! `b` bits) and right suffixes `J_b` (the last `N−b` bits). A two-site sweep
//! evaluates the `2|I_{b−1}| × 2|J_{b+1}|` matrix of oracle values around the
//! bond and refreshes `(I_b, J_b)` from a fully pivoted cross decomposition.
//! The state is `T_0 P_1⁻¹ T_1 P_2⁻¹ … T_{N−1}`, with `T_s` the three-index
//! fiber through site `s` and `P_b` the pivot matrix of bond `b`.

use std::collections::HashMap;

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::funcspace::{FunctionOracle, Grid};
use crate::linalg::{c, CMat};
use crate::mps::{Mps, Tensor3};
use crate::{Error, Result, C64};

/// Oracle calls per bond per half-sweep are at most `4·χ²`; one sweep is a
/// left-to-right plus a right-to-left pass.
pub const CALLS_PER_BOND_SWEEP: usize = 8;

/// Pivots smaller than this fraction of the largest entry are never added.
const PIVOT_FLOOR: f64 = 1e-13;

/// Settings for [`tci_build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TciConfig {
    pub max_rank: usize,
    pub rel_tol: f64,
    pub max_sweeps: usize,
    pub n_error_samples: usize,
    pub rng_seed: u64,
}

impl Default for TciConfig {
    fn default() -> Self {
        Self {
            max_rank: 64,
            rel_tol: 1e-8,
            max_sweeps: 12,
            n_error_samples: 1000,
            rng_seed: 7,
        }
    }
}

impl TciConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rank < 2 {
            return Err(Error::Config(format!(
                "max_rank must be at least 2, got {}",
                self.max_rank
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_sweeps == 0 || self.n_error_samples == 0 {
            return Err(Error::Config(
                "max_sweeps and n_error_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled amplitude error of an MPS against an oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub mean_rel: f64,
    pub max_rel: f64,
    /// Samples whose oracle value was negligible and therefore skipped.
    pub skipped: usize,
}

/// Bookkeeping recorded alongside a TCI build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TciMetadata {
    /// Distinct oracle evaluations, including error sampling.
    pub oracle_calls: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub bond_dims: Vec<usize>,
    pub error: ErrorEstimate,
}

impl TciMetadata {
    /// Ceiling on [`TciMetadata::oracle_calls`]: `CALLS_PER_BOND_SWEEP·N·χ²`
    /// per sweep plus the start probes and error samples of every sweep.
    pub fn call_bound(&self, n_qubits: usize, n_error_samples: usize) -> usize {
        let chi = self.bond_dims.iter().copied().max().unwrap_or(1);
        CALLS_PER_BOND_SWEEP * n_qubits * chi * chi * self.sweeps
            + (n_error_samples + n_qubits.max(16)) * (self.sweeps + 1)
    }
}

#[derive(Clone, Debug)]
pub struct TciOutput {
    /// Unit-norm MPS.
    pub mps: Mps,
    pub meta: TciMetadata,
}

/// Samples whose oracle magnitude is below this fraction of the largest
/// sampled magnitude are excluded from relative errors.
pub const NEGLIGIBLE_AMPLITUDE: f64 = 1e-8;

/// Big-endian index with prefix `p` of `plen` bits followed by suffix `s` of `slen` bits.
fn join(p: u64, s: u64, slen: usize) -> u64 {
    if slen >= 64 {
        s
    } else {
        (p << slen) | s
    }
}

struct CachedOracle<'a> {
    oracle: &'a FunctionOracle,
    grid: &'a Grid,
    cache: HashMap<u64, C64>,
}

impl<'a> CachedOracle<'a> {
    fn new(oracle: &'a FunctionOracle, grid: &'a Grid) -> Self {
        Self {
            oracle,
            grid,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, index: u64) -> Result<C64> {
        if let Some(&v) = self.cache.get(&index) {
            return Ok(v);
        }
        let x = self.grid.point(index);
        let v = self.oracle.eval(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteEvaluation { x });
        }
        self.cache.insert(index, v);
        Ok(v)
    }

    fn calls(&self) -> usize {
        self.cache.len()
    }
}

/// Fully pivoted cross of `m`: row/column pivots in selection order, at most
/// `cap` of them, stopping when the residual maximum drops below `tol·max|m|`.
fn full_pivot_cross(m: &CMat, cap: usize, tol: f64) -> Vec<(usize, usize)> {
    let mut r = m.clone();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut piv = Vec::new();
    while piv.len() < cap.min(m.nrows()).min(m.ncols()) {
        let (mut bi, mut bj, mut best) = (0, 0, -1.0);
        for j in 0..r.ncols() {
            for i in 0..r.nrows() {
                let a = r[(i, j)].norm();
                if a > best {
                    (bi, bj, best) = (i, j, a);
                }
            }
        }
        if !piv.is_empty() && best <= tol * scale {
            break;
        }
        if best == 0.0 {
            break;
        }
        piv.push((bi, bj));
        let pv = r[(bi, bj)];
        let col = r.column(bj).into_owned();
        let row = r.row(bi).into_owned();
        for j in 0..r.ncols() {
            let f = row[j] / pv;
            if f != c(0.0) {
                for i in 0..r.nrows() {
                    r[(i, j)] -= col[i] * f;
                }
            }
        }
    }
    piv
}

struct Pivots {
    n: usize,
    /// `left[b]`: prefixes of length `b`, `b = 0..=N`.
    left: Vec<Vec<u64>>,
    /// `right[b]`: suffixes of length `N−b`, `b = 0..=N`.
    right: Vec<Vec<u64>>,
}

impl Pivots {
    fn from_index(n: usize, index: u64) -> Self {
        let mut left = Vec::with_capacity(n + 1);
        let mut right = Vec::with_capacity(n + 1);
        for b in 0..=n {
            left.push(vec![if b == 0 { 0 } else { index >> (n - b) }]);
            right.push(vec![if b == n {
                0
            } else if n - b >= 64 {
                index
            } else {
                index & ((1u64 << (n - b)) - 1)
            }]);
        }
        Self { n, left, right }
    }

    /// Two-site matrix around bond `b` (between sites `b−1` and `b`).
    /// Rows are `(prefix of bond b−1, σ_{b−1})`, columns `(σ_b, suffix of bond b+1)`.
    fn two_site(&self, f: &mut CachedOracle, b: usize) -> Result<(CMat, Vec<u64>, Vec<u64>)> {
        let n = self.n;
        let slen = n - b - 1;
        let rows: Vec<u64> = self.left[b - 1]
            .iter()
            .flat_map(|&p| [p << 1, (p << 1) | 1])
            .collect();
        let cols: Vec<u64> = [0u64, 1]
            .iter()
            .flat_map(|&s| self.right[b + 1].iter().map(move |&q| join(s, q, slen)))
            .collect();
        let mut m = DMatrix::from_element(rows.len(), cols.len(), c(0.0));
        for (i, &p) in rows.iter().enumerate() {
            for (j, &q) in cols.iter().enumerate() {
                m[(i, j)] = f.get(join(p, q, n - b))?;
            }
        }
        Ok((m, rows, cols))
    }

    fn update(&mut self, f: &mut CachedOracle, b: usize, cap: usize, tol: f64) -> Result<bool> {
        let (m, rows, cols) = self.two_site(f, b)?;
        let piv = full_pivot_cross(&m, cap, tol);
        if piv.is_empty() {
            return Err(Error::Degenerate(format!(
                "oracle vanishes on every fiber through bond {b}"
            )));
        }
        self.left[b] = piv.iter().map(|&(i, _)| rows[i]).collect();
        self.right[b] = piv.iter().map(|&(_, j)| cols[j]).collect();
        Ok(piv.len() >= cap)
    }

    /// Assembles `T_s P_{s+1}⁻¹` site by site.
    fn assemble(&self, f: &mut CachedOracle) -> Result<Mps> {
        let n = self.n;
        let mut tensors = Vec::with_capacity(n);
        for s in 0..n {
            let (li, rj) = (&self.left[s], &self.right[s + 1]);
            let slen = n - s - 1;
            let mut t = DMatrix::from_element(li.len() * 2, rj.len(), c(0.0));
            for (i, &p) in li.iter().enumerate() {
                for sig in 0..2u64 {
                    for (j, &q) in rj.iter().enumerate() {
                        t[(2 * i + sig as usize, j)] = f.get(join((p << 1) | sig, q, slen))?;
                    }
                }
            }
            if s + 1 < n {
                let (pi, pj) = (&self.left[s + 1], &self.right[s + 1]);
                let mut pm = DMatrix::from_element(pi.len(), pj.len(), c(0.0));
                for (i, &p) in pi.iter().enumerate() {
                    for (j, &q) in pj.iter().enumerate() {
                        pm[(i, j)] = f.get(join(p, q, slen))?;
                    }
                }
                // X P = T  ⇔  Pᵀ Xᵀ = Tᵀ
                let lu = pm.transpose().full_piv_lu();
                let xt = lu.solve(&t.transpose()).ok_or_else(|| {
                    Error::Numerical(format!("singular pivot matrix at bond {}", s + 1))
                })?;
                t = xt.transpose();
            }
            tensors.push(Tensor3::from_left_matrix(&t));
        }
        Mps::new(tensors)
    }
}

fn random_index(rng: &mut ChaCha8Rng, n: usize) -> u64 {
    let r: u64 = rng.random();
    if n >= 64 {
        r
    } else {
        r >> (64 - n)
    }
}

/// Best-magnitude starting point among evenly spread and random probes.
fn initial_pivot(f: &mut CachedOracle, n: usize, rng: &mut ChaCha8Rng) -> Result<u64> {
    let probes = n.max(16);
    let (mut best, mut best_v) = (0u64, -1.0);
    for k in 0..probes {
        let idx = if k % 2 == 0 {
            let frac = (k / 2) as f64 / (probes / 2) as f64;
            let top = if n >= 64 {
                u64::MAX as f64
            } else {
                ((1u64 << n) - 1) as f64
            };
            (frac * top) as u64
        } else {
            random_index(rng, n)
        };
        let v = f.get(idx)?.norm();
        if v > best_v {
            (best, best_v) = (idx, v);
        }
    }
    if !(best_v > 0.0) {
        return Err(Error::Degenerate(
            "oracle is zero on every probe point".into(),
        ));
    }
    Ok(best)
}

fn estimate(m: &Mps, f: &mut CachedOracle, n_samples: usize, seed: u64) -> Result<ErrorEstimate> {
    let n = m.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let idx = random_index(&mut rng, n);
        pairs.push((m.amplitude_index(idx), f.get(idx)?));
    }
    Ok(relative_errors(&pairs))
}

/// Relative errors after the least-squares scale fit `α = ⟨a, f⟩ / ⟨a, a⟩`.
fn relative_errors(pairs: &[(C64, C64)]) -> ErrorEstimate {
    let (mut num, mut den) = (c(0.0), 0.0);
    let mut fmax: f64 = 0.0;
    for (a, f) in pairs {
        num += a.conj() * f;
        den += a.norm_sqr();
        fmax = fmax.max(f.norm());
    }
    let alpha = if den > 0.0 { num / den } else { c(0.0) };
    let (mut sum, mut max, mut used, mut skipped) = (0.0, 0.0f64, 0usize, 0usize);
    for (a, f) in pairs {
        if f.norm() <= NEGLIGIBLE_AMPLITUDE * fmax {
            skipped += 1;
            continue;
        }
        let e = (alpha * a - f).norm() / f.norm();
        sum += e;
        max = max.max(e);
        used += 1;
    }
    ErrorEstimate {
        mean_rel: if used > 0 { sum / used as f64 } else { 0.0 },
        max_rel: max,
        skipped,
    }
}

/// Builds an MPS approximation of `oracle` on `grid` by two-site cross
/// interpolation with a rank cap that starts at 2 and doubles every sweep.
///
/// Stops once the sampled mean relative amplitude error is within
/// `rel_tol` and no bond was limited by the current cap. Otherwise returns
/// the last MPS with `converged = false`.
pub fn tci_build(oracle: &FunctionOracle, grid: &Grid, cfg: &TciConfig) -> Result<TciOutput> {
    cfg.validate()?;
    let n = grid.n_qubits();
    let mut f = CachedOracle::new(oracle, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let start = initial_pivot(&mut f, n, &mut rng)?;
    let mut piv = Pivots::from_index(n, start);
    if n == 1 {
        let mps = piv.assemble(&mut f)?.normalized()?;
        let error = estimate(&mps, &mut f, cfg.n_error_samples, cfg.rng_seed ^ 0x5eed)?;
        let meta = TciMetadata {
            oracle_calls: f.calls(),
            sweeps: 0,
            converged: true,
            bond_dims: vec![],
            error,
        };
        return Ok(TciOutput { mps, meta });
    }
    let tol = (cfg.rel_tol * 1e-2).max(PIVOT_FLOOR);
    let mut cap = 2usize.min(cfg.max_rank);
    let mut result = None;
    for sweep in 1..=cfg.max_sweeps {
        let mut capped = false;
        for b in 1..n {
            capped |= piv.update(&mut f, b, cap, tol)?;
        }
        for b in (1..n).rev() {
            capped |= piv.update(&mut f, b, cap, tol)?;
        }
        let m = piv.assemble(&mut f)?;
        let err = estimate(
            &m,
            &mut f,
            cfg.n_error_samples,
            cfg.rng_seed.wrapping_add(sweep as u64),
        )?;
        debug!(
            "tci sweep {sweep}: cap {cap}, bonds {:?}, mean rel {:e}",
            m.bond_dims(),
            err.mean_rel
        );
        let done = err.mean_rel <= cfg.rel_tol && (!capped || cap == cfg.max_rank);
        result = Some((m, err, sweep, done));
        if done {
            break;
        }
        if capped {
            cap = (cap * 2).min(cfg.max_rank);
        }
    }
    let (m, err, sweeps, converged) = result.expect("at least one sweep");
    if !converged {
        warn!(
            "tci did not reach rel_tol {:e} (mean rel {:e}) after {sweeps} sweeps",
            cfg.rel_tol, err.mean_rel
        );
    }
    let bond_dims = m.bond_dims();
    let mps = m.normalized()?;
    Ok(TciOutput {
        mps,
        meta: TciMetadata {
            oracle_calls: f.calls(),
            sweeps,
            converged,
            bond_dims,
            error: err,
        },
    })
}

/// Mean and max relative amplitude error of `m` against `oracle` at `n`
/// uniformly drawn grid indices, after fitting the overall scale.
pub fn tci_error_estimate(
    m: &Mps,
    oracle: &FunctionOracle,
    grid: &Grid,
    n: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    if m.n_qubits() != grid.n_qubits() {
        return Err(Error::LengthMismatch(m.n_qubits(), grid.n_qubits()));
    }
    let mut f = CachedOracle::new(oracle, grid);
    estimate(m, &mut f, n, seed)
}
