//! V-layer compilation of an MPS into a shallow circuit.
//!
//! Each layer is built from the residual state truncated to bond dimension 2:
//! a central two-qubit gate on the origin bond prepares `Σ_i Λ_i |ii⟩` and two
//! staircases of isometries grow the state towards both ends of the chain.
//! The inverse of the layer is then applied to the untruncated residual and
//! the procedure repeats. Bonds whose discarded weight is below `eps_trunc`
//! are treated as product bonds and receive no entangling gate.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitMetrics, Gate, LayerInfo};
use crate::linalg::CMat;
use crate::mps::{fidelity, CentralForm, Mps, Tensor3};
use crate::simulate::{apply_circuit, QuantumState};
use crate::synth::{
    ansatz_gates, ansatz_init, ansatz_len, synthesize_isometry, synthesize_u_lambda,
    two_qubit_matrix, u_lambda_angle, ULambdaMode,
};
use crate::{Error, Result};

/// Default optimizer budget for the central gate.
pub const DEFAULT_OPTIMIZER_EVALS: usize = 500;
/// Candidates re-evaluated with the optimized central gate during an origin scan.
pub const SCAN_CONFIRM: usize = 3;
/// Fidelity differences below this are ties.
pub const TIE_TOL: f64 = 1e-12;
const REAL_TOL: f64 = 1e-12;

/// Where the central gate of each layer sits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPolicy {
    /// Fixed bond `k ∈ [1, N−1]` for every layer.
    Fixed(usize),
    /// Bond `N/2` for every layer.
    Center,
    /// Greedy per-layer choice of the bond giving the best fidelity.
    Scan,
}

/// Settings for [`build_encoding_circuit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub n_layers: usize,
    pub origin: OriginPolicy,
    pub eps_trunc: f64,
    pub chi_sim: usize,
    pub optimizer_evals: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            origin: OriginPolicy::Scan,
            eps_trunc: 1e-3,
            chi_sim: 64,
            optimizer_evals: DEFAULT_OPTIMIZER_EVALS,
        }
    }
}

/// Output of [`build_encoding_circuit`].
#[derive(Clone, Debug)]
pub struct Encoding {
    pub circuit: Circuit,
    /// Fidelity of the circuit state with the target after each accepted layer.
    pub fidelity_trace: Vec<f64>,
    /// Origin bond of each accepted layer, in disentangling order.
    pub origins: Vec<usize>,
    /// Requested layers that were not added because they lowered the fidelity.
    pub dropped_layers: usize,
    /// Weight discarded by the capped residual simulation, summed over layers.
    pub discarded_weight: f64,
    pub truncation_warning: bool,
    pub real_mode: bool,
}

/// Depth, CNOT count and gate count of a lowered circuit.
pub fn circuit_metrics(c: &Circuit) -> Result<CircuitMetrics> {
    c.metrics()
}

/// True when every tensor entry is real to `1e−12` relative accuracy.
pub fn is_real_mps(m: &Mps) -> bool {
    let scale = m
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .fold(0.0f64, |a, z| a.max(z.norm()));
    m.tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .all(|z| z.im.abs() <= REAL_TOL * scale.max(1.0))
}

fn central_is_real(cf: &CentralForm) -> bool {
    cf.left
        .iter()
        .chain(cf.right.iter())
        .flat_map(|t| t.data.iter())
        .all(|z| z.im.abs() <= REAL_TOL)
}

fn det2(m: &CMat) -> f64 {
    (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re
}

fn negate_where(t: &mut Tensor3, pred: impl Fn(usize, usize) -> bool) {
    for l in 0..t.dl {
        for s in 0..2 {
            for r in 0..t.dr {
                if pred(l, r) {
                    let i = t.idx(l, s, r);
                    t.data[i] = -t.data[i];
                }
            }
        }
    }
}

/// Right-site isometry `V[(r, s), i] = B[i, s, r]`, or `V[s, i]` when `dr = 1`.
fn right_isometry(t: &Tensor3) -> CMat {
    if t.dr == 1 {
        CMat::from_fn(2, t.dl, |s, i| t.get(i, s, 0))
    } else {
        CMat::from_fn(2 * t.dr, t.dl, |row, i| t.get(i, row % 2, row / 2))
    }
}

/// Flips bond signs so every square real block is a rotation. The sign
/// reaching the centre is returned and folded into `Λ₂`.
fn real_gauge_fix(cf: &mut CentralForm) -> f64 {
    let b = cf.bond;
    let mut sign = 1.0;
    for j in 0..b {
        let t = &cf.left[j];
        if t.dl == 1 && t.dr == 2 && det2(&t.left_matrix()) < 0.0 {
            negate_where(&mut cf.left[j], |_, r| r == 1);
            if j + 1 < b {
                negate_where(&mut cf.left[j + 1], |l, _| l == 1);
            } else {
                sign = -sign;
            }
        }
    }
    for j in (0..cf.right.len()).rev() {
        let t = &cf.right[j];
        if t.dl == 2 && t.dr == 1 && det2(&right_isometry(t)) < 0.0 {
            negate_where(&mut cf.right[j], |l, _| l == 1);
            if j > 0 {
                negate_where(&mut cf.right[j - 1], |_, r| r == 1);
            } else {
                sign = -sign;
            }
        }
    }
    sign
}

fn map_gates(gates: Vec<Gate>, map: &[usize]) -> Vec<Gate> {
    gates.into_iter().map(|g| g.remapped(map)).collect()
}

/// Gates on logical qubits together with their physical placement.
struct Block {
    map: Vec<usize>,
    gates: Vec<Gate>,
}

impl Block {
    fn physical(&self) -> Vec<Gate> {
        map_gates(self.gates.clone(), &self.map)
    }

    /// Single `U2q` gate for two-qubit blocks, the mapped gates otherwise.
    fn collapsed(&self) -> Vec<Gate> {
        if self.map.len() == 2 && !self.gates.is_empty() {
            vec![Gate::U2q {
                q0: self.map[0],
                q1: self.map[1],
                matrix: Box::new(two_qubit_matrix(&self.gates)),
            }]
        } else {
            self.physical()
        }
    }
}

/// Staircase blocks of a central form: left sites from the centre outwards,
/// then right sites from the centre outwards.
fn staircase_blocks(cf: &CentralForm, real: bool) -> Result<Vec<Block>> {
    let b = cf.bond;
    let mut out = Vec::new();
    for j in (0..b).rev() {
        let t = &cf.left[j];
        let gates = synthesize_isometry(&t.left_matrix(), real)?;
        let map = if t.dl == 2 { vec![j - 1, j] } else { vec![j] };
        out.push(Block { map, gates });
    }
    for (off, t) in cf.right.iter().enumerate() {
        let j = b + off;
        let gates = synthesize_isometry(&right_isometry(t), real)?;
        let map = if t.dr == 2 { vec![j + 1, j] } else { vec![j] };
        out.push(Block { map, gates });
    }
    Ok(out)
}

/// A layer split into its central gate and staircases (physical qubits).
struct LayerParts {
    central: Block,
    blocks: Vec<Block>,
    staircase: Vec<Gate>,
    lambda: Vec<f64>,
    real: bool,
}

impl LayerParts {
    fn gates(&self) -> Vec<Gate> {
        let mut g = self.central.physical();
        g.extend(self.staircase.iter().cloned());
        g
    }
}

fn layer_parts(m2: &Mps, origin: usize, real: bool) -> Result<LayerParts> {
    let mut cf = m2.central_form(origin)?;
    if cf.lambda.len() > 2
        || cf
            .left
            .iter()
            .chain(cf.right.iter())
            .any(|t| t.dl > 2 || t.dr > 2)
    {
        return Err(Error::Precondition(
            "layer construction needs bond dimension ≤ 2".into(),
        ));
    }
    let mut real = real && central_is_real(&cf);
    let mut lambda = cf.lambda.clone();
    if real {
        let sign = real_gauge_fix(&mut cf);
        if lambda.len() == 2 {
            lambda[1] *= sign;
        }
    }
    let blocks = match staircase_blocks(&cf, real) {
        Ok(g) => g,
        Err(e) if real => {
            debug!("real synthesis failed ({e}), retrying in complex mode");
            real = false;
            let cf = m2.central_form(origin)?;
            lambda = cf.lambda.clone();
            staircase_blocks(&cf, false)?
        }
        Err(e) => return Err(e),
    };
    let central = Block {
        map: vec![origin - 1, origin],
        gates: synthesize_u_lambda(&lambda, &ULambdaMode::FirstLayer, real)?,
    };
    let staircase = blocks.iter().flat_map(|b| b.physical()).collect();
    Ok(LayerParts {
        central,
        blocks,
        staircase,
        lambda,
        real,
    })
}

fn circuit_from(n: usize, gates: Vec<Gate>) -> Result<Circuit> {
    let mut circ = Circuit::new(n);
    for g in gates {
        circ.push(g)?;
    }
    Ok(circ)
}

fn chi2_parts(m2: &Mps, origin: usize) -> Result<(usize, LayerParts)> {
    let n = m2.n_qubits();
    if n < 2 || origin == 0 || origin >= n {
        return Err(Error::Precondition(format!(
            "origin {origin} outside [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let m2 = m2.canonicalize(origin)?;
    if m2.max_bond() > 2 {
        return Err(Error::Precondition(format!(
            "bond dimension {} exceeds 2",
            m2.max_bond()
        )));
    }
    Ok((n, layer_parts(&m2, origin, is_real_mps(&m2))?))
}

fn single_layer(n: usize, origin: usize, gates: Vec<Gate>) -> Result<Circuit> {
    let len = gates.len();
    let mut circ = circuit_from(n, gates)?;
    circ.layers.push(LayerInfo {
        origin,
        start: 0,
        end: len,
        skipped_bonds: Vec::new(),
    });
    circ.merge_rotations();
    Ok(circ)
}

/// One V-layer reproducing `m2` (all bonds ≤ 2) from `|0…0⟩`, with the
/// central gate on qubits `(origin − 1, origin)`.
pub fn exact_layer_from_chi2(m2: &Mps, origin: usize) -> Result<Circuit> {
    let (n, parts) = chi2_parts(m2, origin)?;
    single_layer(n, origin, parts.gates())
}

/// The same layer with every synthesized two-qubit block kept as one `U2q`
/// gate, for structural depth counts.
pub fn exact_layer_blocks(m2: &Mps, origin: usize) -> Result<Circuit> {
    let (n, parts) = chi2_parts(m2, origin)?;
    let gates = std::iter::once(&parts.central)
        .chain(parts.blocks.iter())
        .flat_map(|b| b.collapsed())
        .collect();
    single_layer(n, origin, gates)
}

/// Result of [`optimize_u_lambda`].
#[derive(Clone, Debug, PartialEq)]
pub struct CentralFit {
    pub params: Vec<f64>,
    /// `−ln p` at the origin bond after applying the fitted gate's inverse.
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
}

/// Purity of bond `origin` after applying `U†` to sites `(origin−1, origin)`,
/// precomputed so each evaluation costs `O(χ²)`.
struct CentralPurity {
    /// `gram[t][t']`, `t` running over the 4 physical pairs.
    gram: Vec<Vec<CMat>>,
    left_side: bool,
}

impl CentralPurity {
    fn new(state: &Mps, origin: usize) -> Result<Self> {
        let m = state.canonicalize(origin - 1)?;
        let a = m.tensor(origin - 1);
        let bt = m.tensor(origin);
        let (dl, dr) = (a.dl, bt.dr);
        // Blocks T_t (dl × dr) for t = 2·s1 + s2.
        let blocks: Vec<CMat> = (0..4)
            .map(|t| {
                let (s1, s2) = (t / 2, t % 2);
                CMat::from_fn(dl, dr, |l, r| {
                    (0..a.dr).map(|k| a.get(l, s1, k) * bt.get(k, s2, r)).sum()
                })
            })
            .collect();
        let left_side = dl <= dr;
        let gram = (0..4)
            .map(|t| {
                (0..4)
                    .map(|u| {
                        if left_side {
                            &blocks[t] * blocks[u].adjoint()
                        } else {
                            blocks[t].adjoint() * &blocks[u]
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { gram, left_side })
    }

    fn purity(&self, u: &CMat) -> f64 {
        let ud = u.adjoint();
        let dim = self.gram[0][0].nrows();
        // Reduced matrix on (s_keep, bond) in blocks of size dim.
        let mut g = CMat::zeros(2 * dim, 2 * dim);
        for a in 0..2 {
            for a2 in 0..2 {
                let mut blk = CMat::zeros(dim, dim);
                for o in 0..2 {
                    // Row of U† for the kept index a and traced index o.
                    let (r1, r2) = if self.left_side {
                        (2 * a + o, 2 * a2 + o)
                    } else {
                        (2 * o + a, 2 * o + a2)
                    };
                    for t in 0..4 {
                        for t2 in 0..4 {
                            let coef = if self.left_side {
                                ud[(r1, t)] * ud[(r2, t2)].conj()
                            } else {
                                ud[(r1, t)].conj() * ud[(r2, t2)]
                            };
                            if coef.norm() > 0.0 {
                                blk += &self.gram[t][t2] * coef;
                            }
                        }
                    }
                }
                g.view_mut((a * dim, a2 * dim), (dim, dim)).copy_from(&blk);
            }
        }
        let tr: f64 = (0..2 * dim).map(|i| g[(i, i)].re).sum();
        let fro: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        fro / (tr * tr)
    }
}

/// Derivative-free minimization of `−ln p_origin` over the central-gate
/// ansatz, starting from `init`. Returns the best parameters seen.
pub fn optimize_u_lambda(
    state: &Mps,
    origin: usize,
    init: &[f64],
    real_mode: bool,
    max_evals: usize,
) -> Result<CentralFit> {
    let n = state.n_qubits();
    if origin == 0 || origin >= n {
        return Err(Error::Precondition(format!(
            "origin {origin} outside [1, {}]",
            n.saturating_sub(1)
        )));
    }
    if init.len() != ansatz_len(real_mode) {
        return Err(Error::LengthMismatch(init.len(), ansatz_len(real_mode)));
    }
    let cp = CentralPurity::new(state, origin)?;
    let mut objective = |p: &[f64]| -> f64 {
        let gates = ansatz_gates(p, real_mode).expect("parameter length checked");
        let p = cp.purity(&two_qubit_matrix(&gates));
        -(p.min(1.0)).ln()
    };
    let f0 = objective(init);
    if f0 <= 1e-15 || max_evals <= 1 {
        return Ok(CentralFit {
            params: init.to_vec(),
            objective: f0,
            initial_objective: f0,
            evaluations: 1,
        });
    }
    let (params, f, evals) = nelder_mead(&mut objective, init, f0, 0.2, max_evals - 1);
    Ok(CentralFit {
        params,
        objective: f,
        initial_objective: f0,
        evaluations: evals + 1,
    })
}

/// Nelder–Mead simplex search with standard coefficients, returning the
/// best point seen within `max_evals` evaluations.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize) {
    let dim = x0.len();
    let mut evals = 0;
    let mut best = (x0.to_vec(), f0);
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut (Vec<f64>, f64)| -> f64 {
        *evals += 1;
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        if v < best.1 {
            *best = (x.to_vec(), v);
        }
        v
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..dim {
        if evals >= max_evals {
            return (best.0, best.1, evals);
        }
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals, &mut best);
        simplex.push((x, v));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= 1e-16 && size <= 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&xr, &mut evals, &mut best);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                break;
            }
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&xe, &mut evals, &mut best);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        if evals >= max_evals {
            break;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = lerp(&centroid, &worst.0, -0.5);
            let fc = eval(&xc, &mut evals, &mut best);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &worst.0, 0.5);
            let fc = eval(&xc, &mut evals, &mut best);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            if evals >= max_evals {
                break;
            }
            let x = lerp(&x_best, &v.0, 0.5);
            let fx = eval(&x, &mut evals, &mut best);
            *v = (x, fx);
        }
    }
    (best.0, best.1, evals)
}

/// Caps bonds at 2, and at 1 where the residual weight `Σ_{i≥1} Λ²` is below
/// `eps_trunc`. Returns the truncated state and the bonds that lost
/// entanglement to the threshold.
fn chi2_truncation(residual: &Mps, eps_trunc: f64) -> Result<(Mps, Vec<usize>)> {
    let profile = residual.entanglement_profile()?;
    let mut caps = Vec::with_capacity(profile.spectra.len());
    let mut skipped = Vec::new();
    for (k, spec) in profile.spectra.iter().enumerate() {
        let tail: f64 = spec.iter().skip(1).map(|x| x * x).sum();
        if tail < eps_trunc {
            caps.push(1);
            if spec.len() > 1 {
                skipped.push(k + 1);
            }
        } else {
            caps.push(2);
        }
    }
    Ok((residual.truncate_bonds(&caps)?, skipped))
}

struct Candidate {
    origin: usize,
    gates: Vec<Gate>,
    residual: Mps,
    fidelity: f64,
    discarded: f64,
    warning: bool,
}

fn zero_overlap(m: &Mps) -> f64 {
    m.amplitude_index(0).norm_sqr() / m.norm_sqr()
}

fn disentangle(residual: &Mps, gates: &[Gate], chi_sim: usize) -> Result<(Mps, f64, bool)> {
    let n = residual.n_qubits();
    let inv = circuit_from(n, gates.to_vec())?.inverse();
    let out = apply_circuit(&inv, QuantumState::Mps(residual.clone()), chi_sim)?;
    Ok((
        out.state.to_mps()?,
        out.discarded_weight,
        out.truncation_warning,
    ))
}

fn finish_candidate(
    origin: usize,
    gates: Vec<Gate>,
    residual: &Mps,
    chi_sim: usize,
) -> Result<Candidate> {
    let (res, discarded, warning) = disentangle(residual, &gates, chi_sim)?;
    Ok(Candidate {
        origin,
        fidelity: zero_overlap(&res),
        gates,
        residual: res,
        discarded,
        warning,
    })
}

/// Layer with the analytic central gate.
fn analytic_candidate(
    parts: &LayerParts,
    origin: usize,
    residual: &Mps,
    chi_sim: usize,
) -> Result<Candidate> {
    finish_candidate(origin, parts.gates(), residual, chi_sim)
}

/// Layer with the central gate optimized on the residual after the staircases
/// have been undone.
fn variational_candidate(
    parts: &LayerParts,
    origin: usize,
    residual: &Mps,
    cfg: &BuildConfig,
) -> Result<Candidate> {
    if parts.lambda.len() < 2 {
        return analytic_candidate(parts, origin, residual, cfg.chi_sim);
    }
    let (phi, d1, w1) = disentangle(residual, &parts.staircase, cfg.chi_sim)?;
    let init = ansatz_init(u_lambda_angle(&parts.lambda), parts.real);
    let fit = optimize_u_lambda(&phi, origin, &init, parts.real, cfg.optimizer_evals)?;
    debug!(
        "origin {origin}: central objective {:.3e} -> {:.3e} in {} evaluations",
        fit.initial_objective, fit.objective, fit.evaluations
    );
    let central = map_gates(ansatz_gates(&fit.params, parts.real)?, &parts.central.map);
    let (res, d2, w2) = disentangle(&phi, &central, cfg.chi_sim)?;
    let gates = central
        .into_iter()
        .chain(parts.staircase.iter().cloned())
        .collect();
    Ok(Candidate {
        origin,
        fidelity: zero_overlap(&res),
        gates,
        residual: res,
        discarded: d1 + d2,
        warning: w1 || w2,
    })
}

/// Higher fidelity wins; ties go to the shallower layer, then the lower origin.
fn better(a: &Candidate, b: &Candidate, n: usize) -> bool {
    if (a.fidelity - b.fidelity).abs() > TIE_TOL {
        return a.fidelity > b.fidelity;
    }
    let depth = |o: usize| o.max(n - o);
    (depth(a.origin), a.origin) < (depth(b.origin), b.origin)
}

fn assemble(n: usize, layers: &[(Vec<Gate>, LayerInfo)]) -> Result<Circuit> {
    let mut circ = Circuit::new(n);
    for (gates, info) in layers.iter().rev() {
        let start = circ.gates.len();
        for g in gates {
            circ.push(g.clone())?;
        }
        circ.layers.push(LayerInfo {
            origin: info.origin,
            start,
            end: circ.gates.len(),
            skipped_bonds: info.skipped_bonds.clone(),
        });
    }
    circ.merge_rotations();
    Ok(circ)
}

fn circuit_fidelity(circ: &Circuit, target: &Mps) -> Result<f64> {
    // Each layer at most doubles the bond dimension, so this cap is exact.
    let cap = 1usize << circ.layers.len().clamp(1, 20);
    let out = apply_circuit(circ, QuantumState::zero(circ.n_qubits, false)?, cap)?;
    fidelity(&out.state.to_mps()?, target)
}

/// Iterative V-layer disentangling of `m` into at most `cfg.n_layers` layers.
pub fn build_encoding_circuit(m: &Mps, cfg: &BuildConfig) -> Result<Encoding> {
    let n = m.n_qubits();
    if cfg.n_layers == 0 {
        return Err(Error::Precondition("at least one layer is required".into()));
    }
    if n < 2 {
        return Err(Error::Precondition(
            "circuit construction needs at least 2 qubits".into(),
        ));
    }
    if !(cfg.eps_trunc >= 0.0) || cfg.chi_sim < 2 {
        return Err(Error::Config(
            "eps_trunc must be ≥ 0 and chi_sim ≥ 2".into(),
        ));
    }
    let origins: Vec<usize> = match cfg.origin {
        OriginPolicy::Fixed(k) if k == 0 || k >= n => {
            return Err(Error::Precondition(format!(
                "origin {k} outside [1, {}]",
                n - 1
            )));
        }
        OriginPolicy::Fixed(k) => vec![k],
        OriginPolicy::Center => vec![n / 2],
        OriginPolicy::Scan => (1..n).collect(),
    };
    let target = m.canonicalize(0)?.normalized()?;
    let real = is_real_mps(&target);
    let mut residual = target.clone();
    let mut layers: Vec<(Vec<Gate>, LayerInfo)> = Vec::new();
    let mut trace = Vec::new();
    let mut chosen = Vec::new();
    let mut discarded = 0.0;
    let mut warning = false;
    let mut prev = zero_overlap(&residual);
    let mut dropped = 0;

    for layer in 0..cfg.n_layers {
        let (m2, skipped) = chi2_truncation(&residual, cfg.eps_trunc)?;
        let parts: Vec<(usize, LayerParts)> = origins
            .iter()
            .map(|&o| Ok((o, layer_parts(&m2, o, real)?)))
            .collect::<Result<_>>()?;
        let mut analytic: Vec<(usize, Candidate)> = parts
            .iter()
            .enumerate()
            .map(|(i, (o, p))| Ok((i, analytic_candidate(p, *o, &residual, cfg.chi_sim)?)))
            .collect::<Result<_>>()?;
        analytic.sort_by(|a, b| {
            if better(&a.1, &b.1, n) {
                std::cmp::Ordering::Less
            } else if better(&b.1, &a.1, n) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let mut best: Option<Candidate> = None;
        let confirm = if layer == 0 {
            1
        } else {
            SCAN_CONFIRM.min(analytic.len())
        };
        for (i, cand) in analytic.iter().take(confirm) {
            let full = if layer == 0 {
                None
            } else {
                Some(variational_candidate(
                    &parts[*i].1,
                    parts[*i].0,
                    &residual,
                    cfg,
                )?)
            };
            // Keep the analytic central gate when the optimized one is no better.
            let pick = match full {
                Some(f) if !better(cand, &f, n) => f,
                _ => Candidate {
                    origin: cand.origin,
                    gates: cand.gates.clone(),
                    residual: cand.residual.clone(),
                    fidelity: cand.fidelity,
                    discarded: cand.discarded,
                    warning: cand.warning,
                },
            };
            if best.as_ref().is_none_or(|b| better(&pick, b, n)) {
                best = Some(pick);
            }
        }
        let best = best.expect("at least one origin");
        if layer > 0 && best.fidelity < prev - TIE_TOL {
            info!(
                "layer {} lowers the fidelity ({:.6} < {:.6}); stopping",
                layer + 1,
                best.fidelity,
                prev
            );
            dropped = cfg.n_layers - layer;
            break;
        }
        prev = best.fidelity;
        discarded += best.discarded;
        warning |= best.warning;
        chosen.push(best.origin);
        residual = best.residual;
        let info = LayerInfo {
            origin: best.origin,
            start: 0,
            end: best.gates.len(),
            skipped_bonds: skipped,
        };
        layers.push((best.gates, info));
        let circ = assemble(n, &layers)?;
        trace.push(circuit_fidelity(&circ, &target)?);
        debug!(
            "layer {}: origin {}, fidelity {:.10}",
            layer + 1,
            best.origin,
            trace[trace.len() - 1]
        );
    }
    if warning {
        warn!(
            "residual simulation discarded weight {discarded:e}; fidelity trace may be optimistic"
        );
    }
    Ok(Encoding {
        circuit: assemble(n, &layers)?,
        fidelity_trace: trace,
        origins: chosen,
        dropped_layers: dropped,
        discarded_weight: discarded,
        truncation_warning: warning,
        real_mode: real,
    })
}
