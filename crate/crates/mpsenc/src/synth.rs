//! Gate synthesis for MPS site isometries and the central two-qubit gate.
//!
//! Gate lists here act on logical qubits. For four-row inputs logical qubit 0
//! is the ancilla (first factor of the 4-dim basis, starting in `|0⟩`) and
//! logical qubit 1 carries the input.

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{c, svd, unitarity_error, CMat};
use crate::simulate::circuit_unitary;
use crate::C64;

/// Angles below this magnitude are dropped from emitted gate lists.
const ANGLE_EPS: f64 = 1e-14;
/// Required accuracy of every synthesized isometry.
const SYNTH_TOL: f64 = 1e-9;

fn push_rot(out: &mut Vec<Gate>, g: Gate) {
    let keep = match g {
        Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => {
            theta.abs() > ANGLE_EPS
        }
        _ => true,
    };
    if keep {
        out.push(g);
    }
}

/// Euler angles `(α, β, γ)` with `u = e^{iφ} RZ(α) RY(β) RZ(γ)`.
pub fn zyz_angles(u: &CMat) -> (f64, f64, f64) {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let ph = det.sqrt();
    let a = u[(0, 0)] / ph;
    let b = u[(1, 0)] / ph;
    let beta = 2.0 * b.norm().atan2(a.norm());
    let (sum, diff) = if b.norm() < 1e-15 {
        (-2.0 * a.arg(), 0.0)
    } else if a.norm() < 1e-15 {
        (0.0, 2.0 * b.arg())
    } else {
        (-2.0 * a.arg(), 2.0 * b.arg())
    };
    (0.5 * (sum + diff), beta, 0.5 * (sum - diff))
}

/// Gates (in application order) implementing a 2×2 unitary on qubit `q`, up
/// to global phase. Real rotations with positive determinant use RY only.
pub fn one_qubit_unitary(u: &CMat, q: usize, real_mode: bool) -> Result<Vec<Gate>> {
    if unitarity_error(u) > 1e-10 {
        return Err(Error::Precondition("one-qubit gate is not unitary".into()));
    }
    let mut out = Vec::new();
    if real_mode {
        let det = (u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)]).re;
        if det < 0.0 || u.iter().any(|z| z.im.abs() > 1e-12) {
            return Err(Error::Precondition(
                "real mode needs a rotation with determinant +1".into(),
            ));
        }
        push_rot(
            &mut out,
            Gate::ry(q, 2.0 * u[(1, 0)].re.atan2(u[(0, 0)].re)),
        );
        return Ok(out);
    }
    let (alpha, beta, gamma) = zyz_angles(u);
    push_rot(&mut out, Gate::rz(q, gamma));
    push_rot(&mut out, Gate::ry(q, beta));
    push_rot(&mut out, Gate::rz(q, alpha));
    Ok(out)
}

/// Gates preparing the unit vector `v` on qubit `q` from `|0⟩`.
fn prepare_one_qubit(v: [C64; 2], q: usize, real_mode: bool) -> Vec<Gate> {
    let mut out = Vec::new();
    if real_mode {
        push_rot(&mut out, Gate::ry(q, 2.0 * v[1].re.atan2(v[0].re)));
    } else {
        push_rot(&mut out, Gate::ry(q, 2.0 * v[1].norm().atan2(v[0].norm())));
        if v[0].norm() > 1e-15 && v[1].norm() > 1e-15 {
            push_rot(&mut out, Gate::rz(q, v[1].arg() - v[0].arg()));
        }
    }
    out
}

fn small_unitary(gates: &[Gate], n: usize) -> CMat {
    let mut circ = Circuit::new(n);
    circ.gates = gates.to_vec();
    circuit_unitary(&circ).expect("small circuit")
}

/// One-CNOT preparation `P = (U⊗W)·CX(0→1)·(RY(θ)⊗I)` with `P|00⟩ = v`.
struct StatePrep {
    gates: Vec<Gate>,
}

fn prepare_two_qubit(v: &[C64], real_mode: bool) -> Result<StatePrep> {
    let m = CMat::from_row_slice(2, 2, v);
    let d = svd(&m)?;
    let mut u = d.u.clone();
    // W columns are the rows of vh, so that v = Σ s_i u_i ⊗ w_i.
    let mut w = d.vh.transpose();
    let mut s = [d.s[0], d.s[1]];
    if real_mode {
        for mat in [&mut u, &mut w] {
            let det = (mat[(0, 0)] * mat[(1, 1)] - mat[(0, 1)] * mat[(1, 0)]).re;
            if det < 0.0 {
                mat.column_mut(1).neg_mut();
                s[1] = -s[1];
            }
        }
    }
    let mut gates = Vec::new();
    if s[1].abs() < 1e-15 {
        // Product state: no entangling gate needed.
        gates.extend(prepare_one_qubit([u[(0, 0)], u[(1, 0)]], 0, real_mode));
        gates.extend(prepare_one_qubit([w[(0, 0)], w[(1, 0)]], 1, real_mode));
        return Ok(StatePrep { gates });
    }
    push_rot(&mut gates, Gate::ry(0, 2.0 * s[1].atan2(s[0])));
    gates.push(Gate::cnot(0, 1));
    gates.extend(one_qubit_unitary(&u, 0, real_mode)?);
    gates.extend(one_qubit_unitary(&w, 1, real_mode)?);
    Ok(StatePrep { gates })
}

/// Overlap of `P|10⟩` with `vp`, the obstruction to a two-CNOT completion.
fn real_obstruction(v: &[C64], vp: &[C64]) -> Result<f64> {
    let prep = prepare_two_qubit(v, true)?;
    let p = small_unitary(&prep.gates, 2);
    Ok((0..4).map(|r| p[(r, 2)].re * vp[r].re).sum())
}

fn columns(vm: &CMat, coef: [C64; 2]) -> Vec<C64> {
    (0..4)
        .map(|r| vm[(r, 0)] * coef[0] + vm[(r, 1)] * coef[1])
        .collect()
}

/// Real root of the obstruction along `c = (cos φ, sin φ)`.
fn real_root(vm: &CMat) -> Result<Option<f64>> {
    let f = |phi: f64| -> Result<f64> {
        let (s, co) = phi.sin_cos();
        let v = columns(vm, [c(co), c(s)]);
        let vp = columns(vm, [c(-s), c(co)]);
        real_obstruction(&v, &vp)
    };
    let n = 60;
    let pts: Vec<f64> = (0..=n)
        .map(|i| std::f64::consts::PI * i as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect::<Result<_>>()?;
    for i in 0..n {
        if vals[i] == 0.0 {
            return Ok(Some(pts[i]));
        }
        if vals[i].signum() != vals[i + 1].signum() {
            // Illinois false position, falling back to bisection steps.
            let (mut a, mut b, mut fa, mut fb) = (pts[i], pts[i + 1], vals[i], vals[i + 1]);
            let mut side = 0;
            for _ in 0..200 {
                let mut x = (a * fb - b * fa) / (fb - fa);
                if !(x > a && x < b) {
                    x = 0.5 * (a + b);
                }
                let fx = f(x)?;
                if fx.abs() < 1e-15 || (b - a) < 1e-15 {
                    a = x;
                    fa = fx;
                    break;
                }
                if fx.signum() == fa.signum() {
                    a = x;
                    fa = fx;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                } else {
                    b = x;
                    fb = fx;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                }
            }
            if fa.abs() < 1e-12 {
                return Ok(Some(a));
            }
        }
    }
    Ok(None)
}

/// Complex root over `c = (cos t, e^{iψ} sin t)` by Levenberg–Marquardt from a start grid.
fn complex_root(vm: &CMat, grid: usize) -> Result<Option<(f64, f64)>> {
    let coef = |t: f64, psi: f64| [c(t.cos()), C64::from_polar(t.sin(), psi)];
    let resid = |x: [f64; 2]| -> Result<C64> {
        let k = coef(x[0], x[1]);
        let v = columns(vm, k);
        let vp = columns(vm, [-k[1].conj(), k[0].conj()]);
        // ⟨P|10⟩|vp⟩ with P|10⟩ = −s₁ u₀⊗w₀ + s₀ u₁⊗w₁, which is gauge invariant.
        let d = svd(&CMat::from_row_slice(2, 2, &v))?;
        let s1 = d.s.get(1).copied().unwrap_or(0.0);
        let mut beta = c(0.0);
        for a in 0..2 {
            for b in 0..2 {
                let t = d.u[(a, 0)] * d.vh[(0, b)] * (-s1) + d.u[(a, 1)] * d.vh[(1, b)] * d.s[0];
                beta += t.conj() * vp[a * 2 + b];
            }
        }
        Ok(beta)
    };
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..grid {
        for j in 0..grid {
            let mut x = [
                0.05 + (1.5 - 0.05) * i as f64 / (grid - 1) as f64,
                2.0 * std::f64::consts::PI * j as f64 / grid as f64,
            ];
            let mut r = resid(x)?;
            let mut mu = 1e-3;
            for _ in 0..60 {
                if r.norm() < 1e-15 {
                    break;
                }
                let h = 1e-7;
                let mut jac = [[0.0; 2]; 2];
                for k in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let d = (resid(xp)? - resid(xm)?) / (2.0 * h);
                    jac[0][k] = d.re;
                    jac[1][k] = d.im;
                }
                // (JᵀJ + μI) δ = −Jᵀr
                let rv = [r.re, r.im];
                let mut a = [[0.0; 2]; 2];
                let mut g = [0.0; 2];
                for p in 0..2 {
                    for q in 0..2 {
                        a[p][q] = jac[0][p] * jac[0][q] + jac[1][p] * jac[1][q];
                    }
                    g[p] = -(jac[0][p] * rv[0] + jac[1][p] * rv[1]);
                }
                let mut improved = false;
                for _ in 0..10 {
                    let (a00, a11) = (a[0][0] + mu, a[1][1] + mu);
                    let det = a00 * a11 - a[0][1] * a[1][0];
                    if det.abs() < 1e-300 {
                        mu *= 10.0;
                        continue;
                    }
                    let dx = [
                        (g[0] * a11 - a[0][1] * g[1]) / det,
                        (a00 * g[1] - a[1][0] * g[0]) / det,
                    ];
                    let xn = [x[0] + dx[0], x[1] + dx[1]];
                    let rn = resid(xn)?;
                    if rn.norm() < r.norm() {
                        x = xn;
                        r = rn;
                        mu = (mu * 0.3).max(1e-12);
                        improved = true;
                        break;
                    }
                    mu *= 10.0;
                }
                if !improved {
                    break;
                }
            }
            if best.is_none_or(|b| r.norm() < b.1) {
                best = Some((x, r.norm()));
            }
            if r.norm() < 1e-13 {
                return Ok(Some((x[0], x[1])));
            }
        }
    }
    Ok(best.filter(|b| b.1 < 1e-12).map(|b| (b.0[0], b.0[1])))
}

/// Largest deviation of `gates` from `v` on the input subspace, after
/// aligning the global phase.
pub fn isometry_error(gates: &[Gate], v: &CMat) -> f64 {
    let rows = v.nrows();
    let n = if rows == 4 { 2 } else { 1 };
    let g = small_unitary(gates, n);
    let cols = v.ncols();
    let mut ov = c(0.0);
    for j in 0..cols {
        for r in 0..rows {
            ov += g[(r, j)].conj() * v[(r, j)];
        }
    }
    let phase = if ov.norm() > 0.0 {
        ov / ov.norm()
    } else {
        c(1.0)
    };
    let mut err: f64 = 0.0;
    for j in 0..cols {
        for r in 0..rows {
            err = err.max((g[(r, j)] * phase - v[(r, j)]).norm());
        }
    }
    err
}

/// Gates `G` with `G(|0⟩_anc ⊗ |x⟩) = V x` up to global phase, for `V` of
/// shape 4×2, 4×1, 2×2 or 2×1. Two CNOTs at most; `real_mode` restricts
/// rotations to RY and expects a real `V`.
pub fn synthesize_isometry(v: &CMat, real_mode: bool) -> Result<Vec<Gate>> {
    let (rows, cols) = v.shape();
    if !matches!((rows, cols), (4, 2) | (4, 1) | (2, 2) | (2, 1)) {
        return Err(Error::Precondition(format!(
            "unsupported isometry shape {rows}x{cols}"
        )));
    }
    if unitarity_error(v) > 1e-10 {
        return Err(Error::Precondition("input is not an isometry".into()));
    }
    if real_mode && v.iter().any(|z| z.im.abs() > 1e-12) {
        return Err(Error::Precondition(
            "real mode with complex isometry".into(),
        ));
    }
    let gates = match (rows, cols) {
        (2, 1) => prepare_one_qubit([v[(0, 0)], v[(1, 0)]], 0, real_mode),
        (2, 2) => one_qubit_unitary(v, 0, real_mode)?,
        (4, 1) => prepare_two_qubit(v.as_slice(), real_mode)?.gates,
        _ => synthesize_4x2(v, real_mode)?,
    };
    let err = isometry_error(&gates, v);
    if err > SYNTH_TOL {
        return Err(Error::Numerical(format!(
            "isometry synthesis error {err:e}"
        )));
    }
    Ok(gates)
}

fn synthesize_4x2(v: &CMat, real_mode: bool) -> Result<Vec<Gate>> {
    // Product case: the ancilla ends in a fixed state.
    let stacked = CMat::from_fn(2, 4, |a, k| v[(a * 2 + k % 2, k / 2)]);
    let d = svd(&stacked)?;
    if d.s[1] < 1e-13 {
        let psi = [d.u[(0, 0)], d.u[(1, 0)]];
        let u = CMat::from_fn(2, 2, |s, j| {
            psi[0].conj() * v[(s, j)] + psi[1].conj() * v[(2 + s, j)]
        });
        if let Ok(gu) = one_qubit_unitary(&u, 1, real_mode) {
            let mut out = gu;
            out.extend(prepare_one_qubit(psi, 0, real_mode));
            if isometry_error(&out, v) < SYNTH_TOL {
                return Ok(out);
            }
        }
    }

    if let Some(out) = completion_construction(v, real_mode)? {
        if isometry_error(&out, v) < SYNTH_TOL {
            return Ok(out);
        }
    }
    // Near one-CNOT isometries the completion has no root; fit the canonical form instead.
    fit_two_cnot(v, real_mode)
        .ok_or_else(|| Error::Numerical("no two-CNOT realization found".into()))
}

/// `P` prepares `V c` with one CNOT and a second CNOT maps the orthogonal
/// column, for a `c` where the obstruction vanishes.
fn completion_construction(v: &CMat, real_mode: bool) -> Result<Option<Vec<Gate>>> {
    let coef = if real_mode {
        match real_root(v)? {
            Some(phi) => [c(phi.cos()), c(phi.sin())],
            None => return Ok(None),
        }
    } else {
        let root = match complex_root(v, 8)? {
            Some(r) => Some(r),
            None => complex_root(v, 16)?,
        };
        match root {
            Some((t, psi)) => [c(t.cos()), C64::from_polar(t.sin(), psi)],
            None => return Ok(None),
        }
    };
    let vc = columns(v, coef);
    let vp = columns(v, [-coef[1].conj(), coef[0].conj()]);
    let prep = prepare_two_qubit(&vc, real_mode)?;
    let p = small_unitary(&prep.gates, 2);
    let w: Vec<C64> = (0..4)
        .map(|r| (0..4).map(|k| p[(k, r)].conj() * vp[k]).sum())
        .collect();

    // W1 maps |01⟩ to w inside span{|01⟩, |11⟩} and fixes |00⟩.
    let mut w1 = Vec::new();
    if w[3].norm() > 1e-14 {
        if real_mode {
            let t = w[1].re.atan2(w[3].re);
            push_rot(&mut w1, Gate::ry(0, t));
            w1.push(Gate::cnot(1, 0));
            push_rot(&mut w1, Gate::ry(0, -t));
        } else {
            let t = w[1].norm().atan2(w[3].norm());
            let a1 = if w[1].norm() > 1e-15 { w[1].arg() } else { 0.0 };
            let lam = -(w[3].arg() - a1);
            push_rot(&mut w1, Gate::rz(0, lam));
            push_rot(&mut w1, Gate::ry(0, t));
            w1.push(Gate::cnot(1, 0));
            push_rot(&mut w1, Gate::ry(0, -t));
            push_rot(&mut w1, Gate::rz(0, -lam));
        }
    }
    let mut tail = w1;
    tail.extend(prep.gates);
    let wm = small_unitary(&tail, 2);
    // Input-side correction X = W[:, :2]† V.
    let x = CMat::from_fn(2, 2, |i, j| {
        (0..4).map(|r| wm[(r, i)].conj() * v[(r, j)]).sum()
    });
    let mut out = match one_qubit_unitary(&x, 1, real_mode) {
        Ok(g) => g,
        Err(_) => return Ok(None),
    };
    out.extend(tail);
    Ok(Some(out))
}

/// Phase-aligned residual of `gates` against `v`, as real components.
fn isometry_residual(gates: &[Gate], v: &CMat, out: &mut Vec<f64>) {
    let g = small_unitary(gates, 2);
    let mut ov = c(0.0);
    for j in 0..v.ncols() {
        for r in 0..4 {
            ov += g[(r, j)].conj() * v[(r, j)];
        }
    }
    let phase = if ov.norm() > 0.0 {
        ov / ov.norm()
    } else {
        c(1.0)
    };
    out.clear();
    for j in 0..v.ncols() {
        for r in 0..4 {
            let d = g[(r, j)] * phase - v[(r, j)];
            out.push(d.re);
            out.push(d.im);
        }
    }
}

/// Levenberg–Marquardt fit of the two-CNOT ansatz (both CNOT orientations)
/// from deterministic starting points.
fn fit_two_cnot(v: &CMat, real_mode: bool) -> Option<Vec<Gate>> {
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;
    let np = ansatz_len(real_mode);
    let build = |p: &[f64], flip: bool| -> Vec<Gate> {
        let g = ansatz_gates(p, real_mode).expect("length matches");
        if flip {
            g.into_iter().map(|g| g.remapped(&[1, 0])).collect()
        } else {
            g
        }
    };
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x15e7);
    let (mut r, mut rp) = (Vec::new(), Vec::new());
    for start in 0..48 {
        let flip = start % 2 == 1;
        let mut x: Vec<f64> = (0..np).map(|_| rng.random_range(-PI..PI)).collect();
        isometry_residual(&build(&x, flip), v, &mut r);
        let mut cost = sq(&r);
        let mut mu = 1e-3;
        for _ in 0..200 {
            if cost < 1e-26 {
                break;
            }
            let m = r.len();
            let mut jac = nalgebra::DMatrix::<f64>::zeros(m, np);
            for k in 0..np {
                let h = 1e-7;
                let mut xp = x.clone();
                xp[k] += h;
                isometry_residual(&build(&xp, flip), v, &mut rp);
                let mut xm = x.clone();
                xm[k] -= h;
                let mut rm = Vec::new();
                isometry_residual(&build(&xm, flip), v, &mut rm);
                for i in 0..m {
                    jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let rv = nalgebra::DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let g = -(jac.transpose() * rv);
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for k in 0..np {
                    a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
                }
                let Some(dx) = a.lu().solve(&g) else {
                    mu *= 10.0;
                    continue;
                };
                let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
                isometry_residual(&build(&xn, flip), v, &mut rp);
                let cn = sq(&rp);
                if cn < cost {
                    x = xn;
                    std::mem::swap(&mut r, &mut rp);
                    cost = cn;
                    mu = (mu * 0.3).max(1e-15);
                    improved = true;
                    break;
                }
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let gates = build(&x, flip);
        if isometry_error(&gates, v) < SYNTH_TOL * 0.1 {
            return Some(
                gates
                    .into_iter()
                    .filter(|g| !is_trivial_rotation(g))
                    .collect(),
            );
        }
    }
    None
}

fn is_trivial_rotation(g: &Gate) -> bool {
    match g {
        Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => {
            theta.abs() < ANGLE_EPS
        }
        _ => false,
    }
}

/// How the central gate is built.
#[derive(Clone, Debug, PartialEq)]
pub enum ULambdaMode {
    /// `RY(2·atan2(Λ₂, Λ₁))` then one CNOT.
    FirstLayer,
    /// Two-CNOT ansatz with the given parameters.
    Variational(Vec<f64>),
}

/// Number of ansatz parameters.
pub fn ansatz_len(real_mode: bool) -> usize {
    if real_mode {
        6
    } else {
        14
    }
}

/// Two-CNOT ansatz on logical qubits (0, 1):
/// `[local] · CX · [mid] · CX · [local]` with RZ–RY–RZ local blocks
/// (RY only in real mode) and a middle RY on qubit 0 and RZ (RY in real mode)
/// on qubit 1.
pub fn ansatz_gates(params: &[f64], real_mode: bool) -> Result<Vec<Gate>> {
    if params.len() != ansatz_len(real_mode) {
        return Err(Error::LengthMismatch(params.len(), ansatz_len(real_mode)));
    }
    let mut out = Vec::new();
    let p = params;
    if real_mode {
        push_rot(&mut out, Gate::ry(0, p[0]));
        push_rot(&mut out, Gate::ry(1, p[1]));
        out.push(Gate::cnot(0, 1));
        push_rot(&mut out, Gate::ry(0, p[2]));
        push_rot(&mut out, Gate::ry(1, p[3]));
        out.push(Gate::cnot(0, 1));
        push_rot(&mut out, Gate::ry(0, p[4]));
        push_rot(&mut out, Gate::ry(1, p[5]));
    } else {
        let block = |out: &mut Vec<Gate>, q: usize, a: &[f64]| {
            push_rot(out, Gate::rz(q, a[0]));
            push_rot(out, Gate::ry(q, a[1]));
            push_rot(out, Gate::rz(q, a[2]));
        };
        block(&mut out, 0, &p[0..3]);
        block(&mut out, 1, &p[3..6]);
        out.push(Gate::cnot(0, 1));
        push_rot(&mut out, Gate::ry(0, p[6]));
        push_rot(&mut out, Gate::rz(1, p[7]));
        out.push(Gate::cnot(0, 1));
        block(&mut out, 0, &p[8..11]);
        block(&mut out, 1, &p[11..14]);
    }
    Ok(out)
}

/// Ansatz parameters reproducing `|00⟩ ↦ cos(θ/2)|00⟩ + sin(θ/2)|11⟩`.
pub fn ansatz_init(theta: f64, real_mode: bool) -> Vec<f64> {
    let mut p = vec![0.0; ansatz_len(real_mode)];
    p[if real_mode { 2 } else { 6 }] = theta;
    p
}

/// Angle `θ = 2·atan2(Λ₂, Λ₁)` of the first-layer central gate.
pub fn u_lambda_angle(lambda: &[f64]) -> f64 {
    let l2 = lambda.get(1).copied().unwrap_or(0.0);
    2.0 * l2.atan2(lambda[0])
}

/// Central gate preparing `Σ_i Λ_i |ii⟩` from `|00⟩` (first-layer mode) or
/// the variational ansatz.
pub fn synthesize_u_lambda(
    lambda: &[f64],
    mode: &ULambdaMode,
    real_mode: bool,
) -> Result<Vec<Gate>> {
    match mode {
        ULambdaMode::FirstLayer => {
            if lambda.is_empty() || lambda.len() > 2 {
                return Err(Error::Precondition(format!(
                    "central gate needs 1 or 2 values, got {}",
                    lambda.len()
                )));
            }
            let theta = u_lambda_angle(lambda);
            let mut out = Vec::new();
            if theta.abs() > ANGLE_EPS {
                out.push(Gate::ry(0, theta));
                out.push(Gate::cnot(0, 1));
            }
            Ok(out)
        }
        ULambdaMode::Variational(p) => ansatz_gates(p, real_mode),
    }
}

/// 4×4 matrix of a logical two-qubit gate list.
pub fn two_qubit_matrix(gates: &[Gate]) -> CMat {
    small_unitary(gates, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_isometry(rows: usize, cols: usize, real: bool, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMat::from_fn(rows, cols, |_, _| {
            let re = rng.random::<f64>() - 0.5;
            let im = if real { 0.0 } else { rng.random::<f64>() - 0.5 };
            C64::new(re, im)
        });
        let qr = m.qr();
        qr.q().columns(0, cols).into_owned()
    }

    fn cnots(g: &[Gate]) -> usize {
        g.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    #[test]
    fn zyz_reconstructs() {
        for seed in 0..20 {
            let u = random_isometry(2, 2, false, seed);
            let gates = one_qubit_unitary(&u, 0, false).unwrap();
            assert!(isometry_error(&gates, &u) < 1e-12);
        }
        let id = CMat::identity(2, 2);
        assert!(one_qubit_unitary(&id, 0, false).unwrap().is_empty());
        let refl = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert!(one_qubit_unitary(&refl, 0, true).is_err());
    }

    #[test]
    fn identity_embedding_needs_no_gates() {
        let mut v = CMat::zeros(4, 2);
        v[(0, 0)] = c(1.0);
        v[(1, 1)] = c(1.0);
        assert!(synthesize_isometry(&v, true).unwrap().is_empty());
        assert!(synthesize_isometry(&v, false).unwrap().is_empty());
    }

    #[test]
    fn product_isometry_needs_no_cnot() {
        // Ancilla rotated to (0.6, 0.8), input passed through RY(0.4).
        let r = Gate::ry(0, 0.4).matrix1().unwrap();
        let v = CMat::from_fn(4, 2, |row, j| {
            let anc = [0.6, 0.8][row / 2];
            r[row % 2][j] * anc
        });
        let g = synthesize_isometry(&v, true).unwrap();
        assert_eq!(cnots(&g), 0);
    }

    #[test]
    fn random_real_isometries() {
        for seed in 0..60 {
            let v = random_isometry(4, 2, true, seed);
            let g = synthesize_isometry(&v, true).unwrap();
            assert!(cnots(&g) <= 2);
            assert!(g
                .iter()
                .all(|g| matches!(g, Gate::Ry { .. } | Gate::Cnot { .. })));
            let m = two_qubit_matrix(&g);
            assert!(m.iter().all(|z| z.im.abs() < 1e-12));
            assert!(isometry_error(&g, &v) < 1e-10);
        }
    }

    #[test]
    fn random_complex_isometries() {
        for seed in 0..25 {
            let v = random_isometry(4, 2, false, 100 + seed);
            let g = synthesize_isometry(&v, false).unwrap();
            assert!(cnots(&g) <= 2);
            assert!(isometry_error(&g, &v) < 1e-10);
        }
    }

    #[test]
    fn state_preparations() {
        for real in [true, false] {
            for seed in 0..10 {
                let v = random_isometry(4, 1, real, 300 + seed);
                let g = synthesize_isometry(&v, real).unwrap();
                assert!(cnots(&g) <= 1);
                let v = random_isometry(2, 1, real, 400 + seed);
                let g = synthesize_isometry(&v, real).unwrap();
                assert_eq!(cnots(&g), 0);
            }
        }
        let mut e = CMat::zeros(4, 1);
        e[(0, 0)] = c(-1.0);
        assert!(isometry_error(&synthesize_isometry(&e, true).unwrap(), &e) < 1e-14);
    }

    #[test]
    fn rejects_non_isometries() {
        let m = CMat::from_element(4, 2, c(0.5));
        assert!(synthesize_isometry(&m, false).is_err());
        assert!(synthesize_isometry(&CMat::identity(3, 3), false).is_err());
    }

    #[test]
    fn u_lambda_examples() {
        assert!(
            synthesize_u_lambda(&[1.0, 0.0], &ULambdaMode::FirstLayer, true)
                .unwrap()
                .is_empty()
        );
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let g = synthesize_u_lambda(&[h, h], &ULambdaMode::FirstLayer, true).unwrap();
        assert_eq!(g[0], Gate::ry(0, std::f64::consts::FRAC_PI_2));
        let g = synthesize_u_lambda(
            &[0.9f64.sqrt(), 0.1f64.sqrt()],
            &ULambdaMode::FirstLayer,
            true,
        )
        .unwrap();
        let m = two_qubit_matrix(&g);
        for (r, e) in [0.9f64.sqrt(), 0.0, 0.0, 0.1f64.sqrt()].iter().enumerate() {
            assert!((m[(r, 0)] - c(*e)).norm() < 1e-15);
        }
    }

    #[test]
    fn ansatz_init_matches_first_layer() {
        for real in [true, false] {
            let theta = 0.7;
            let g = ansatz_gates(&ansatz_init(theta, real), real).unwrap();
            assert_eq!(cnots(&g), 2);
            let m = two_qubit_matrix(&g);
            let (s, co) = (0.5 * theta).sin_cos();
            assert!((m[(0, 0)] - c(co)).norm() < 1e-14);
            assert!((m[(3, 0)] - c(s)).norm() < 1e-14);
        }
        assert!(ansatz_gates(&[0.0; 5], true).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn real_isometries_always_synthesize(seed in 1000u64..100000) {
            let v = random_isometry(4, 2, true, seed);
            let g = synthesize_isometry(&v, true).unwrap();
            prop_assert!(cnots(&g) <= 2);
            prop_assert!(isometry_error(&g, &v) < 1e-10);
        }

        #[test]
        fn ansatz_is_unitary(p in proptest::collection::vec(-6.0f64..6.0, 14)) {
            let m = two_qubit_matrix(&ansatz_gates(&p, false).unwrap());
            prop_assert!(unitarity_error(&m) < 1e-12);
        }
    }

    #[test]
    fn near_cnot_isometries_fall_back_to_the_fitted_form() {
        // |0⟩|x⟩ ↦ ±|x⟩|x⟩ with a small perturbation: the completion has no root here.
        let e: f64 = 2.891465099410121e-7;
        let a: f64 = (1.0 - e * e).sqrt();
        for (sign, real) in [(-1.0, true), (1.0, false), (-1.0, false)] {
            let v = CMat::from_column_slice(
                4,
                2,
                &[
                    c(a),
                    c(0.0),
                    c(0.0),
                    c(e),
                    c(-e * sign),
                    c(0.0),
                    c(0.0),
                    c(a * sign),
                ],
            );
            let g = synthesize_isometry(&v, real).unwrap();
            assert!(isometry_error(&g, &v) < 1e-9);
            assert!(g.iter().filter(|g| g.is_two_qubit()).count() <= 2);
            if real {
                assert!(g
                    .iter()
                    .all(|g| matches!(g, Gate::Ry { .. } | Gate::Cnot { .. })));
            }
        }
    }
}
