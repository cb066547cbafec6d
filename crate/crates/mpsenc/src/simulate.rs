//! Statevector and MPS circuit execution, and bitstring sampling.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::funcspace::DENSE_MAX_QUBITS;
use crate::linalg::{c, kept_rank, svd, CMat};
use crate::mps::{Mps, Tensor3, SCHMIDT_FLOOR};
use crate::C64;

/// Cumulative discarded weight above which a simulation result is flagged.
pub const DISCARDED_WARNING: f64 = 1e-6;

/// Largest register for which a full circuit unitary is built.
pub const UNITARY_MAX_QUBITS: usize = 12;

#[derive(Clone, Debug)]
pub enum QuantumState {
    Dense(Vec<C64>),
    Mps(Mps),
}

impl QuantumState {
    pub fn zero(n_qubits: usize, dense: bool) -> Result<Self> {
        if dense {
            if n_qubits > DENSE_MAX_QUBITS {
                return Err(Error::SizeLimit(format!(
                    "dense state of {n_qubits} qubits"
                )));
            }
            let mut v = vec![c(0.0); 1usize << n_qubits];
            v[0] = c(1.0);
            Ok(QuantumState::Dense(v))
        } else {
            Ok(QuantumState::Mps(Mps::zero_state(n_qubits)?))
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Dense(v) => v.len().trailing_zeros() as usize,
            QuantumState::Mps(m) => m.n_qubits(),
        }
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        match self {
            QuantumState::Dense(v) => Ok(v.clone()),
            QuantumState::Mps(m) => m.to_dense(),
        }
    }

    pub fn to_mps(&self) -> Result<Mps> {
        match self {
            QuantumState::Dense(v) => crate::mps::mps_from_vector(v, usize::MAX, 0.0),
            QuantumState::Mps(m) => Ok(m.clone()),
        }
    }
}

/// Output of [`apply_circuit`].
#[derive(Clone, Debug)]
pub struct Applied {
    pub state: QuantumState,
    /// Sum of relative weights dropped by χ truncation (MPS path only).
    pub discarded_weight: f64,
    /// Set when `discarded_weight` exceeds [`DISCARDED_WARNING`].
    pub truncation_warning: bool,
}

/// Applies a one-qubit gate to a dense state in place.
fn apply_1q(v: &mut [C64], n: usize, q: usize, m: &[[C64; 2]; 2]) {
    let bit = 1usize << (n - 1 - q);
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// Applies a two-qubit gate with matrix in basis `|qa qb⟩`.
fn apply_2q(v: &mut [C64], n: usize, qa: usize, qb: usize, m: &CMat) {
    let (ba, bb) = (1usize << (n - 1 - qa), 1usize << (n - 1 - qb));
    for i in 0..v.len() {
        if i & ba == 0 && i & bb == 0 {
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let old = idx.map(|j| v[j]);
            for r in 0..4 {
                let mut acc = c(0.0);
                for (k, o) in old.iter().enumerate() {
                    acc += m[(r, k)] * o;
                }
                v[idx[r]] = acc;
            }
        }
    }
}

fn apply_gate_dense(v: &mut [C64], n: usize, g: &Gate) {
    if let Some(m) = g.matrix1() {
        apply_1q(v, n, g.qubits()[0], &m);
    } else {
        let qs = g.qubits();
        apply_2q(v, n, qs[0], qs[1], &g.matrix2().expect("two-qubit gate"));
    }
}

/// Final state of a circuit acting on `|0…0⟩`, as a dense vector.
pub fn circuit_state_dense(circ: &Circuit) -> Result<Vec<C64>> {
    match apply_circuit(circ, QuantumState::zero(circ.n_qubits, true)?, usize::MAX)?.state {
        QuantumState::Dense(v) => Ok(v),
        QuantumState::Mps(_) => unreachable!("dense input stays dense"),
    }
}

/// Full unitary of a small circuit; column `j` is the image of basis state `j`.
pub fn circuit_unitary(circ: &Circuit) -> Result<CMat> {
    let n = circ.n_qubits;
    if n > UNITARY_MAX_QUBITS {
        return Err(Error::SizeLimit(format!("unitary of {n} qubits")));
    }
    let dim = 1usize << n;
    let mut u = CMat::zeros(dim, dim);
    for j in 0..dim {
        let mut v = vec![c(0.0); dim];
        v[j] = c(1.0);
        for g in &circ.gates {
            apply_gate_dense(&mut v, n, g);
        }
        for (i, z) in v.into_iter().enumerate() {
            u[(i, j)] = z;
        }
    }
    Ok(u)
}

/// Mixed-canonical MPS under gate evolution.
struct MpsSim {
    ts: Vec<Tensor3>,
    center: usize,
    chi_max: usize,
    discarded: f64,
}

impl MpsSim {
    fn new(m: &Mps, chi_max: usize) -> Result<Self> {
        let m = m.canonicalize(0)?.normalized()?;
        Ok(Self {
            ts: m.into_tensors(),
            center: 0,
            chi_max,
            discarded: 0.0,
        })
    }

    fn move_center(&mut self, target: usize) {
        while self.center < target {
            let j = self.center;
            let qr = self.ts[j].left_matrix().qr();
            let (q, r) = (qr.q(), qr.r());
            self.ts[j] = Tensor3::from_left_matrix(&q);
            self.ts[j + 1] = Tensor3::times_left(&r, &self.ts[j + 1]);
            self.center += 1;
        }
        while self.center > target {
            let j = self.center;
            let qr = self.ts[j].right_matrix().adjoint().qr();
            let (q, r) = (qr.q(), qr.r());
            self.ts[j] = Tensor3::from_right_matrix(&q.adjoint());
            self.ts[j - 1] = self.ts[j - 1].times_right(&r.adjoint());
            self.center -= 1;
        }
    }

    fn apply_1q(&mut self, q: usize, m: &[[C64; 2]; 2]) {
        let t = &mut self.ts[q];
        for l in 0..t.dl {
            for r in 0..t.dr {
                let (a, b) = (t.get(l, 0, r), t.get(l, 1, r));
                t.set(l, 0, r, m[0][0] * a + m[0][1] * b);
                t.set(l, 1, r, m[1][0] * a + m[1][1] * b);
            }
        }
    }

    /// Gate on sites `(j, j+1)` with matrix in basis `|s_j s_{j+1}⟩`.
    fn apply_2q(&mut self, j: usize, m: &CMat) -> Result<()> {
        self.move_center(j);
        let (a, b) = (&self.ts[j], &self.ts[j + 1]);
        let (dl, dm, dr) = (a.dl, a.dr, b.dr);
        // theta[(l, s1), (s2, r)]
        let mut theta = CMat::zeros(2 * dl, 2 * dr);
        for l in 0..dl {
            for s1 in 0..2 {
                for k in 0..dm {
                    let x = a.get(l, s1, k);
                    if x == c(0.0) {
                        continue;
                    }
                    for s2 in 0..2 {
                        for r in 0..dr {
                            theta[(l * 2 + s1, s2 * dr + r)] += x * b.get(k, s2, r);
                        }
                    }
                }
            }
        }
        let mut out = CMat::zeros(2 * dl, 2 * dr);
        for l in 0..dl {
            for r in 0..dr {
                let old = [
                    theta[(l * 2, r)],
                    theta[(l * 2, dr + r)],
                    theta[(l * 2 + 1, r)],
                    theta[(l * 2 + 1, dr + r)],
                ];
                for row in 0..4 {
                    let mut acc = c(0.0);
                    for (k, o) in old.iter().enumerate() {
                        acc += m[(row, k)] * o;
                    }
                    out[(l * 2 + row / 2, (row % 2) * dr + r)] = acc;
                }
            }
        }
        let d = svd(&out)?;
        let total: f64 = d.s.iter().map(|x| x * x).sum();
        let keep = kept_rank(&d.s, self.chi_max, 0.0, SCHMIDT_FLOOR);
        if total > 0.0 {
            self.discarded += d.s[keep..].iter().map(|x| x * x).sum::<f64>() / total;
        }
        let d = d.truncated(keep);
        self.ts[j] = Tensor3::from_left_matrix(&d.u);
        let mut sv = d.vh.clone();
        for (i, &s) in d.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        self.ts[j + 1] = Tensor3::from_right_matrix(&sv);
        self.center = j + 1;
        Ok(())
    }

    fn apply(&mut self, g: &Gate) -> Result<()> {
        if let Some(m) = g.matrix1() {
            self.apply_1q(g.qubits()[0], &m);
            return Ok(());
        }
        let qs = g.qubits();
        let m = g.matrix2().expect("two-qubit gate");
        if qs[1] == qs[0] + 1 {
            self.apply_2q(qs[0], &m)
        } else if qs[0] == qs[1] + 1 {
            // Reorder to |s_j s_{j+1}⟩ by conjugating with SWAP.
            let p = [0usize, 2, 1, 3];
            let swapped = CMat::from_fn(4, 4, |r, k| m[(p[r], p[k])]);
            self.apply_2q(qs[1], &swapped)
        } else {
            Err(Error::Unsupported(format!(
                "non-adjacent two-qubit gate on {qs:?}"
            )))
        }
    }

    fn finish(mut self) -> Result<Mps> {
        // Renormalize at the centre to undo truncation losses.
        let t = &mut self.ts[self.center];
        let n2: f64 = t.data.iter().map(|z| z.norm_sqr()).sum();
        if !(n2 > 0.0) {
            return Err(Error::Degenerate("state vanished during simulation".into()));
        }
        let f = 1.0 / n2.sqrt();
        for z in &mut t.data {
            *z *= f;
        }
        Mps::from_canonical_tensors(self.ts, self.center)
    }
}

/// Applies `circ` to `init`. The MPS path truncates each two-qubit update to
/// `chi_sim` and renormalizes at the end.
pub fn apply_circuit(circ: &Circuit, init: QuantumState, chi_sim: usize) -> Result<Applied> {
    if init.n_qubits() != circ.n_qubits {
        return Err(Error::LengthMismatch(init.n_qubits(), circ.n_qubits));
    }
    match init {
        QuantumState::Dense(mut v) => {
            let n = circ.n_qubits;
            for g in &circ.gates {
                apply_gate_dense(&mut v, n, g);
            }
            Ok(Applied {
                state: QuantumState::Dense(v),
                discarded_weight: 0.0,
                truncation_warning: false,
            })
        }
        QuantumState::Mps(m) => {
            let mut sim = MpsSim::new(&m, chi_sim.max(1))?;
            for g in &circ.gates {
                sim.apply(g)?;
            }
            let discarded = sim.discarded;
            let warn_flag = discarded > DISCARDED_WARNING;
            if warn_flag {
                warn!("MPS simulation discarded weight {discarded:e} at chi = {chi_sim}");
            }
            Ok(Applied {
                state: QuantumState::Mps(sim.finish()?),
                discarded_weight: discarded,
                truncation_warning: warn_flag,
            })
        }
    }
}

/// Shot counts keyed by big-endian bitstring value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub n_qubits: usize,
    pub shots: u64,
    pub counts: BTreeMap<u64, u64>,
}

fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Draws `shots` bitstrings from `|amplitude|²`; shot `i` uses its own
/// generator stream keyed by `(seed, i)`.
pub fn sample(state: &QuantumState, shots: u64, seed: u64) -> Result<Histogram> {
    let n = state.n_qubits();
    let mut counts = BTreeMap::new();
    match state {
        QuantumState::Dense(v) => {
            let mut cdf = Vec::with_capacity(v.len());
            let mut acc = 0.0;
            for z in v {
                acc += z.norm_sqr();
                cdf.push(acc);
            }
            if !(acc > 0.0) {
                return Err(Error::Degenerate("cannot sample a zero state".into()));
            }
            for shot in 0..shots {
                let u = shot_rng(seed, shot).random::<f64>() * acc;
                let i = cdf.partition_point(|&c| c <= u).min(v.len() - 1);
                *counts.entry(i as u64).or_insert(0) += 1;
            }
        }
        QuantumState::Mps(m) => {
            let m = m.canonicalize(0)?;
            let ts = m.tensors();
            for shot in 0..shots {
                let mut rng = shot_rng(seed, shot);
                let mut env = vec![c(1.0)];
                let mut index = 0u64;
                for t in ts {
                    let branch = |s: usize| -> Vec<C64> {
                        let mut out = vec![c(0.0); t.dr];
                        for (l, &x) in env.iter().enumerate() {
                            for (r, o) in out.iter_mut().enumerate() {
                                *o += x * t.get(l, s, r);
                            }
                        }
                        out
                    };
                    let (v0, v1) = (branch(0), branch(1));
                    let p0: f64 = v0.iter().map(|z| z.norm_sqr()).sum();
                    let p1: f64 = v1.iter().map(|z| z.norm_sqr()).sum();
                    let s = usize::from(rng.random::<f64>() * (p0 + p1) >= p0);
                    let (v, p) = if s == 0 { (v0, p0) } else { (v1, p1) };
                    let f = 1.0 / p.sqrt();
                    env = v.into_iter().map(|z| z * f).collect();
                    index = (index << 1) | s as u64;
                }
                *counts.entry(index).or_insert(0) += 1;
            }
        }
    }
    Ok(Histogram {
        n_qubits: n,
        shots,
        counts,
    })
}

impl Histogram {
    /// Grid points `x = L·index/2^N` of every shot, in bitstring order.
    pub fn points(&self, support_length: f64) -> Vec<f64> {
        let scale = support_length / 2f64.powi(self.n_qubits as i32);
        let mut out = Vec::with_capacity(self.shots as usize);
        for (&i, &k) in &self.counts {
            out.extend(std::iter::repeat_n(i as f64 * scale, k as usize));
        }
        out
    }

    pub fn bitstring(&self, index: u64) -> String {
        (0..self.n_qubits)
            .map(|q| {
                if (index >> (self.n_qubits - 1 - q)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// CSV with columns `bitstring,x,count`.
    pub fn write_csv<W: Write>(&self, w: W, support_length: f64) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bitstring", "x", "count"])?;
        let scale = support_length / 2f64.powi(self.n_qubits as i32);
        for (&i, &k) in &self.counts {
            wr.write_record([
                self.bitstring(i),
                format!("{:.17e}", i as f64 * scale),
                k.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
