//! Matrix product states: construction from dense vectors, canonical forms,
//! truncation, overlaps and entanglement diagnostics.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, kept_rank, mat_from_row_major, mat_to_row_major, svd, CMat};
use crate::C64;

/// Schmidt values at or below this magnitude are treated as zero.
pub const SCHMIDT_FLOOR: f64 = 1e-14;

/// Largest qubit count accepted by the brute-force reduced density matrix.
pub const RDM_MAX_QUBITS: usize = 16;

/// Rank-3 site tensor with shape `(left bond, 2, right bond)`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub dl: usize,
    pub dr: usize,
    pub data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(dl: usize, dr: usize) -> Self {
        Self {
            dl,
            dr,
            data: vec![c(0.0); dl * 2 * dr],
        }
    }

    /// Site tensor of bond dimension one holding the local amplitudes `(a0, a1)`.
    pub fn product(a0: C64, a1: C64) -> Self {
        Self {
            dl: 1,
            dr: 1,
            data: vec![a0, a1],
        }
    }

    #[inline]
    pub fn idx(&self, l: usize, s: usize, r: usize) -> usize {
        (l * 2 + s) * self.dr + r
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[self.idx(l, s, r)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, s: usize, r: usize, v: C64) {
        let i = self.idx(l, s, r);
        self.data[i] = v;
    }

    /// Matrix with rows `(l, s)` and columns `r`.
    pub fn left_matrix(&self) -> CMat {
        mat_from_row_major(2 * self.dl, self.dr, &self.data)
    }

    /// Matrix with rows `l` and columns `(s, r)`.
    pub fn right_matrix(&self) -> CMat {
        mat_from_row_major(self.dl, 2 * self.dr, &self.data)
    }

    pub fn from_left_matrix(m: &CMat) -> Self {
        debug_assert!(m.nrows() % 2 == 0);
        Self {
            dl: m.nrows() / 2,
            dr: m.ncols(),
            data: mat_to_row_major(m),
        }
    }

    pub fn from_right_matrix(m: &CMat) -> Self {
        debug_assert!(m.ncols() % 2 == 0);
        Self {
            dl: m.nrows(),
            dr: m.ncols() / 2,
            data: mat_to_row_major(m),
        }
    }

    /// The `dl × dr` matrix `A^s` for a fixed physical index.
    pub fn slice(&self, s: usize) -> CMat {
        CMat::from_fn(self.dl, self.dr, |l, r| self.get(l, s, r))
    }

    /// `self · m` contracted over the right bond.
    pub fn times_right(&self, m: &CMat) -> Self {
        Self::from_left_matrix(&(self.left_matrix() * m))
    }

    /// `m · self` contracted over the left bond.
    pub fn times_left(m: &CMat, t: &Tensor3) -> Self {
        Self::from_right_matrix(&(m * t.right_matrix()))
    }

    /// Deviation of `Σ_{l,s} A†A` from the identity on the right bond.
    pub fn left_isometry_error(&self) -> f64 {
        crate::linalg::unitarity_error(&self.left_matrix())
    }

    /// Deviation of `Σ_{s,r} A A†` from the identity on the left bond.
    pub fn right_isometry_error(&self) -> f64 {
        crate::linalg::unitarity_error(&self.right_matrix().adjoint())
    }
}

/// Open-boundary MPS over qubits, qubit 0 first (most significant grid bit).
///
/// `center` is the orthogonality-centre site when the state is in mixed
/// canonical form: sites left of it are left isometries and sites right of it
/// are right isometries. Bond `k` (separating the first `k` qubits from the
/// rest, `1 ≤ k ≤ N−1`) corresponds to the left edge of site `k`, and
/// `schmidt[k−1]` holds its normalized Schmidt coefficients.
#[derive(Clone, Debug)]
pub struct Mps {
    tensors: Vec<Tensor3>,
    center: Option<usize>,
    schmidt: Option<Vec<Vec<f64>>>,
}

/// Per-bond spectra, purities and entropies of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementProfile {
    /// `spectra[k−1]` is the descending Schmidt vector of bond `k`.
    pub spectra: Vec<Vec<f64>>,
    pub purities: Vec<f64>,
    pub entropies: Vec<f64>,
}

/// Central canonical decomposition `A_1 … A_k Λ B_{k+1} … B_N` at bond `k`.
#[derive(Clone, Debug)]
pub struct CentralForm {
    pub bond: usize,
    pub left: Vec<Tensor3>,
    pub lambda: Vec<f64>,
    pub right: Vec<Tensor3>,
}

impl Mps {
    pub fn new(tensors: Vec<Tensor3>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Precondition("MPS needs at least one site".into()));
        }
        if tensors[0].dl != 1 || tensors[tensors.len() - 1].dr != 1 {
            return Err(Error::Precondition(
                "boundary bonds must have dimension 1".into(),
            ));
        }
        for (i, w) in tensors.windows(2).enumerate() {
            if w[0].dr != w[1].dl || w[0].dr == 0 {
                return Err(Error::Precondition(format!(
                    "bond {} mismatch: {} vs {}",
                    i + 1,
                    w[0].dr,
                    w[1].dl
                )));
            }
        }
        for t in &tensors {
            if t.data.len() != t.dl * 2 * t.dr {
                return Err(Error::Precondition(
                    "tensor storage has the wrong length".into(),
                ));
            }
        }
        Ok(Self {
            tensors,
            center: None,
            schmidt: None,
        })
    }

    /// Tensors known to be in mixed canonical form around `center`.
    pub(crate) fn from_canonical_tensors(tensors: Vec<Tensor3>, center: usize) -> Result<Self> {
        let mut m = Self::new(tensors)?;
        m.center = Some(center);
        Ok(m)
    }

    /// Computational basis state `|bits⟩`.
    pub fn basis_state(bits: &[u8]) -> Result<Self> {
        Self::new(
            bits.iter()
                .map(|&b| {
                    if b == 0 {
                        Tensor3::product(c(1.0), c(0.0))
                    } else {
                        Tensor3::product(c(0.0), c(1.0))
                    }
                })
                .collect(),
        )
        .map(|m| m.with_product_metadata())
    }

    /// `|0…0⟩` on `n` qubits.
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(&vec![0u8; n])
    }

    fn with_product_metadata(mut self) -> Self {
        let n = self.tensors.len();
        self.center = Some(0);
        self.schmidt = Some(vec![vec![1.0]; n.saturating_sub(1)]);
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Tensor3 {
        &self.tensors[site]
    }

    /// Replaces all tensors; canonical metadata is discarded.
    pub fn into_tensors(self) -> Vec<Tensor3> {
        self.tensors
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.center
    }

    pub fn schmidt(&self) -> Option<&[Vec<f64>]> {
        self.schmidt.as_deref()
    }

    /// Internal bond dimensions `χ_1 … χ_{N−1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1]
            .iter()
            .map(|t| t.dr)
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨self|other⟩` by transfer-matrix contraction, `O(N χ³)`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::LengthMismatch(self.n_qubits(), other.n_qubits()));
        }
        // env[a, b] with a on self (conjugated), b on other.
        let mut env = CMat::from_element(1, 1, c(1.0));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = CMat::zeros(a.dr, b.dr);
            for s in 0..2 {
                let sa = a.slice(s);
                let sb = b.slice(s);
                next += sa.adjoint() * &env * sb;
            }
            env = next;
        }
        Ok(env[(0, 0)])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.overlap(self).map(|z| z.re).unwrap_or(0.0)
    }

    /// Returns a copy scaled to unit norm.
    pub fn normalized(&self) -> Result<Mps> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Degenerate("MPS has zero or non-finite norm".into()));
        }
        let mut out = self.clone();
        let site = out.center.unwrap_or(0);
        let f = 1.0 / n2.sqrt();
        for z in &mut out.tensors[site].data {
            *z *= f;
        }
        Ok(out)
    }

    /// Amplitude `⟨bits|ψ⟩`, `O(N χ²)`.
    pub fn amplitude(&self, bits: &[u8]) -> C64 {
        let mut row = vec![c(1.0)];
        for (t, &b) in self.tensors.iter().zip(bits) {
            let s = b as usize & 1;
            let mut next = vec![c(0.0); t.dr];
            for (l, &x) in row.iter().enumerate() {
                if x == c(0.0) {
                    continue;
                }
                let base = t.idx(l, s, 0);
                for (r, y) in next.iter_mut().enumerate() {
                    *y += x * t.data[base + r];
                }
            }
            row = next;
        }
        row[0]
    }

    /// Amplitude for a big-endian grid index (`N ≤ 64`).
    pub fn amplitude_index(&self, index: u64) -> C64 {
        let n = self.n_qubits();
        let bits: Vec<u8> = (0..n).map(|q| ((index >> (n - 1 - q)) & 1) as u8).collect();
        self.amplitude(&bits)
    }

    /// Full contraction to a dense vector (`N ≤ 28`).
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let n = self.n_qubits();
        if n > crate::funcspace::DENSE_MAX_QUBITS {
            return Err(Error::SizeLimit(format!("dense contraction of {n} qubits")));
        }
        // rows: prefix index, cols: right bond.
        let mut acc = vec![c(1.0)];
        let mut rows = 1usize;
        let mut bond = 1usize;
        for t in &self.tensors {
            let mut next = vec![c(0.0); rows * 2 * t.dr];
            for p in 0..rows {
                for l in 0..bond {
                    let x = acc[p * bond + l];
                    if x == c(0.0) {
                        continue;
                    }
                    for s in 0..2 {
                        let dst = (p * 2 + s) * t.dr;
                        let src = t.idx(l, s, 0);
                        for r in 0..t.dr {
                            next[dst + r] += x * t.data[src + r];
                        }
                    }
                }
            }
            acc = next;
            rows *= 2;
            bond = t.dr;
        }
        Ok(acc)
    }

    /// Mixed canonical form with orthogonality centre at `center` (a site index,
    /// equivalently the bond `center` on its left edge). Schmidt vectors are
    /// recomputed on every bond; values at or below the floor are dropped.
    pub fn canonicalize(&self, center: usize) -> Result<Mps> {
        let n = self.n_qubits();
        let center = center.min(n - 1);
        let mut ts = self.tensors.clone();
        // Right-canonicalize everything with LQ steps.
        for j in (1..n).rev() {
            let m = ts[j].right_matrix();
            let qr = m.adjoint().qr();
            let (q, r) = (qr.q(), qr.r());
            ts[j] = Tensor3::from_right_matrix(&q.adjoint());
            ts[j - 1] = ts[j - 1].times_right(&r.adjoint());
        }
        let norm = ts[0].left_matrix().norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("MPS has zero or non-finite norm".into()));
        }
        // SVD sweep to the right end, recording Schmidt values.
        let mut schmidt = Vec::with_capacity(n.saturating_sub(1));
        for j in 0..n - 1 {
            let d = svd(&ts[j].left_matrix())?;
            let keep = kept_rank(&d.s, usize::MAX, 0.0, SCHMIDT_FLOOR);
            let d = d.truncated(keep);
            ts[j] = Tensor3::from_left_matrix(&d.u);
            let sv = scale_rows(&d.vh, &d.s);
            ts[j + 1] = Tensor3::times_left(&sv, &ts[j + 1]);
            let tot = d.s.iter().map(|x| x * x).sum::<f64>().sqrt();
            schmidt.push(d.s.iter().map(|x| x / tot).collect::<Vec<_>>());
        }
        // Move the centre back with SVDs (keeps bonds minimal and gauge deterministic).
        for j in (center + 1..n).rev() {
            let d = svd(&ts[j].right_matrix())?;
            let keep = kept_rank(&d.s, usize::MAX, 0.0, SCHMIDT_FLOOR);
            let d = d.truncated(keep);
            ts[j] = Tensor3::from_right_matrix(&d.vh);
            let us = scale_cols(&d.u, &d.s);
            ts[j - 1] = ts[j - 1].times_right(&us);
            let tot = d.s.iter().map(|x| x * x).sum::<f64>().sqrt();
            schmidt[j - 1] = d.s.iter().map(|x| x / tot).collect();
        }
        Ok(Mps {
            tensors: ts,
            center: Some(center),
            schmidt: Some(schmidt),
        })
    }

    /// Canonical copy, reusing `self` when it already carries the metadata.
    pub fn ensure_canonical(&self) -> Result<Mps> {
        match (&self.center, &self.schmidt) {
            (Some(_), Some(_)) => Ok(self.clone()),
            _ => self.canonicalize(0),
        }
    }

    /// Caps every bond at `chi` and renormalizes.
    pub fn truncate(&self, chi: usize) -> Result<Mps> {
        let caps = vec![chi.max(1); self.n_qubits().saturating_sub(1)];
        self.truncate_bonds(&caps)
    }

    /// Caps bond `k` (1-indexed) at `caps[k−1]`, sweeping left to right on a
    /// right-canonical state, then renormalizes and recomputes Schmidt data.
    pub fn truncate_bonds(&self, caps: &[usize]) -> Result<Mps> {
        let n = self.n_qubits();
        if caps.len() != n.saturating_sub(1) {
            return Err(Error::LengthMismatch(caps.len(), n.saturating_sub(1)));
        }
        let target_center = self.center.unwrap_or(0);
        let base = self.canonicalize(0)?;
        let mut ts = base.tensors;
        for j in 0..n - 1 {
            let d = svd(&ts[j].left_matrix())?;
            let keep = kept_rank(&d.s, caps[j].max(1), 0.0, SCHMIDT_FLOOR);
            let d = d.truncated(keep);
            ts[j] = Tensor3::from_left_matrix(&d.u);
            let sv = scale_rows(&d.vh, &d.s);
            ts[j + 1] = Tensor3::times_left(&sv, &ts[j + 1]);
        }
        let out = Mps {
            tensors: ts,
            center: Some(n - 1),
            schmidt: None,
        };
        out.normalized()?.canonicalize(target_center)
    }

    /// Central canonical decomposition at bond `k ∈ [1, N−1]`.
    pub fn central_form(&self, bond: usize) -> Result<CentralForm> {
        let n = self.n_qubits();
        if bond == 0 || bond >= n {
            return Err(Error::Precondition(format!(
                "bond {bond} outside [1, {}]",
                n - 1
            )));
        }
        let m = self.canonicalize(bond)?.normalized()?;
        let mut ts = m.tensors;
        let d = svd(&ts[bond].right_matrix())?;
        let keep = kept_rank(&d.s, usize::MAX, 0.0, SCHMIDT_FLOOR);
        let d = d.truncated(keep);
        ts[bond] = Tensor3::from_right_matrix(&d.vh);
        ts[bond - 1] = ts[bond - 1].times_right(&d.u);
        let tot = d.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lambda = d.s.iter().map(|x| x / tot).collect();
        let right = ts.split_off(bond);
        Ok(CentralForm {
            bond,
            left: ts,
            lambda,
            right,
        })
    }

    /// Spectra, purities and entropies per bond.
    pub fn entanglement_profile(&self) -> Result<EntanglementProfile> {
        let spectra = match &self.schmidt {
            Some(s) => s.clone(),
            None => self.canonicalize(0)?.schmidt.unwrap_or_default(),
        };
        Ok(EntanglementProfile::from_spectra(spectra))
    }
}

impl CentralForm {
    /// Reassembles the MPS with `Λ` absorbed into the first right-hand site.
    pub fn to_mps(&self) -> Result<Mps> {
        let mut ts = self.left.clone();
        let lam = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.lambda.len(),
            self.lambda.iter().map(|&x| c(x)),
        ));
        let mut right = self.right.clone();
        right[0] = Tensor3::times_left(&lam, &right[0]);
        ts.extend(right);
        let mut m = Mps::new(ts)?;
        m.center = Some(self.bond);
        Ok(m)
    }
}

fn scale_rows(m: &CMat, s: &[f64]) -> CMat {
    let mut out = m.clone();
    for (i, &x) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(x);
    }
    out
}

fn scale_cols(m: &CMat, s: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, &x) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(x);
    }
    out
}

/// Left-to-right SVD sweep of a unit-norm vector of length `2^N`.
///
/// Bond `k` keeps at most `chi_max` values and discards the smallest ones while
/// their cumulative weight stays within `eps_svd`.
pub fn mps_from_vector(v: &[C64], chi_max: usize, eps_svd: f64) -> Result<Mps> {
    let len = v.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "vector length {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > crate::funcspace::DENSE_MAX_QUBITS {
        return Err(Error::SizeLimit(format!(
            "dense MPS construction of {n} qubits"
        )));
    }
    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (norm2.sqrt() - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "input norm {} is not 1",
            norm2.sqrt()
        )));
    }
    let mut tensors = Vec::with_capacity(n);
    let mut schmidt = Vec::with_capacity(n - 1);
    let mut rest = v.to_vec();
    let mut bond = 1usize;
    let mut truncated = false;
    for k in 0..n - 1 {
        let rows = bond * 2;
        let cols = rest.len() / rows;
        let m = mat_from_row_major(rows, cols, &rest);
        let d = svd(&m)?;
        let floor_keep = kept_rank(&d.s, usize::MAX, 0.0, SCHMIDT_FLOOR);
        let keep = kept_rank(&d.s, chi_max.max(1), eps_svd, SCHMIDT_FLOOR);
        if keep < floor_keep {
            truncated = true;
            if keep == chi_max && kept_rank(&d.s, usize::MAX, eps_svd, SCHMIDT_FLOOR) > chi_max {
                warn!(
                    "bond {} capped at chi = {chi_max} beyond the eps_svd budget",
                    k + 1
                );
            }
        }
        let d = d.truncated(keep);
        tensors.push(Tensor3::from_left_matrix(&d.u));
        let tot = d.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        schmidt.push(d.s.iter().map(|x| x / tot).collect::<Vec<_>>());
        rest = mat_to_row_major(&scale_rows(&d.vh, &d.s));
        bond = keep;
    }
    tensors.push(Tensor3 {
        dl: bond,
        dr: 1,
        data: rest,
    });
    let m = Mps {
        tensors,
        center: Some(n - 1),
        schmidt: Some(schmidt),
    };
    if truncated {
        m.normalized()?.canonicalize(n - 1)
    } else {
        Ok(m)
    }
}

/// Fidelity `|⟨a|b⟩|² / (‖a‖² ‖b‖²)`.
pub fn fidelity(a: &Mps, b: &Mps) -> Result<f64> {
    let ov = a.overlap(b)?;
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::Degenerate("fidelity with a zero state".into()));
    }
    Ok((ov.norm_sqr() / (na * nb)).clamp(0.0, 1.0))
}

/// Reduced density matrix of the first `k` qubits of a dense state (`N ≤ 16`).
pub fn reduced_density_matrix(v: &[C64], k: usize) -> Result<CMat> {
    let len = v.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "vector length {len} is not a power of two"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > RDM_MAX_QUBITS {
        return Err(Error::SizeLimit(format!(
            "reduced density matrix limited to {RDM_MAX_QUBITS} qubits, got {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Precondition(format!(
            "bond {k} outside [1, {}]",
            n - 1
        )));
    }
    let m = mat_from_row_major(1 << k, 1 << (n - k), v);
    let rho = &m * m.adjoint();
    let tr = rho.trace().re;
    Ok(rho / c(tr))
}

impl EntanglementProfile {
    pub fn from_spectra(spectra: Vec<Vec<f64>>) -> Self {
        let purities = spectra
            .iter()
            .map(|s| {
                s.iter()
                    .filter(|&&x| x > SCHMIDT_FLOOR)
                    .map(|x| x.powi(4))
                    .sum()
            })
            .collect();
        let entropies = spectra
            .iter()
            .map(|s| {
                s.iter()
                    .filter(|&&x| x > SCHMIDT_FLOOR)
                    .map(|x| {
                        let p = x * x;
                        -p * p.ln()
                    })
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect();
        Self {
            spectra,
            purities,
            entropies,
        }
    }

    pub fn n_bonds(&self) -> usize {
        self.spectra.len()
    }

    /// `Λ_{k,i}` with zero for missing entries (bond `k` is 1-indexed).
    pub fn lambda(&self, k: usize, i: usize) -> f64 {
        self.spectra
            .get(k - 1)
            .and_then(|s| s.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// CSV with columns `bond,i,lambda,purity,entropy`, one row per coefficient.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bond", "i", "lambda", "purity", "entropy"])?;
        for (k, s) in self.spectra.iter().enumerate() {
            for (i, x) in s.iter().enumerate() {
                wr.write_record([
                    (k + 1).to_string(),
                    i.to_string(),
                    format!("{x:.17e}"),
                    format!("{:.17e}", self.purities[k]),
                    format!("{:.17e}", self.entropies[k]),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{discretize, FunctionOracle, Grid};
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sin_vector(n: usize) -> Vec<C64> {
        discretize(
            &FunctionOracle::real(1.0, |x| (PI * x).sin()),
            &Grid::new(n, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn random_mps(n: usize, chi: usize, seed: u64) -> Mps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ts = Vec::new();
        for j in 0..n {
            let dl = if j == 0 { 1 } else { chi };
            let dr = if j == n - 1 { 1 } else { chi };
            let data = (0..dl * 2 * dr)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            ts.push(Tensor3 { dl, dr, data });
        }
        Mps::new(ts).unwrap().normalized().unwrap()
    }

    fn random_vector(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let nn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= nn);
        v
    }

    /// `√(1/2 ± 2^k sin(π/2^k)/(2π))` for the sine state.
    fn sin_spectrum(k: usize) -> (f64, f64) {
        let t = 2f64.powi(k as i32) * (PI / 2f64.powi(k as i32)).sin() / (2.0 * PI);
        ((0.5 + t).sqrt(), (0.5 - t).sqrt())
    }

    #[test]
    fn constant_vector_is_product() {
        let v = vec![c(0.125); 64];
        let m = mps_from_vector(&v, 8, 0.0).unwrap();
        assert!(m.bond_dims().iter().all(|&d| d == 1));
    }

    #[test]
    fn exponential_is_rank_one() {
        let v = discretize(
            &FunctionOracle::real(1.0, |x| x.exp()),
            &Grid::new(12, 1.0).unwrap(),
        )
        .unwrap();
        let m = mps_from_vector(&v, 8, 0.0).unwrap();
        for s in m.schmidt().unwrap() {
            assert!(s.get(1).copied().unwrap_or(0.0) < 1e-12);
        }
    }

    #[test]
    fn sine_spectra_match_closed_form() {
        let m = mps_from_vector(&sin_vector(12), 64, 0.0).unwrap();
        for k in 1..12 {
            // The finite grid shifts the eigenvalues by O(4^-N).
            let (a, b) = sin_spectrum(k);
            let s = &m.schmidt().unwrap()[k - 1];
            assert!((s[0] * s[0] - a * a).abs() < 1e-7);
            assert!((s[1] * s[1] - b * b).abs() < 1e-7);
        }
    }

    #[test]
    fn round_trip_reconstructs_vector() {
        let v = random_vector(10, 3);
        let m = mps_from_vector(&v, usize::MAX, 0.0).unwrap();
        let back = m.to_dense().unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn input_norm_checked() {
        assert!(mps_from_vector(&[c(1.0), c(1.0)], 2, 0.0).is_err());
        assert!(mps_from_vector(&[c(1.0), c(0.0), c(0.0)], 2, 0.0).is_err());
    }

    #[test]
    fn eps_svd_bounds_fidelity() {
        let v = random_vector(8, 11);
        let full = mps_from_vector(&v, usize::MAX, 0.0).unwrap();
        for eps in [1e-3, 1e-2, 5e-2] {
            let m = mps_from_vector(&v, usize::MAX, eps).unwrap();
            assert!(fidelity(&m, &full).unwrap() >= 1.0 - eps * 7.0 - 1e-12);
        }
    }

    #[test]
    fn canonical_forms_are_isometric() {
        let m = random_mps(8, 4, 5);
        for center in [0, 2, 5, 7] {
            let cm = m.canonicalize(center).unwrap();
            for (j, t) in cm.tensors().iter().enumerate() {
                if j < center {
                    assert!(t.left_isometry_error() < 1e-10);
                } else if j > center {
                    assert!(t.right_isometry_error() < 1e-10);
                }
            }
            assert!((fidelity(&cm, &m).unwrap() - 1.0).abs() < 1e-10);
            for s in cm.schmidt().unwrap() {
                assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(s.windows(2).all(|w| w[0] >= w[1]));
            }
        }
        let moved = m.canonicalize(2).unwrap().canonicalize(5).unwrap();
        assert!((fidelity(&moved, &m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn canonical_spectra_match_dense_svd() {
        let v = sin_vector(10);
        let m = mps_from_vector(&v, 64, 0.0).unwrap();
        for center in [0, 4, 9] {
            let cm = m.canonicalize(center).unwrap();
            for k in 1..10 {
                let mat = mat_from_row_major(1 << k, 1 << (10 - k), &v);
                let d = svd(&mat).unwrap();
                let s = &cm.schmidt().unwrap()[k - 1];
                for i in 0..s.len() {
                    assert!((s[i] - d.s[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn truncation_fidelity() {
        assert_eq!(random_mps(6, 3, 1).truncate(64).unwrap().max_bond(), 3);
        // Single bond with Λ = (√0.9, √0.1).
        let t0 = Tensor3 {
            dl: 1,
            dr: 2,
            data: vec![c(1.0), c(0.0), c(0.0), c(1.0)],
        };
        let t1 = Tensor3 {
            dl: 2,
            dr: 1,
            data: vec![c(0.9f64.sqrt()), c(0.0), c(0.0), c(0.1f64.sqrt())],
        };
        let m = Mps::new(vec![t0, t1]).unwrap();
        let tr = m.truncate(1).unwrap();
        assert_relative_eq!(fidelity(&tr, &m).unwrap(), 0.9, epsilon = 1e-12);

        let sm = mps_from_vector(&sin_vector(12), 64, 0.0).unwrap();
        let tr = sm.truncate(2).unwrap();
        let discarded: f64 = sm
            .schmidt()
            .unwrap()
            .iter()
            .map(|s| s.iter().skip(2).map(|x| x * x).sum::<f64>())
            .sum();
        let infid = 1.0 - fidelity(&tr, &sm).unwrap();
        assert!(
            (infid - discarded).abs() <= 0.1 * discarded.max(1e-300) + 1e-14,
            "{infid} vs {discarded}"
        );
        assert!(tr.max_bond() <= 2);
    }

    #[test]
    fn profile_examples() {
        let p = Mps::zero_state(5).unwrap().entanglement_profile().unwrap();
        assert!(p.purities.iter().all(|&x| x == 1.0));
        assert!(p.entropies.iter().all(|&x| x == 0.0));
        let h = 0.5f64.sqrt();
        let bell = Mps::new(vec![
            Tensor3 {
                dl: 1,
                dr: 2,
                data: vec![c(h), c(0.0), c(0.0), c(h)],
            },
            Tensor3 {
                dl: 2,
                dr: 1,
                data: vec![c(1.0), c(0.0), c(0.0), c(1.0)],
            },
        ])
        .unwrap();
        let p = bell.entanglement_profile().unwrap();
        assert_relative_eq!(p.purities[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p.entropies[0], 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let m = random_mps(6, 2, 9);
        assert_relative_eq!(fidelity(&m, &m).unwrap(), 1.0, epsilon = 1e-12);
        let a = Mps::basis_state(&[0, 1, 0]).unwrap();
        let b = Mps::basis_state(&[1, 1, 0]).unwrap();
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        assert!(fidelity(&a, &Mps::zero_state(4).unwrap()).is_err());

        let full = mps_from_vector(&sin_vector(10), 64, 0.0).unwrap();
        let tr = full.truncate(1).unwrap();
        let (x, y) = (full.to_dense().unwrap(), tr.to_dense().unwrap());
        let dense: C64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        assert!((fidelity(&full, &tr).unwrap() - dense.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn rdm_examples() {
        let v = Mps::basis_state(&[1, 0, 1, 1]).unwrap().to_dense().unwrap();
        let rho = reduced_density_matrix(&v, 2).unwrap();
        assert_relative_eq!(rho[(2, 2)].re, 1.0);
        assert_relative_eq!(rho.norm(), 1.0, epsilon = 1e-14);

        let v = sin_vector(14);
        let rho = reduced_density_matrix(&v, 4).unwrap();
        let e = SymmetricEigen::new(rho).eigenvalues;
        let mut ev: Vec<f64> = e.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let t = 16.0 * (PI / 16.0).sin() / (2.0 * PI);
        // Grid correction is about π²/(12·4^N) ≈ 3e-9 at N = 14.
        assert!((ev[0] - (0.5 + t)).abs() < 1e-8);
        assert!((ev[1] - (0.5 - t)).abs() < 1e-8);
        assert!(ev[2].abs() < 1e-12);
        assert!(reduced_density_matrix(&vec![c(0.0); 1 << 17], 3).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let p = mps_from_vector(&sin_vector(6), 64, 0.0)
            .unwrap()
            .entanglement_profile()
            .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("bond,i,lambda,purity,entropy\n"));
        assert_eq!(
            s.lines().count(),
            1 + p.spectra.iter().map(|x| x.len()).sum::<usize>()
        );
    }

    #[test]
    fn central_form_round_trip() {
        let m = random_mps(7, 3, 21);
        let cf = m.central_form(3).unwrap();
        assert_eq!(cf.left.len(), 3);
        assert!(cf.left.iter().all(|t| t.left_isometry_error() < 1e-10));
        assert!(cf.right.iter().all(|t| t.right_isometry_error() < 1e-10));
        assert!((fidelity(&cf.to_mps().unwrap(), &m).unwrap() - 1.0).abs() < 1e-10);
        assert!(m.central_form(0).is_err() && m.central_form(7).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rdm_eigenvalues_are_squared_schmidt(seed in 0u64..1000, n in 3usize..9, k in 1usize..8) {
            prop_assume!(k < n);
            let v = random_vector(n, seed);
            let m = mps_from_vector(&v, usize::MAX, 0.0).unwrap();
            let rho = reduced_density_matrix(&v, k).unwrap();
            let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(rho).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let s = &m.schmidt().unwrap()[k - 1];
            for i in 0..ev.len() {
                let sq = s.get(i).map(|x| x * x).unwrap_or(0.0);
                prop_assert!((ev[i] - sq).abs() < 1e-9);
            }
        }

        #[test]
        fn profile_is_gauge_invariant(seed in 0u64..1000, c1 in 0usize..6, c2 in 0usize..6) {
            let m = random_mps(6, 3, seed);
            let p1 = m.canonicalize(c1).unwrap().entanglement_profile().unwrap();
            let p2 = m.canonicalize(c2).unwrap().entanglement_profile().unwrap();
            for (a, b) in p1.spectra.iter().zip(&p2.spectra) {
                prop_assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
            for k in 0..p1.n_bonds() {
                let s = &p1.spectra[k];
                prop_assert!((p1.purities[k] - s.iter().map(|x| x.powi(4)).sum::<f64>()).abs() < 1e-10);
            }
        }
    }
}
