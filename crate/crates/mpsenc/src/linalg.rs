//! Thin dense linear-algebra helpers over nalgebra complex matrices.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::C64;

pub type CMat = DMatrix<C64>;

/// Thin SVD `m = u · diag(s) · vh` with descending `s`.
///
/// Each left singular vector is rotated so that its largest-magnitude entry
/// (first index on ties) is real and positive.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vh: CMat,
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn mat_from_row_major(rows: usize, cols: usize, data: &[C64]) -> CMat {
    DMatrix::from_row_slice(rows, cols, data)
}

pub fn mat_to_row_major(m: &CMat) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

fn raw_svd(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    // nalgebra can return unconverged factors for very tight tolerances without
    // reporting failure, so every result is checked and looser tolerances retried.
    // Real input is decomposed in real arithmetic so degenerate spectra keep real vectors.
    let scale = m.norm();
    let real = m.iter().all(|z| z.im == 0.0);
    for eps in [
        5.0 * f64::EPSILON,
        20.0 * f64::EPSILON,
        100.0 * f64::EPSILON,
    ] {
        let (u, s, vh) = if real {
            let Some(svd) = SVD::try_new(m.map(|z| z.re), true, true, eps, 100_000) else {
                continue;
            };
            (
                svd.u.expect("u requested").map(c),
                svd.singular_values.iter().copied().collect::<Vec<f64>>(),
                svd.v_t.expect("v_t requested").map(c),
            )
        } else {
            let Some(svd) = SVD::try_new(m.clone(), true, true, eps, 100_000) else {
                continue;
            };
            (
                svd.u.expect("u requested"),
                svd.singular_values.iter().copied().collect::<Vec<f64>>(),
                svd.v_t.expect("v_t requested"),
            )
        };
        let mut us = u.clone();
        for (j, &x) in s.iter().enumerate() {
            us.column_mut(j).scale_mut(x);
        }
        if (us * &vh - m).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Ok((u, s, vh));
        }
    }
    // nalgebra's 2×2 path loses ~1e-11 on nearly rank-deficient blocks; Jacobi does not.
    let (u, s, vh) = if m.nrows() >= m.ncols() {
        jacobi_svd(m)
    } else {
        let (u, s, vh) = jacobi_svd(&m.adjoint());
        (vh.adjoint(), s, u.adjoint())
    };
    let mut us = u.clone();
    for (j, &x) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(x);
    }
    if (us * &vh - m).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Ok((u, s, vh));
    }
    Err(Error::Numerical(format!(
        "SVD did not converge for {}x{}",
        m.nrows(),
        m.ncols()
    )))
}

/// One-sided (Hestenes) Jacobi SVD of a tall or square matrix.
fn jacobi_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, n) = m.shape();
    debug_assert!(r >= n);
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = x * cs - y * phase.conj() * sn;
                        mat[(i, q)] = x * phase * sn + y * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let top = s.iter().fold(0.0f64, |x, &y| x.max(y));
    let mut u = CMat::zeros(r, n);
    let mut filled = vec![false; n];
    for j in 0..n {
        if s[j] > 1e-300 && s[j] > f64::EPSILON * 1e-6 * top {
            u.set_column(j, &(a.column(j) / c(s[j])));
            filled[j] = true;
        }
    }
    // Complete the null columns to an orthonormal set.
    let mut e = 0;
    for j in 0..n {
        if filled[j] {
            continue;
        }
        while e < r {
            let mut cand = CMat::zeros(r, 1);
            cand[(e, 0)] = c(1.0);
            e += 1;
            for k in 0..n {
                if filled[k] {
                    let proj = u.column(k).dotc(&cand.column(0));
                    let col = u.column(k).into_owned();
                    cand.column_mut(0).axpy(-proj, &col, c(1.0));
                }
            }
            let nn = cand.norm();
            if nn > 1e-8 {
                u.set_column(j, &(cand.column(0) / c(nn)));
                filled[j] = true;
                break;
            }
        }
    }
    (u, s, v.adjoint())
}

pub fn svd(m: &CMat) -> Result<Svd> {
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return Err(Error::Precondition("SVD of an empty matrix".into()));
    }
    let (u, s, vh) = if cols > 2 * r {
        // Wide: reduce with a QR of the adjoint first.
        let qr = m.adjoint().qr();
        let (q, rr) = (qr.q(), qr.r());
        let (u, s, w_h) = raw_svd(&rr.adjoint())?;
        (u, s, w_h * q.adjoint())
    } else if r > 2 * cols {
        let qr = m.clone().qr();
        let (q, rr) = (qr.q(), qr.r());
        let (u, s, vh) = raw_svd(&rr)?;
        (q * u, s, vh)
    } else {
        raw_svd(m)?
    };

    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut u_out = CMat::zeros(u.nrows(), k);
    let mut vh_out = CMat::zeros(k, vh.ncols());
    let mut s_out = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs * (1.0 + 1e-12) {
                best_abs = a;
                best = i;
            }
        }
        let phase = if best_abs > 0.0 {
            col[best] / best_abs
        } else {
            c(1.0)
        };
        u_out.set_column(dst, &(col * phase.conj()));
        vh_out.set_row(dst, &(vh.row(src) * phase));
        s_out.push(s[src].max(0.0));
    }
    Ok(Svd {
        u: u_out,
        s: s_out,
        vh: vh_out,
    })
}

impl Svd {
    /// Keeps the leading `keep` triplets.
    pub fn truncated(&self, keep: usize) -> Svd {
        let keep = keep.min(self.s.len()).max(1);
        Svd {
            u: self.u.columns(0, keep).into_owned(),
            s: self.s[..keep].to_vec(),
            vh: self.vh.rows(0, keep).into_owned(),
        }
    }
}

/// Number of singular values to keep so that the discarded weight
/// `Σ_{i ≥ keep} s_i²` (relative to the total) stays within `eps` and
/// `keep ≤ chi_max`. Values below `floor` relative to the largest are always dropped.
pub fn kept_rank(s: &[f64], chi_max: usize, eps: f64, floor: f64) -> usize {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 1;
    }
    let mut keep = s.len();
    let mut discarded = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if discarded + w <= eps * total || s[keep - 1] <= floor * s[0] {
            discarded += w;
            keep -= 1;
        } else {
            break;
        }
    }
    keep.min(chi_max).max(1)
}

/// Frobenius distance from unitarity, `‖U†U − I‖_max`.
pub fn unitarity_error(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    let mut e: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j {
                g[(i, j)] - c(1.0)
            } else {
                g[(i, j)]
            };
            e = e.max(t.norm());
        }
    }
    e
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}
