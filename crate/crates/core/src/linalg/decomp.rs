//! Small dense factorizations: one-sided Jacobi SVD, Householder QR, cyclic
//! Jacobi for symmetric eigenvalues, and what is built on top of them.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Default relative cutoff for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U_left · diag(s) · V_rightᵀ` with `r = min(rows, cols)` triplets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvdResult {
    /// `rows × r`, orthonormal columns.
    pub u_left: Matrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × r`, orthonormal columns.
    pub v_right: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_rank(self.singular_values.len())
    }

    /// Sum of the leading `k` rank-one terms.
    pub fn reconstruct_rank(&self, k: usize) -> Matrix {
        let (m, n) = (self.u_left.rows(), self.v_right.rows());
        let k = k.min(self.singular_values.len());
        Matrix::from_fn(m, n, |i, j| {
            (0..k)
                .map(|l| self.u_left[(i, l)] * self.singular_values[l] * self.v_right[(j, l)])
                .sum()
        })
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose())?;
        return Ok(SvdResult {
            u_left: t.v_right,
            singular_values: t.singular_values,
            v_right: t.u_left,
        });
    }
    svd_tall(a)
}

/// SVD of a matrix with `rows >= cols`. Rotations act on the columns of `a`,
/// which are stored here as the rows of `g = aᵀ` for contiguous access.
fn svd_tall(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let mut g = a.transpose();
    let mut vt = Matrix::identity(n);

    let mut converged = n < 2;
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        residual = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(g.row(p), g.row(p));
                let beta = dot(g.row(q), g.row(q));
                let gamma = dot(g.row(p), g.row(q));
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                residual = residual.max(off);
                if off <= f64::EPSILON {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut g, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    let norms: Vec<f64> = g.iter_rows().map(norm).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep the order the iteration produced them in
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s_max = order.first().map_or(0.0, |&i| norms[i]);
    let tiny = s_max * f64::EPSILON * (m.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    let mut singular_values = Vec::with_capacity(n);
    for (slot, &i) in order.iter().enumerate() {
        let s = norms[i];
        singular_values.push(s);
        if s > tiny && s > 0.0 {
            u_cols.push(g.row(i).iter().map(|v| v / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m);

    let u_left = Matrix::from_fn(m, n, |r, c| u_cols[c][r]);
    let v_right = Matrix::from_fn(n, n, |r, c| vt[(order[c], r)]);
    Ok(SvdResult {
        u_left,
        singular_values,
        v_right,
    })
}

fn rotate_rows(g: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = g.cols();
    let data = g.data_mut();
    for k in 0..cols {
        let gp = data[p * cols + k];
        let gq = data[q * cols + k];
        data[p * cols + k] = c * gp - s * gq;
        data[q * cols + k] = s * gp + c * gq;
    }
}

/// Fills the vectors at `pending` so the whole set is orthonormal, using
/// Gram–Schmidt against the standard basis in index order.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], m: usize) {
    let mut candidate = 0;
    for &slot in pending {
        while candidate < m {
            let mut v = vec![0.0; m];
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, other) in cols.iter().enumerate() {
                    if k == slot || other.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let p = dot(&v, other);
                    for (vi, oi) in v.iter_mut().zip(other) {
                        *vi -= p * oi;
                    }
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                cols[slot] = v;
                break;
            }
        }
    }
}

/// Orthonormal rows spanning the row space of `u`. The numerical rank counts
/// singular values `>= tol * s_max`; a zero matrix yields a `0 × d` basis.
pub fn orthonormal_row_basis(u: &Matrix, tol: f64) -> Result<Matrix> {
    let d = u.cols();
    if u.rows() == 0 || d == 0 {
        return Ok(Matrix::zeros(0, d));
    }
    let f = svd(u)?;
    let s_max = f.singular_values[0];
    if s_max == 0.0 {
        return Ok(Matrix::zeros(0, d));
    }
    let rank = f
        .singular_values
        .iter()
        .take_while(|&&s| s >= tol * s_max)
        .count();
    Ok(Matrix::from_fn(rank, d, |i, j| f.v_right[(j, i)]))
}

/// Moore–Penrose pseudo-inverse, dropping singular values below `tol * s_max`.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    let (m, n) = a.shape();
    let f = svd(a)?;
    let s_max = f.singular_values.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = f
        .singular_values
        .iter()
        .map(|&s| if s > 0.0 && s >= tol * s_max { 1.0 / s } else { 0.0 })
        .collect();
    Ok(Matrix::from_fn(n, m, |i, j| {
        inv.iter()
            .enumerate()
            .map(|(l, w)| f.v_right[(i, l)] * w * f.u_left[(j, l)])
            .sum()
    }))
}

/// Thin Householder QR of a matrix with `rows >= cols`: returns `(Q, R)` with
/// `Q` `rows × cols` having orthonormal columns and `R` upper triangular.
pub fn qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Shape(format!("qr needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let nx = norm(&x);
        let mut v = x;
        if nx > 0.0 {
            let alpha = if v[0] >= 0.0 { -nx } else { nx };
            v[0] -= alpha;
            let nv = norm(&v);
            v.iter_mut().for_each(|e| *e /= nv);
            for j in k..n {
                let p: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                for i in k..m {
                    r[(i, j)] -= 2.0 * p * v[i - k];
                }
            }
        } else {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = Matrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let p: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * p * v[i - k];
            }
        }
    }
    let r = Matrix::from_fn(n, n, |i, j| if i <= j { r[(i, j)] } else { 0.0 });
    Ok((q, r))
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Only the upper triangle's symmetric part is used.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut s = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let scale = s.frobenius_norm();
    let mut converged = n < 2 || scale == 0.0;
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        residual = 0.0_f64;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[(p, q)];
                residual = residual.max(apq.abs() / scale);
                if apq.abs() <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                rotated = true;
                let theta = (s[(q, q)] - s[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }
    let mut ev: Vec<f64> = (0..n).map(|i| s[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}
