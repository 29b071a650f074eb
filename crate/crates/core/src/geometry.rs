//! Projection of first-layer weights onto the teacher subspace, neuron
//! alignment, and best rank-k approximation.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormal_row_basis, svd, Matrix, RANK_TOL};

/// Orthonormal rows spanning the teacher directions.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    b: Matrix,
}

/// Row-wise split `W = parallel + perpendicular`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub parallel: Matrix,
    pub perpendicular: Matrix,
}

impl SubspaceBasis {
    /// Basis for the row span of `u`, at the numerical rank of `u`.
    pub fn from_u(u: &Matrix) -> Result<Self> {
        Self::from_u_with_tol(u, RANK_TOL)
    }

    pub fn from_u_with_tol(u: &Matrix, tol: f64) -> Result<Self> {
        Ok(SubspaceBasis {
            b: orthonormal_row_basis(u, tol)?,
        })
    }

    /// Wraps rows that are already orthonormal (checked to 1e-10).
    pub fn from_orthonormal(b: Matrix) -> Result<Self> {
        let gram = b.matmul_transpose(&b)?;
        let err = gram.sub(&Matrix::identity(b.rows()))?.frobenius_norm();
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis rows are not orthonormal (residual {err:e})"
            )));
        }
        Ok(SubspaceBasis { b })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.b
    }

    /// Subspace dimension `k'`.
    pub fn dim(&self) -> usize {
        self.b.rows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.b.cols()
    }

    fn check(&self, w: &Matrix) -> Result<()> {
        if w.cols() != self.b.cols() {
            return Err(Error::Shape(format!(
                "W has {} columns, basis lives in dimension {}",
                w.cols(),
                self.b.cols()
            )));
        }
        Ok(())
    }

    /// Squared norm of the component of `v` orthogonal to the subspace.
    #[inline]
    pub fn perp_norm_sq(&self, v: &[f64]) -> f64 {
        let par_sq: f64 = self.b.iter_rows().map(|r| dot(r, v).powi(2)).sum();
        let total = dot(v, v);
        // cancellation is harmless when the perpendicular part is large; otherwise
        // compute it explicitly
        if total - par_sq > 1e-4 * total {
            return total - par_sq;
        }
        let mut p = v.to_vec();
        for r in self.b.iter_rows() {
            let c = dot(r, v);
            for (pi, ri) in p.iter_mut().zip(r) {
                *pi -= c * ri;
            }
        }
        dot(&p, &p)
    }
}

/// `parallel = W Bᵀ B`, `perpendicular = W − parallel`.
pub fn project_rows(w: &Matrix, basis: &SubspaceBasis) -> Result<Decomposition> {
    basis.check(w)?;
    let coeffs = w.matmul_transpose(&basis.b)?;
    let parallel = coeffs.matmul(&basis.b)?;
    let perpendicular = w.sub(&parallel)?;
    Ok(Decomposition {
        parallel,
        perpendicular,
    })
}

/// `‖W⊥‖_F / √m`.
pub fn perp_metric(w: &Matrix, basis: &SubspaceBasis) -> Result<f64> {
    basis.check(w)?;
    if w.rows() == 0 {
        return Ok(0.0);
    }
    let sq: f64 = w.iter_rows().map(|r| basis.perp_norm_sq(r)).sum();
    Ok((sq / w.rows() as f64).sqrt())
}

/// Cosine similarity `⟨w, u⟩ / (‖w‖‖u‖)`.
pub fn alignment(w: &[f64], u: &[f64]) -> Result<f64> {
    if w.len() != u.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", w.len(), u.len())));
    }
    let (nw, nu) = (norm(w), norm(u));
    if nw == 0.0 || nu == 0.0 {
        return Err(Error::InvalidArgument("alignment of a zero vector".into()));
    }
    Ok((dot(w, u) / (nw * nu)).clamp(-1.0, 1.0))
}

/// Mean over neurons of `‖B w_j‖ / ‖w_j‖`, the cosine of the angle between each
/// row and the subspace. For a single direction this is the mean `|alignment|`.
/// Zero rows are skipped.
pub fn mean_alignment(w: &Matrix, basis: &SubspaceBasis) -> Result<f64> {
    basis.check(w)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in w.iter_rows() {
        let nr = norm(r);
        if nr == 0.0 {
            continue;
        }
        let par: f64 = basis.b.iter_rows().map(|b| dot(b, r).powi(2)).sum();
        total += (par.sqrt() / nr).min(1.0);
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Best Frobenius approximation of rank at most `k` (SVD truncation).
pub fn rank_truncate(w: &Matrix, k: usize) -> Result<Matrix> {
    let f = svd(w)?;
    if k >= f.singular_values.len() {
        return Ok(w.clone());
    }
    Ok(f.reconstruct_rank(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qr, RngStream};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = RngStream::new(seed, 0);
        Matrix::from_fn(rows, cols, |_, _| r.normal())
    }

    fn e1(d: usize) -> SubspaceBasis {
        let mut u = Matrix::zeros(1, d);
        u[(0, 0)] = 1.0;
        SubspaceBasis::from_u(&u).unwrap()
    }

    #[test]
    fn project_rows_examples() {
        let w = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let p = project_rows(&w, &e1(2)).unwrap();
        assert_eq!(p.parallel.data(), &[3.0, 0.0]);
        assert_eq!(p.perpendicular.data(), &[0.0, 4.0]);

        let u = [0.6, 0.0, 0.8];
        let basis = SubspaceBasis::from_u(&Matrix::from_rows(&[u]).unwrap()).unwrap();
        let w = Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * u[j]);
        assert!(project_rows(&w, &basis).unwrap().perpendicular.max_abs() < 1e-15);

        let w = random(6, 5, 1);
        let basis = SubspaceBasis::from_u(&random(2, 5, 2)).unwrap();
        let p = project_rows(&w, &basis).unwrap();
        let lhs = p.parallel.frobenius_norm().powi(2) + p.perpendicular.frobenius_norm().powi(2);
        assert!((lhs - w.frobenius_norm().powi(2)).abs() < 1e-10 * lhs);
        let inner = p.parallel.frobenius_inner(&p.perpendicular).unwrap();
        assert!(inner.abs() < 1e-10 * lhs);
        assert!(project_rows(&Matrix::zeros(1, 4), &basis).is_err());
    }

    #[test]
    fn perp_metric_examples() {
        let w = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        assert_eq!(perp_metric(&w, &e1(2)).unwrap(), 2.0);
        let w = Matrix::from_rows(&[[5.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(perp_metric(&w, &e1(2)).unwrap(), 0.0);

        let w = random(4, 6, 3);
        let basis = SubspaceBasis::from_u(&random(2, 6, 4)).unwrap();
        let p = project_rows(&w, &basis).unwrap();
        let expect = (w.frobenius_norm().powi(2) - p.parallel.frobenius_norm().powi(2)).sqrt() / 2.0;
        assert!((perp_metric(&w, &basis).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn alignment_examples() {
        let u = [1.0, 2.0, -1.0];
        assert!((alignment(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(alignment(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        let w: Vec<f64> = u.iter().map(|v| -2.0 * v).collect();
        assert!((alignment(&w, &u).unwrap() + 1.0).abs() < 1e-15);
        assert!(alignment(&[0.0, 0.0, 0.0], &u).is_err());
    }

    #[test]
    fn rank_truncate_examples() {
        let t = rank_truncate(&Matrix::from_diag(&[3.0, 1.0]), 1).unwrap();
        assert!(t.sub(&Matrix::from_diag(&[3.0, 0.0])).unwrap().max_abs() < 1e-15);
        let w = random(5, 3, 5);
        assert_eq!(rank_truncate(&w, 3).unwrap(), w);
        assert_eq!(rank_truncate(&w, 7).unwrap(), w);
    }

    #[test]
    fn rank_truncate_beats_random_rank_two_candidates() {
        let w = random(6, 4, 6);
        let best = w.sub(&rank_truncate(&w, 2).unwrap()).unwrap().frobenius_norm();
        let mut rng = RngStream::new(7, 0);
        for _ in 0..10_000 {
            let l = Matrix::from_fn(6, 2, |_, _| rng.normal());
            let r = Matrix::from_fn(2, 4, |_, _| rng.normal());
            let c = l.matmul(&r).unwrap();
            // optimal rescaling of the candidate
            let s = w.frobenius_inner(&c).unwrap() / c.frobenius_norm().powi(2);
            let err = w.sub(&c.scale(s)).unwrap().frobenius_norm();
            assert!(best <= err + 1e-12);
        }
    }

    #[test]
    fn eckart_young_residual() {
        let w = random(7, 5, 8);
        let s = svd(&w).unwrap().singular_values;
        for k in 0..=5 {
            let res = w.sub(&rank_truncate(&w, k).unwrap()).unwrap().frobenius_norm();
            let tail: f64 = s[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((res - tail).abs() < 1e-10 * w.frobenius_norm());
        }
    }

    #[test]
    fn basis_rotation_invariance_and_idempotence() {
        let w = random(5, 6, 9);
        let basis = SubspaceBasis::from_u(&random(3, 6, 10)).unwrap();
        let (rot, _) = qr(&random(3, 3, 11)).unwrap();
        let rotated = SubspaceBasis::from_orthonormal(rot.transpose().matmul(basis.matrix()).unwrap()).unwrap();
        let p1 = perp_metric(&w, &basis).unwrap();
        let p2 = perp_metric(&w, &rotated).unwrap();
        assert!((p1 - p2).abs() < 1e-10);

        let par = project_rows(&w, &basis).unwrap().parallel;
        assert!(project_rows(&par, &basis).unwrap().perpendicular.max_abs() < 1e-10);
    }

    #[test]
    fn compression_residual_bounded_by_perpendicular_part() {
        for seed in 0..20 {
            let w = random(8, 5, 100 + seed);
            let basis = SubspaceBasis::from_u(&random(2, 5, 200 + seed)).unwrap();
            let res = w.sub(&rank_truncate(&w, 2).unwrap()).unwrap().frobenius_norm();
            let perp = project_rows(&w, &basis).unwrap().perpendicular.frobenius_norm();
            assert!(res <= perp + 1e-12);
        }
    }

    #[test]
    fn mean_alignment_single_direction() {
        let w = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, -2.0]]).unwrap();
        let expect = (1.0 + 1.0 / 2f64.sqrt() + 0.0) / 3.0;
        assert!((mean_alignment(&w, &e1(2)).unwrap() - expect).abs() < 1e-15);
    }
}
