//! Dense matrices, seeded random streams and small factorizations.

mod decomp;
mod matrix;
mod rng;

pub use decomp::{
    orthonormal_row_basis, pseudo_inverse, qr, svd, symmetric_eigenvalues, SvdResult, RANK_TOL,
};
pub use matrix::{axpy, dot, norm, Matrix};
pub use rng::{gaussian_vector, RngStream};
