//! Sparse kernels, exact factorizations, MinRes and spectral estimation.

pub mod dense;
pub mod lanczos;
pub mod ldl;
pub mod linop;
pub mod minres;
pub mod mm;
pub mod sparse;
mod tridiag;

pub use dense::{condition_from_spectrum, dense_eig_oracle, dense_eig_oracle_op, dense_solve, DENSE_CAP};
pub use lanczos::{estimate_condition, ConditionOptions, SpectrumEstimate};
pub use ldl::{factorize, Definiteness, LdlFactor};
pub use linop::{BlockDiagonal, DiagonalOp, IdentityOp, LinearOp};
pub use minres::{minres, MinresOptions, SolveReport};
pub use sparse::{SparseMat, TripletBuilder};

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal and
/// off-diagonal, sorted ascending.
pub fn tridiag_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let k = diag.len();
    assert!(offdiag.len() + 1 >= k, "off-diagonal too short");
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            offdiag[i]
        } else if j + 1 == i {
            offdiag[j]
        } else {
            0.0
        }
    });
    let mut e: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}
