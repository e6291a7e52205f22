//! Dense reference computations used to validate the iterative machinery.
//! Everything here is O(n³) and capped at [`DENSE_CAP`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::linop::{to_dense, LinearOp};
use super::sparse::SparseMat;
use crate::error::{invalid, Error, Result};

pub const DENSE_CAP: usize = 4000;

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::DimensionCap { cap: DENSE_CAP, got: n });
    }
    Ok(())
}

fn free_indices(n: usize, frozen: Option<&[bool]>) -> Result<Vec<usize>> {
    match frozen {
        None => Ok((0..n).collect()),
        Some(f) if f.len() == n => Ok((0..n).filter(|&i| !f[i]).collect()),
        Some(f) => Err(Error::DimensionMismatch { expected: n, got: f.len() }),
    }
}

fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

/// Eigenvalues of `A x = θ B⁻¹ x`, with `B⁻¹` given explicitly (SPD). Sorted ascending.
pub fn dense_eig_oracle(a: &SparseMat, binv: &SparseMat) -> Result<Vec<f64>> {
    let n = a.n_rows();
    check_cap(n)?;
    if binv.n_rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: binv.n_rows() });
    }
    generalized(a.to_dense(), binv.to_dense())
}

/// Eigenvalues of `A x = θ M x` for dense symmetric `A` and SPD `M`.
pub fn generalized(a: DMatrix<f64>, m: DMatrix<f64>) -> Result<Vec<f64>> {
    check_cap(a.nrows())?;
    let chol = Cholesky::new(m).ok_or_else(|| invalid("oracle: B⁻¹ is not positive definite"))?;
    let l = chol.l();
    // L⁻¹ A L⁻ᵀ
    let y = l.solve_lower_triangular(&a).expect("triangular solve");
    let mut c = l.solve_lower_triangular(&y.transpose()).expect("triangular solve");
    symmetrize(&mut c);
    Ok(sorted(SymmetricEigen::new(c).eigenvalues.iter().copied().collect()))
}

/// Eigenvalues of `B A` for an SPD operator `B`, restricted to the non-frozen dofs.
///
/// `B = L Lᵀ` gives `B A ~ Lᵀ A L`, which is symmetric.
pub fn dense_eig_oracle_op(a: &dyn LinearOp, b: &dyn LinearOp, frozen: Option<&[bool]>) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
    }
    let idx = free_indices(n, frozen)?;
    check_cap(idx.len())?;
    let mut bd = restrict(&to_dense(b), &idx);
    symmetrize(&mut bd);
    let ad = restrict(&to_dense(a), &idx);
    let chol = Cholesky::new(bd).ok_or_else(|| invalid("oracle: preconditioner is not positive definite"))?;
    let l = chol.l();
    let mut c = l.transpose() * ad * &l;
    symmetrize(&mut c);
    Ok(sorted(SymmetricEigen::new(c).eigenvalues.iter().copied().collect()))
}

/// `max|θ| / min|θ|` after discarding the `drop_null` smallest magnitudes.
pub fn condition_from_spectrum(eigs: &[f64], drop_null: usize) -> Option<f64> {
    let mut mags: Vec<f64> = eigs.iter().map(|e| e.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let kept = mags.get(drop_null..)?;
    let (lo, hi) = (*kept.first()?, *kept.last()?);
    Some(hi / lo)
}

/// Dense LU solve of a square system.
pub fn dense_solve(a: &dyn LinearOp, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    check_cap(n)?;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    let lu = to_dense(a).lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| invalid("oracle: singular system"))
}
