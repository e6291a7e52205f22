use std::sync::Arc;

use super::sparse::{offsets, SparseMat};

/// A square linear operator known only through its action.
pub trait LinearOp: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = Op x`; `y` is overwritten.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn is_symmetric(&self) -> bool {
        true
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl LinearOp for SparseMat {
    fn dim(&self) -> usize {
        assert_eq!(self.n_rows(), self.n_cols(), "LinearOp requires a square matrix");
        self.n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }

    fn is_symmetric(&self) -> bool {
        self.max_asymmetry() == 0.0
    }
}

impl<T: LinearOp + ?Sized> LinearOp for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

impl<T: LinearOp + ?Sized> LinearOp for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

pub struct IdentityOp(pub usize);

impl LinearOp for IdentityOp {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Diagonal scaling `y_i = d_i x_i`.
#[derive(Clone, Debug)]
pub struct DiagonalOp {
    pub diag: Vec<f64>,
}

impl DiagonalOp {
    /// Inverse of the matrix diagonal (Jacobi).
    pub fn jacobi(mat: &SparseMat) -> Self {
        Self { diag: mat.diag().iter().map(|d| 1.0 / d).collect() }
    }
}

impl LinearOp for DiagonalOp {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
    }
}

/// Block-diagonal composition of square operators.
#[derive(Clone)]
pub struct BlockDiagonal {
    blocks: Vec<Arc<dyn LinearOp>>,
    offsets: Vec<usize>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Arc<dyn LinearOp>>) -> Self {
        let sizes: Vec<usize> = blocks.iter().map(|b| b.dim()).collect();
        Self { offsets: offsets(&sizes), blocks }
    }

    pub fn blocks(&self) -> &[Arc<dyn LinearOp>] {
        &self.blocks
    }
}

impl LinearOp for BlockDiagonal {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (k, b) in self.blocks.iter().enumerate() {
            let r = self.offsets[k]..self.offsets[k + 1];
            b.apply_into(&x[r.clone()], &mut y[r]);
        }
    }

    fn is_symmetric(&self) -> bool {
        self.blocks.iter().all(|b| b.is_symmetric())
    }
}

/// Densifies an operator column by column (oracle use only).
pub fn to_dense(op: &dyn LinearOp) -> nalgebra::DMatrix<f64> {
    let n = op.dim();
    let mut out = nalgebra::DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_diagonal_applies_each_block() {
        let a: Arc<dyn LinearOp> = Arc::new(DiagonalOp { diag: vec![2.0, 3.0] });
        let b: Arc<dyn LinearOp> = Arc::new(IdentityOp(1));
        let bd = BlockDiagonal::new(vec![a, b]);
        assert_eq!(bd.dim(), 3);
        assert_eq!(bd.apply(&[1.0, 1.0, 5.0]), vec![2.0, 3.0, 5.0]);
    }

    #[test]
    fn jacobi_inverts_diagonal() {
        let m = SparseMat::from_triplets(2, 2, vec![(0, 0, 4.0), (1, 1, 0.5), (0, 1, 1.0)]);
        assert_eq!(DiagonalOp::jacobi(&m).diag, vec![0.25, 2.0]);
    }
}
