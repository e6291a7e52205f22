//! Preconditioned MinRes for symmetric (possibly indefinite) systems.
//!
//! The stopping rule is the B-weighted residual ratio
//! `(B r_k, r_k) / (B r_0, r_0) <= rtol` with `x_0 = 0`.

use serde::{Deserialize, Serialize};

use super::linop::LinearOp;
use super::sparse::dot;
use super::tridiag_eigenvalues;
use crate::error::{Error, Result};

/// Relative Lanczos `beta` below which the Krylov space is treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub cond_estimate: Option<f64>,
    pub ritz_min: Option<f64>,
    pub ritz_max: Option<f64>,
    /// `(B r_k, r_k) / (B r_0, r_0)` for `k = 0..=iterations`.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MinresOptions {
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self { rtol: 1e-6, max_iter: 5000 }
    }
}

/// Solves `A x = b` with symmetric positive definite preconditioner `B ≈ A⁻¹`.
pub fn minres(a: &dyn LinearOp, b_op: &dyn LinearOp, rhs: &[f64], opts: MinresOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if b_op.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b_op.dim() });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side".into()));
    }

    let mut x = vec![0.0; n];
    let mut r1 = rhs.to_vec();
    let mut y = b_op.apply(&r1);
    let b_norm2 = dot(&r1, &y);
    if b_norm2 < 0.0 {
        return Err(Error::IndefinitePreconditioner(b_norm2));
    }
    if b_norm2 == 0.0 {
        let report = SolveReport {
            iterations: 0,
            converged: true,
            cond_estimate: None,
            ritz_min: None,
            ritz_max: None,
            residual_history: vec![0.0],
        };
        return Ok((x, report));
    }
    let beta1 = b_norm2.sqrt();

    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;

    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut history = vec![1.0];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.apply_into(&v, &mut y);
        if iterations >= 2 {
            let c = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= c * ri;
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= c * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        b_op.apply_into(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::IndefinitePreconditioner(bb));
        }
        beta = bb.sqrt();
        if !alfa.is_finite() || !beta.is_finite() {
            return Err(Error::NonFinite(format!("MinRes iteration {iterations}")));
        }
        alphas.push(alfa);
        betas.push(beta);

        // apply previous rotation, then compute the new one
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        let ratio = (phibar / beta1).powi(2);
        history.push(ratio);
        if ratio <= opts.rtol {
            converged = true;
            break;
        }
        if beta < BREAKDOWN_TOL * beta1 {
            return Err(Error::Breakdown { step: iterations, residual: ratio });
        }
    }

    let mut report = SolveReport {
        iterations,
        converged,
        cond_estimate: None,
        ritz_min: None,
        ritz_max: None,
        residual_history: history,
    };
    if !alphas.is_empty() {
        let offdiag = &betas[..alphas.len() - 1];
        let ritz = tridiag_eigenvalues(&alphas, offdiag);
        let lo = ritz.iter().copied().filter(|t| *t != 0.0).min_by(|a, b| a.abs().total_cmp(&b.abs()));
        let hi = ritz.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs()));
        if let (Some(lo), Some(hi)) = (lo, hi) {
            report.ritz_min = Some(lo);
            report.ritz_max = Some(hi);
            report.cond_estimate = Some(hi.abs() / lo.abs());
        }
    }
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::linop::{DiagonalOp, IdentityOp};
    use crate::krylov::sparse::SparseMat;

    #[test]
    fn jacobi_on_diagonal_converges_in_one_step() {
        let a = DiagonalOp { diag: vec![1.0, 4.0] };
        let b = DiagonalOp { diag: vec![1.0, 0.25] };
        let (x, rep) = minres(&a, &b, &[3.0, 8.0], MinresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_two_by_two() {
        let a = SparseMat::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let (x, rep) = minres(&a, &IdentityOp(2), &[1.0, 1.0], MinresOptions { rtol: 1e-20, max_iter: 10 }).unwrap();
        assert!(rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = SparseMat::identity(4);
        let (x, rep) = minres(&a, &IdentityOp(4), &[0.0; 4], MinresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn history_is_monotone_and_report_serializes() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, if i % 2 == 0 { 1.0 + i as f64 } else { -(1.0 + i as f64) }));
            if i + 1 < n {
                t.push((i, i + 1, 0.3));
                t.push((i + 1, i, 0.3));
            }
        }
        let a = SparseMat::from_triplets(n, n, t);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let (_, rep) = minres(&a, &IdentityOp(n), &rhs, MinresOptions { rtol: 1e-12, max_iter: 200 }).unwrap();
        assert!(rep.converged);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["iterations", "converged", "cond_estimate", "ritz_min", "ritz_max", "residual_history"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn indefinite_preconditioner_is_rejected() {
        let a = SparseMat::identity(2);
        let b = DiagonalOp { diag: vec![1.0, -1.0] };
        assert!(matches!(
            minres(&a, &b, &[0.0, 1.0], MinresOptions::default()),
            Err(Error::IndefinitePreconditioner(_))
        ));
    }
}
