//! Spectral estimation of a preconditioned operator `B A` by Lanczos with full
//! reorthogonalization in the `B⁻¹` inner product.
//!
//! Vectors are kept in pairs: `v_j` lives in the residual space and
//! `z_j = B v_j` in the solution space, so `⟨z_i, z_j⟩_{B⁻¹} = v_iᵀ z_j` and
//! `B⁻¹` is never applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linop::LinearOp;
use super::sparse::dot;
use super::tridiag::Tridiag;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ConditionOptions {
    /// Number of extreme Ritz values reported at each end of the magnitude ordering.
    pub n_probe: usize,
    /// Smallest-magnitude Ritz values to discard (known null modes).
    pub drop_null: usize,
    /// Dofs excluded from the start vector (e.g. eliminated Dirichlet dofs).
    pub frozen: Option<Vec<bool>>,
    /// Known null vectors of a symmetric `A`. Since `range(A) ⊥ null(A)`, keeping the
    /// Lanczos vectors orthogonal to them removes the zero modes exactly; `drop_null`
    /// should then not count them again.
    pub deflate: Vec<Vec<f64>>,
    pub seed: u64,
    /// Relative change of the extreme Ritz values regarded as stagnation.
    pub stagnation_tol: f64,
    /// Ritz residual bound required of both extremes, relative to the Ritz value itself.
    pub residual_tol: f64,
    pub check_every: usize,
    pub max_steps: Option<usize>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            n_probe: 3,
            drop_null: 0,
            frozen: None,
            deflate: Vec::new(),
            seed: 0x5eed,
            stagnation_tol: 1e-6,
            residual_tol: 1e-3,
            check_every: 5,
            max_steps: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectrumEstimate {
    pub cond: f64,
    /// Smallest-magnitude Ritz values after dropping null modes, ascending in |θ|.
    pub smallest: Vec<f64>,
    /// Largest-magnitude Ritz values, descending in |θ|.
    pub largest: Vec<f64>,
    /// Ritz values that were discarded as null modes.
    pub dropped: Vec<f64>,
    pub steps: usize,
}

struct RitzCheck {
    lo: f64,
    hi: f64,
    converged_residuals: bool,
    /// `drop_null + n_probe` smallest |θ|, ascending in |θ|.
    smallest: Vec<f64>,
    /// `n_probe` largest |θ|, descending in |θ|.
    largest: Vec<f64>,
}

fn ritz_check(
    alphas: &[f64],
    betas: &[f64],
    beta_next: f64,
    drop_null: usize,
    n_probe: usize,
    residual_tol: f64,
) -> Option<RitzCheck> {
    let k = alphas.len();
    if k <= drop_null {
        return None;
    }
    let t = Tridiag::new(alphas, betas);
    // Ritz values nearest zero sit on either side of the sign change
    let m = (drop_null + n_probe).min(k);
    let neg = t.count_below(0.0);
    let mut near: Vec<f64> = (neg.saturating_sub(m)..(neg + m).min(k)).map(|j| t.eigenvalue(j)).collect();
    near.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    near.truncate(m);
    let np = n_probe.min(k);
    let mut ends: Vec<usize> = (0..np).chain(k - np..k).collect();
    ends.sort_unstable();
    ends.dedup();
    let mut far: Vec<f64> = ends.into_iter().map(|j| t.eigenvalue(j)).collect();
    far.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    far.truncate(np);

    let lo = near[drop_null];
    let hi = far[0];
    // each end is held to its own magnitude, so both carry relative error ≤ residual_tol
    let res = |theta: f64| (beta_next * t.last_component(theta)).abs();
    let converged_residuals = res(lo) <= residual_tol * lo.abs() && res(hi) <= residual_tol * hi.abs();
    Some(RitzCheck { lo, hi, converged_residuals, smallest: near, largest: far })
}

/// Estimates `max|θ| / min|θ|` over the spectrum of `B A`.
pub fn estimate_condition(a: &dyn LinearOp, b_op: &dyn LinearOp, opts: &ConditionOptions) -> Result<SpectrumEstimate> {
    let n = a.dim();
    if b_op.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b_op.dim() });
    }
    let free = match &opts.frozen {
        Some(f) => {
            if f.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.len() });
            }
            f.iter().filter(|&&x| !x).count()
        }
        None => n,
    };
    let max_steps = opts.max_steps.unwrap_or(free).min(free).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if let Some(frozen) = &opts.frozen {
        for (vi, &f) in v.iter_mut().zip(frozen) {
            if f {
                *vi = 0.0;
            }
        }
    }
    let deflate = orthonormal(&opts.deflate, n)?;
    project_out(&mut v, &deflate);
    let mut z = b_op.apply(&v);
    let bb = dot(&v, &z);
    if bb <= 0.0 {
        return Err(Error::IndefinitePreconditioner(bb));
    }
    let beta0 = bb.sqrt();
    v.iter_mut().for_each(|x| *x /= beta0);
    z.iter_mut().for_each(|x| *x /= beta0);

    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut zs: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut prev: Option<(f64, f64)> = None;
    let mut last_check: Option<RitzCheck> = None;
    let mut hit_invariant = false;

    for step in 1..=max_steps {
        a.apply_into(&z, &mut w);
        let alpha = dot(&z, &w);
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("Lanczos step {step}")));
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= alpha * vi;
        }
        if let (Some(vp), Some(&bp)) = (vs.last(), betas.last()) {
            for (wi, vpi) in w.iter_mut().zip(vp.iter()) {
                *wi -= bp * vpi;
            }
        }
        vs.push(std::mem::take(&mut v));
        zs.push(std::mem::take(&mut z));
        alphas.push(alpha);
        // classical Gram-Schmidt against every previous pair, repeated once when the
        // first pass removes more than half of the B-norm
        project_out(&mut w, &deflate);
        let lost = reorthogonalize(&mut w, &vs, &zs);
        let mut z_new = b_op.apply(&w);
        let mut bb = dot(&w, &z_new);
        if bb < lost {
            reorthogonalize(&mut w, &vs, &zs);
            project_out(&mut w, &deflate);
            z_new = b_op.apply(&w);
            bb = dot(&w, &z_new);
        }
        if bb < 0.0 && bb.abs() > 1e-12 * alpha.abs().max(1.0) {
            return Err(Error::IndefinitePreconditioner(bb));
        }
        let beta = bb.max(0.0).sqrt();
        let scale = alphas.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(betas.iter().fold(0.0f64, |m, b| m.max(*b)));
        let invariant = beta <= 1e-14 * scale.max(f64::MIN_POSITIVE) || step == max_steps;

        if invariant || step % opts.check_every == 0 {
            if let Some(check) = ritz_check(&alphas, &betas, beta, opts.drop_null, opts.n_probe.max(1), opts.residual_tol) {
                let stagnated = prev.is_some_and(|(lo, hi)| {
                    (check.lo - lo).abs() <= opts.stagnation_tol * check.lo.abs()
                        && (check.hi - hi).abs() <= opts.stagnation_tol * check.hi.abs()
                });
                prev = Some((check.lo, check.hi));
                let done = invariant || (stagnated && check.converged_residuals);
                last_check = Some(check);
                if done {
                    hit_invariant = invariant;
                    break;
                }
            }
        }
        if invariant {
            hit_invariant = true;
            break;
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
        z = z_new.into_iter().map(|x| x / beta).collect();
    }

    let check = match last_check {
        Some(c) => c,
        None => return Err(Error::NoConvergence(max_steps)),
    };
    if !hit_invariant && !check.converged_residuals {
        return Err(Error::NoConvergence(max_steps));
    }
    let dropped = check.smallest[..opts.drop_null].to_vec();
    let kept = &check.smallest[opts.drop_null..];
    let np = opts.n_probe.max(1).min(kept.len());
    Ok(SpectrumEstimate {
        cond: check.hi.abs() / check.lo.abs(),
        smallest: kept[..np].to_vec(),
        largest: check.largest.iter().take(np).copied().collect(),
        dropped,
        steps: alphas.len(),
    })
}

/// One Gram-Schmidt pass; returns the squared B-norm removed.
fn reorthogonalize(w: &mut [f64], vs: &[Vec<f64>], zs: &[Vec<f64>]) -> f64 {
    let mut removed = 0.0;
    for (vj, zj) in vs.iter().zip(zs) {
        let c = dot(w, zj);
        removed += c * c;
        for (wi, vji) in w.iter_mut().zip(vj) {
            *wi -= c * vji;
        }
    }
    removed
}

fn orthonormal(vecs: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for v in vecs {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        let mut u = v.clone();
        project_out(&mut u, &out);
        let nrm = dot(&u, &u).sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::InvalidArgument("deflation vectors must be linearly independent".into()));
        }
        u.iter_mut().for_each(|x| *x /= nrm);
        out.push(u);
    }
    Ok(out)
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi -= c * qi;
        }
    }
}
