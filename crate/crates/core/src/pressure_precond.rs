//! Exact preconditioner for `λ⁻¹ I_m + I_0` on a continuous pressure space,
//! where `I_m` and `I_0` are the mass forms of the mean-value and mean-free
//! parts.
//!
//! With `m_i = (φ_i, 1_Ω)`, `1_Ω = |Ω|^{-1/2}`, and `w` the all-ones vector,
//! the matrix is `Mλ = M + (λ⁻¹ - 1) m mᵀ = Vλ M Vλᵀ` where
//! `Vλ⁻¹ = I + a m wᵀ`, `a = (√λ - 1)/√|Ω|`. Rank-one terms are only ever
//! applied as an inner product followed by a scaled vector update.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::elements::{FeSpace, Family};
use crate::error::{invalid, Error, Result};
use crate::forms::assemble_load_scalar;
use crate::krylov::ldl::{factorize, Definiteness, LdlFactor};
use crate::krylov::linop::{DiagonalOp, LinearOp};
use crate::krylov::sparse::{dot, SparseMat};

#[derive(Clone, Debug)]
pub struct MeanVector {
    pub m: Vec<f64>,
    pub omega_sqrt: f64,
}

impl MeanVector {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// `wᵀ x`.
    pub fn w_dot(x: &[f64]) -> f64 {
        x.iter().sum()
    }
}

/// `m_i = ∫ φ_i / √|Ω|`, integrated directly (not taken from `M w`).
pub fn build_mean_vector(q: &FeSpace, mass: &SparseMat) -> Result<MeanVector> {
    if q.value_dim() != 1 || q.family() == Family::MiniVelocity {
        return Err(Error::Unsupported("mean vector needs a scalar P1 or P2 space".into()));
    }
    let n = q.n_dofs();
    if mass.n_rows() != n || mass.n_cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mass.n_rows() });
    }
    // eliminated Dirichlet rows keep only their diagonal
    for r in 0..n {
        let (cols, vals) = mass.row(r);
        if !cols.iter().zip(vals).any(|(&c, &v)| c != r && v != 0.0) {
            return Err(invalid(format!(
                "pressure space has a constrained dof ({r}); the nodal basis no longer sums to one"
            )));
        }
    }
    let omega_sqrt = q.mesh().area().sqrt();
    let mut m = assemble_load_scalar(q, |_, _| 1.0)?;
    m.iter_mut().for_each(|v| *v /= omega_sqrt);
    Ok(MeanVector { m, omega_sqrt })
}

/// Mass matrix together with the rank-one data for a constant λ ≥ 1.
#[derive(Debug)]
pub struct RankOneMass {
    mass: Arc<SparseMat>,
    mean: MeanVector,
    lambda: f64,
    a: f64,
    abar: f64,
    family: Family,
    factor: OnceLock<Arc<LdlFactor>>,
}

impl RankOneMass {
    pub fn new(mass: Arc<SparseMat>, mean: MeanVector, lambda: f64, family: Family) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(invalid(format!("rank-one pressure preconditioner needs constant λ >= 1, got {lambda}")));
        }
        if mass.n_rows() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mass.n_rows(), got: mean.len() });
        }
        let s = lambda.sqrt();
        Ok(Self {
            a: (s - 1.0) / mean.omega_sqrt,
            abar: 1.0 - 1.0 / s,
            mass,
            mean,
            lambda,
            family,
            factor: OnceLock::new(),
        })
    }

    /// Reuses an existing factorization of the mass matrix.
    pub fn with_mass_factor(self, f: Arc<LdlFactor>) -> Self {
        let _ = self.factor.set(f);
        self
    }

    pub fn mass(&self) -> &SparseMat {
        &self.mass
    }

    pub fn mean(&self) -> &MeanVector {
        &self.mean
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn abar(&self) -> f64 {
        self.abar
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mass_solver(&self) -> Result<Arc<LdlFactor>> {
        if let Some(f) = self.factor.get() {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(factorize(&self.mass, Definiteness::PositiveDefinite, "pressure mass")?);
        Ok(Arc::clone(self.factor.get_or_init(|| f)))
    }
}

/// `Mλ x = M x + (λ⁻¹ - 1)(mᵀx) m`.
pub fn apply_mlambda(r: &RankOneMass, x: &[f64]) -> Vec<f64> {
    let mut y = r.mass.mul_vec(x);
    let c = (1.0 / r.lambda - 1.0) * dot(&r.mean.m, x);
    for (yi, mi) in y.iter_mut().zip(&r.mean.m) {
        *yi += c * mi;
    }
    y
}

/// `Vλ⁻¹ x = x + a (wᵀx) m`.
pub fn apply_vlambda_inv(r: &RankOneMass, x: &[f64]) -> Vec<f64> {
    let c = r.a * MeanVector::w_dot(x);
    x.iter().zip(&r.mean.m).map(|(xi, mi)| xi + c * mi).collect()
}

/// `Vλ⁻ᵀ x = x + a (mᵀx) w`.
pub fn apply_vlambda_inv_t(r: &RankOneMass, x: &[f64]) -> Vec<f64> {
    let c = r.a * dot(&r.mean.m, x);
    x.iter().map(|xi| xi + c).collect()
}

/// `Vλ x = x - ā (mᵀ M⁻¹ x) m`, evaluated with a mass solve.
///
/// The coefficient is `1/√λ - 1 = -ā`; this is the value for which
/// `(I + a m wᵀ)(I - ā m mᵀ M⁻¹) = I` given `M w = √|Ω| m`.
pub fn apply_vlambda(r: &RankOneMass, x: &[f64]) -> Result<Vec<f64>> {
    let y = r.mass_solver()?.solve(x);
    let c = -r.abar * dot(&r.mean.m, &y);
    Ok(x.iter().zip(&r.mean.m).map(|(xi, mi)| xi + c * mi).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum MassInner {
    /// `D = diag(M)⁻¹`.
    Jacobi,
    /// `D = M⁻¹` by sparse factorization.
    #[default]
    ExactMass,
}

/// `x ↦ Vλ⁻ᵀ D Vλ⁻¹ x`.
pub struct RankOnePreconditioner {
    r: Arc<RankOneMass>,
    inner: Arc<dyn LinearOp>,
    /// `D Vλ⁻²` form, valid when `D` is a multiple of `diag(m)⁻¹` (P1 Jacobi).
    commuted: bool,
}

impl RankOnePreconditioner {
    pub fn uses_commuted_form(&self) -> bool {
        self.commuted
    }

    /// The general three-step composition, regardless of the shortcut.
    pub fn apply_composed(&self, x: &[f64]) -> Vec<f64> {
        let y = apply_vlambda_inv(&self.r, x);
        let z = self.inner.apply(&y);
        apply_vlambda_inv_t(&self.r, &z)
    }

    /// `D (I + (λ - 1)/√|Ω| m wᵀ) x`.
    pub fn apply_commuted(&self, x: &[f64]) -> Vec<f64> {
        let c = (self.r.lambda - 1.0) / self.r.mean.omega_sqrt * MeanVector::w_dot(x);
        let y: Vec<f64> = x.iter().zip(&self.r.mean.m).map(|(xi, mi)| xi + c * mi).collect();
        self.inner.apply(&y)
    }
}

impl LinearOp for RankOnePreconditioner {
    fn dim(&self) -> usize {
        self.r.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let out = if self.commuted { self.apply_commuted(x) } else { self.apply_composed(x) };
        y.copy_from_slice(&out);
    }
}

pub fn build_qt_preconditioner(r: &Arc<RankOneMass>, inner: MassInner) -> Result<RankOnePreconditioner> {
    if r.lambda < 1.0 {
        return Err(invalid("rank-one pressure preconditioner needs λ >= 1"));
    }
    let (op, commuted): (Arc<dyn LinearOp>, bool) = match inner {
        MassInner::Jacobi => {
            let d = DiagonalOp::jacobi(&r.mass);
            if d.diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(invalid("mass matrix has a nonpositive diagonal"));
            }
            (Arc::new(d), r.family == Family::P1)
        }
        MassInner::ExactMass => (r.mass_solver()? as Arc<dyn LinearOp>, false),
    };
    Ok(RankOnePreconditioner { r: Arc::clone(r), inner: op, commuted })
}

/// Splits `x` into its mean-value part (a multiple of `w`) and the mean-free remainder.
pub fn project_mean(x: &[f64], mean: &MeanVector, mass: &SparseMat) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != mean.len() || mass.n_rows() != x.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: x.len() });
    }
    // ∫ x / |Ω| with ∫ x = wᵀ M x
    let c = MeanVector::w_dot(&mass.mul_vec(x)) / (mean.omega_sqrt * mean.omega_sqrt);
    let x_mean = vec![c; x.len()];
    let x_zero = x.iter().map(|v| v - c).collect();
    Ok((x_mean, x_zero))
}
