//! Benchmark saddle-point systems and their block-diagonal preconditioners.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elements::{dirichlet_dofs, dof_mask, make_space, FeSpace, Family};
use crate::error::{invalid, Error, Result};
use crate::forms::{
    assemble_div, assemble_eps_eps, assemble_grad_grad, assemble_load_scalar, assemble_load_vector, assemble_mass,
    eliminate, CoefficientField,
};
use crate::krylov::dense::{dense_eig_oracle_op, generalized, DENSE_CAP};
use crate::krylov::lanczos::{estimate_condition, ConditionOptions, SpectrumEstimate};
use crate::krylov::ldl::{factorize, Definiteness, LdlFactor};
use crate::krylov::linop::{BlockDiagonal, DiagonalOp, LinearOp};
use crate::krylov::minres::{minres, MinresOptions, SolveReport};
use crate::krylov::mm;
use crate::krylov::sparse::{offsets, SparseMat};
use crate::mesh::{build_unit_square, BcPreset, BoundaryRole, TriMesh};
use crate::pressure_precond::{build_mean_vector, build_qt_preconditioner, MassInner, RankOneMass};

/// Reduced parameters `(λ', α', κ')` with μ' = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiotParams {
    pub lambda: CoefficientField,
    pub alpha: f64,
    pub kappa: CoefficientField,
    pub mu: f64,
}

impl BiotParams {
    pub fn new(lambda: impl Into<CoefficientField>, alpha: f64, kappa: impl Into<CoefficientField>) -> Self {
        Self { lambda: lambda.into(), alpha, kappa: kappa.into(), mu: 1.0 }
    }

    /// Positivity and shape checks; always enforced.
    pub fn validate(&self, n_cells: usize) -> Result<()> {
        self.lambda.validate(n_cells, "λ")?;
        self.kappa.validate(n_cells, "κ")?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("α must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Violations of `1 <= λ < ∞`, `0 < α <= 1`, `0 < κ <= 1`.
    pub fn range_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda.min() < 1.0 {
            out.push(format!("λ = {} is below 1", self.lambda.min()));
        }
        if self.alpha > 1.0 {
            out.push(format!("α = {} exceeds 1", self.alpha));
        }
        if self.kappa.max() > 1.0 {
            out.push(format!("κ = {} exceeds 1", self.kappa.max()));
        }
        out
    }
}

/// Physical data of one backward-Euler step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Reference shear modulus μ̄ (Pa).
    pub mu_bar: f64,
    /// Shear modulus (Pa).
    pub mu: CoefficientField,
    /// Lamé λ (Pa).
    pub lambda_phys: f64,
    /// Biot–Willis constant.
    pub alpha_phys: f64,
    /// Storage coefficient (1/Pa).
    pub s0: f64,
    /// Hydraulic conductivity.
    pub kappa_phys: CoefficientField,
    /// Time step δ² (s).
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub params: BiotParams,
    /// Factor `1/(2μ̄)` applied to the loads.
    pub rhs_scale: f64,
    pub warnings: Vec<String>,
}

pub fn rescale_parameters(phys: &PhysicalParams) -> Result<Rescaled> {
    let positive = [
        ("μ̄", phys.mu_bar),
        ("λ", phys.lambda_phys),
        ("α", phys.alpha_phys),
        ("s₀", phys.s0),
        ("δ²", phys.dt),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, f) in [("μ", &phys.mu), ("κ", &phys.kappa_phys)] {
        if f.values().iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("{name} must be positive")));
        }
    }
    let two_mu = 2.0 * phys.mu_bar;
    let params = BiotParams::new(
        phys.lambda_phys / two_mu,
        phys.alpha_phys / two_mu,
        phys.kappa_phys.scaled(phys.dt / two_mu),
    );
    let mut warnings = params.range_violations();
    let (lo, hi) = (phys.mu.min() / phys.mu_bar, phys.mu.max() / phys.mu_bar);
    if lo < 0.1 || hi > 10.0 {
        warnings.push(format!("μ/μ̄ spans [{lo:.3e}, {hi:.3e}], outside [0.1, 10]"));
    }
    let s0_model = phys.alpha_phys * phys.alpha_phys / phys.lambda_phys;
    if (phys.s0 - s0_model).abs() > 1e-2 * s0_model {
        warnings.push(format!("s₀ = {:.3e} differs from α²/λ = {s0_model:.3e} assumed by the reduced model", phys.s0));
    }
    Ok(Rescaled { params, rhs_scale: 1.0 / two_mu, warnings })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Elements {
    /// P2 displacement, P1 pressures.
    TaylorHood,
    /// P1 + bubble displacement, P1 pressures.
    Mini,
}

impl Elements {
    pub fn velocity_family(self) -> Family {
        match self {
            Elements::TaylorHood => Family::P2,
            Elements::Mini => Family::MiniVelocity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiotPrecond {
    /// `εε⁻¹ ⊕ M⁻¹ ⊕ (α²λ⁻¹M + κK)⁻¹`.
    GeneralBC,
    /// `εε⁻¹ ⊕ (λ⁻¹I + I₀)⁻¹ ⊕ (α²λ⁻¹M + κK)⁻¹`, second block by the rank-one construction.
    DirichletBC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ex2Precond {
    B1,
    B2,
}

/// The eight benchmark configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
    Ex1,
    Ex2a,
    Ex2b,
    Ex3,
}

impl CaseId {
    pub const ALL: [CaseId; 8] =
        [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4, CaseId::Ex1, CaseId::Ex2a, CaseId::Ex2b, CaseId::Ex3];

    pub fn preset(self) -> BcPreset {
        match self {
            CaseId::Case1 | CaseId::Case4 | CaseId::Ex3 => BcPreset::LeftOpen,
            _ => BcPreset::AllDirichlet,
        }
    }

    pub fn elements(self) -> Elements {
        match self {
            CaseId::Case4 => Elements::Mini,
            _ => Elements::TaylorHood,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CaseId::Case1 => "1",
            CaseId::Case2 => "2",
            CaseId::Case3 => "3",
            CaseId::Case4 => "4",
            CaseId::Ex1 => "ex1",
            CaseId::Ex2a => "ex2a",
            CaseId::Ex2b => "ex2b",
            CaseId::Ex3 => "ex3",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("case").unwrap_or(&t);
        CaseId::ALL
            .into_iter()
            .find(|c| c.label() == t)
            .ok_or_else(|| Error::Parse(format!("unknown case '{s}' (expected 1|2|3|4|ex1|ex2a|ex2b|ex3)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SystemKind {
    BiotTotalPressure { case: CaseId, precond: BiotPrecond, params: BiotParams },
    BiotSolidPressure { lambda: f64, kappa: CoefficientField },
    Ex1 { kappa: f64 },
    Ex2 { lambda: f64, precond: Ex2Precond },
}

/// Parameter-independent spaces and matrices for one mesh and element pair.
pub struct Discretization {
    mesh: Arc<TriMesh>,
    elements: Elements,
    v: FeSpace,
    q: FeSpace,
    u_fixed: Vec<bool>,
    pf_fixed: Vec<bool>,
    /// `(ε, ε)` with Dirichlet rows/columns eliminated.
    eps: Arc<SparseMat>,
    /// Vector `(∇, ∇)` with Dirichlet rows/columns eliminated.
    lap: Arc<SparseMat>,
    /// `(div v, q)` with constrained displacement columns removed.
    div: Arc<SparseMat>,
    /// Unconstrained P1 mass and stiffness.
    mass: Arc<SparseMat>,
    stiff: Arc<SparseMat>,
    eps_factor: OnceLock<Arc<LdlFactor>>,
    lap_factor: OnceLock<Arc<LdlFactor>>,
    mass_factor: OnceLock<Arc<LdlFactor>>,
}

fn cached(cell: &OnceLock<Arc<LdlFactor>>, f: impl FnOnce() -> Result<LdlFactor>) -> Result<Arc<LdlFactor>> {
    if let Some(v) = cell.get() {
        return Ok(Arc::clone(v));
    }
    let v = Arc::new(f()?);
    Ok(Arc::clone(cell.get_or_init(|| v)))
}

impl Discretization {
    pub fn new(n_div: usize, preset: BcPreset, elements: Elements) -> Result<Self> {
        let mesh = Arc::new(build_unit_square(n_div, preset)?);
        Self::on_mesh(mesh, elements)
    }

    pub fn on_mesh(mesh: Arc<TriMesh>, elements: Elements) -> Result<Self> {
        let v = make_space(&mesh, elements.velocity_family(), 2)?;
        let q = make_space(&mesh, Family::P1, 1)?;
        let u_fixed = dof_mask(v.n_dofs(), &dirichlet_dofs(&v, BoundaryRole::Displacement)?);
        let pf_fixed = dof_mask(q.n_dofs(), &dirichlet_dofs(&q, BoundaryRole::Pressure)?);
        let one = CoefficientField::Constant(1.0);
        let eps = eliminate(&assemble_eps_eps(&v)?, &u_fixed, &u_fixed, true);
        let lap = eliminate(&assemble_grad_grad(&v, &one)?, &u_fixed, &u_fixed, true);
        let no_rows = vec![false; q.n_dofs()];
        let div = eliminate(&assemble_div(&v, &q)?, &no_rows, &u_fixed, false);
        let mass = assemble_mass(&q, &one)?;
        let stiff = assemble_grad_grad(&q, &one)?;
        Ok(Self {
            mesh,
            elements,
            v,
            q,
            u_fixed,
            pf_fixed,
            eps: Arc::new(eps),
            lap: Arc::new(lap),
            div: Arc::new(div),
            mass: Arc::new(mass),
            stiff: Arc::new(stiff),
            eps_factor: OnceLock::new(),
            lap_factor: OnceLock::new(),
            mass_factor: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn elements(&self) -> Elements {
        self.elements
    }

    pub fn velocity_space(&self) -> &FeSpace {
        &self.v
    }

    pub fn pressure_space(&self) -> &FeSpace {
        &self.q
    }

    pub fn displacement_fixed(&self) -> &[bool] {
        &self.u_fixed
    }

    pub fn pressure_fixed(&self) -> &[bool] {
        &self.pf_fixed
    }

    pub fn eps_matrix(&self) -> &Arc<SparseMat> {
        &self.eps
    }

    pub fn laplacian_matrix(&self) -> &Arc<SparseMat> {
        &self.lap
    }

    pub fn div_matrix(&self) -> &Arc<SparseMat> {
        &self.div
    }

    pub fn mass_matrix(&self) -> &Arc<SparseMat> {
        &self.mass
    }

    pub fn stiffness_matrix(&self) -> &Arc<SparseMat> {
        &self.stiff
    }

    pub fn eps_factor(&self) -> Result<Arc<LdlFactor>> {
        cached(&self.eps_factor, || factorize(&self.eps, Definiteness::PositiveDefinite, "strain block"))
    }

    pub fn laplacian_factor(&self) -> Result<Arc<LdlFactor>> {
        cached(&self.lap_factor, || factorize(&self.lap, Definiteness::PositiveDefinite, "vector Laplacian"))
    }

    pub fn mass_factor(&self) -> Result<Arc<LdlFactor>> {
        cached(&self.mass_factor, || factorize(&self.mass, Definiteness::PositiveDefinite, "pressure mass"))
    }

    /// Mass with weight `c · w(x)`; a constant weight reuses the cached matrix.
    fn weighted_mass(&self, w: &CoefficientField, c: f64) -> Result<SparseMat> {
        match w.as_constant() {
            Some(v) => Ok(self.mass.scaled(v).scaled(c)),
            None => assemble_mass(&self.q, &w.scaled(c)),
        }
    }

    fn weighted_stiffness(&self, w: &CoefficientField) -> Result<SparseMat> {
        match w.as_constant() {
            Some(v) => Ok(self.stiff.scaled(v)),
            None => assemble_grad_grad(&self.q, w),
        }
    }

    fn inverse_lambda(&self, lambda: &CoefficientField) -> CoefficientField {
        match lambda {
            CoefficientField::Constant(l) => CoefficientField::Constant(1.0 / l),
            CoefficientField::PiecewiseConstant(v) => CoefficientField::PiecewiseConstant(v.iter().map(|l| 1.0 / l).collect()),
        }
    }

    fn mass_inverse(&self, inner: MassInner) -> Result<Arc<dyn LinearOp>> {
        Ok(match inner {
            MassInner::ExactMass => self.mass_factor()?,
            MassInner::Jacobi => Arc::new(DiagonalOp::jacobi(&self.mass)),
        })
    }

    fn rank_one(&self, lambda: f64, inner: MassInner) -> Result<Arc<dyn LinearOp>> {
        let mean = build_mean_vector(&self.q, &self.mass)?;
        let mut r = RankOneMass::new(Arc::clone(&self.mass), mean, lambda, Family::P1)?;
        if inner == MassInner::ExactMass {
            r = r.with_mass_factor(self.mass_factor()?);
        }
        Ok(Arc::new(build_qt_preconditioner(&Arc::new(r), inner)?))
    }
}

/// Body force and fluid source used for every load vector.
pub fn body_force(x: f64, y: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    [(PI * x).sin() * (PI * y).sin(), x * y * (1.0 - x) * (1.0 - y)]
}

pub fn fluid_source(x: f64, y: f64) -> f64 {
    (std::f64::consts::PI * x).sin() * y
}

/// A block system `A x = b` with a block-diagonal preconditioner.
#[derive(Clone)]
pub struct BlockSystem {
    pub kind: SystemKind,
    pub n_div: usize,
    pub field_names: Vec<&'static str>,
    pub field_sizes: Vec<usize>,
    blocks: Vec<Vec<Option<SparseMat>>>,
    matrix: SparseMat,
    pub rhs: Vec<f64>,
    load: Vec<f64>,
    precond: Arc<BlockDiagonal>,
    /// Matrices whose (approximate) inverses form the preconditioner blocks.
    precond_matrices: Vec<SparseMat>,
    pub constrained: Vec<bool>,
    pub drop_null: usize,
    pub null_vector: Option<Vec<f64>>,
}

impl BlockSystem {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: SystemKind,
        n_div: usize,
        field_names: Vec<&'static str>,
        blocks: Vec<Vec<Option<SparseMat>>>,
        precond_blocks: Vec<Arc<dyn LinearOp>>,
        precond_matrices: Vec<SparseMat>,
        constrained: Vec<bool>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let field_sizes: Vec<usize> = precond_blocks.iter().map(|b| b.dim()).collect();
        let refs: Vec<Vec<Option<&SparseMat>>> = blocks.iter().map(|r| r.iter().map(|b| b.as_ref()).collect()).collect();
        let matrix = SparseMat::from_blocks(&refs, &field_sizes, &field_sizes)?;
        if rhs.len() != matrix.n_rows() || constrained.len() != matrix.n_rows() {
            return Err(Error::DimensionMismatch { expected: matrix.n_rows(), got: rhs.len() });
        }
        Ok(Self {
            kind,
            n_div,
            field_names,
            field_sizes,
            blocks,
            matrix,
            load: rhs.clone(),
            rhs,
            precond: Arc::new(BlockDiagonal::new(precond_blocks)),
            precond_matrices,
            constrained,
            drop_null: 0,
            null_vector: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &SparseMat {
        &self.matrix
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&SparseMat> {
        self.blocks.get(i)?.get(j)?.as_ref()
    }

    pub fn preconditioner(&self) -> &Arc<BlockDiagonal> {
        &self.precond
    }

    pub fn precond_matrices(&self) -> &[SparseMat] {
        &self.precond_matrices
    }

    pub fn field_offsets(&self) -> Vec<usize> {
        offsets(&self.field_sizes)
    }

    pub fn n_free(&self) -> usize {
        self.constrained.iter().filter(|&&c| !c).count()
    }

    /// Unscaled load vector from [`body_force`] and [`fluid_source`].
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn with_rhs(mut self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.len() });
        }
        self.rhs = rhs;
        Ok(self)
    }

    pub fn solve(&self, opts: MinresOptions) -> Result<(Vec<f64>, SolveReport)> {
        minres(&self.matrix, &*self.precond, &self.rhs, opts)
    }

    pub fn estimate_condition(&self, n_probe: usize, seed: u64) -> Result<SpectrumEstimate> {
        // a known null vector is deflated rather than left for Lanczos to resolve
        let deflate: Vec<Vec<f64>> = self.null_vector.iter().cloned().collect();
        let opts = ConditionOptions {
            n_probe,
            drop_null: self.drop_null.saturating_sub(deflate.len()),
            frozen: Some(self.constrained.clone()),
            deflate,
            seed,
            ..Default::default()
        };
        estimate_condition(&self.matrix, &*self.precond, &opts)
    }

    /// Full spectrum of `B A` on the free dofs (dense; dimension ≤ [`DENSE_CAP`]).
    pub fn dense_spectrum(&self) -> Result<Vec<f64>> {
        dense_eig_oracle_op(&self.matrix, &*self.precond, Some(&self.constrained))
    }

    /// `sqrt((B r, r))` for `r = b - A x`.
    pub fn b_residual_norm(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        crate::krylov::sparse::dot(&r, &self.precond.apply(&r)).max(0.0).sqrt()
    }

    /// Writes every nonzero block, the preconditioner matrices, the rhs and a manifest.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    let name = format!("A_{i}{j}.mtx");
                    mm::write_matrix(b, i == j, BufWriter::new(File::create(dir.join(&name))?))?;
                    files.push(name);
                }
            }
        }
        for (i, p) in self.precond_matrices.iter().enumerate() {
            let name = format!("P_{i}.mtx");
            mm::write_matrix(p, true, BufWriter::new(File::create(dir.join(&name))?))?;
            files.push(name);
        }
        mm::write_vector(&self.rhs, BufWriter::new(File::create(dir.join("rhs.mtx"))?))?;
        files.push("rhs.mtx".into());
        let constrained: Vec<usize> = (0..self.dim()).filter(|&i| self.constrained[i]).collect();
        let manifest = serde_json::json!({
            "kind": self.kind,
            "N": self.n_div,
            "fields": self.field_names,
            "block_sizes": self.field_sizes,
            "dim": self.dim(),
            "drop_null": self.drop_null,
            "constrained_dofs": constrained,
            "files": files,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn neg(m: &SparseMat) -> SparseMat {
    m.scaled(-1.0)
}

fn concat(parts: &[&[bool]]) -> Vec<bool> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn zero_masked(v: &mut [f64], mask: &[bool]) {
    for (x, &m) in v.iter_mut().zip(mask) {
        if m {
            *x = 0.0;
        }
    }
}

fn require(disc: &Discretization, preset: BcPreset, elements: Elements, what: &str) -> Result<()> {
    if disc.mesh.preset() != preset || disc.elements != elements {
        return Err(invalid(format!("{what} needs the {preset:?} preset with {elements:?} elements")));
    }
    Ok(())
}

fn loads(disc: &Discretization) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f = assemble_load_vector(&disc.v, body_force)?;
    zero_masked(&mut f, &disc.u_fixed);
    let g = assemble_load_scalar(&disc.q, fluid_source)?;
    Ok((f, g))
}

/// The total-pressure system `(u, p_T, p_F)`.
pub fn build_biot_total_pressure(
    disc: &Discretization,
    params: &BiotParams,
    precond: BiotPrecond,
    inner: MassInner,
) -> Result<BlockSystem> {
    params.validate(disc.mesh.n_cells())?;
    let lambda_const = params.lambda.as_constant();
    if precond == BiotPrecond::DirichletBC {
        if disc.mesh.preset() != BcPreset::AllDirichlet {
            return Err(invalid("the Dirichlet-boundary preconditioner needs Γd = ∂Ω"));
        }
        if lambda_const.is_none() {
            return Err(Error::Unsupported("the rank-one pressure preconditioner needs a constant λ".into()));
        }
    }
    let case = match (disc.mesh.preset(), disc.elements, precond) {
        (BcPreset::LeftOpen, Elements::TaylorHood, BiotPrecond::GeneralBC) => CaseId::Case1,
        (BcPreset::AllDirichlet, Elements::TaylorHood, BiotPrecond::DirichletBC) => CaseId::Case2,
        (BcPreset::AllDirichlet, Elements::TaylorHood, BiotPrecond::GeneralBC) => CaseId::Case3,
        (BcPreset::LeftOpen, Elements::Mini, BiotPrecond::GeneralBC) => CaseId::Case4,
        other => return Err(Error::Unsupported(format!("no benchmark case matches {other:?}"))),
    };

    let nq = disc.q.n_dofs();
    let none_q = vec![false; nq];
    let pf = &disc.pf_fixed;
    let alpha = params.alpha;
    let lam_inv = disc.inverse_lambda(&params.lambda);
    let m_lam = disc.weighted_mass(&lam_inv, 1.0)?;
    let kk = disc.weighted_stiffness(&params.kappa)?;

    let a11 = (*disc.eps).clone();
    let a21 = neg(&disc.div);
    let a12 = a21.transpose();
    let a22 = neg(&m_lam);
    let a23 = eliminate(&m_lam.scaled(alpha), &none_q, pf, false);
    let a32 = a23.transpose();
    let a33 = eliminate(&m_lam.scaled(2.0 * alpha * alpha).lin_comb(-1.0, &kk, -1.0), pf, pf, true);

    let p3 = eliminate(&m_lam.scaled(alpha * alpha).lin_comb(1.0, &kk, 1.0), pf, pf, true);
    let p3_factor = factorize(&p3, Definiteness::PositiveDefinite, "fluid pressure block")?;
    let qt: Arc<dyn LinearOp> = match precond {
        BiotPrecond::GeneralBC => disc.mass_inverse(inner)?,
        BiotPrecond::DirichletBC => disc.rank_one(lambda_const.unwrap(), inner)?,
    };

    let (f, g) = loads(disc)?;
    let mut g = g;
    zero_masked(&mut g, pf);
    let rhs = [f, vec![0.0; nq], g].concat();
    let constrained = concat(&[&disc.u_fixed, &none_q, pf]);
    BlockSystem::assemble(
        SystemKind::BiotTotalPressure { case, precond, params: params.clone() },
        disc.mesh.n_div(),
        vec!["u", "p_T", "p_F"],
        vec![vec![Some(a11), Some(a12), None], vec![Some(a21), Some(a22), Some(a23)], vec![None, Some(a32), Some(a33)]],
        vec![disc.eps_factor()?, qt, Arc::new(p3_factor)],
        vec![(*disc.eps).clone(), (*disc.mass).clone(), p3],
        constrained,
        rhs,
    )
}

/// Solid-pressure formulation `(u, p_S, p_F)` with α = 1 (negative control).
pub fn build_biot_solid_pressure(disc: &Discretization, lambda: f64, kappa: &CoefficientField) -> Result<BlockSystem> {
    require(disc, BcPreset::LeftOpen, Elements::TaylorHood, "the solid-pressure system")?;
    kappa.validate(disc.mesh.n_cells(), "κ")?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("λ must be positive"));
    }
    let nq = disc.q.n_dofs();
    let none_q = vec![false; nq];
    let pf = &disc.pf_fixed;
    let kk = disc.weighted_stiffness(kappa)?;

    let bs = neg(&disc.div);
    let bf = eliminate(&bs, pf, &vec![false; disc.v.n_dofs()], false);
    let a22 = neg(&disc.mass.scaled(1.0 / lambda));
    let a33 = eliminate(&disc.mass.scaled(1.0 / lambda).lin_comb(-1.0, &kk, -1.0), pf, pf, true);
    let p3 = eliminate(&disc.mass.lin_comb(1.0, &kk, 1.0), pf, pf, true);
    let p3_factor = factorize(&p3, Definiteness::PositiveDefinite, "fluid pressure block")?;

    let (f, g) = loads(disc)?;
    let mut g = g;
    zero_masked(&mut g, pf);
    let rhs = [f, vec![0.0; nq], g].concat();
    BlockSystem::assemble(
        SystemKind::BiotSolidPressure { lambda, kappa: kappa.clone() },
        disc.mesh.n_div(),
        vec!["u", "p_S", "p_F"],
        vec![
            vec![Some((*disc.eps).clone()), Some(bs.transpose()), Some(bf.transpose())],
            vec![Some(bs), Some(a22), None],
            vec![Some(bf), None, Some(a33)],
        ],
        vec![disc.laplacian_factor()?, disc.mass_factor()?, Arc::new(p3_factor)],
        vec![(*disc.lap).clone(), (*disc.mass).clone(), p3],
        concat(&[&disc.u_fixed, &none_q, pf]),
        rhs,
    )
}

/// Stokes–Darcy type system `(u, p)` with Neumann pressure; κ = 0 gives Stokes.
pub fn build_ex1(disc: &Discretization, kappa: f64) -> Result<BlockSystem> {
    require(disc, BcPreset::AllDirichlet, Elements::TaylorHood, "example 1")?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("κ must be nonnegative, got {kappa}")));
    }
    let nq = disc.q.n_dofs();
    let b = neg(&disc.div);
    let a22 = neg(&disc.stiff.scaled(kappa));
    let p2 = disc.mass.lin_comb(1.0, &disc.stiff, kappa);
    let p2_factor = factorize(&p2, Definiteness::PositiveDefinite, "pressure block")?;

    let (f, mut g) = loads(disc)?;
    // the pressure is determined up to a constant; keep the load in the range
    let m = assemble_load_scalar(&disc.q, |_, _| 1.0)?;
    let c = g.iter().sum::<f64>() / m.iter().sum::<f64>();
    g.iter_mut().zip(&m).for_each(|(gi, mi)| *gi -= c * mi);
    let rhs = [f, g].concat();
    let mut sys = BlockSystem::assemble(
        SystemKind::Ex1 { kappa },
        disc.mesh.n_div(),
        vec!["u", "p"],
        vec![vec![Some((*disc.lap).clone()), Some(b.transpose())], vec![Some(b), Some(a22)]],
        vec![disc.laplacian_factor()?, Arc::new(p2_factor)],
        vec![(*disc.lap).clone(), p2],
        concat(&[&disc.u_fixed, &vec![false; nq]]),
        rhs,
    )?;
    sys.drop_null = 1;
    sys.null_vector = Some([vec![0.0; disc.v.n_dofs()], vec![1.0; nq]].concat());
    Ok(sys)
}

/// Lamé-type system `(u, p)` with `εε⁻¹ ⊕ M⁻¹` (B1) or `εε⁻¹ ⊕ (λ⁻¹I_m + I₀)⁻¹` (B2).
pub fn build_ex2(disc: &Discretization, lambda: f64, precond: Ex2Precond, inner: MassInner) -> Result<BlockSystem> {
    require(disc, BcPreset::AllDirichlet, Elements::TaylorHood, "example 2")?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(invalid(format!("example 2 needs a constant λ >= 1, got {lambda}")));
    }
    let nq = disc.q.n_dofs();
    let b = (*disc.div).clone();
    let a22 = neg(&disc.mass.scaled(1.0 / lambda));
    let p2: Arc<dyn LinearOp> = match precond {
        Ex2Precond::B1 => disc.mass_inverse(inner)?,
        Ex2Precond::B2 => disc.rank_one(lambda, inner)?,
    };
    let (f, g) = loads(disc)?;
    BlockSystem::assemble(
        SystemKind::Ex2 { lambda, precond },
        disc.mesh.n_div(),
        vec!["u", "p"],
        vec![vec![Some((*disc.eps).clone()), Some(b.transpose())], vec![Some(b), Some(a22)]],
        vec![disc.eps_factor()?, p2],
        vec![(*disc.eps).clone(), (*disc.mass).clone()],
        concat(&[&disc.u_fixed, &vec![false; nq]]),
        [f, g].concat(),
    )
}

/// Discrete inf-sup constant of the pair `(V, Q)` in the `H¹`-seminorm / `L²` setting:
/// `β₀² = min θ` for `B A⁻¹ Bᵀ x = θ M x`, with displacement Dirichlet dofs of the
/// mesh preset removed. With `zero_mean`, `Q` is restricted to mean-free functions.
pub fn discrete_inf_sup(v: &FeSpace, q: &FeSpace, zero_mean: bool) -> Result<f64> {
    let nq = q.n_dofs();
    if nq > DENSE_CAP {
        return Err(Error::DimensionCap { cap: DENSE_CAP, got: nq });
    }
    let fixed = dof_mask(v.n_dofs(), &dirichlet_dofs(v, BoundaryRole::Displacement)?);
    let lap = eliminate(&assemble_grad_grad(v, &CoefficientField::Constant(1.0))?, &fixed, &fixed, true);
    let b = eliminate(&assemble_div(v, q)?, &vec![false; nq], &fixed, false);
    let mass = assemble_mass(q, &CoefficientField::Constant(1.0))?;
    let factor = factorize(&lap, Definiteness::PositiveDefinite, "vector Laplacian")?;

    let bt = b.transpose();
    let mut s = DMatrix::zeros(nq, nq);
    let mut e = vec![0.0; nq];
    for j in 0..nq {
        e[j] = 1.0;
        let col = b.mul_vec(&factor.solve(&bt.mul_vec(&e)));
        s.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let m = mass.to_dense();
    let (s, m) = if zero_mean {
        // Z_i = e_i - (m_i / m_n) e_n spans the mean-free subspace
        let mv = assemble_load_scalar(q, |_, _| 1.0)?;
        let last = nq - 1;
        let mut z = DMatrix::zeros(nq, last);
        for i in 0..last {
            z[(i, i)] = 1.0;
            z[(last, i)] = -mv[i] / mv[last];
        }
        (z.transpose() * &s * &z, z.transpose() * &m * &z)
    } else {
        (s, m)
    };
    let theta = generalized(s, m)?;
    Ok(theta[0].max(0.0).sqrt())
}

/// Dense solve of `A x = b` restricted to free dofs, with a rank-one
/// regularization along the known null vector if present. Oracle use only.
pub fn dense_reference_solution(sys: &BlockSystem) -> Result<Vec<f64>> {
    let n = sys.dim();
    if n > DENSE_CAP {
        return Err(Error::DimensionCap { cap: DENSE_CAP, got: n });
    }
    let mut a = sys.matrix().to_dense();
    if let Some(nv) = &sys.null_vector {
        let v = DVector::from_column_slice(nv);
        let scale = a.amax() / v.norm_squared();
        a += scale * &v * v.transpose();
    }
    a.lu()
        .solve(&DVector::from_column_slice(&sys.rhs))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| invalid("reference system is singular"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_ids_parse() {
        assert_eq!("1".parse::<CaseId>().unwrap(), CaseId::Case1);
        assert_eq!("ex2b".parse::<CaseId>().unwrap(), CaseId::Ex2b);
        assert_eq!("Case4".parse::<CaseId>().unwrap(), CaseId::Case4);
        assert!("5".parse::<CaseId>().is_err());
    }

    #[test]
    fn rescale_unit_shear() {
        let phys = PhysicalParams {
            mu_bar: 0.5,
            mu: 0.5.into(),
            lambda_phys: 2.0,
            alpha_phys: 1.0,
            s0: 0.5,
            kappa_phys: 1e-4.into(),
            dt: 1.0,
        };
        let r = rescale_parameters(&phys).unwrap();
        assert_eq!(r.params, BiotParams::new(2.0, 1.0, 1e-4));
        assert_eq!(r.rhs_scale, 1.0);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn rescale_rejects_nonpositive() {
        let phys = PhysicalParams {
            mu_bar: 0.0,
            mu: 1.0.into(),
            lambda_phys: 1.0,
            alpha_phys: 1.0,
            s0: 1.0,
            kappa_phys: 1.0.into(),
            dt: 1.0,
        };
        assert!(rescale_parameters(&phys).is_err());
    }

    #[test]
    fn dirichlet_precond_needs_constant_lambda() {
        let d = Discretization::new(2, BcPreset::AllDirichlet, Elements::TaylorHood).unwrap();
        let lam = CoefficientField::PiecewiseConstant(vec![2.0; 8]);
        let p = BiotParams::new(lam, 1.0, 1.0);
        assert!(matches!(
            build_biot_total_pressure(&d, &p, BiotPrecond::DirichletBC, MassInner::ExactMass),
            Err(Error::Unsupported(_))
        ));
        assert!(build_biot_total_pressure(&d, &p, BiotPrecond::GeneralBC, MassInner::ExactMass).is_ok());
    }

    #[test]
    fn dirichlet_precond_needs_full_dirichlet_mesh() {
        let d = Discretization::new(2, BcPreset::LeftOpen, Elements::TaylorHood).unwrap();
        let p = BiotParams::new(1.0, 1.0, 1.0);
        assert!(build_biot_total_pressure(&d, &p, BiotPrecond::DirichletBC, MassInner::ExactMass).is_err());
    }
}
