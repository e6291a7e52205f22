//! Assembly of the bilinear forms and load vectors used by the systems.

use serde::{Deserialize, Serialize};

use crate::elements::{eval_basis, BasisEval, CellGeometry, FeSpace, Family, QuadratureRule};
use crate::error::{invalid, Error, Result};
use crate::krylov::sparse::{SparseMat, TripletBuilder};
use crate::mesh::{locate_region, Rect, TriMesh};

/// A cellwise coefficient such as κ(x) or λ(x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoefficientField {
    Constant(f64),
    PiecewiseConstant(Vec<f64>),
}

impl CoefficientField {
    /// `inner` on cells with barycenter in `region`, `outer` elsewhere.
    pub fn band(mesh: &TriMesh, region: &Rect, inner: f64, outer: f64) -> Result<Self> {
        let mut v = vec![outer; mesh.n_cells()];
        for k in locate_region(mesh, region)? {
            v[k] = inner;
        }
        Ok(CoefficientField::PiecewiseConstant(v))
    }

    pub fn value(&self, cell: usize) -> f64 {
        match self {
            CoefficientField::Constant(c) => *c,
            CoefficientField::PiecewiseConstant(v) => v[cell],
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            CoefficientField::Constant(c) => Some(*c),
            CoefficientField::PiecewiseConstant(_) => None,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            CoefficientField::Constant(c) => vec![*c],
            CoefficientField::PiecewiseConstant(v) => v.clone(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            CoefficientField::Constant(v) => CoefficientField::Constant(c * v),
            CoefficientField::PiecewiseConstant(v) => CoefficientField::PiecewiseConstant(v.iter().map(|x| c * x).collect()),
        }
    }

    /// Checks length against the mesh and strict positivity.
    pub fn validate(&self, n_cells: usize, name: &str) -> Result<()> {
        if let CoefficientField::PiecewiseConstant(v) = self {
            if v.len() != n_cells {
                return Err(Error::DimensionMismatch { expected: n_cells, got: v.len() });
            }
        }
        if self.values().iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid(format!("{name} must be positive and finite")));
        }
        Ok(())
    }
}

impl From<f64> for CoefficientField {
    fn from(c: f64) -> Self {
        CoefficientField::Constant(c)
    }
}

/// Basis data of one cell at every quadrature point.
struct CellTable {
    /// `w_q |det J|`.
    jw: Vec<f64>,
    vals: Vec<Vec<f64>>,
    grads: Vec<Vec<[f64; 2]>>,
}

struct RefTable {
    rule: QuadratureRule,
    basis: Vec<BasisEval>,
}

impl RefTable {
    fn new(family: Family) -> Self {
        let rule = QuadratureRule::degree4();
        let basis = rule.points.iter().map(|&p| eval_basis(family, p)).collect();
        Self { rule, basis }
    }

    fn cell(&self, geo: &CellGeometry) -> CellTable {
        let det = geo.det();
        CellTable {
            jw: self.rule.weights.iter().map(|w| w * det).collect(),
            vals: self.basis.iter().map(|b| b.values.clone()).collect(),
            grads: self.basis.iter().map(|b| b.grads.iter().map(|&g| geo.physical_grad(g)).collect()).collect(),
        }
    }
}

fn same_mesh(a: &FeSpace, b: &FeSpace) -> Result<()> {
    if !std::sync::Arc::ptr_eq(a.mesh(), b.mesh()) {
        return Err(invalid("spaces live on different meshes"));
    }
    Ok(())
}

fn require_vector(v: &FeSpace, what: &str) -> Result<()> {
    if v.value_dim() != 2 {
        return Err(Error::Unsupported(format!("{what} needs a vector space")));
    }
    Ok(())
}

fn check_weight(space: &FeSpace, weight: &CoefficientField) -> Result<()> {
    weight.validate(space.mesh().n_cells(), "weight")
}

/// Assembles a symmetric form on one space from a per-cell kernel; constant
/// weights are applied by exact scaling of the unit-weight matrix.
fn assemble_square<K>(space: &FeSpace, weight: &CoefficientField, kernel: K) -> Result<SparseMat>
where
    K: Fn(&CellTable, usize, usize, usize, usize) -> f64,
{
    check_weight(space, weight)?;
    let mesh = space.mesh();
    let table = RefTable::new(space.family());
    let nloc = space.family().local_nodes();
    let d = space.value_dim();
    let nd = nloc * d;
    let mut tb = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), mesh.n_cells() * nd * nd);
    for cell in 0..mesh.n_cells() {
        let ct = table.cell(&CellGeometry::new(mesh, cell));
        let dofs = space.cell_dofs(cell);
        let wc = match weight {
            CoefficientField::Constant(_) => 1.0,
            CoefficientField::PiecewiseConstant(v) => v[cell],
        };
        for a in 0..nloc {
            for c in 0..d {
                for b in 0..nloc {
                    for e in 0..d {
                        tb.push(dofs[a * d + c], dofs[b * d + e], wc * kernel(&ct, a, c, b, e));
                    }
                }
            }
        }
    }
    let m = tb.build();
    Ok(match weight {
        CoefficientField::Constant(c) if *c != 1.0 => m.scaled(*c),
        _ => m,
    })
}

/// `(ε(u), ε(v))`.
pub fn assemble_eps_eps(v: &FeSpace) -> Result<SparseMat> {
    require_vector(v, "the strain form")?;
    assemble_square(v, &CoefficientField::Constant(1.0), |t, a, c, b, e| {
        let mut s = 0.0;
        for q in 0..t.jw.len() {
            let (ga, gb) = (t.grads[q][a], t.grads[q][b]);
            let mut val = ga[e] * gb[c];
            if c == e {
                val += ga[0] * gb[0] + ga[1] * gb[1];
            }
            s += t.jw[q] * 0.5 * val;
        }
        s
    })
}

/// `(w ∇u, ∇v)` on a scalar or vector space.
pub fn assemble_grad_grad(v: &FeSpace, weight: &CoefficientField) -> Result<SparseMat> {
    assemble_square(v, weight, |t, a, c, b, e| {
        if c != e {
            return 0.0;
        }
        (0..t.jw.len())
            .map(|q| {
                let (ga, gb) = (t.grads[q][a], t.grads[q][b]);
                t.jw[q] * (ga[0] * gb[0] + ga[1] * gb[1])
            })
            .sum()
    })
    .map(|m| drop_component_couplings(m, v.value_dim()))
}

/// `(w p, q)`.
pub fn assemble_mass(q: &FeSpace, weight: &CoefficientField) -> Result<SparseMat> {
    assemble_square(q, weight, |t, a, c, b, e| {
        if c != e {
            return 0.0;
        }
        (0..t.jw.len()).map(|k| t.jw[k] * t.vals[k][a] * t.vals[k][b]).sum()
    })
    .map(|m| drop_component_couplings(m, q.value_dim()))
}

// Component-decoupled forms push structural zeros between x and y dofs.
fn drop_component_couplings(m: SparseMat, value_dim: usize) -> SparseMat {
    if value_dim == 1 {
        return m;
    }
    m.filter(|r, c| r % value_dim == c % value_dim)
}

/// `B[q, v] = (div φ_v, ψ_q)`: rows indexed by `q_space`, columns by `v_space`.
pub fn assemble_div(v_space: &FeSpace, q_space: &FeSpace) -> Result<SparseMat> {
    require_vector(v_space, "the divergence form")?;
    if q_space.value_dim() != 1 {
        return Err(Error::Unsupported("the divergence form needs a scalar test space".into()));
    }
    same_mesh(v_space, q_space)?;
    let mesh = v_space.mesh();
    let tv = RefTable::new(v_space.family());
    let tq = RefTable::new(q_space.family());
    let nv = v_space.family().local_nodes();
    let nq = q_space.family().local_nodes();
    let mut tb = TripletBuilder::with_capacity(q_space.n_dofs(), v_space.n_dofs(), mesh.n_cells() * nq * nv * 2);
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let cv = tv.cell(&geo);
        let cq = tq.cell(&geo);
        let vd = v_space.cell_dofs(cell);
        let qd = q_space.cell_dofs(cell);
        for i in 0..nq {
            for a in 0..nv {
                for c in 0..2 {
                    let s: f64 = (0..cv.jw.len()).map(|k| cv.jw[k] * cv.grads[k][a][c] * cq.vals[k][i]).sum();
                    tb.push(qd[i], vd[2 * a + c], s);
                }
            }
        }
    }
    Ok(tb.build())
}

/// `∫ f · φ_i` for a vector load on a vector space.
pub fn assemble_load_vector(v: &FeSpace, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Vec<f64>> {
    require_vector(v, "a vector load")?;
    load(v, |x, y, c| f(x, y)[c])
}

/// `∫ g φ_i` on a scalar space.
pub fn assemble_load_scalar(q: &FeSpace, g: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    if q.value_dim() != 1 {
        return Err(Error::Unsupported("a scalar load needs a scalar space".into()));
    }
    load(q, |x, y, _| g(x, y))
}

fn load(space: &FeSpace, f: impl Fn(f64, f64, usize) -> f64) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let table = RefTable::new(space.family());
    let d = space.value_dim();
    let mut out = vec![0.0; space.n_dofs()];
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let ct = table.cell(&geo);
        let dofs = space.cell_dofs(cell);
        for (k, p) in table.rule.points.iter().enumerate() {
            let x = geo.map(*p);
            for c in 0..d {
                let fx = f(x[0], x[1], c);
                for a in 0..space.family().local_nodes() {
                    out[dofs[a * d + c]] += ct.jw[k] * fx * ct.vals[k][a];
                }
            }
        }
    }
    Ok(out)
}

/// Symmetric elimination of `dofs`: rows and columns zeroed, unit diagonal,
/// rhs entries zeroed.
pub fn apply_dirichlet(mat: &SparseMat, rhs: &[f64], dofs: &[usize]) -> Result<(SparseMat, Vec<f64>)> {
    let n = mat.n_rows();
    if mat.n_cols() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if let Some(&bad) = dofs.iter().find(|&&d| d >= n) {
        return Err(invalid(format!("constrained dof {bad} out of range")));
    }
    let mask = crate::elements::dof_mask(n, dofs);
    let mut b = rhs.to_vec();
    for &d in dofs {
        b[d] = 0.0;
    }
    Ok((eliminate(mat, &mask, &mask, true), b))
}

/// Zeroes constrained rows and columns of a (possibly rectangular) block;
/// with `unit_diagonal`, constrained diagonal entries become 1.
pub fn eliminate(mat: &SparseMat, rows: &[bool], cols: &[bool], unit_diagonal: bool) -> SparseMat {
    let m = mat.zero_rows_cols(rows, cols);
    if !unit_diagonal {
        return m;
    }
    let mut t: Vec<(usize, usize, f64)> = m.triplets().collect();
    t.extend(rows.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| (i, i, 1.0)));
    SparseMat::from_triplets(m.n_rows(), m.n_cols(), t)
}
