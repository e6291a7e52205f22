//! Reference elements, quadrature and global degree-of-freedom maps.
//!
//! Local numbering on the reference triangle uses barycentric coordinates
//! `λ1 = 1 - ξ - η`, `λ2 = ξ`, `λ3 = η`. P2 edge functions follow the local
//! edges (1,2), (2,3), (3,1), matching [`TriMesh::cell_edges`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryRole, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    P1,
    P2,
    /// P1 enriched with the cubic bubble `27 λ1 λ2 λ3`.
    MiniVelocity,
}

impl Family {
    pub fn local_nodes(self) -> usize {
        match self {
            Family::P1 => 3,
            Family::P2 => 6,
            Family::MiniVelocity => 4,
        }
    }
}

/// Quadrature on the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    /// Sum to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric six-point rule, exact for polynomials of degree four.
    pub fn degree4() -> Self {
        let s10 = 10f64.sqrt();
        let root = (38.0 - 44.0 * (0.4f64).sqrt()).sqrt();
        let wroot = (213125.0 - 53320.0 * s10).sqrt();
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for sign in [1.0, -1.0] {
            let a = (8.0 - s10 + sign * root) / 18.0;
            let w = (620.0 + sign * wroot) / 3720.0 * 0.5;
            let b = 1.0 - 2.0 * a;
            for p in [[a, a, b], [a, b, a], [b, a, a]] {
                points.push(p);
                weights.push(w);
            }
        }
        Self { points, weights, degree: 4 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Values and reference gradients (d/dξ, d/dη) of all local basis functions.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

const GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn eval_basis(family: Family, bary: [f64; 3]) -> BasisEval {
    let l = bary;
    let gl = GRAD_LAMBDA;
    let mut values = Vec::with_capacity(family.local_nodes());
    let mut grads = Vec::with_capacity(family.local_nodes());
    match family {
        Family::P1 | Family::MiniVelocity => {
            for i in 0..3 {
                values.push(l[i]);
                grads.push(gl[i]);
            }
            if family == Family::MiniVelocity {
                values.push(27.0 * l[0] * l[1] * l[2]);
                grads.push(std::array::from_fn(|d| {
                    27.0 * (gl[0][d] * l[1] * l[2] + l[0] * gl[1][d] * l[2] + l[0] * l[1] * gl[2][d])
                }));
            }
        }
        Family::P2 => {
            for i in 0..3 {
                values.push(l[i] * (2.0 * l[i] - 1.0));
                grads.push(std::array::from_fn(|d| (4.0 * l[i] - 1.0) * gl[i][d]));
            }
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                values.push(4.0 * l[i] * l[j]);
                grads.push(std::array::from_fn(|d| 4.0 * (gl[i][d] * l[j] + l[i] * gl[j][d])));
            }
        }
    }
    BasisEval { values, grads }
}

/// Affine map data of one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub area: f64,
    jinv_t: [[f64; 2]; 2],
    origin: [f64; 2],
    jac: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(mesh: &TriMesh, cell: usize) -> Self {
        let c = mesh.cells()[cell];
        let v = mesh.vertices();
        let (p0, p1, p2) = (v[c[0]], v[c[1]], v[c[2]]);
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { area: 0.5 * det, jinv_t, origin: p0, jac }
    }

    pub fn physical_grad(&self, g: [f64; 2]) -> [f64; 2] {
        let m = self.jinv_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    pub fn map(&self, bary: [f64; 3]) -> [f64; 2] {
        let (xi, eta) = (bary[1], bary[2]);
        [
            self.origin[0] + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.origin[1] + self.jac[1][0] * xi + self.jac[1][1] * eta,
        ]
    }

    /// Jacobian determinant (twice the area).
    pub fn det(&self) -> f64 {
        2.0 * self.area
    }
}

/// A finite element space over a mesh. Scalar nodes are numbered vertices
/// first, then edges, then cell bubbles; vector dofs interleave components
/// as `value_dim * node + c`.
#[derive(Clone, Debug)]
pub struct FeSpace {
    family: Family,
    value_dim: usize,
    mesh: Arc<TriMesh>,
    cell_nodes: Vec<usize>,
    n_nodes: usize,
    node_coords: Vec<[f64; 2]>,
}

pub fn make_space(mesh: &Arc<TriMesh>, family: Family, value_dim: usize) -> Result<FeSpace> {
    let ok = matches!((family, value_dim), (Family::P1 | Family::P2, 1 | 2) | (Family::MiniVelocity, 2));
    if !ok {
        return Err(Error::Unsupported(format!("{family:?} with value dimension {value_dim}")));
    }
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let nc = mesh.n_cells();
    let nloc = family.local_nodes();
    let mut cell_nodes = Vec::with_capacity(nc * nloc);
    let mut node_coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
    let n_nodes = match family {
        Family::P1 => nv,
        Family::P2 => nv + ne,
        Family::MiniVelocity => nv + nc,
    };
    if family == Family::P2 {
        for e in mesh.edges() {
            let (a, b) = (mesh.vertices()[e[0]], mesh.vertices()[e[1]]);
            node_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
    }
    if family == Family::MiniVelocity {
        node_coords.extend((0..nc).map(|k| mesh.barycenter(k)));
    }
    for (k, c) in mesh.cells().iter().enumerate() {
        cell_nodes.extend_from_slice(c);
        match family {
            Family::P1 => {}
            Family::P2 => cell_nodes.extend(mesh.cell_edges()[k].iter().map(|e| nv + e)),
            Family::MiniVelocity => cell_nodes.push(nv + k),
        }
    }
    Ok(FeSpace { family, value_dim, mesh: Arc::clone(mesh), cell_nodes, n_nodes, node_coords })
}

impl FeSpace {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.value_dim * self.n_nodes
    }

    /// Scalar node indices of a cell, in local basis order.
    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let n = self.family.local_nodes();
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    /// Global dof indices of a cell: local node-major, component-minor.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let d = self.value_dim;
        self.cell_nodes(cell).iter().flat_map(|&n| (0..d).map(move |c| d * n + c)).collect()
    }

    pub fn dof_map(&self) -> Vec<Vec<usize>> {
        (0..self.mesh.n_cells()).map(|k| self.cell_dofs(k)).collect()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    /// One coordinate per dof; bubble dofs sit at the barycenter.
    pub fn dof_coords(&self) -> Vec<[f64; 2]> {
        self.node_coords.iter().flat_map(|&p| std::iter::repeat_n(p, self.value_dim)).collect()
    }

    /// Nodal interpolation of a scalar function (only for nodal families).
    pub fn interpolate_scalar(&self, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        if self.value_dim != 1 || self.family == Family::MiniVelocity {
            return Err(Error::Unsupported("interpolation needs a scalar nodal space".into()));
        }
        Ok(self.node_coords.iter().map(|p| f(p[0], p[1])).collect())
    }

    /// Nodal interpolation of a vector field; bubble coefficients are set to zero.
    pub fn interpolate_vector(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Vec<f64>> {
        if self.value_dim != 2 {
            return Err(Error::Unsupported("vector interpolation needs a vector space".into()));
        }
        let nv = self.mesh.n_vertices();
        let mut out = vec![0.0; self.n_dofs()];
        for (n, p) in self.node_coords.iter().enumerate() {
            if self.family == Family::MiniVelocity && n >= nv {
                continue;
            }
            let v = f(p[0], p[1]);
            out[2 * n] = v[0];
            out[2 * n + 1] = v[1];
        }
        Ok(out)
    }
}

/// Dofs supported on the closed essential boundary part for `role`, ascending.
pub fn dirichlet_dofs(space: &FeSpace, role: BoundaryRole) -> Result<Vec<usize>> {
    match (role, space.value_dim) {
        (BoundaryRole::Displacement, 2) | (BoundaryRole::Pressure, 1) => {}
        _ => {
            return Err(Error::Unsupported(format!(
                "{role:?} boundary conditions on a space of value dimension {}",
                space.value_dim
            )))
        }
    }
    let mesh = &space.mesh;
    let mut on_boundary = mesh.essential_vertices(role);
    if space.family == Family::P2 {
        on_boundary.extend(mesh.essential_edges(role));
    }
    let d = space.value_dim;
    Ok(on_boundary
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .flat_map(|(n, _)| (0..d).map(move |c| d * n + c))
        .collect())
}

/// Boolean mask of length `n` with `dofs` set.
pub fn dof_mask(n: usize, dofs: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &d in dofs {
        m[d] = true;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square, BcPreset};

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn quadrature_is_exact_to_degree_four() {
        let q = QuadratureRule::degree4();
        for i in 0..=4 {
            for j in 0..=(4 - i) {
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                let approx: f64 =
                    q.points.iter().zip(&q.weights).map(|(p, w)| w * p[1].powi(i as i32) * p[2].powi(j as i32)).sum();
                assert!((approx - exact).abs() <= 1e-14 * exact, "x^{i} y^{j}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn p1_barycenter() {
        let e = eval_basis(Family::P1, [1.0 / 3.0; 3]);
        assert!(e.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn p2_nodal_at_vertex() {
        let e = eval_basis(Family::P2, [1.0, 0.0, 0.0]);
        assert_eq!(e.values, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bubble_normalization() {
        let e = eval_basis(Family::MiniVelocity, [1.0 / 3.0; 3]);
        assert!((e.values[3] - 1.0).abs() < 1e-15);
        let edge = eval_basis(Family::MiniVelocity, [0.3, 0.7, 0.0]);
        assert_eq!(edge.values[3], 0.0);
    }

    #[test]
    fn scalar_mini_is_unsupported() {
        let m = Arc::new(build_unit_square(1, BcPreset::AllDirichlet).unwrap());
        assert!(matches!(make_space(&m, Family::MiniVelocity, 1), Err(Error::Unsupported(_))));
        assert!(make_space(&m, Family::P1, 3).is_err());
    }

    #[test]
    fn wrong_role_rejected() {
        let m = Arc::new(build_unit_square(1, BcPreset::AllDirichlet).unwrap());
        let q = make_space(&m, Family::P1, 1).unwrap();
        assert!(dirichlet_dofs(&q, BoundaryRole::Displacement).is_err());
    }
}
