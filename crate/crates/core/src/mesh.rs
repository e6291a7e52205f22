//! Structured triangulations of the unit square.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DisplacementPart {
    /// Γd: homogeneous Dirichlet data for the displacement.
    Dirichlet,
    /// Γt: traction (natural) boundary.
    Traction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PressurePart {
    /// Γp: homogeneous Dirichlet data for the fluid pressure.
    Pressure,
    /// Γf: flux (natural) boundary.
    Flux,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryTag {
    pub displacement: DisplacementPart,
    pub pressure: PressurePart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcPreset {
    /// Γd = Γp = ∂Ω.
    AllDirichlet,
    /// Γt is the edge x = 1, Γd the rest of ∂Ω; Γp = ∂Ω.
    LeftOpen,
}

/// Which field a boundary query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryRole {
    Displacement,
    Pressure,
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// The band `[0,1] × [1/4, 3/4]` carrying the low-permeability layer.
    pub fn middle_band() -> Self {
        Self::new(0.0, 1.0, 0.25, 0.75)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        const EPS: f64 = 1e-12;
        p[0] >= self.x0 - EPS && p[0] <= self.x1 + EPS && p[1] >= self.y0 - EPS && p[1] <= self.y1 + EPS
    }
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    n_div: usize,
    preset: BcPreset,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    cell_areas: Vec<f64>,
    /// All edges as sorted vertex pairs, in lexicographic order.
    edges: Vec<[usize; 2]>,
    /// Per cell, the edge indices of local edges (0,1), (1,2), (2,0).
    cell_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<([usize; 2], BoundaryTag)>,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl TriMesh {
    /// Uniform `N × N` grid, each square split along its lower-left to
    /// upper-right diagonal. Vertex `(i, j)` has index `j (N+1) + i`.
    pub fn unit_square(n_div: usize, preset: BcPreset) -> Result<Self> {
        if n_div == 0 {
            return Err(invalid("mesh needs N >= 1"));
        }
        let n = n_div;
        let h = 1.0 / n as f64;
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut boundary = Vec::with_capacity(4 * n);
        let tag = |on_right: bool| BoundaryTag {
            displacement: if on_right && preset == BcPreset::LeftOpen {
                DisplacementPart::Traction
            } else {
                DisplacementPart::Dirichlet
            },
            pressure: PressurePart::Pressure,
        };
        for k in 0..n {
            boundary.push((sorted_pair(vid(k, 0), vid(k + 1, 0)), tag(false)));
            boundary.push((sorted_pair(vid(n, k), vid(n, k + 1)), tag(true)));
            boundary.push((sorted_pair(vid(k, n), vid(k + 1, n)), tag(false)));
            boundary.push((sorted_pair(vid(0, k), vid(0, k + 1)), tag(false)));
        }
        boundary.sort_by_key(|(e, _)| *e);
        Self::from_parts(n_div, preset, vertices, cells, boundary)
    }

    fn from_parts(
        n_div: usize,
        preset: BcPreset,
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let mut cell_areas = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let a = signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]);
            if a <= 0.0 {
                return Err(invalid(format!("cell {k} is not positively oriented")));
            }
            cell_areas.push(a);
        }
        let mut edge_set: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for c in &cells {
            for l in 0..3 {
                edge_set.insert(sorted_pair(c[l], c[(l + 1) % 3]), 0);
            }
        }
        let edges: Vec<[usize; 2]> = edge_set.keys().copied().collect();
        for (k, v) in edge_set.values_mut().enumerate() {
            *v = k;
        }
        let cell_edges = cells
            .iter()
            .map(|c| std::array::from_fn(|l| edge_set[&sorted_pair(c[l], c[(l + 1) % 3])]))
            .collect();
        Ok(Self { n_div, preset, vertices, cells, cell_areas, edges, cell_edges, boundary_edges })
    }

    /// Same mesh with cells listed in the order `perm` (vertex and edge
    /// numbering unchanged).
    pub fn permuted_cells(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.cells.len()];
        if perm.len() != self.cells.len() || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(invalid("cell permutation is not a permutation"));
        }
        let cells = perm.iter().map(|&p| self.cells[p]).collect();
        Self::from_parts(self.n_div, self.preset, self.vertices.clone(), cells, self.boundary_edges.clone())
    }

    pub fn n_div(&self) -> usize {
        self.n_div
    }

    pub fn preset(&self) -> BcPreset {
        self.preset
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.cell_areas
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn boundary_edges(&self) -> &[([usize; 2], BoundaryTag)] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// |Ω| as the sum of cell areas.
    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    pub fn barycenter(&self, cell: usize) -> [f64; 2] {
        let c = self.cells[cell];
        let mut b = [0.0; 2];
        for v in c {
            b[0] += self.vertices[v][0] / 3.0;
            b[1] += self.vertices[v][1] / 3.0;
        }
        b
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&sorted_pair(a, b)).ok()
    }

    fn is_essential(tag: &BoundaryTag, role: BoundaryRole) -> bool {
        match role {
            BoundaryRole::Displacement => tag.displacement == DisplacementPart::Dirichlet,
            BoundaryRole::Pressure => tag.pressure == PressurePart::Pressure,
        }
    }

    /// Vertices lying on the closure of the essential boundary part: a vertex
    /// is constrained if any incident boundary edge is.
    pub fn essential_vertices(&self, role: BoundaryRole) -> Vec<bool> {
        let mut out = vec![false; self.n_vertices()];
        for (e, tag) in &self.boundary_edges {
            if Self::is_essential(tag, role) {
                out[e[0]] = true;
                out[e[1]] = true;
            }
        }
        out
    }

    pub fn essential_edges(&self, role: BoundaryRole) -> Vec<bool> {
        let mut out = vec![false; self.n_edges()];
        for (e, tag) in &self.boundary_edges {
            if Self::is_essential(tag, role) {
                let k = self.edge_index(e[0], e[1]).expect("boundary edge belongs to the mesh");
                out[k] = true;
            }
        }
        out
    }

    /// Plain-text listing: `v idx x y`, `c idx a b c`, `b a b disp pres`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# N={} preset={:?}", self.n_div, self.preset)?;
        for (k, v) in self.vertices.iter().enumerate() {
            writeln!(out, "v {k} {} {}", v[0], v[1])?;
        }
        for (k, c) in self.cells.iter().enumerate() {
            writeln!(out, "c {k} {} {} {}", c[0], c[1], c[2])?;
        }
        for (e, t) in &self.boundary_edges {
            writeln!(out, "b {} {} {:?} {:?}", e[0], e[1], t.displacement, t.pressure)?;
        }
        Ok(())
    }
}

pub fn build_unit_square(n_div: usize, preset: BcPreset) -> Result<TriMesh> {
    TriMesh::unit_square(n_div, preset)
}

/// Cells whose barycenter lies in the closed rectangle.
pub fn locate_region(mesh: &TriMesh, region: &Rect) -> Result<Vec<usize>> {
    let inside = |v: f64| (0.0..=1.0).contains(&v);
    if !(inside(region.x0) && inside(region.x1) && inside(region.y0) && inside(region.y1))
        || region.x0 > region.x1
        || region.y0 > region.y1
    {
        return Err(invalid(format!("region {region:?} is not a rectangle inside the unit square")));
    }
    Ok((0..mesh.n_cells()).filter(|&k| region.contains(mesh.barycenter(k))).collect())
}
