//! Sparse LDLᵀ factorization (up-looking, elimination-tree driven) with a
//! level-structure nested-dissection ordering.
//!
//! Used for the exact inner solves of every block preconditioner. No pivoting
//! is performed, so the input must be symmetric positive definite or
//! quasi-definite.

use super::linop::LinearOp;
use super::sparse::SparseMat;
use crate::error::{invalid, Error, Result};

const NONE: usize = usize::MAX;

/// Subgraphs at or below this size are not dissected further.
const ND_LEAF: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    /// Every pivot must be strictly positive.
    PositiveDefinite,
    /// Pivots may have either sign but must be nonzero.
    QuasiDefinite,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
}

/// Factorizes a symmetric matrix. `label` names the matrix in error messages.
pub fn factorize(mat: &SparseMat, kind: Definiteness, label: &str) -> Result<LdlFactor> {
    if mat.n_rows() != mat.n_cols() {
        return Err(invalid(format!("{label}: cannot factorize a non-square matrix")));
    }
    let perm = nested_dissection(&mat.symmetric_adjacency());
    LdlFactor::with_ordering(mat, perm, kind, label)
}

impl LdlFactor {
    pub fn with_ordering(mat: &SparseMat, perm: Vec<usize>, kind: Definiteness, label: &str) -> Result<Self> {
        let n = mat.n_rows();
        let mut iperm = vec![NONE; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        if perm.len() != n || iperm.iter().any(|&i| i == NONE) {
            return Err(invalid("ordering is not a permutation"));
        }

        // symbolic: elimination tree and column counts
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            let (cols, _) = mat.row(perm[k]);
            for &c in cols {
                let mut i = iperm[c];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + lnz[k];
        }
        let total = col_ptr[n];

        // numeric
        let mut row_idx = vec![0usize; total];
        let mut l_values = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = NONE);
        lnz.iter_mut().for_each(|l| *l = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = mat.row(perm[k]);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut i = iperm[c];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = col_ptr[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[row_idx[p]] -= l_values[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                row_idx[end] = k;
                l_values[end] = l_ki;
                lnz[i] += 1;
            }
            let pivot = d[k];
            if !pivot.is_finite() {
                return Err(Error::NonFinite(format!("factorization of {label}")));
            }
            match kind {
                Definiteness::PositiveDefinite if pivot <= 0.0 => {
                    return Err(Error::NotPositiveDefinite { block: label.to_string(), row: perm[k], pivot });
                }
                _ if pivot == 0.0 => {
                    return Err(Error::SingularPivot { block: label.to_string(), row: perm[k] });
                }
                _ => {}
            }
        }
        Ok(Self { n, perm, col_ptr, row_idx, l_values, d })
    }

    pub fn nnz_l(&self) -> usize {
        self.l_values.len()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut w: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    w[self.row_idx[p]] -= self.l_values[p] * wj;
                }
            }
        }
        for (wj, dj) in w.iter_mut().zip(&self.d) {
            *wj /= dj;
        }
        for j in (0..n).rev() {
            let mut acc = w[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= self.l_values[p] * w[self.row_idx[p]];
            }
            w[j] = acc;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = w[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }
}

impl LinearOp for LdlFactor {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y)
    }
}

/// Elimination order from recursive level-structure bisection. Returns
/// `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut ctx = NdContext { adj, tag: vec![0; n], stamp: 0, level: vec![usize::MAX; n], order: Vec::with_capacity(n) };
    let mut stack: Vec<Task> = vec![Task::Split((0..n).collect())];
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(nodes) => ctx.order.extend(nodes),
            Task::Split(nodes) => ctx.split(nodes, &mut stack),
        }
    }
    ctx.order
}

enum Task {
    Split(Vec<usize>),
    Emit(Vec<usize>),
}

struct NdContext<'a> {
    adj: &'a [Vec<usize>],
    tag: Vec<u32>,
    stamp: u32,
    level: Vec<usize>,
    order: Vec<usize>,
}

impl NdContext<'_> {
    fn mark(&mut self, nodes: &[usize]) -> u32 {
        self.stamp += 1;
        for &v in nodes {
            self.tag[v] = self.stamp;
        }
        self.stamp
    }

    /// BFS restricted to nodes tagged `stamp`; returns the level sets.
    fn bfs(&mut self, root: usize, stamp: u32, nodes: &[usize]) -> Vec<Vec<usize>> {
        for &v in nodes {
            self.level[v] = usize::MAX;
        }
        let mut levels = vec![vec![root]];
        self.level[root] = 0;
        loop {
            let mut next = Vec::new();
            for &u in levels.last().unwrap() {
                for &w in &self.adj[u] {
                    if self.tag[w] == stamp && self.level[w] == usize::MAX {
                        self.level[w] = levels.len();
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    fn split(&mut self, nodes: Vec<usize>, stack: &mut Vec<Task>) {
        if nodes.len() <= ND_LEAF {
            stack.push(Task::Emit(nodes));
            return;
        }
        let stamp = self.mark(&nodes);
        let levels = self.bfs(nodes[0], stamp, &nodes);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // disconnected: peel off the component just found
            let comp: Vec<usize> = levels.into_iter().flatten().collect();
            let rest: Vec<usize> = nodes.into_iter().filter(|&v| self.level[v] == usize::MAX).collect();
            stack.push(Task::Split(rest));
            stack.push(Task::Split(comp));
            return;
        }
        // pseudo-peripheral root: restart BFS from the far end a few times
        let mut levels = levels;
        for _ in 0..3 {
            let last = levels.last().unwrap();
            let far = *last.iter().min_by_key(|&&v| self.adj[v].len()).unwrap();
            let cand = self.bfs(far, stamp, &nodes);
            if cand.len() > levels.len() {
                levels = cand;
            } else {
                break;
            }
        }
        if levels.len() < 3 {
            stack.push(Task::Emit(nodes));
            return;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (l, set) in levels.iter().enumerate() {
            acc += set.len();
            if acc >= half {
                mid = l.clamp(1, levels.len() - 2);
                break;
            }
        }
        // level numbers are still those of the final BFS
        for (l, set) in levels.iter().enumerate() {
            for &v in set {
                self.level[v] = l;
            }
        }
        let mut part_a = Vec::new();
        let mut part_b = Vec::new();
        let mut sep = Vec::new();
        for (l, set) in levels.iter().enumerate() {
            for &v in set {
                if l < mid {
                    part_a.push(v);
                } else if l > mid {
                    part_b.push(v);
                } else if self.adj[v].iter().any(|&w| self.tag[w] == stamp && self.level[w] == mid + 1) {
                    sep.push(v);
                } else {
                    part_a.push(v);
                }
            }
        }
        // popped in reverse: A, then B, then the separator
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(part_b));
        stack.push(Task::Split(part_a));
    }
}
