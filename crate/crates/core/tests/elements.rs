use std::sync::Arc;

use biot_precond::elements::*;
use biot_precond::forms::{assemble_mass, CoefficientField};
use biot_precond::mesh::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(n: usize, preset: BcPreset) -> Arc<TriMesh> {
    Arc::new(build_unit_square(n, preset).unwrap())
}

#[test]
fn dof_counts() {
    for n in [1usize, 2, 5, 8] {
        let m = mesh(n, BcPreset::AllDirichlet);
        let (nv, ne, nc) = ((n + 1) * (n + 1), 3 * n * n + 2 * n, 2 * n * n);
        for d in [1, 2] {
            assert_eq!(make_space(&m, Family::P1, d).unwrap().n_dofs(), d * nv);
            assert_eq!(make_space(&m, Family::P2, d).unwrap().n_dofs(), d * (nv + ne));
        }
        assert_eq!(make_space(&m, Family::MiniVelocity, 2).unwrap().n_dofs(), 2 * (nv + nc));
    }
    let m = mesh(1, BcPreset::AllDirichlet);
    assert_eq!(make_space(&m, Family::P1, 1).unwrap().n_dofs(), 4);
    assert_eq!(make_space(&m, Family::P2, 1).unwrap().n_dofs(), 9);
}

#[test]
fn three_field_sizes_at_32() {
    let m = mesh(32, BcPreset::LeftOpen);
    let q = make_space(&m, Family::P1, 1).unwrap().n_dofs();
    let th = make_space(&m, Family::P2, 2).unwrap().n_dofs() + 2 * q;
    let mini = make_space(&m, Family::MiniVelocity, 2).unwrap().n_dofs() + 2 * q;
    assert_eq!(th, 10628);
    assert_eq!(mini, 8452);
}

#[test]
fn basis_nodal_values() {
    let b = eval_basis(Family::P1, [1.0 / 3.0; 3]);
    for v in &b.values {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let b = eval_basis(Family::P2, [0.0, 1.0, 0.0]);
    for (i, v) in b.values.iter().enumerate() {
        assert!((v - if i == 1 { 1.0 } else { 0.0 }).abs() < 1e-15);
    }
    let b = eval_basis(Family::MiniVelocity, [1.0 / 3.0; 3]);
    assert!((b.values[3] - 1.0).abs() < 1e-14);
}

#[test]
fn partition_of_unity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        let bary = [1.0 - a - b, a, b];
        for fam in [Family::P1, Family::P2] {
            let e = eval_basis(fam, bary);
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gx: f64 = e.grads.iter().map(|g| g[0]).sum();
            let gy: f64 = e.grads.iter().map(|g| g[1]).sum();
            assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
        }
    }
}

#[test]
fn quadrature_monomials_over_square() {
    let m = build_unit_square(3, BcPreset::AllDirichlet).unwrap();
    let rule = QuadratureRule::degree4();
    for i in 0..=4 {
        for j in 0..=(4 - i) {
            let mut s = 0.0;
            for k in 0..m.n_cells() {
                let g = CellGeometry::new(&m, k);
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = g.map(*p);
                    s += w * g.det() * x[0].powi(i) * x[1].powi(j);
                }
            }
            let exact = 1.0 / ((i + 1) * (j + 1)) as f64;
            assert!((s - exact).abs() <= 1e-14 * exact.max(1.0), "x^{i} y^{j}: {s} vs {exact}");
        }
    }
}

#[test]
fn dof_map_is_consistent_across_cells() {
    let m = mesh(3, BcPreset::AllDirichlet);
    for fam in [Family::P1, Family::P2, Family::MiniVelocity] {
        let s = make_space(&m, fam, 2).unwrap();
        let coords = s.dof_coords();
        let mut seen = vec![false; s.n_dofs()];
        for k in 0..m.n_cells() {
            for d in s.cell_dofs(k) {
                seen[d] = true;
            }
        }
        assert!(seen.iter().all(|&b| b), "{fam:?}: every dof belongs to a cell");
        // shared entities get a single index: same coordinates and component means same dof
        let mut keys: Vec<(i64, i64, usize)> = coords
            .iter()
            .enumerate()
            .map(|(i, c)| ((c[0] * 1e9).round() as i64, (c[1] * 1e9).round() as i64, i % 2))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), s.n_dofs(), "{fam:?}");
    }
}

#[test]
fn dirichlet_dof_sets() {
    let m = mesh(1, BcPreset::AllDirichlet);
    let q = make_space(&m, Family::P1, 1).unwrap();
    assert_eq!(dirichlet_dofs(&q, BoundaryRole::Pressure).unwrap(), vec![0, 1, 2, 3]);

    let m = mesh(2, BcPreset::AllDirichlet);
    let v = make_space(&m, Family::P2, 2).unwrap();
    assert_eq!(dirichlet_dofs(&v, BoundaryRole::Displacement).unwrap().len(), 32);

    let m = mesh(2, BcPreset::LeftOpen);
    let v = make_space(&m, Family::P2, 2).unwrap();
    let fixed = dirichlet_dofs(&v, BoundaryRole::Displacement).unwrap();
    let coords = v.dof_coords();
    // boundary entities whose closure reaches x < 1, plus the two right corners
    let expect: Vec<usize> = (0..v.n_dofs())
        .filter(|&d| {
            let [x, y] = coords[d];
            let on_boundary = x == 0.0 || y == 0.0 || x == 1.0 || y == 1.0;
            on_boundary && !(x == 1.0 && y > 0.0 && y < 1.0)
        })
        .collect();
    assert_eq!(fixed, expect);
    assert_eq!(fixed.len(), 2 * (8 - 1 + 8 - 2));
}

#[test]
fn mass_is_bit_identical_under_cell_permutation() {
    let base = build_unit_square(6, BcPreset::AllDirichlet).unwrap();
    let mut perm: Vec<usize> = (0..base.n_cells()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let a = make_space(&Arc::new(base.clone()), Family::P1, 1).unwrap();
    let b = make_space(&Arc::new(base.permuted_cells(&perm).unwrap()), Family::P1, 1).unwrap();
    let one = CoefficientField::Constant(1.0);
    let (ma, mb) = (assemble_mass(&a, &one).unwrap(), assemble_mass(&b, &one).unwrap());
    assert_eq!(ma.row_ptr(), mb.row_ptr());
    assert_eq!(ma.col_idx(), mb.col_idx());
    assert_eq!(ma.values(), mb.values());
}

#[test]
fn interpolation_reproduces_quadratics() {
    let m = mesh(2, BcPreset::AllDirichlet);
    let s = make_space(&m, Family::P2, 1).unwrap();
    let f = |x: f64, y: f64| x * x - 2.0 * x * y + 3.0 * y;
    let u = s.interpolate_scalar(f).unwrap();
    for (d, c) in s.dof_coords().iter().enumerate() {
        assert!((u[d] - f(c[0], c[1])).abs() < 1e-14);
    }
}
