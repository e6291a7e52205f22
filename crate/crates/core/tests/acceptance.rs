//! Acceptance criteria. Prints one PASS/FAIL line per criterion with details below it.
//!
//! Runs as a plain binary (`harness = false`) so the report is never swallowed by output
//! capture. Exits nonzero when a criterion fails that is not listed in `KNOWN_FAILURES`,
//! or when a listed one starts passing.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use biot_precond::elements::{make_space, Family};
use biot_precond::forms::{assemble_load_scalar, assemble_mass, CoefficientField};
use biot_precond::harness::{
    b_weighted_ratio, build_case, discretization_for, manufactured_rhs, run_sweep, GridPoint, KappaSpec, ResultRow,
    SweepConfig,
};
use biot_precond::krylov::linop::to_dense;
use biot_precond::krylov::sparse::{dot, max_abs_diff, SparseMat};
use biot_precond::krylov::MinresOptions;
use biot_precond::mesh::{build_unit_square, BcPreset};
use biot_precond::pressure_precond::{build_mean_vector, build_qt_preconditioner, MassInner, RankOneMass};
use biot_precond::systems::{
    build_ex1, build_ex2, dense_reference_solution, discrete_inf_sup, CaseId, Discretization, Elements, Ex2Precond,
};
use nalgebra::{DMatrix, DVector};

/// Criteria that fail on this implementation; see README and the decisions ledger.
const KNOWN_FAILURES: &[usize] = &[5];

const RTOL: f64 = 1e-6;
const SEED: u64 = 1;
const LAMBDAS: [f64; 3] = [1.0, 1e4, 1e8];
const ALPHAS: [f64; 3] = [1.0, 1e-2, 1e-4];
const KAPPAS: [f64; 4] = [1.0, 1e-4, 1e-8, 1e-12];
const NS: [usize; 3] = [8, 16, 32];

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

fn pressure_setup(n: usize, family: Family) -> (usize, Arc<SparseMat>, biot_precond::pressure_precond::MeanVector, Vec<f64>) {
    let mesh = Arc::new(build_unit_square(n, BcPreset::AllDirichlet).unwrap());
    let q = make_space(&mesh, family, 1).unwrap();
    let mass = Arc::new(assemble_mass(&q, &CoefficientField::Constant(1.0)).unwrap());
    let mean = build_mean_vector(&q, &mass).unwrap();
    let ints = assemble_load_scalar(&q, |_, _| 1.0).unwrap();
    (q.n_dofs(), mass, mean, ints)
}

/// Mean-vector identities and the dense congruence check.
fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut worst_id: f64 = 0.0;
    for n in [1usize, 2, 4, 8, 16, 32] {
        for fam in [Family::P1, Family::P2] {
            let (dim, mass, mean, _) = pressure_setup(n, fam);
            let w = vec![1.0; dim];
            let scaled: Vec<f64> = mean.m.iter().map(|v| v * mean.omega_sqrt).collect();
            worst_id = worst_id.max(max_abs_diff(&mass.mul_vec(&w), &scaled));
            worst_id = worst_id.max((dot(&mean.m, &w) - mean.omega_sqrt).abs());
        }
    }
    o.check(worst_id <= 1e-13, format!("M w = √|Ω| m and mᵀw = √|Ω|, N ∈ {{1..32}}, P1/P2: max error {worst_id:.2e} (tol 1e-13)"));

    let mut worst_cong: f64 = 0.0;
    for n in [1usize, 2, 4, 8] {
        for fam in [Family::P1, Family::P2] {
            let (dim, mass, mean, ints) = pressure_setup(n, fam);
            let m = mass.to_dense();
            let iv = DVector::from_vec(ints);
            let mv = DVector::from_column_slice(&mean.m);
            let w = DVector::from_element(dim, 1.0);
            for lambda in [1.0f64, 1e2, 1e4, 1e8] {
                let mlam = &m + (1.0 / lambda - 1.0) * &iv * iv.transpose();
                // Vλ = (I + a m wᵀ)⁻¹ by Sherman-Morrison; a dense inverse loses ~log10(λ) digits
                let a = (lambda.sqrt() - 1.0) / mean.omega_sqrt;
                let v = DMatrix::identity(dim, dim) - (a / (1.0 + a * w.dot(&mv))) * &mv * w.transpose();
                let err = (mlam - &v * &m * v.transpose()).amax() / m.amax();
                worst_cong = worst_cong.max(err);
            }
        }
    }
    o.check(
        worst_cong <= 1e-12,
        format!("‖Mλ − Vλ M Vλᵀ‖ / ‖M‖, λ ∈ {{1,1e2,1e4,1e8}}, N ≤ 8: max {worst_cong:.2e} (tol 1e-12)"),
    );
    o
}

/// λ-invariance of cond(B Mλ) with the Jacobi inner solve.
fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    for fam in [Family::P1, Family::P2] {
        for n in [4usize, 8, 16] {
            let (dim, mass, mean, ints) = pressure_setup(n, fam);
            let iv = DVector::from_vec(ints);
            let m = mass.to_dense();
            let mv = DVector::from_column_slice(&mean.m);
            let w = DVector::from_element(dim, 1.0);
            let d_half = DMatrix::from_diagonal(&m.diagonal().map(|v| 1.0 / v.sqrt()));
            let mut worst_b: f64 = 0.0;
            let conds: Vec<f64> = [1.0, 1e4, 1e8]
                .iter()
                .map(|&lambda| {
                    let r = Arc::new(RankOneMass::new(Arc::clone(&mass), mean.clone(), lambda, fam).unwrap());
                    let b = to_dense(&build_qt_preconditioner(&r, MassInner::Jacobi).unwrap());
                    let a = (lambda.sqrt() - 1.0) / mean.omega_sqrt;
                    let vinv = DMatrix::identity(dim, dim) + a * &mv * w.transpose();
                    let b_ref = vinv.transpose() * &d_half * &d_half * &vinv;
                    worst_b = worst_b.max((&b - &b_ref).amax() / b_ref.amax());
                    // B = L Lᵀ with L = Vλ⁻ᵀ D^½, so B Mλ is similar to the symmetric Lᵀ Mλ L
                    let mlam = &m + (1.0 / lambda - 1.0) * &iv * iv.transpose();
                    let l = vinv.transpose() * &d_half;
                    let e = (l.transpose() * mlam * &l).symmetric_eigenvalues();
                    let (lo, hi) = e.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                    hi / lo
                })
                .collect();
            o.check(worst_b <= 1e-12, format!("{fam:?} N={n}: B matches Vλ⁻ᵀ D Vλ⁻¹ to {worst_b:.1e}"));
            let rel = conds.iter().map(|c| (c - conds[0]).abs() / conds[0]).fold(0.0, f64::max);
            o.check(
                rel <= 1e-6,
                format!("{fam:?} N={n}: cond at λ = 1, 1e4, 1e8 = {:.8}, {:.8}, {:.8} (rel spread {rel:.1e})", conds[0], conds[1], conds[2]),
            );
        }
    }
    o
}

/// B2 bounded, B1 growing linearly in λ.
fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    for n in NS {
        let d = discretization_for(CaseId::Ex2b, n).unwrap();
        let cond = |l: f64, pc, inner| build_ex2(&d, l, pc, inner).unwrap().estimate_condition(3, SEED).unwrap().cond;
        let lams = [1.0, 1e2, 1e4, 1e6];
        let b2: Vec<f64> = lams.iter().map(|&l| cond(l, Ex2Precond::B2, MassInner::ExactMass)).collect();
        let b2j: Vec<f64> = lams.iter().map(|&l| cond(l, Ex2Precond::B2, MassInner::Jacobi)).collect();
        let b1: Vec<f64> = lams.iter().map(|&l| cond(l, Ex2Precond::B1, MassInner::ExactMass)).collect();
        let max_b2 = b2.iter().cloned().fold(0.0, f64::max);
        o.check(max_b2 <= 25.0, format!("N={n}: B2 cond (exact) at λ = 1, 1e2, 1e4, 1e6: {}", fmt_list(&b2)));
        let max_b2j = b2j.iter().cloned().fold(0.0, f64::max);
        o.check(max_b2j <= 25.0, format!("N={n}: B2 cond (Jacobi mass inner) at λ = 1, 1e2, 1e4, 1e6: {}", fmt_list(&b2j)));
        o.note(format!("N={n}: B1 cond: {}", fmt_list(&b1)));
        for (i, j) in [(0usize, 1usize), (1, 2), (2, 3)] {
            let ratio = b1[j] / b1[i];
            o.check(
                (50.0..=200.0).contains(&ratio),
                format!("N={n}: B1 cond({:e}) / cond({:e}) = {ratio:.1} (want [50, 200])", lams[j], lams[i]),
            );
        }
    }
    o
}

/// ex1 condition number after dropping the constant-pressure mode.
fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    for n in NS {
        let d = discretization_for(CaseId::Ex1, n).unwrap();
        let conds: Vec<f64> = [1.0, 1e-2, 1e-4, 1e-6, 0.0]
            .iter()
            .map(|&k| build_ex1(&d, k).unwrap().estimate_condition(3, SEED).unwrap().cond)
            .collect();
        let max = conds.iter().cloned().fold(0.0, f64::max);
        o.check(max <= 15.0, format!("N={n}: cond at κ = 1, 1e-2, 1e-4, 1e-6, 0: {}", fmt_list(&conds)));
    }
    o
}

fn full_grid(case: CaseId, seed: u64, cond: bool) -> Vec<ResultRow> {
    let mut cfg = SweepConfig::new(
        case,
        NS.to_vec(),
        LAMBDAS.to_vec(),
        ALPHAS.to_vec(),
        KAPPAS.iter().map(|&k| KappaSpec::Constant(k)).collect(),
    );
    cfg.rtol = RTOL;
    cfg.seed = seed;
    cfg.estimate_cond = cond;
    run_sweep(&cfg).unwrap()
}

struct Envelope {
    cond: (f64, f64),
    iters: (usize, usize),
    failures: usize,
}

fn envelope(rows: &[&ResultRow]) -> Envelope {
    let mut e = Envelope { cond: (f64::MAX, 0.0), iters: (usize::MAX, 0), failures: 0 };
    for r in rows {
        if !r.converged {
            e.failures += 1;
            continue;
        }
        if let Some(c) = r.cond_estimate {
            e.cond = (e.cond.0.min(c), e.cond.1.max(c));
        }
        e.iters = (e.iters.0.min(r.iterations), e.iters.1.max(r.iterations));
    }
    e
}

fn by_n(rows: &[ResultRow]) -> BTreeMap<usize, Vec<&ResultRow>> {
    let mut m: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        m.entry(r.n).or_default().push(r);
    }
    m
}

/// Checks cond ∈ [1, 30], iterations ≤ 120 and spread ≤ 3× per N.
fn check_envelope(o: &mut Outcome, label: &str, rows: &[ResultRow]) {
    for (n, rs) in by_n(rows) {
        let e = envelope(&rs);
        let spread = e.iters.1 as f64 / e.iters.0.max(1) as f64;
        o.check(
            e.failures == 0 && e.cond.0 >= 1.0 - 1e-9 && e.cond.1 <= 30.0,
            format!("{label} N={n}: cond ∈ [{:.3}, {:.3}] over {} points, {} unconverged", e.cond.0, e.cond.1, rs.len(), e.failures),
        );
        o.check(e.iters.1 <= 120, format!("{label} N={n}: max iterations {}", e.iters.1));
        o.check(spread <= 3.0, format!("{label} N={n}: iterations {}–{}, spread {spread:.2}×", e.iters.0, e.iters.1));
    }
}

/// Robustness of Cases 1, 2, 4 on the full parameter grid.
fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for case in [CaseId::Case1, CaseId::Case2, CaseId::Case4] {
        let rows = full_grid(case, SEED, true);
        check_envelope(&mut o, &format!("Case {case}"), &rows);
        let smooth = full_grid(case, 0, false);
        for (n, rs) in by_n(&smooth) {
            let e = envelope(&rs);
            o.note(format!("Case {case} N={n}, smooth rhs (seed 0, reported only): iterations {}–{}", e.iters.0, e.iters.1));
        }
    }
    o
}

fn run_point(case: CaseId, n: usize, lambda: f64, alpha: f64, kappa: KappaSpec, cond: bool) -> (usize, bool, Option<f64>) {
    let d = discretization_for(case, n).unwrap();
    let p = GridPoint { case, n, lambda, alpha, kappa };
    let s = build_case(&d, &p, MassInner::ExactMass).unwrap();
    let rhs = manufactured_rhs(&s, SEED);
    let s = s.with_rhs(rhs).unwrap();
    let (_, rep) = s.solve(MinresOptions { rtol: RTOL, max_iter: 5000 }).unwrap();
    let c = cond.then(|| s.estimate_condition(3, SEED).unwrap().cond);
    (rep.iterations, rep.converged, c)
}

/// Solid-pressure formulation degrades; total pressure does not.
fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let k = KappaSpec::Constant(1e-5);
    let (it1, c1, _) = run_point(CaseId::Ex3, 32, 1.0, 1.0, k, false);
    let (it2, c2, _) = run_point(CaseId::Ex3, 32, 1e6, 1.0, k, false);
    o.check(
        c1 && c2 && it2 as f64 >= 3.0 * it1 as f64,
        format!("solid pressure N=32, κ=1e-5: {it1} iterations at λ=1, {it2} at λ=1e6 (ratio {:.1}, want ≥ 3)", it2 as f64 / it1 as f64),
    );
    let (ta, ca, conda) = run_point(CaseId::Case1, 32, 1.0, 1.0, k, true);
    let (tb, cb, condb) = run_point(CaseId::Case1, 32, 1e6, 1.0, k, true);
    let (conda, condb) = (conda.unwrap(), condb.unwrap());
    o.check(
        ca && cb && conda.max(condb) <= 30.0 && ta.max(tb) <= 120 && ta.max(tb) as f64 <= 3.0 * ta.min(tb) as f64,
        format!("total pressure Case 1 at the same points: {ta} / {tb} iterations, cond {conda:.3} / {condb:.3}"),
    );
    o
}

/// Case 1 with a low-permeability band.
fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let mut cfg = SweepConfig::new(
        CaseId::Case1,
        NS.to_vec(),
        LAMBDAS.to_vec(),
        ALPHAS.to_vec(),
        [1e-2, 1e-4, 1e-6, 1e-8, 1e-10].iter().map(|&k| KappaSpec::band(k)).collect(),
    );
    cfg.rtol = RTOL;
    cfg.seed = SEED;
    cfg.estimate_cond = true;
    let rows = run_sweep(&cfg).unwrap();
    check_envelope(&mut o, "Case 1 band", &rows);
    o
}

/// Inf-sup constants of both element pairs.
fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    for (el, floor) in [(Elements::TaylorHood, 0.2), (Elements::Mini, 0.0)] {
        let betas: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&n| {
                let d = Discretization::new(n, BcPreset::AllDirichlet, el).unwrap();
                discrete_inf_sup(d.velocity_space(), d.pressure_space(), true).unwrap()
            })
            .collect();
        let (lo, hi) = betas.iter().fold((f64::MAX, 0.0f64), |(l, h), &b| (l.min(b), h.max(b)));
        let var = (hi - lo) / hi;
        o.check(
            lo > floor && var < 0.1,
            format!("{el:?}: β₀ at N = 4, 8, 16: {} (variation {:.1}%, floor {floor})", fmt_list(&betas), 100.0 * var),
        );
    }
    o
}

/// MinRes against dense LU on every case with dimension ≤ 4000.
fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let points = [(1.0, 1.0, 1.0), (1e4, 1e-2, 1e-4), (1e8, 1e-4, 1e-12)];
    let mut worst: f64 = 0.0;
    let (mut runs, mut skipped, mut nonmono) = (0usize, 0usize, Vec::new());
    for case in CaseId::ALL {
        for n in [4usize, 8, 16] {
            let d = discretization_for(case, n).unwrap();
            // one parameter point at N=16 keeps the dense LUs affordable
            let pts: &[(f64, f64, f64)] = if n == 16 { &points[2..] } else { &points };
            for &(lambda, alpha, kappa) in pts {
                let p = GridPoint { case, n, lambda, alpha, kappa: KappaSpec::Constant(kappa) };
                let s = build_case(&d, &p, MassInner::ExactMass).unwrap();
                if s.dim() > 4000 {
                    skipped += 1;
                    continue;
                }
                let rhs = manufactured_rhs(&s, SEED);
                let s = s.with_rhs(rhs).unwrap();
                let (x, rep) = s.solve(MinresOptions { rtol: RTOL, max_iter: 5000 }).unwrap();
                runs += 1;
                let xd = dense_reference_solution(&s).unwrap();
                let diff: Vec<f64> = x.iter().zip(&xd).map(|(a, b)| a - b).collect();
                let r = b_weighted_ratio(&s, &diff);
                if !(rep.converged && r <= 10.0 * RTOL) {
                    o.check(false, format!("{case} N={n} λ={lambda:e}: converged {} ratio {r:.2e}", rep.converged));
                }
                worst = worst.max(r);
                if rep.residual_history.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                    nonmono.push(format!("{case} N={n} λ={lambda:e}"));
                }
            }
        }
    }
    o.check(
        worst <= 10.0 * RTOL,
        format!("{runs} systems: max (B A d, A d)/(B b, b) = {worst:.2e} for d = x_minres − x_dense (tol {:.0e}); {skipped} above dim 4000", 10.0 * RTOL),
    );
    if nonmono.is_empty() {
        o.check(true, format!("residual history monotone on all {runs} runs"));
    } else {
        o.check(false, format!("residual history not monotone on {} of {runs} runs: {nonmono:?}", nonmono.len()));
    }
    o
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "mean-vector identities and congruence", criterion_1),
        (2, "λ-invariance of the Jacobi rank-one preconditioner", criterion_2),
        (3, "linear elasticity B1/B2 contrast", criterion_3),
        (4, "Darcy-Stokes type example, constant mode dropped", criterion_4),
        (5, "total-pressure robustness on the full grid", criterion_5),
        (6, "solid-pressure negative control", criterion_6),
        (7, "nonconstant permeability band", criterion_7),
        (8, "discrete inf-sup stability", criterion_8),
        (9, "MinRes versus dense solves", criterion_9),
    ];
    let mut bad = Vec::new();
    let mut summary = Vec::new();
    for (id, name, f) in criteria {
        if filter.is_some_and(|k| k != id) {
            continue;
        }
        let t = Instant::now();
        let out = f();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (out.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        let line = format!("criterion {id} {tag}: {name} [{:.1} s]", t.elapsed().as_secs_f64());
        println!("{line}");
        for l in &out.lines {
            println!("    {l}");
        }
        summary.push(line);
        if out.passed == known {
            bad.push(id);
        }
    }
    println!("\nsummary");
    for l in &summary {
        println!("  {l}");
    }
    if bad.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {bad:?} (KNOWN_FAILURES lists {KNOWN_FAILURES:?})");
        ExitCode::FAILURE
    }
}
