//! Parameter sweeps, table output and the invariant check suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::CoefficientField;
use crate::krylov::dense::{condition_from_spectrum, DENSE_CAP};
use crate::krylov::linop::LinearOp;
use crate::krylov::minres::MinresOptions;
use crate::krylov::sparse::dot;
use crate::mesh::{BcPreset, Rect, TriMesh};
use crate::pressure_precond::MassInner;
use crate::systems::{
    build_biot_solid_pressure, build_biot_total_pressure, build_ex1, build_ex2, dense_reference_solution, BiotParams,
    BiotPrecond, BlockSystem, CaseId, Discretization, Ex2Precond,
};

/// A κ sweep entry: a constant or the Ω₁ band value with κ = `outer` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Constant(f64),
    Band {
        inner: f64,
        #[serde(default = "one")]
        outer: f64,
        #[serde(default = "Rect::middle_band")]
        region: Rect,
    },
}

fn one() -> f64 {
    1.0
}

impl KappaSpec {
    pub fn band(inner: f64) -> Self {
        KappaSpec::Band { inner, outer: 1.0, region: Rect::middle_band() }
    }

    pub fn field(&self, mesh: &TriMesh) -> Result<CoefficientField> {
        match *self {
            KappaSpec::Constant(k) => Ok(CoefficientField::Constant(k)),
            KappaSpec::Band { inner, outer, region } => CoefficientField::band(mesh, &region, inner, outer),
        }
    }

    /// Value used for table labels and range checks (the inner value of a band).
    pub fn value(&self) -> f64 {
        match *self {
            KappaSpec::Constant(k) => k,
            KappaSpec::Band { inner, .. } => inner,
        }
    }

    fn extremes(&self) -> (f64, f64) {
        match *self {
            KappaSpec::Constant(k) => (k, k),
            KappaSpec::Band { inner, outer, .. } => (inner.min(outer), inner.max(outer)),
        }
    }
}

fn default_rtol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    5000
}
fn default_n_probe() -> usize {
    3
}
fn default_unit() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub case: CaseId,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_unit")]
    pub lambda_list: Vec<f64>,
    #[serde(default = "default_unit")]
    pub alpha_list: Vec<f64>,
    pub kappa_list: Vec<KappaSpec>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub estimate_cond: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mass_inner: MassInner,
    /// Skip the parameter range checks.
    #[serde(default)]
    pub allow_out_of_range: bool,
    #[serde(default = "default_n_probe")]
    pub n_probe: usize,
}

impl SweepConfig {
    pub fn new(case: CaseId, n_list: Vec<usize>, lambda_list: Vec<f64>, alpha_list: Vec<f64>, kappa_list: Vec<KappaSpec>) -> Self {
        Self {
            case,
            n_list,
            lambda_list,
            alpha_list,
            kappa_list,
            rtol: default_rtol(),
            max_iter: default_max_iter(),
            estimate_cond: false,
            seed: 0,
            mass_inner: MassInner::default(),
            allow_out_of_range: false,
            n_probe: default_n_probe(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("N_list", self.n_list.len()),
            ("lambda_list", self.lambda_list.len()),
            ("alpha_list", self.alpha_list.len()),
            ("kappa_list", self.kappa_list.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return Err(Error::Parse(format!("{name} is empty")));
            }
        }
        if self.n_list.contains(&0) {
            return Err(Error::Parse("N must be positive".into()));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) || self.max_iter == 0 {
            return Err(Error::Parse("rtol must lie in (0, 1) and max_iter be positive".into()));
        }
        let finite = |v: f64| v.is_finite();
        if !self.lambda_list.iter().chain(&self.alpha_list).all(|&v| finite(v) && v > 0.0) {
            return Err(Error::Parse("λ and α must be positive".into()));
        }
        let kappa_floor_ok = |k: f64| finite(k) && if self.case == CaseId::Ex1 { k >= 0.0 } else { k > 0.0 };
        if !self.kappa_list.iter().all(|k| {
            let (lo, hi) = k.extremes();
            kappa_floor_ok(lo) && finite(hi)
        }) {
            return Err(Error::Parse("κ must be positive (nonnegative for ex1)".into()));
        }
        if self.case == CaseId::Ex1 && self.kappa_list.iter().any(|k| matches!(k, KappaSpec::Band { .. })) {
            return Err(Error::Parse("ex1 takes a constant κ".into()));
        }
        if !self.allow_out_of_range {
            if self.lambda_list.iter().any(|&l| l < 1.0) {
                return Err(Error::Parse("λ below 1 (set allow_out_of_range to override)".into()));
            }
            if self.alpha_list.iter().any(|&a| a > 1.0) {
                return Err(Error::Parse("α above 1 (set allow_out_of_range to override)".into()));
            }
            if self.kappa_list.iter().any(|k| k.extremes().1 > 1.0) {
                return Err(Error::Parse("κ above 1 (set allow_out_of_range to override)".into()));
            }
        }
        Ok(())
    }

    /// Grid points in row-major order `(N, λ, α, κ)`; parameters a case ignores collapse to one value.
    pub fn grid(&self) -> Vec<GridPoint> {
        let (lambdas, alphas) = match self.case {
            CaseId::Ex1 => (vec![1.0], vec![1.0]),
            CaseId::Ex2a | CaseId::Ex2b | CaseId::Ex3 => (self.lambda_list.clone(), vec![1.0]),
            _ => (self.lambda_list.clone(), self.alpha_list.clone()),
        };
        let kappas = match self.case {
            CaseId::Ex2a | CaseId::Ex2b => vec![KappaSpec::Constant(1.0)],
            _ => self.kappa_list.clone(),
        };
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &lambda in &lambdas {
                for &alpha in &alphas {
                    for &kappa in &kappas {
                        out.push(GridPoint { case: self.case, n, lambda, alpha, kappa });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub case: CaseId,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub kappa: KappaSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: CaseId,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub kappa: KappaSpec,
    pub iterations: usize,
    pub converged: bool,
    pub cond_estimate: Option<f64>,
    pub wall_time_ms: f64,
    pub dof_count: usize,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(p: &GridPoint, dofs: usize, err: Error, ms: f64) -> Self {
        Self {
            case: p.case,
            n: p.n,
            lambda: p.lambda,
            alpha: p.alpha,
            kappa: p.kappa,
            iterations: 0,
            converged: false,
            cond_estimate: None,
            wall_time_ms: ms,
            dof_count: dofs,
            error: Some(err.to_string()),
        }
    }
}

/// Builds the system of a grid point on a prepared discretization.
pub fn build_case(disc: &Discretization, p: &GridPoint, inner: MassInner) -> Result<BlockSystem> {
    let kappa = p.kappa.field(disc.mesh())?;
    match p.case {
        CaseId::Case1 | CaseId::Case3 | CaseId::Case4 => {
            build_biot_total_pressure(disc, &BiotParams::new(p.lambda, p.alpha, kappa), BiotPrecond::GeneralBC, inner)
        }
        CaseId::Case2 => {
            build_biot_total_pressure(disc, &BiotParams::new(p.lambda, p.alpha, kappa), BiotPrecond::DirichletBC, inner)
        }
        CaseId::Ex1 => build_ex1(disc, p.kappa.value()),
        CaseId::Ex2a => build_ex2(disc, p.lambda, Ex2Precond::B1, inner),
        CaseId::Ex2b => build_ex2(disc, p.lambda, Ex2Precond::B2, inner),
        CaseId::Ex3 => build_biot_solid_pressure(disc, p.lambda, &kappa),
    }
}

pub fn discretization_for(case: CaseId, n: usize) -> Result<Discretization> {
    Discretization::new(n, case.preset(), case.elements())
}

/// Load vector scaled to unit `B`-norm. A nonzero seed adds a seeded random vector
/// on the free dofs whose field blocks are each scaled to unit `B`-norm, so that every
/// field is excited regardless of how the parameters weight the blocks.
pub fn manufactured_rhs(sys: &BlockSystem, seed: u64) -> Vec<f64> {
    let b = sys.preconditioner();
    let bnorm = |v: &[f64]| dot(v, &b.apply(v)).max(0.0).sqrt();
    let scale = |v: &mut [f64], s: f64| {
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    };
    let mut base = sys.load().to_vec();
    let s = bnorm(&base);
    scale(&mut base, s);
    if seed == 0 {
        return base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r: Vec<f64> = sys.constrained.iter().map(|&c| if c { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
    if let Some(nv) = &sys.null_vector {
        let c = dot(nv, &r) / dot(nv, nv);
        r.iter_mut().zip(nv).for_each(|(x, n)| *x -= c * n);
    }
    let offs = sys.field_offsets();
    for (k, blk) in b.blocks().iter().enumerate() {
        let part = &mut r[offs[k]..offs[k + 1]];
        let s = dot(part, &blk.apply(part)).max(0.0).sqrt();
        scale(part, s);
    }
    let mut out: Vec<f64> = base.iter().zip(&r).map(|(a, b)| a + b).collect();
    let s = bnorm(&out);
    scale(&mut out, s);
    out
}

/// Solves one prepared system with the sweep settings.
pub fn solve_point(disc: &Discretization, p: &GridPoint, cfg: &SweepConfig) -> ResultRow {
    let t = Instant::now();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    let sys = match build_case(disc, p, cfg.mass_inner) {
        Ok(s) => s,
        Err(e) => return ResultRow::failed(p, 0, e, ms(t)),
    };
    let dofs = sys.dim();
    let rhs = manufactured_rhs(&sys, cfg.seed);
    let sys = match sys.with_rhs(rhs) {
        Ok(s) => s,
        Err(e) => return ResultRow::failed(p, dofs, e, ms(t)),
    };
    let (_, report) = match sys.solve(MinresOptions { rtol: cfg.rtol, max_iter: cfg.max_iter }) {
        Ok(r) => r,
        Err(e) => return ResultRow::failed(p, dofs, e, ms(t)),
    };
    let mut error = None;
    let cond_estimate = if cfg.estimate_cond {
        match sys.estimate_condition(cfg.n_probe, cfg.seed ^ 0x5eed) {
            Ok(s) => Some(s.cond),
            Err(e) => {
                error = Some(e.to_string());
                None
            }
        }
    } else {
        None
    };
    ResultRow {
        case: p.case,
        n: p.n,
        lambda: p.lambda,
        alpha: p.alpha,
        kappa: p.kappa,
        iterations: report.iterations,
        converged: report.converged,
        cond_estimate,
        wall_time_ms: ms(t),
        dof_count: dofs,
        error,
    }
}

/// Runs every grid point; failures are recorded per row. Rows come back in grid order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let grid = cfg.grid();
    let mut discs: BTreeMap<usize, std::result::Result<Arc<Discretization>, String>> = BTreeMap::new();
    for &n in &cfg.n_list {
        discs
            .entry(n)
            .or_insert_with(|| discretization_for(cfg.case, n).map(Arc::new).map_err(|e| e.to_string()));
    }
    Ok(grid
        .par_iter()
        .map(|p| match &discs[&p.n] {
            Ok(d) => solve_point(d, p, cfg),
            Err(e) => ResultRow::failed(p, 0, Error::InvalidArgument(e.clone()), 0.0),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Markdown),
            _ => Err(Error::Parse(format!("unknown format '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// κ rows × N columns.
    Table1,
    /// λ rows × (case, N) columns.
    Table2_3,
    /// (N, λ) rows × κ columns.
    Table4,
    /// (N, λ, α) rows × κ columns.
    Table6,
    /// (λ, α, κ) rows × (case, N) columns.
    Table7,
    /// (N, λ, α) rows × band κ columns.
    Table8,
    Flat,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "table1" | "1" => Ok(Layout::Table1),
            "table2_3" | "table2" | "table3" | "2_3" => Ok(Layout::Table2_3),
            "table4" | "4" => Ok(Layout::Table4),
            "table6" | "6" => Ok(Layout::Table6),
            "table7" | "7" => Ok(Layout::Table7),
            "table8" | "8" => Ok(Layout::Table8),
            "flat" => Ok(Layout::Flat),
            _ => Err(Error::Parse(format!("unknown layout '{s}'"))),
        }
    }
}

fn sci(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Copy)]
enum Key {
    Case,
    N,
    Lambda,
    Alpha,
    Kappa,
}

impl Key {
    fn name(self) -> &'static str {
        match self {
            Key::Case => "case",
            Key::N => "N",
            Key::Lambda => "λ",
            Key::Alpha => "α",
            Key::Kappa => "κ",
        }
    }

    fn of(self, r: &ResultRow) -> String {
        match self {
            Key::Case => r.case.to_string(),
            Key::N => r.n.to_string(),
            Key::Lambda => sci(r.lambda),
            Key::Alpha => sci(r.alpha),
            Key::Kappa => sci(r.kappa.value()),
        }
    }
}

fn cell(r: &ResultRow) -> String {
    if let Some(e) = &r.error {
        if r.iterations == 0 && r.dof_count == 0 {
            return format!("error: {e}");
        }
    }
    let mut s = r.iterations.to_string();
    if let Some(c) = r.cond_estimate {
        let _ = write!(s, " ({})", if c < 100.0 { format!("{c:.1}") } else { format!("{c:.3e}") });
    }
    if !r.converged {
        s.push_str(" [not converged]");
    }
    s
}

struct Pivot {
    header: Vec<String>,
    body: Vec<Vec<String>>,
}

fn pivot(rows: &[ResultRow], row_keys: &[Key], col_keys: &[Key]) -> Pivot {
    let key = |r: &ResultRow, ks: &[Key]| ks.iter().map(|k| k.of(r)).collect::<Vec<_>>();
    let mut row_ids: Vec<Vec<String>> = Vec::new();
    let mut col_ids: Vec<Vec<String>> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for r in rows {
        let (rk, ck) = (key(r, row_keys), key(r, col_keys));
        let i = row_ids.iter().position(|x| *x == rk).unwrap_or_else(|| {
            row_ids.push(rk);
            row_ids.len() - 1
        });
        let j = col_ids.iter().position(|x| *x == ck).unwrap_or_else(|| {
            col_ids.push(ck);
            col_ids.len() - 1
        });
        cells.insert((i, j), cell(r));
    }
    let mut header: Vec<String> = row_keys.iter().map(|k| k.name().to_string()).collect();
    for c in &col_ids {
        let label = col_keys.iter().zip(c).map(|(k, v)| format!("{}={v}", k.name())).collect::<Vec<_>>().join(", ");
        header.push(label);
    }
    let body = row_ids
        .iter()
        .enumerate()
        .map(|(i, rk)| {
            let mut line = rk.clone();
            for j in 0..col_ids.len() {
                line.push(cells.get(&(i, j)).cloned().unwrap_or_else(|| "—".into()));
            }
            line
        })
        .collect();
    Pivot { header, body }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(p: &Pivot, format: Format) -> Result<String> {
    let mut out = String::new();
    match format {
        Format::Csv => {
            for line in std::iter::once(&p.header).chain(&p.body) {
                out.push_str(&line.iter().map(|s| csv_field(s)).collect::<Vec<_>>().join(","));
                out.push('\n');
            }
        }
        Format::Markdown => {
            let _ = writeln!(out, "| {} |", p.header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(p.header.len()));
            for line in &p.body {
                let _ = writeln!(out, "| {} |", line.join(" | "));
            }
        }
        Format::Json => {
            out = serde_json::to_string_pretty(&serde_json::json!({ "header": p.header, "rows": p.body }))?;
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn emit_table(rows: &[ResultRow], format: Format, layout: Layout) -> Result<String> {
    use Key::*;
    let (rk, ck): (&[Key], &[Key]) = match layout {
        Layout::Flat => {
            return match format {
                Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
                _ => {
                    let header = [
                        "case", "N", "lambda", "alpha", "kappa", "iterations", "converged", "cond", "wall_time_ms",
                        "dofs", "error",
                    ];
                    let body = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.case.to_string(),
                                r.n.to_string(),
                                sci(r.lambda),
                                sci(r.alpha),
                                match r.kappa {
                                    KappaSpec::Constant(k) => sci(k),
                                    KappaSpec::Band { inner, outer, .. } => format!("band {} / {}", sci(inner), sci(outer)),
                                },
                                r.iterations.to_string(),
                                r.converged.to_string(),
                                r.cond_estimate.map(|c| format!("{c:.6}")).unwrap_or_default(),
                                format!("{:.1}", r.wall_time_ms),
                                r.dof_count.to_string(),
                                r.error.clone().unwrap_or_default(),
                            ]
                        })
                        .collect();
                    render(&Pivot { header: header.iter().map(|s| s.to_string()).collect(), body }, format)
                }
            };
        }
        Layout::Table1 => (&[Kappa], &[N]),
        Layout::Table2_3 => (&[Lambda], &[Case, N]),
        Layout::Table4 => (&[N, Lambda], &[Kappa]),
        Layout::Table6 | Layout::Table8 => (&[N, Lambda, Alpha], &[Kappa]),
        Layout::Table7 => (&[Lambda, Alpha, Kappa], &[Case, N]),
    };
    render(&pivot(rows, rk, ck), format)
}

pub fn rows_from_json(text: &str) -> Result<Vec<ResultRow>> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((passed, detail)) => CheckOutcome { name: name.into(), passed, detail },
        Err(e) => CheckOutcome { name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

/// A fast invariant suite over small meshes.
pub fn run_checks() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.push(outcome("monolithic symmetry", check_symmetry()));
    out.push(outcome("B1 and B2 agree at λ = 1", check_b1_b2_agree()));
    out.push(outcome("MinRes matches dense solve", check_minres_vs_dense()));
    out.push(outcome("Case 2 bounded condition number", check_case2_bounded()));
    out
}

fn check_symmetry() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for case in [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4, CaseId::Ex1, CaseId::Ex2b, CaseId::Ex3] {
        let d = discretization_for(case, 4)?;
        let p = GridPoint { case, n: 4, lambda: 1e8, alpha: 1e-4, kappa: KappaSpec::Constant(1e-12) };
        let s = build_case(&d, &p, MassInner::ExactMass)?;
        worst = worst.max(s.matrix().max_asymmetry() / s.matrix().max_abs());
    }
    Ok((worst <= 1e-13, format!("max relative asymmetry {worst:.2e}")))
}

fn check_b1_b2_agree() -> Result<(bool, String)> {
    let d = discretization_for(CaseId::Ex2a, 4)?;
    let c = |pc| -> Result<f64> {
        let s = build_ex2(&d, 1.0, pc, MassInner::Jacobi)?;
        condition_from_spectrum(&s.dense_spectrum()?, 0).ok_or_else(|| invalid("empty spectrum"))
    };
    let (c1, c2) = (c(Ex2Precond::B1)?, c(Ex2Precond::B2)?);
    let rel = (c1 - c2).abs() / c1;
    Ok((rel <= 1e-10, format!("cond {c1:.6} vs {c2:.6}")))
}

fn check_minres_vs_dense() -> Result<(bool, String)> {
    let rtol = 1e-6;
    let mut worst: f64 = 0.0;
    for case in [CaseId::Case1, CaseId::Case2, CaseId::Ex1, CaseId::Ex2b, CaseId::Ex3] {
        let d = discretization_for(case, 4)?;
        let p = GridPoint { case, n: 4, lambda: 1e4, alpha: 1e-2, kappa: KappaSpec::Constant(1e-4) };
        let s = build_case(&d, &p, MassInner::ExactMass)?;
        if s.dim() > DENSE_CAP {
            continue;
        }
        let rhs = manufactured_rhs(&s, 1);
        let s = s.with_rhs(rhs)?;
        let (x, rep) = s.solve(MinresOptions { rtol, max_iter: 5000 })?;
        if !rep.converged {
            return Ok((false, format!("{case} did not converge")));
        }
        let xd = dense_reference_solution(&s)?;
        let diff: Vec<f64> = x.iter().zip(&xd).map(|(a, b)| a - b).collect();
        worst = worst.max(b_weighted_ratio(&s, &diff));
    }
    Ok((worst <= 10.0 * rtol, format!("max (B e, e)/(B b, b) = {worst:.2e} with e = A(x - x_dense)")))
}

/// `(B A d, A d) / (B b, b)`: the stopping metric of MinRes applied to a solution difference `d`.
pub fn b_weighted_ratio(sys: &BlockSystem, d: &[f64]) -> f64 {
    let b = sys.preconditioner();
    let e = sys.matrix().mul_vec(d);
    dot(&e, &b.apply(&e)) / dot(&sys.rhs, &b.apply(&sys.rhs))
}

fn check_case2_bounded() -> Result<(bool, String)> {
    let d = Discretization::new(4, BcPreset::AllDirichlet, CaseId::Case2.elements())?;
    let p = GridPoint { case: CaseId::Case2, n: 4, lambda: 1e8, alpha: 1.0, kappa: KappaSpec::Constant(1e-12) };
    let s = build_case(&d, &p, MassInner::ExactMass)?;
    let c = condition_from_spectrum(&s.dense_spectrum()?, 0).ok_or_else(|| invalid("empty spectrum"))?;
    Ok((c < 30.0, format!("cond {c:.3}")))
}
