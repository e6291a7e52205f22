use std::path::PathBuf;
use std::process::ExitCode;

use biot_precond::harness::{
    build_case, discretization_for, emit_table, manufactured_rhs, run_checks, run_sweep, Format, GridPoint, KappaSpec,
    Layout, SweepConfig,
};
use biot_precond::pressure_precond::MassInner;
use biot_precond::systems::CaseId;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "biot-precond", version, about = "Preconditioned MinRes benchmarks for Biot-type saddle-point systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and print a table.
    Table(TableArgs),
    /// Write one system as Matrix Market files plus a JSON manifest.
    Dump(DumpArgs),
    /// Run the invariant check suite.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inner {
    Exact,
    Jacobi,
}

impl From<Inner> for MassInner {
    fn from(i: Inner) -> Self {
        match i {
            Inner::Exact => MassInner::ExactMass,
            Inner::Jacobi => MassInner::Jacobi,
        }
    }
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value = "1")]
    case: CaseId,
    #[arg(long = "N", value_delimiter = ',', default_value = "8,16,32")]
    n: Vec<usize>,
    /// Use N = 32,64,128 instead of the desk-scale default.
    #[arg(long)]
    large_grid: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,1e4,1e8")]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,1e-2,1e-4")]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,1e-4,1e-8,1e-12")]
    kappa: Vec<f64>,
    /// κ inside the band [0,1]×[1/4,3/4] (κ = 1 outside); replaces --kappa.
    #[arg(long, value_delimiter = ',')]
    kappa_band: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Also estimate cond(BA).
    #[arg(long)]
    cond: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    mass_inner: Inner,
    #[arg(long)]
    allow_out_of_range: bool,
    #[arg(long, default_value = "md")]
    format: Format,
    /// table1 | table2_3 | table4 | table6 | table7 | table8 | flat (default depends on the case)
    #[arg(long)]
    layout: Option<Layout>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with SweepConfig fields; overrides the sweep flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    case: CaseId,
    #[arg(long = "N", default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, value_enum, default_value = "exact")]
    mass_inner: Inner,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn default_layout(case: CaseId, band: bool) -> Layout {
    match case {
        CaseId::Ex1 => Layout::Table1,
        CaseId::Ex2a | CaseId::Ex2b => Layout::Table2_3,
        CaseId::Ex3 => Layout::Table4,
        _ if band => Layout::Table8,
        _ => Layout::Table6,
    }
}

fn table(args: TableArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = match &args.config {
        Some(path) => SweepConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => {
            let kappa_list = if args.kappa_band.is_empty() {
                args.kappa.iter().map(|&k| KappaSpec::Constant(k)).collect()
            } else {
                args.kappa_band.iter().map(|&k| KappaSpec::band(k)).collect()
            };
            let n_list = if args.large_grid { vec![32, 64, 128] } else { args.n.clone() };
            let mut cfg = SweepConfig::new(args.case, n_list, args.lambda.clone(), args.alpha.clone(), kappa_list);
            cfg.rtol = args.rtol;
            cfg.max_iter = args.max_iter;
            cfg.estimate_cond = args.cond;
            cfg.seed = args.seed;
            cfg.mass_inner = args.mass_inner.into();
            cfg.allow_out_of_range = args.allow_out_of_range;
            cfg
        }
    };
    let band = cfg.kappa_list.iter().any(|k| matches!(k, KappaSpec::Band { .. }));
    let layout = args.layout.unwrap_or_else(|| default_layout(cfg.case, band));
    let rows = run_sweep(&cfg)?;
    let text = emit_table(&rows, args.format, layout)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    let failed = rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows did not converge", rows.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn dump(args: DumpArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let disc = discretization_for(args.case, args.n)?;
    let p = GridPoint {
        case: args.case,
        n: args.n,
        lambda: args.lambda,
        alpha: args.alpha,
        kappa: KappaSpec::Constant(args.kappa),
    };
    let sys = build_case(&disc, &p, args.mass_inner.into())?;
    let rhs = manufactured_rhs(&sys, args.seed);
    let sys = sys.with_rhs(rhs)?;
    sys.dump(&args.out_dir)?;
    println!("wrote {} dofs to {}", sys.dim(), args.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn check() -> ExitCode {
    let results = run_checks();
    let mut ok = true;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Table(a) => table(a),
        Command::Dump(a) => dump(a),
        Command::Check => Ok(check()),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
