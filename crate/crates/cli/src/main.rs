//! `buckle`: buckling-load statistics and robust sizing of trusses.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use buckle_core::continuation::{trace_path, write_path_csv};
use buckle_core::generators::Generator;
use buckle_core::json::to_canonical_string;
use buckle_core::model::ModelFile;
use buckle_core::optimizer::{compute_normalizers, optimize, pareto_sweep, write_history_csv, BayesSettings, RobustProblem};
use buckle_core::sampling::{buckling_statistics, empirical_moments, ImperfectionDistribution, SamplingSettings};
use buckle_core::stability::{critical_load, linear_buckling_modes, CriticalKind, StabilitySettings};
use buckle_core::{Error, TrussModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "buckle", version, about = "Buckling-load statistics and robust sizing of pin-jointed trusses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an example model file.
    Generate(GenerateArgs),
    /// Trace the equilibrium path.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the traced path as CSV.
        #[arg(long)]
        dump_path: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Critical point of the perfect structure.
    Buckle {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Buckling-load statistics under random imperfections.
    Stats {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        imperfection: ImperfectionArgs,
        /// Number of samples (even).
        #[arg(long, default_value_t = 128)]
        samples: usize,
        /// Sobol points skipped after the origin.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Robust optimisation for one weight.
    Optimize {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        imperfection: ImperfectionArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        alpha: f64,
    },
    /// Pareto sweep over weights.
    Pareto {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        imperfection: ImperfectionArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        alphas: Vec<f64>,
        /// Worker threads for the weights.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    VonMises,
    StarDome,
    TrussColumn,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(short, long)]
    output: PathBuf,
    /// von Mises half span.
    #[arg(long)]
    half_span: Option<f64>,
    /// von Mises rise.
    #[arg(long)]
    rise: Option<f64>,
    /// Star dome rings (2 or 5).
    #[arg(long, default_value_t = 2)]
    rings: usize,
    #[arg(long)]
    outer_radius: Option<f64>,
    /// Ring heights from the outer ring inwards.
    #[arg(long, value_delimiter = ',')]
    ring_heights: Option<Vec<f64>>,
    #[arg(long)]
    apex_height: Option<f64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    base_edge: Option<f64>,
    #[arg(long)]
    block_height: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Model file.
    #[arg(short, long)]
    model: Option<PathBuf>,
    /// Example generator with default dimensions
    /// (von_mises, star_dome, star_dome5, truss_column).
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Args)]
struct SolverArgs {
    /// Equilibrium tolerance relative to |f| max(|lambda|, 1).
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Tolerance of |K phi| relative to the largest strut stiffness.
    #[arg(long)]
    eigen_tol: Option<f64>,
    /// Path-following step limit.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct ImperfectionArgs {
    /// Standard deviation of each mode amplitude (unit-norm modes).
    #[arg(long)]
    sigma_beta: Option<f64>,
    /// Number of buckling modes.
    #[arg(long, default_value_t = 1)]
    modes: usize,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Samples per design evaluation (even).
    #[arg(long, default_value_t = 128)]
    samples: usize,
    #[arg(long)]
    n_init: Option<usize>,
    /// Budget of each normaliser run (defaults to the budget).
    #[arg(long)]
    normalizer_budget: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

enum CliError {
    Input(String),
    Solver(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel(_)
            | Error::DimensionMismatch { .. }
            | Error::Config(_)
            | Error::SobolDimension { .. }
            | Error::OutsideUnitInterval(_) => CliError::Input(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

struct Loaded {
    model: TrussModel,
    generator: Option<Generator>,
}

fn load(source: &Source) -> Result<Loaded, CliError> {
    match (&source.model, &source.kind) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let file: ModelFile = serde_json::from_str(&text).map_err(input(&path.display().to_string()))?;
            Ok(Loaded { model: file.to_model()?, generator: None })
        }
        (None, Some(kind)) => {
            let g = Generator::by_name(kind)?;
            Ok(Loaded { model: g.build()?.to_model()?, generator: Some(g) })
        }
        _ => Err(CliError::Input("give exactly one of --model and --kind".into())),
    }
}

fn stability_settings(s: &SolverArgs) -> Result<StabilitySettings, CliError> {
    let mut out = StabilitySettings::default();
    if let Some(t) = s.residual_tol {
        out.residual_tol = t;
        out.continuation.newton_tol = t;
    }
    if let Some(t) = s.eigen_tol {
        out.eigen_tol = t;
    }
    if let Some(n) = s.max_steps {
        out.continuation.max_steps = n;
    }
    out.continuation.validate()?;
    if !(out.residual_tol > 0.0 && out.eigen_tol > 0.0) {
        return Err(CliError::Input("tolerances must be positive".into()));
    }
    Ok(out)
}

fn sigma_beta(args: &ImperfectionArgs, loaded: &Loaded) -> Result<Vec<f64>, CliError> {
    let s = match (args.sigma_beta, &loaded.generator) {
        (Some(s), _) => s,
        (None, Some(g)) => g.default_sigma_beta(),
        (None, None) => return Err(CliError::Input("--sigma-beta is required with a model file".into())),
    };
    if args.modes == 0 {
        return Err(CliError::Input("--modes must be at least 1".into()));
    }
    Ok(vec![s; args.modes])
}

fn half(samples: usize) -> Result<usize, CliError> {
    if samples == 0 || !samples.is_multiple_of(2) {
        return Err(CliError::Input(format!("sample count must be even and positive, got {samples}")));
    }
    Ok(samples / 2)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let s = to_canonical_string(value).map_err(|e| CliError::Solver(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let g = match args.kind {
        Kind::VonMises => {
            let Generator::VonMises { half_span, rise } = Generator::von_mises() else { unreachable!() };
            Generator::VonMises { half_span: args.half_span.unwrap_or(half_span), rise: args.rise.unwrap_or(rise) }
        }
        Kind::StarDome => {
            let base = match args.rings {
                2 => Generator::two_ring_dome(),
                5 => Generator::five_ring_dome(),
                r => return Err(CliError::Input(format!("star dome supports 2 or 5 rings, got {r}"))),
            };
            let Generator::StarDome { rings, outer_radius, ring_heights, apex_height } = base else { unreachable!() };
            Generator::StarDome {
                rings,
                outer_radius: args.outer_radius.unwrap_or(outer_radius),
                ring_heights: args.ring_heights.clone().unwrap_or(ring_heights),
                apex_height: args.apex_height.unwrap_or(apex_height),
            }
        }
        Kind::TrussColumn => {
            let Generator::TrussColumn { blocks, base_edge, block_height } = Generator::truss_column() else { unreachable!() };
            Generator::TrussColumn {
                blocks: args.blocks.unwrap_or(blocks),
                base_edge: args.base_edge.unwrap_or(base_edge),
                block_height: args.block_height.unwrap_or(block_height),
            }
        }
    };
    let file = g.build()?;
    file.to_model()?;
    let text = to_canonical_string(&file).map_err(|e| CliError::Solver(e.to_string()))?;
    fs::write(&args.output, text + "\n").map_err(io_err(&args.output))
}

#[derive(Serialize)]
struct AnalyzeOutput {
    points: usize,
    lambda_max: f64,
    first_unstable_step: Option<usize>,
}

#[derive(Serialize)]
struct BuckleOutput {
    lambda_c: f64,
    kind: CriticalKind,
    iterations: usize,
    /// Nodal positions at the critical point.
    x: Vec<f64>,
    /// Critical mode over all nodal dofs.
    phi: Vec<f64>,
}

#[derive(Serialize)]
struct StatsOutput {
    lambda_c0: f64,
    mean: f64,
    std: f64,
    n_samples: usize,
    flagged: usize,
}

#[derive(Serialize)]
struct OptimizeOutput {
    alpha: f64,
    a_opt: Vec<f64>,
    mean: f64,
    std: f64,
    g: f64,
    evaluations: usize,
    history_csv_path: String,
}

fn problem(
    loaded: Loaded,
    solver: &SolverArgs,
    imperfection: &ImperfectionArgs,
    opt: &OptArgs,
) -> Result<(RobustProblem, BayesSettings, BayesSettings), CliError> {
    let stability = stability_settings(solver)?;
    let sigma = sigma_beta(imperfection, &loaded)?;
    let budget = opt.budget.or(loaded.generator.as_ref().map(Generator::default_budget)).unwrap_or(100);
    let mut p = RobustProblem::new(loaded.model, sigma, 0.5, half(opt.samples)?)?;
    p.stability = stability;
    let settings = BayesSettings { budget, n_init: opt.n_init, seed: opt.seed, ..Default::default() };
    let norm = BayesSettings { budget: opt.normalizer_budget.unwrap_or(budget), ..settings.clone() };
    Ok((p, settings, norm))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Generate(args) => generate(&args).map(|_| true),
        Command::Analyze { source, solver, dump_path, steps } => {
            let loaded = load(&source)?;
            let settings = stability_settings(&solver)?;
            let a = loaded.model.initial_design();
            let pts = trace_path(&loaded.model, &a, &settings.continuation, steps)?;
            if let Some(path) = &dump_path {
                write_file(path, |buf| write_path_csv(&loaded.model, &pts, buf))?;
            }
            print_json(&AnalyzeOutput {
                points: pts.len(),
                lambda_max: pts.iter().map(|p| p.lambda).fold(f64::NEG_INFINITY, f64::max),
                first_unstable_step: pts.iter().find(|p| p.negative_pivots > 0).map(|p| p.step_index),
            })?;
            Ok(true)
        }
        Command::Buckle { source, solver } => {
            let loaded = load(&source)?;
            let settings = stability_settings(&solver)?;
            let m = &loaded.model;
            let p = critical_load(m, &m.initial_design(), None, &settings)?;
            print_json(&BuckleOutput {
                lambda_c: p.lambda,
                kind: p.kind,
                iterations: p.iterations,
                x: m.full_positions(&p.x),
                phi: m.expand(&p.phi),
            })?;
            Ok(true)
        }
        Command::Stats { source, solver, imperfection, samples, seed, csv } => {
            let loaded = load(&source)?;
            let settings = stability_settings(&solver)?;
            let sigma = sigma_beta(&imperfection, &loaded)?;
            let m = &loaded.model;
            let a = m.initial_design();
            let modes = linear_buckling_modes(m, &a, sigma.len(), &settings.continuation)?;
            let dist = ImperfectionDistribution::new(modes, sigma)?;
            let sampling = SamplingSettings { skip: seed, ..Default::default() };
            let set = buckling_statistics(m, &a, &dist, half(samples)?, &settings, &sampling)?;
            let (mean, std) = empirical_moments(&set)?;
            if let Some(path) = &csv {
                write_file(path, |buf| {
                    let cols: Vec<String> = (0..dist.n_modes()).map(|i| format!("beta{i}")).collect();
                    writeln!(buf, "{},lambda_c", cols.join(","))?;
                    for s in &set.samples {
                        let beta: Vec<String> = s.beta.iter().map(|b| format!("{b:?}")).collect();
                        writeln!(buf, "{},{:?}", beta.join(","), s.lambda_c)?;
                    }
                    Ok(())
                })?;
            }
            print_json(&StatsOutput { lambda_c0: set.lambda_c0, mean, std, n_samples: set.samples.len(), flagged: set.flagged.len() })?;
            Ok(set.flagged.is_empty())
        }
        Command::Optimize { source, solver, imperfection, opt, alpha } => {
            let (p, settings, norm) = problem(load(&source)?, &solver, &imperfection, &opt)?;
            let p = p.with_alpha(alpha)?;
            let (mean_star, std_star) = compute_normalizers(&p, &norm)?;
            let p = p.with_normalizers(mean_star, std_star)?;
            let result = optimize(&p, &settings)?;
            fs::create_dir_all(&opt.out_dir).map_err(io_err(&opt.out_dir))?;
            let path = opt.out_dir.join(format!("history_alpha_{alpha}.csv"));
            write_file(&path, |buf| write_history_csv(&result.history, buf))?;
            info!("history written to {}", path.display());
            print_json(&OptimizeOutput {
                alpha,
                a_opt: result.a_opt.clone(),
                mean: result.mean,
                std: result.std,
                g: result.g,
                evaluations: result.evaluations,
                history_csv_path: path.display().to_string(),
            })?;
            Ok(result.history.records.iter().all(|r| r.eval.status != buckle_core::optimizer::EvalStatus::Failed))
        }
        Command::Pareto { source, solver, imperfection, opt, alphas, threads } => {
            if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(CliError::Input(format!("weights must lie in [0, 1], got {alphas:?}")));
            }
            let (p, settings, norm) = problem(load(&source)?, &solver, &imperfection, &opt)?;
            let (mean_star, std_star) = compute_normalizers(&p, &norm)?;
            let p = p.with_normalizers(mean_star, std_star)?;
            let rows = pareto_sweep(&p, &alphas, &settings, threads);
            let n = p.model.n_groups();
            let mut out = String::from("alpha,mean,std");
            for g in 0..n {
                out += &format!(",a{g}");
            }
            out.push('\n');
            let mut ok = true;
            for row in &rows {
                match &row.result {
                    Ok(r) => {
                        out += &format!("{:?},{:?},{:?}", row.alpha, r.mean, r.std);
                        for a in &r.a_opt {
                            out += &format!(",{a:?}");
                        }
                    }
                    Err(e) => {
                        ok = false;
                        eprintln!("alpha = {}: {e}", row.alpha);
                        out += &format!("{:?},,{}", row.alpha, ",".repeat(n));
                    }
                }
                out.push('\n');
            }
            print!("{out}");
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BUCKLE_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(1)
        }
    }
}
