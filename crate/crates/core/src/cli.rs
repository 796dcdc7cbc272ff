//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{evaluate_run, run_bench, write_report, BenchSpec, EvaluationSpec};
use crate::engine::{load_config, load_model, run, RunConfig};
use crate::error::{Error, Result};
use crate::pareto::CandidateSet;
use crate::problems::{problem, problem_catalog};
use crate::sampling::{derive_seed, CandidateSpec};
use crate::uncertainty::{coverage_probability, coverage_probability_plugin, CoverageField};

/// Largest candidate set `coverage` accepts.
pub const MAX_COVERAGE_CANDIDATES: usize = 10_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "robust-mobo",
    version,
    about = "Multi-objective Bayesian optimization under uncertain inputs"
)]
pub struct Cli {
    /// Master seed; overrides the seed of a run config when given.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an optimization loop from a JSON config.
    Run { config: PathBuf },
    /// Estimate a coverage-probability field.
    Coverage(CoverageArgs),
    /// Compare a run's plug-in fronts with the true ones.
    Metrics(MetricsArgs),
    /// Replicate runs of several acquisition kinds.
    Bench { spec: PathBuf },
    /// List built-in problems.
    Problems,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Built-in problem evaluated exactly.
    #[arg(long, conflicts_with = "run")]
    pub problem: Option<String>,
    /// Run directory whose final model is used as a plug-in.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Regular grid with this many points per axis.
    #[arg(long, conflicts_with = "sobol")]
    pub grid: Option<usize>,
    /// Scrambled Sobol candidates.
    #[arg(long)]
    pub sobol: Option<usize>,
    #[arg(long, default_value_t = 2048)]
    pub n_u: usize,
    /// Keep only candidates in the top q percent of probabilities.
    #[arg(long)]
    pub top_quantile: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub n_u: usize,
    #[arg(long, default_value_t = 5000)]
    pub n_test: usize,
}

/// Process exit status of an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::UnknownProblem { .. }
        | Error::InvalidArgument(_)
        | Error::TruncationTooSmall(_)
        | Error::Io(_) => 2,
        Error::Evaluator(_) | Error::NonFinite { .. } | Error::OutOfBox { .. } => 3,
        Error::MissingArtifact(_) | Error::NotFitted => 4,
        _ => 1,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_run(cli: &Cli, path: &Path) -> Result<()> {
    let mut cfg = RunConfig::from_json(&read_text(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.seeds = None;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.problem, cfg.seed)));
    let outcome = run(&cfg, &dir)?;
    println!("{}", outcome.dir.display());
    Ok(())
}

fn cmd_coverage(cli: &Cli, args: &CoverageArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let (prob, model) = match (&args.problem, &args.run) {
        (Some(name), None) => (problem(name)?, None),
        (None, Some(dir)) => {
            let cfg = load_config(dir)?;
            let (model, _) = load_model(dir)?;
            (cfg.resolve_problem()?, Some(model))
        }
        _ => return Err(Error::Config("coverage needs exactly one of --problem or --run".into())),
    };
    let dim = prob.nx();
    let spec = match (args.grid, args.sobol) {
        (Some(per_dim), _) => CandidateSpec::Grid { per_dim },
        (None, Some(n)) => CandidateSpec::Sobol {
            n,
            seed: derive_seed(seed, 1),
        },
        (None, None) => CandidateSpec::default_for(dim, 4096, derive_seed(seed, 1)),
    };
    let len = spec.len(dim);
    if len > MAX_COVERAGE_CANDIDATES {
        return Err(Error::Config(format!(
            "{len} candidates exceed the limit of {MAX_COVERAGE_CANDIDATES}; use a coarser --grid or --sobol N"
        )));
    }
    let candidates = CandidateSet::new(spec.generate(&prob.x_bounds)?, prob.x_bounds.clone())?;
    let u = prob.u_distribution.sample(args.n_u, derive_seed(seed, 2), true)?;
    let field: CoverageField = match &model {
        Some(m) => coverage_probability_plugin(m, &candidates, &u)?,
        None => coverage_probability(&prob, &candidates, &u)?,
    };
    let rows = args.top_quantile.map(|q| field.top_quantile(q));
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let path = out.join("coverage.csv");
    field.write_csv(fs::File::create(&path)?, rows.as_deref())?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_metrics(cli: &Cli, args: &MetricsArgs) -> Result<()> {
    let eval = EvaluationSpec::new(args.n_u, args.n_test, cli.seed.unwrap_or(0));
    let report = evaluate_run(&args.run_dir, &eval)?;
    let out = cli.out.clone().unwrap_or_else(|| args.run_dir.clone());
    write_report(&report, &out)?;
    println!(
        "median delta {:.6e}  coverage L2 {:.6e}  ({})",
        report.summary.median,
        report.coverage_l2,
        out.join("metrics.json").display()
    );
    Ok(())
}

fn cmd_bench(cli: &Cli, path: &Path) -> Result<()> {
    let mut spec = BenchSpec::from_json(&read_text(path)?)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("bench-{}", spec.problem)));
    let summary = run_bench(&spec, &out, |r| match (&r.error, r.median_delta) {
        (None, Some(m)) => eprintln!("{} rep {}: median delta {m:.4e}", r.kind.name(), r.replication),
        (Some(e), _) => eprintln!("{} rep {} failed: {e}", r.kind.name(), r.replication),
        _ => {}
    })?;
    for k in &summary.kinds {
        println!(
            "{:7} runs {}  median delta {}  median L2 {}{}",
            k.kind.name(),
            k.runs,
            k.median_delta.map_or("-".into(), |v| format!("{v:.4e}")),
            k.median_coverage_l2.map_or("-".into(), |v| format!("{v:.4e}")),
            if k.complete { "" } else { "  (incomplete)" }
        );
    }
    println!("{}", out.join(crate::bench::SUMMARY_FILE).display());
    Ok(())
}

fn cmd_problems() {
    for p in problem_catalog() {
        let law = match &p.u_distribution {
            crate::uncertainty::UDistribution::Uniform { .. } => "uniform".to_string(),
            crate::uncertainty::UDistribution::DiagonalGaussian { center, variances, .. } => {
                format!("truncated gaussian, center {center:?}, variances {variances:?}")
            }
        };
        println!(
            "{:8} nx={} nu={} d={}  X={:?}..{:?}  U={:?}..{:?}  U law: {law}",
            p.name,
            p.nx(),
            p.nu(),
            p.n_objectives,
            p.x_bounds.lo(),
            p.x_bounds.hi(),
            p.u_bounds.lo(),
            p.u_bounds.hi()
        );
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => cmd_run(cli, config),
        Command::Coverage(args) => cmd_coverage(cli, args),
        Command::Metrics(args) => cmd_metrics(cli, args),
        Command::Bench { spec } => cmd_bench(cli, spec),
        Command::Problems => {
            cmd_problems();
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
