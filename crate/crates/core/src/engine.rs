//! The sequential design loop: initial design, acquisition maximization,
//! evaluation, refitting and persistence of a resumable run directory.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    Acquisition, AcquisitionKind, AcquisitionSpec, ReferencePolicy, DEFAULT_BETA, DEFAULT_PARETO_CANDIDATES,
};
use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::{
    DesignOfExperiments, FitConfig, GpSnapshot, GpSurrogate, Hyperparameters, JointPoint, ObjectiveSnapshot,
};
use crate::optimize::nelder_mead_minimize;
use crate::pareto::{CandidateSet, ObjectiveVector};
use crate::problems::{problem, ExternalProblemSpec, ProblemDefinition};
use crate::sampling::{derive_seed, rng_from_seed, sobol_in, uniform_in};
use crate::uncertainty::UDistribution;

pub const SCHEMA_VERSION: u32 = 1;
pub const DOE_FILE: &str = "doe.csv";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const MODEL_FILE: &str = "model.json";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const META_FILE: &str = "meta.json";

// Streams of the per-iteration seed derivation.
const STREAM_OPTIMIZER: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_PARETO: u64 = 3;
const STREAM_U: u64 = 4;
const STREAM_FINAL_FIT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub design: u64,
    pub u_samples: u64,
    pub optimizer: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            design: derive_seed(master, 1),
            u_samples: derive_seed(master, 2),
            optimizer: derive_seed(master, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    pub beta: f64,
    /// Size of `X_pareto`.
    pub n_pareto: usize,
    /// Draw a fresh `X_pareto` every iteration instead of keeping the first one.
    pub resample_pareto: bool,
    /// Integration samples of the integrated criterion.
    pub n_u: usize,
    /// Keep the integration samples fixed across iterations.
    pub crn: bool,
    pub reference: ReferencePolicy,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kind: AcquisitionKind::Iehvi,
            beta: DEFAULT_BETA,
            n_pareto: DEFAULT_PARETO_CANDIDATES,
            resample_pareto: true,
            n_u: 64,
            crn: true,
            reference: ReferencePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub n_probes: usize,
    pub top_k: usize,
    /// Evaluation budget of each simplex refinement.
    pub local_evals: usize,
    /// Initial simplex edge as a fraction of each box width.
    pub local_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_probes: 512,
            top_k: 5,
            local_evals: 100,
            local_step: 0.1,
        }
    }
}

fn default_refit_restarts() -> usize {
    2
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Catalog name, or the name of `external_problem`.
    pub problem: String,
    #[serde(default)]
    pub external_problem: Option<ExternalProblemSpec>,
    /// Defaults to `10 · (nx + nu)`.
    #[serde(default)]
    pub n_initial: Option<usize>,
    pub budget: usize,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Settings of the first fit; its `seed` is replaced by a derived one.
    #[serde(default)]
    pub fit: FitConfig,
    /// Optimizer starts of later fits, the first being the previous optimum.
    #[serde(default = "default_refit_restarts")]
    pub refit_restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Option<Seeds>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(problem: impl Into<String>, budget: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            problem: problem.into(),
            external_problem: None,
            n_initial: None,
            budget,
            acquisition: AcquisitionConfig::default(),
            optimizer: OptimizerConfig::default(),
            fit: FitConfig::default(),
            refit_restarts: default_refit_restarts(),
            seed: 0,
            seeds: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Seeds {
        self.seeds.unwrap_or_else(|| Seeds::from_master(self.seed))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if let Some(n) = self.n_initial {
            if n < 2 {
                return Err(Error::Config(format!("n_initial: must be at least 2, got {n}")));
            }
        }
        if let Some(ext) = &self.external_problem {
            if ext.name != self.problem {
                return Err(Error::Config(format!(
                    "problem: `{}` does not match external_problem.name `{}`",
                    self.problem, ext.name
                )));
            }
        }
        let a = &self.acquisition;
        if !a.beta.is_finite() {
            return Err(Error::Config("acquisition.beta: must be finite".into()));
        }
        if a.kind != AcquisitionKind::Random && a.n_pareto == 0 {
            return Err(Error::Config("acquisition.n_pareto: must be positive".into()));
        }
        if a.kind == AcquisitionKind::Iehvi && a.n_u == 0 {
            return Err(Error::Config("acquisition.n_u: must be positive".into()));
        }
        let o = &self.optimizer;
        if o.n_probes == 0 {
            return Err(Error::Config("optimizer.n_probes: must be positive".into()));
        }
        if !(o.local_step > 0.0 && o.local_step <= 1.0) {
            return Err(Error::Config("optimizer.local_step: must lie in (0, 1]".into()));
        }
        if self.fit.restarts == 0 || self.refit_restarts == 0 {
            return Err(Error::Config(
                "fit.restarts and refit_restarts: must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve_problem(&self) -> Result<ProblemDefinition> {
        match &self.external_problem {
            Some(ext) => ext.build(),
            None => problem(&self.problem),
        }
    }

    /// Copy with defaults made explicit, as stored in `config.json`.
    pub fn resolved(&self, problem: &ProblemDefinition) -> Self {
        let mut c = self.clone();
        c.n_initial = Some(self.n_initial.unwrap_or(10 * (problem.nx() + problem.nu())));
        c.seeds = Some(self.seeds());
        c
    }

    fn comparable(&self) -> Self {
        let mut c = self.clone();
        c.out_dir = None;
        c
    }
}

/// One added point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub acquisition_value: Option<f64>,
    /// Set when every probe scored zero and the most uncertain probe was used.
    pub fallback: bool,
    /// Model used for the selection; absent for random selection.
    pub hyperparameters: Option<Vec<ObjectiveSnapshot>>,
}

/// Wall-clock durations, kept apart from the deterministic history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub iteration: usize,
    pub fit_seconds: f64,
    pub select_seconds: f64,
    pub evaluate_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub problem: String,
    pub nx: usize,
    pub nu: usize,
    pub n_objectives: usize,
    pub x_bounds: Bounds,
    pub u_bounds: Bounds,
    pub u_distribution: UDistribution,
    /// Mass of the untruncated law inside the box; below one for truncated Gaussians.
    pub truncation_acceptance: f64,
}

fn seed_for(base: u64, stream: u64, iteration: usize) -> u64 {
    derive_seed(derive_seed(base, stream), iteration as u64)
}

/// The evaluated initial design; points are a scrambled Sobol set in the joint box.
pub fn initial_design_points(problem: &ProblemDefinition, n: usize, seed: u64) -> Result<Vec<JointPoint>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "initial design needs at least 2 points, got {n}"
        )));
    }
    Ok(sobol_in(&problem.joint_bounds(), n, seed)?
        .into_iter()
        .map(|z| JointPoint::split(&z, problem.nx()))
        .collect())
}

/// Evaluates the initial design points.
pub fn initial_design(problem: &ProblemDefinition, n: usize, seed: u64) -> Result<DesignOfExperiments> {
    let mut doe = DesignOfExperiments::default();
    for p in initial_design_points(problem, n, seed)? {
        let y = problem.evaluate_checked(&p.x, &p.u)?;
        doe.push(p, y)?;
    }
    Ok(doe)
}

/// Something the acquisition optimizer can maximize.
pub trait AcquisitionSurface: Sync {
    fn bounds(&self) -> &Bounds;
    fn values(&self, zs: &[Vec<f64>]) -> Result<Vec<f64>>;
    /// Exploration score used when every probe scores zero.
    fn uncertainty(&self, zs: &[Vec<f64>]) -> Vec<f64>;
}

impl AcquisitionSurface for Acquisition<'_> {
    fn bounds(&self) -> &Bounds {
        self.search_bounds()
    }

    fn values(&self, zs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Acquisition::values(self, zs)
    }

    fn uncertainty(&self, zs: &[Vec<f64>]) -> Vec<f64> {
        Acquisition::uncertainty(self, zs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: Vec<f64>,
    pub value: f64,
    pub fallback: bool,
}

/// Random probing followed by simplex refinement of the best probes.
pub fn maximize_acquisition<S: AcquisitionSurface + ?Sized>(
    surface: &S,
    options: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Proposal> {
    let bounds = surface.bounds();
    let probes: Vec<Vec<f64>> = (0..options.n_probes.max(1)).map(|_| uniform_in(bounds, rng)).collect();
    let values = surface.values(&probes)?;
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    if !(values[order[0]] > 0.0) {
        let u = surface.uncertainty(&probes);
        let mut best = 0;
        for i in 1..u.len() {
            if u[i] > u[best] {
                best = i;
            }
        }
        return Ok(Proposal {
            point: probes[best].clone(),
            value: values[best].max(0.0),
            fallback: true,
        });
    }

    let starts: Vec<usize> = order.into_iter().take(options.top_k).collect();
    let refined = starts
        .par_iter()
        .map(|&i| {
            let mut failure = None;
            let r = nelder_mead_minimize(
                |z| match surface.values(&[z.to_vec()]) {
                    Ok(v) => -v[0],
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                },
                &probes[i],
                bounds,
                options.local_evals,
                options.local_step,
            );
            match failure {
                Some(e) => Err(e),
                None => Ok((r.x, -r.value)),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = (probes[starts[0]].clone(), values[starts[0]]);
    for (x, v) in refined {
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut point = best.0;
    bounds.clamp(&mut point);
    Ok(Proposal {
        point,
        value: best.1,
        fallback: false,
    })
}

/// Picks the next `(x, u)`; returns the acquisition value and fallback flag alongside.
pub fn select_next(
    model: Option<&GpSurrogate>,
    spec: &AcquisitionSpec,
    problem: &ProblemDefinition,
    options: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(JointPoint, Option<f64>, bool)> {
    if spec.kind == AcquisitionKind::Random {
        let z = uniform_in(&problem.joint_bounds(), rng);
        return Ok((JointPoint::split(&z, problem.nx()), None, false));
    }
    let model = model.ok_or(Error::NotFitted)?;
    let acq = Acquisition::new(model, spec, &problem.u_distribution)?;
    let proposal = maximize_acquisition(&acq, options, rng)?;
    let mut point = if spec.kind == AcquisitionKind::Iehvi {
        let u = problem.u_distribution.draw(rng);
        JointPoint::new(proposal.point, u)
    } else {
        JointPoint::split(&proposal.point, problem.nx())
    };
    problem.x_bounds.clamp(&mut point.x);
    problem.u_bounds.clamp(&mut point.u);
    Ok((point, Some(proposal.value), proposal.fallback))
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    let mut line = values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn doe_header(nx: usize, nu: usize, d: usize) -> String {
    let names: Vec<String> = (1..=nx)
        .map(|i| format!("x{i}"))
        .chain((1..=nu).map(|i| format!("u{i}")))
        .chain((1..=d).map(|i| format!("f{i}")))
        .collect();
    format!("{}\n", names.join(","))
}

fn doe_line(p: &JointPoint, y: &ObjectiveVector) -> String {
    fmt_row(p.x.iter().chain(&p.u).chain(y.iter()).copied())
}

/// Writes a whole design as `x1..,u1..,f1..` CSV.
pub fn write_doe(path: &Path, doe: &DesignOfExperiments) -> Result<()> {
    let mut text = doe_header(doe.nx(), doe.nu(), doe.n_objectives());
    for (p, y) in doe.inputs().iter().zip(doe.outputs()) {
        text.push_str(&doe_line(p, y));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a design CSV; column roles come from the header prefixes.
pub fn read_doe(path: &Path) -> Result<DesignOfExperiments> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let count = |prefix: char| header.iter().filter(|h| h.starts_with(prefix)).count();
    let (nx, nu, d) = (count('x'), count('u'), count('f'));
    if nx + nu + d != header.len() || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "unrecognized design header in {}",
            path.display()
        )));
    }
    let mut doe = DesignOfExperiments::default();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(Error::InvalidArgument(format!("short row in {}", path.display())));
        }
        doe.push(
            JointPoint::new(vals[..nx].to_vec(), vals[nx..nx + nu].to_vec()),
            ObjectiveVector::new(vals[nx + nu..].to_vec())?,
        )?;
    }
    Ok(doe)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn read_history(dir: &Path) -> Result<Vec<HistoryRecord>> {
    read_jsonl(&dir.join(HISTORY_FILE))
}

fn append(path: &Path, text: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Loads the final model of a finished run directory.
pub fn load_model(dir: &Path) -> Result<(GpSurrogate, DesignOfExperiments)> {
    let model_path = dir.join(MODEL_FILE);
    if !model_path.exists() {
        return Err(Error::MissingArtifact(model_path));
    }
    let snapshot: GpSnapshot = serde_json::from_str(&fs::read_to_string(&model_path)?)?;
    let doe_path = dir.join(&snapshot.training_data);
    if !doe_path.exists() {
        return Err(Error::MissingArtifact(doe_path));
    }
    let mut doe = read_doe(&doe_path)?;
    doe.truncate(snapshot.n_train);
    Ok((GpSurrogate::from_snapshot(&snapshot, &doe)?, doe))
}

/// Reads the `config.json` snapshot of a run directory.
pub fn load_config(dir: &Path) -> Result<RunConfig> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    RunConfig::from_json(&fs::read_to_string(path)?)
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub doe: DesignOfExperiments,
    pub model: GpSurrogate,
    pub history: Vec<HistoryRecord>,
}

/// Runs the loop for the configured problem, writing to `dir`.
pub fn run(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let problem = config.resolve_problem()?;
    run_problem(config, &problem, dir)
}

fn fit_config(base: &FitConfig, restarts: usize, seed: u64) -> FitConfig {
    FitConfig {
        restarts,
        seed,
        ..base.clone()
    }
}

fn warm_from(snapshots: &[ObjectiveSnapshot]) -> Vec<Hyperparameters> {
    snapshots
        .iter()
        .map(|s| Hyperparameters {
            lengthscales: s.lengthscales.clone(),
            signal_variance: s.signal_variance,
        })
        .collect()
}

/// Runs the loop on an explicit problem. An existing directory holding the same
/// configuration is resumed; a different configuration is refused.
pub fn run_problem(config: &RunConfig, problem: &ProblemDefinition, dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let cfg = config.resolved(problem);
    let n0 = cfg.n_initial.expect("resolved");
    let seeds = cfg.seeds();
    fs::create_dir_all(dir)?;

    let config_path = dir.join(CONFIG_FILE);
    if config_path.exists() {
        let previous = load_config(dir)?;
        if previous.comparable() != cfg.comparable() {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration",
                dir.display()
            )));
        }
    } else {
        fs::write(&config_path, serde_json::to_string_pretty(&cfg)?)?;
        let meta = RunMeta {
            problem: problem.name.clone(),
            nx: problem.nx(),
            nu: problem.nu(),
            n_objectives: problem.n_objectives,
            x_bounds: problem.x_bounds.clone(),
            u_bounds: problem.u_bounds.clone(),
            u_distribution: problem.u_distribution.clone(),
            truncation_acceptance: problem.u_distribution.acceptance_probability(),
        };
        fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    }

    let doe_path = dir.join(DOE_FILE);
    let history_path = dir.join(HISTORY_FILE);
    let timings_path = dir.join(TIMINGS_FILE);
    let mut doe = if doe_path.exists() {
        read_doe(&doe_path)?
    } else {
        fs::write(&doe_path, doe_header(problem.nx(), problem.nu(), problem.n_objectives))?;
        DesignOfExperiments::default()
    };
    let mut history: Vec<HistoryRecord> = read_history(dir)?;
    let mut timings: Vec<TimingRecord> = read_jsonl(&timings_path)?;

    // Drop anything written after the last consistent state.
    let n_added = doe.len().saturating_sub(n0).min(history.len());
    let keep = if doe.len() < n0 { doe.len() } else { n0 + n_added };
    history.truncate(if doe.len() < n0 { 0 } else { n_added });
    timings.retain(|t| t.iteration < history.len());
    if keep != doe.len() || history.len() != read_history(dir)?.len() {
        doe.truncate(keep);
        write_doe(&doe_path, &doe)?;
        write_jsonl(&history_path, &history)?;
        write_jsonl(&timings_path, &timings)?;
    }

    let design = initial_design_points(problem, n0, seeds.design)?;
    for p in design.into_iter().skip(doe.len()) {
        let y = problem.evaluate_checked(&p.x, &p.u)?;
        append(&doe_path, &doe_line(&p, &y))?;
        doe.push(p, y)?;
    }

    let kind = cfg.acquisition.kind;
    let fixed_u = if kind == AcquisitionKind::Iehvi && cfg.acquisition.crn {
        Some(
            problem
                .u_distribution
                .sample(cfg.acquisition.n_u, seeds.u_samples, true)?,
        )
    } else {
        None
    };
    let mut previous: Option<Vec<Hyperparameters>> = history
        .iter()
        .rev()
        .find_map(|h| h.hyperparameters.as_ref())
        .map(|s| warm_from(s));

    for it in history.len()..cfg.budget {
        let t0 = Instant::now();
        let model = if kind == AcquisitionKind::Random {
            None
        } else {
            let restarts = if previous.is_some() {
                cfg.refit_restarts
            } else {
                cfg.fit.restarts
            };
            let fc = fit_config(&cfg.fit, restarts, seed_for(seeds.optimizer, STREAM_FIT, it));
            Some(GpSurrogate::fit(
                &doe,
                &problem.joint_bounds(),
                &fc,
                previous.as_deref(),
            )?)
        };
        let fit_seconds = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let pareto_seed = if cfg.acquisition.resample_pareto {
            seed_for(seeds.optimizer, STREAM_PARETO, it)
        } else {
            seed_for(seeds.optimizer, STREAM_PARETO, 0)
        };
        let spec = AcquisitionSpec {
            kind,
            beta: cfg.acquisition.beta,
            pareto_candidates: if kind == AcquisitionKind::Random {
                CandidateSet::new(Vec::new(), problem.x_bounds.clone())?
            } else {
                CandidateSet::new(
                    sobol_in(&problem.x_bounds, cfg.acquisition.n_pareto, pareto_seed)?,
                    problem.x_bounds.clone(),
                )?
            },
            u_samples: match kind {
                AcquisitionKind::Iehvi => Some(match &fixed_u {
                    Some(s) => s.clone(),
                    None => problem.u_distribution.sample(
                        cfg.acquisition.n_u,
                        seed_for(seeds.u_samples, STREAM_U, it),
                        false,
                    )?,
                }),
                _ => None,
            },
            ref_policy: cfg.acquisition.reference.clone(),
        };
        let mut rng = rng_from_seed(seed_for(seeds.optimizer, STREAM_OPTIMIZER, it));
        let (point, value, fallback) = select_next(model.as_ref(), &spec, problem, &cfg.optimizer, &mut rng)?;
        let select_seconds = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let y = problem.evaluate_checked(&point.x, &point.u)?;
        let evaluate_seconds = t2.elapsed().as_secs_f64();

        let snapshots = model.as_ref().map(|m| m.objective_snapshots());
        let record = HistoryRecord {
            iteration: it,
            x: point.x.clone(),
            u: point.u.clone(),
            f: y.to_vec(),
            acquisition_value: value,
            fallback,
            hyperparameters: snapshots.clone(),
        };
        append(&doe_path, &doe_line(&point, &y))?;
        append(&history_path, &format!("{}\n", serde_json::to_string(&record)?))?;
        let timing = TimingRecord {
            iteration: it,
            fit_seconds,
            select_seconds,
            evaluate_seconds,
        };
        append(&timings_path, &format!("{}\n", serde_json::to_string(&timing)?))?;
        doe.push(point, y)?;
        history.push(record);
        if let Some(s) = snapshots {
            previous = Some(warm_from(&s));
        }
    }

    let restarts = if previous.is_some() {
        cfg.refit_restarts
    } else {
        cfg.fit.restarts
    };
    let fc = fit_config(&cfg.fit, restarts, seed_for(seeds.optimizer, STREAM_FINAL_FIT, 0));
    let model = GpSurrogate::fit(&doe, &problem.joint_bounds(), &fc, previous.as_deref())?;
    fs::write(
        dir.join(MODEL_FILE),
        serde_json::to_string_pretty(&model.snapshot(DOE_FILE))?,
    )?;

    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        doe,
        model,
        history,
    })
}
