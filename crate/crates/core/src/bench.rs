//! Replicated comparisons of acquisition kinds and run evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::acquisition::AcquisitionKind;
use crate::engine::{
    load_config, load_model, run_problem, AcquisitionConfig, OptimizerConfig, RunConfig, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::gp::GpSurrogate;
use crate::metrics::{delta_distribution, quantile, MetricReport, ReportProvenance};
use crate::pareto::CandidateSet;
use crate::problems::{problem, ProblemDefinition};
use crate::sampling::{derive_seed, CandidateSpec};

pub const SUMMARY_FILE: &str = "bench-summary.json";

// Streams of the evaluation seeds.
const STREAM_EVAL_U: u64 = 101;
const STREAM_EVAL_X: u64 = 102;

fn default_n_u_eval() -> usize {
    512
}

fn default_n_test() -> usize {
    5000
}

/// Evaluation protocol: `n_u` samples of `U` and a Sobol test set of `n_test` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSpec {
    pub n_u: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl EvaluationSpec {
    pub fn new(n_u: usize, n_test: usize, seed: u64) -> Self {
        Self { n_u, n_test, seed }
    }

    pub fn x_test_spec(&self) -> CandidateSpec {
        CandidateSpec::Sobol {
            n: self.n_test,
            seed: derive_seed(self.seed, STREAM_EVAL_X),
        }
    }

    pub fn u_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_EVAL_U)
    }
}

/// Δ₂ distribution and coverage L2 of a fitted model against the true problem.
pub fn evaluate_model(
    model: &GpSurrogate,
    problem: &ProblemDefinition,
    eval: &EvaluationSpec,
    run_id: &str,
    x_pareto: serde_json::Value,
) -> Result<MetricReport> {
    if eval.n_u == 0 || eval.n_test == 0 {
        return Err(Error::InvalidArgument(
            "evaluation needs positive n_u and n_test".into(),
        ));
    }
    let u = problem.u_distribution.sample(eval.n_u, eval.u_seed(), true)?;
    let spec = eval.x_test_spec();
    let x_test = CandidateSet::new(spec.generate(&problem.x_bounds)?, problem.x_bounds.clone())?;
    let provenance = ReportProvenance {
        run_id: run_id.to_string(),
        n_u: eval.n_u,
        u_seed: eval.u_seed(),
        x_test: serde_json::to_value(&spec)?,
        x_pareto,
        p: 2.0,
    };
    delta_distribution(model, problem, &u, &x_test, 2.0, provenance)
}

fn x_pareto_of(cfg: &RunConfig) -> serde_json::Value {
    if cfg.acquisition.kind == AcquisitionKind::Random {
        serde_json::Value::Null
    } else {
        json!({
            "kind": "sobol",
            "n": cfg.acquisition.n_pareto,
            "resampled": cfg.acquisition.resample_pareto,
            "seed_base": cfg.seeds().optimizer,
        })
    }
}

/// Evaluates the final model stored in a run directory.
pub fn evaluate_run(dir: &Path, eval: &EvaluationSpec) -> Result<MetricReport> {
    let cfg = load_config(dir)?;
    let problem = cfg.resolve_problem()?;
    let (model, _) = load_model(dir)?;
    let run_id = dir
        .file_name()
        .map_or_else(|| dir.display().to_string(), |s| s.to_string_lossy().into_owned());
    evaluate_model(&model, &problem, eval, &run_id, x_pareto_of(&cfg))
}

/// Writes `metrics.json` and `deltas.csv` into `dir`.
pub fn write_report(report: &MetricReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(report)?)?;
    report.write_deltas_csv(fs::File::create(dir.join("deltas.csv"))?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub schema_version: u32,
    pub problem: String,
    pub kinds: Vec<AcquisitionKind>,
    pub replications: usize,
    #[serde(default)]
    pub n_initial: Option<usize>,
    pub budget: usize,
    /// Shared settings; `kind` is replaced per run.
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_n_u_eval")]
    pub n_u_eval: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

impl BenchSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: BenchSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("kinds: must not be empty".into()));
        }
        if self.n_u_eval == 0 || self.n_test == 0 {
            return Err(Error::Config("n_u_eval and n_test: must be positive".into()));
        }
        Ok(())
    }

    /// Replications share their seed across kinds, so each kind starts from the same design.
    pub fn replication_seed(&self, replication: usize) -> u64 {
        derive_seed(self.seed, replication as u64)
    }

    pub fn run_config(&self, kind: AcquisitionKind, replication: usize) -> RunConfig {
        let mut cfg = RunConfig::new(self.problem.clone(), self.budget);
        cfg.n_initial = self.n_initial;
        cfg.acquisition = AcquisitionConfig {
            kind,
            ..self.acquisition.clone()
        };
        cfg.optimizer = self.optimizer.clone();
        cfg.seed = self.replication_seed(replication);
        cfg
    }

    pub fn evaluation(&self) -> EvaluationSpec {
        EvaluationSpec::new(self.n_u_eval, self.n_test, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub kind: AcquisitionKind,
    pub replication: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub median_delta: Option<f64>,
    pub coverage_l2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: AcquisitionKind,
    pub complete: bool,
    pub runs: usize,
    /// Per-replication medians of Δ₂ over the `U` samples.
    pub run_medians: Vec<f64>,
    pub median_delta: Option<f64>,
    pub median_coverage_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub spec: BenchSpec,
    pub runs: Vec<BenchRun>,
    pub kinds: Vec<KindSummary>,
}

impl BenchSummary {
    pub fn kind(&self, kind: AcquisitionKind) -> Option<&KindSummary> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(quantile(&s, 0.5))
}

/// Runs every replication of every kind in `out`, then writes the summary.
///
/// `progress` is called after each run.
pub fn run_bench(spec: &BenchSpec, out: &Path, mut progress: impl FnMut(&BenchRun)) -> Result<BenchSummary> {
    spec.validate()?;
    let problem = problem(&spec.problem)?;
    let eval = spec.evaluation();
    fs::create_dir_all(out)?;
    let mut runs = Vec::new();
    for replication in 0..spec.replications {
        for &kind in &spec.kinds {
            let cfg = spec.run_config(kind, replication);
            let dir = out.join(format!("{}-rep{}", kind.name(), replication));
            let result = run_problem(&cfg, &problem, &dir).and_then(|outcome| {
                let resolved = cfg.resolved(&problem);
                evaluate_model(
                    &outcome.model,
                    &problem,
                    &eval,
                    &dir.display().to_string(),
                    x_pareto_of(&resolved),
                )
            });
            let record = match result {
                Ok(report) => {
                    write_report(&report, &dir)?;
                    BenchRun {
                        kind,
                        replication,
                        seed: cfg.seed,
                        dir: dir.clone(),
                        median_delta: Some(report.summary.median),
                        coverage_l2: Some(report.coverage_l2),
                        error: None,
                    }
                }
                Err(e) => BenchRun {
                    kind,
                    replication,
                    seed: cfg.seed,
                    dir: dir.clone(),
                    median_delta: None,
                    coverage_l2: None,
                    error: Some(e.to_string()),
                },
            };
            progress(&record);
            runs.push(record);
        }
    }
    let kinds = spec
        .kinds
        .iter()
        .map(|&kind| {
            let mine: Vec<&BenchRun> = runs.iter().filter(|r| r.kind == kind).collect();
            let run_medians: Vec<f64> = mine.iter().filter_map(|r| r.median_delta).collect();
            let l2: Vec<f64> = mine.iter().filter_map(|r| r.coverage_l2).collect();
            KindSummary {
                kind,
                complete: mine.iter().all(|r| r.error.is_none()),
                runs: mine.len(),
                median_delta: median(&run_medians),
                median_coverage_l2: median(&l2),
                run_medians,
            }
        })
        .collect();
    let summary = BenchSummary {
        spec: spec.clone(),
        runs,
        kinds,
    };
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
