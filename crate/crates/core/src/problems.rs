//! Analytic benchmark problems, their catalog, and external evaluators.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::pareto::ObjectiveVector;
use crate::uncertainty::{Evaluator, UDistribution};

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

fn f2x2_x_bounds() -> Bounds {
    Bounds::new(vec![0.0, 1.0], vec![1.0, 2.0]).expect("static box")
}

fn f2x2_u_bounds() -> Bounds {
    Bounds::new(vec![2.0, 3.0], vec![3.0, 4.0]).expect("static box")
}

fn f2x2_raw(x: &[f64], u: &[f64]) -> [f64; 2] {
    let (x1, x2, u1, u2) = (x[0], x[1], u[0], u[1]);
    [
        (x1 - u1 + 2.0).powi(2) + (x2 - u2 + 2.0).powi(2) + 5.0 * u1,
        (x1 - x2 + 1.0).powi(2) + (x1 * x2 - u1 + 1.5).powi(2) + 5.0 * u2,
    ]
}

/// Two-objective test function with two control and two uncertain inputs.
pub fn f2x2(x: &[f64], u: &[f64]) -> Result<ObjectiveVector> {
    check_len(x, 2)?;
    check_len(u, 2)?;
    f2x2_x_bounds().check(x)?;
    f2x2_u_bounds().check(u)?;
    ObjectiveVector::new(f2x2_raw(x, u).to_vec())
}

/// Closed-form mean of [`f2x2`] under uniform `U`.
pub fn f2x2_mean(x: &[f64]) -> Result<ObjectiveVector> {
    check_len(x, 2)?;
    let (x1, x2) = (x[0], x[1]);
    ObjectiveVector::new(vec![
        x1 * (x1 - 1.0) + x2 * (x2 - 3.0) + 91.0 / 6.0,
        x1 * x1 * x2 * x2 + x1 * x1 - 4.0 * x1 * x2 + 2.0 * x1 + x2 * x2 - 2.0 * x2 + 235.0 / 12.0,
    ])
}

/// Two-objective test function with five control and five uncertain inputs on `[0,1]⁵`.
pub fn f5x5(x: &[f64], u: &[f64]) -> Result<ObjectiveVector> {
    check_len(x, 5)?;
    check_len(u, 5)?;
    let unit = Bounds::unit(5);
    unit.check(x)?;
    unit.check(u)?;
    let s: f64 = x.iter().sum();
    let common = s + u[0] + u[1] + u[2] - 5.0;
    ObjectiveVector::new(vec![(common - u[3] + u[4]).powi(2), (common + u[3] - u[4]).powi(2)])
}

type MeanFn = fn(&[f64]) -> Result<ObjectiveVector>;

/// A named problem: boxes, objective count, evaluator and law of `U`.
#[derive(Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub x_bounds: Bounds,
    pub u_bounds: Bounds,
    pub n_objectives: usize,
    pub u_distribution: UDistribution,
    evaluator: Arc<dyn Evaluator + Send>,
    mean: Option<MeanFn>,
}

impl std::fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("name", &self.name)
            .field("x_bounds", &self.x_bounds)
            .field("u_bounds", &self.u_bounds)
            .field("n_objectives", &self.n_objectives)
            .field("u_distribution", &self.u_distribution)
            .finish_non_exhaustive()
    }
}

impl ProblemDefinition {
    pub fn new(
        name: impl Into<String>,
        x_bounds: Bounds,
        u_bounds: Bounds,
        n_objectives: usize,
        u_distribution: UDistribution,
        evaluator: Arc<dyn Evaluator + Send>,
    ) -> Result<Self> {
        if n_objectives < 2 {
            return Err(Error::InvalidArgument("a problem needs at least two objectives".into()));
        }
        if u_distribution.dim() != u_bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: u_bounds.dim(),
                got: u_distribution.dim(),
            });
        }
        u_distribution.validate()?;
        Ok(Self {
            name: name.into(),
            x_bounds,
            u_bounds,
            n_objectives,
            u_distribution,
            evaluator,
            mean: None,
        })
    }

    fn with_mean(mut self, mean: MeanFn) -> Self {
        self.mean = Some(mean);
        self
    }

    pub fn nx(&self) -> usize {
        self.x_bounds.dim()
    }

    pub fn nu(&self) -> usize {
        self.u_bounds.dim()
    }

    pub fn joint_bounds(&self) -> Bounds {
        self.x_bounds.product(&self.u_bounds)
    }

    /// Closed-form mean objective, when known.
    pub fn mean_objective(&self, x: &[f64]) -> Option<Result<ObjectiveVector>> {
        self.mean.map(|m| m(x))
    }

    pub fn has_mean(&self) -> bool {
        self.mean.is_some()
    }

    /// Evaluates with strict box and finiteness checks.
    pub fn evaluate_checked(&self, x: &[f64], u: &[f64]) -> Result<ObjectiveVector> {
        check_len(x, self.nx())?;
        check_len(u, self.nu())?;
        self.x_bounds.check(x)?;
        self.u_bounds.check(u)?;
        let y = self.evaluator.evaluate(x, u)?;
        check_len(&y, self.n_objectives)?;
        ObjectiveVector::new(y)
    }

    /// Same problem with a different law of `U`.
    pub fn with_distribution(mut self, name: impl Into<String>, dist: UDistribution) -> Result<Self> {
        if dist.dim() != self.nu() {
            return Err(Error::DimensionMismatch {
                expected: self.nu(),
                got: dist.dim(),
            });
        }
        dist.validate()?;
        self.name = name.into();
        self.u_distribution = dist;
        // The closed-form mean assumes the original law.
        self.mean = None;
        Ok(self)
    }
}

impl Evaluator for ProblemDefinition {
    fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.evaluator.evaluate(x, u)
    }
}

fn wrap(f: fn(&[f64], &[f64]) -> Result<ObjectiveVector>) -> Arc<dyn Evaluator + Send> {
    Arc::new(move |x: &[f64], u: &[f64]| f(x, u).map(ObjectiveVector::into_inner))
}

/// Names accepted by [`problem`].
pub const CATALOG_NAMES: [&str; 3] = ["4d", "10d", "10d-bis"];

/// All built-in problems.
pub fn problem_catalog() -> Vec<ProblemDefinition> {
    let four = ProblemDefinition::new(
        "4d",
        f2x2_x_bounds(),
        f2x2_u_bounds(),
        2,
        UDistribution::uniform(f2x2_u_bounds()),
        wrap(f2x2),
    )
    .expect("static problem")
    .with_mean(f2x2_mean);
    let ten = ProblemDefinition::new(
        "10d",
        Bounds::unit(5),
        Bounds::unit(5),
        2,
        UDistribution::uniform(Bounds::unit(5)),
        wrap(f5x5),
    )
    .expect("static problem");
    let gaussian = UDistribution::diagonal_gaussian(vec![0.5; 5], vec![0.1; 5], Bounds::unit(5)).expect("static law");
    let ten_bis = ten
        .clone()
        .with_distribution("10d-bis", gaussian)
        .expect("static problem");
    vec![four, ten, ten_bis]
}

/// Looks a catalog problem up by name.
pub fn problem(name: &str) -> Result<ProblemDefinition> {
    problem_catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownProblem {
            name: name.to_string(),
            available: CATALOG_NAMES.join(", "),
        })
}

/// Description of a user problem backed by an external executable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalProblemSpec {
    pub name: String,
    pub command: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    pub x_bounds: Bounds,
    pub u_bounds: Bounds,
    pub n_objectives: usize,
    pub u_distribution: Option<UDistribution>,
}

impl ExternalProblemSpec {
    pub fn build(&self) -> Result<ProblemDefinition> {
        let evaluator = ExternalEvaluator::spawn(&self.command, &self.args)?;
        let dist = self
            .u_distribution
            .clone()
            .unwrap_or_else(|| UDistribution::uniform(self.u_bounds.clone()));
        ProblemDefinition::new(
            self.name.clone(),
            self.x_bounds.clone(),
            self.u_bounds.clone(),
            self.n_objectives,
            dist,
            Arc::new(evaluator),
        )
    }
}

#[derive(Serialize)]
struct Request<'a> {
    x: &'a [f64],
    u: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    f: Vec<f64>,
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A long-lived child process answering one JSON line per evaluation.
pub struct ExternalEvaluator {
    io: Mutex<ChildIo>,
}

impl ExternalEvaluator {
    pub fn spawn(command: &std::path::Path, args: &[String]) -> Result<Self> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Evaluator(format!("cannot start {}: {e}", command.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            io: Mutex::new(ChildIo { child, stdin, stdout }),
        })
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut io = self
            .io
            .lock()
            .map_err(|_| Error::Evaluator("evaluator lock poisoned".into()))?;
        let mut line = serde_json::to_string(&Request { x, u })?;
        line.push('\n');
        io.stdin
            .write_all(line.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| Error::Evaluator(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = io
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::Evaluator(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(Error::Evaluator("evaluator closed its output".into()));
        }
        let resp: Response = serde_json::from_str(reply.trim())
            .map_err(|e| Error::Evaluator(format!("bad reply `{}`: {e}", reply.trim())))?;
        Ok(resp.f)
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}
