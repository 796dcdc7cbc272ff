//! Independent per-objective Gaussian-process regression on the joint space `X × U`.
//!
//! Each objective gets a zero-mean GP with an ARD Matérn 5/2 kernel. Inputs are
//! mapped to the unit cube of the joint box and outputs are standardized per
//! objective before fitting; predictions are returned in the original units.
//! Hyperparameters (log-lengthscales and log signal variance) maximize the log
//! marginal likelihood under box constraints, using multistart L-BFGS on a
//! sigmoid reparameterization of the box.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::optimize::lbfgs_minimize;
use crate::pareto::ObjectiveVector;
use crate::sampling::{derive_seed, rng_from_seed};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn 5/2 covariance at distance `r`.
pub fn matern52(r: f64, lengthscale: f64, signal_variance: f64) -> Result<f64> {
    if !(lengthscale > 0.0) || !(signal_variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Matérn 5/2 needs positive lengthscale and variance, got {lengthscale} and {signal_variance}"
        )));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative distance {r}")));
    }
    Ok(signal_variance * matern52_unit(r / lengthscale))
}

#[inline]
fn matern52_unit(s: f64) -> f64 {
    let a = SQRT5 * s;
    (1.0 + a + a * a / 3.0) * (-a).exp()
}

/// Stationary kernel family. Only Matérn 5/2 is provided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Matern52,
}

impl KernelKind {
    /// Correlation at scaled distance `s = ‖Δ/ℓ‖`.
    #[inline]
    pub fn correlation(self, s: f64) -> f64 {
        match self {
            KernelKind::Matern52 => matern52_unit(s),
        }
    }

    /// `-(1/s) dk/ds`, so that `dk/dlog ℓ_k = that · (Δ_k/ℓ_k)²`.
    #[inline]
    fn lengthscale_factor(self, s: f64) -> f64 {
        match self {
            KernelKind::Matern52 => {
                let a = SQRT5 * s;
                5.0 / 3.0 * (1.0 + a) * (-a).exp()
            }
        }
    }
}

/// A point `(x, u)` of the joint space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl JointPoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Self {
        Self { x, u }
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.u);
        z
    }

    pub fn split(z: &[f64], nx: usize) -> Self {
        Self {
            x: z[..nx].to_vec(),
            u: z[nx..].to_vec(),
        }
    }
}

/// Evaluated input/output pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DesignOfExperiments {
    inputs: Vec<JointPoint>,
    outputs: Vec<ObjectiveVector>,
}

impl DesignOfExperiments {
    pub fn new(inputs: Vec<JointPoint>, outputs: Vec<ObjectiveVector>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        let mut doe = Self::default();
        for (i, o) in inputs.into_iter().zip(outputs) {
            doe.push(i, o)?;
        }
        Ok(doe)
    }

    pub fn push(&mut self, input: JointPoint, output: ObjectiveVector) -> Result<()> {
        if let (Some(i0), Some(o0)) = (self.inputs.first(), self.outputs.first()) {
            if input.x.len() != i0.x.len() || input.u.len() != i0.u.len() {
                return Err(Error::DimensionMismatch {
                    expected: i0.x.len() + i0.u.len(),
                    got: input.x.len() + input.u.len(),
                });
            }
            if output.dim() != o0.dim() {
                return Err(Error::DimensionMismatch {
                    expected: o0.dim(),
                    got: output.dim(),
                });
            }
        }
        if input.x.iter().chain(&input.u).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite input {input:?}")));
        }
        self.inputs.push(input);
        self.outputs.push(output);
        Ok(())
    }

    pub fn inputs(&self) -> &[JointPoint] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[ObjectiveVector] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.inputs.first().map_or(0, |p| p.x.len())
    }

    pub fn nu(&self) -> usize {
        self.inputs.first().map_or(0, |p| p.u.len())
    }

    pub fn n_objectives(&self) -> usize {
        self.outputs.first().map_or(0, |o| o.dim())
    }

    /// Keeps the first `n` rows.
    pub fn truncate(&mut self, n: usize) {
        self.inputs.truncate(n);
        self.outputs.truncate(n);
    }
}

/// Kernel hyperparameters of one objective, in normalized/standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl Hyperparameters {
    fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 1;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
        }
    }
}

/// Settings of [`GpSurrogate::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub kernel: KernelKind,
    /// Number of optimizer starts (including the warm start, when given).
    pub restarts: usize,
    pub max_iters: usize,
    pub initial_jitter: f64,
    pub max_jitter: f64,
    pub lengthscale_bounds: (f64, f64),
    pub signal_variance_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Matern52,
            restarts: 8,
            max_iters: 100,
            initial_jitter: 1e-8,
            max_jitter: 1e-2,
            lengthscale_bounds: (1e-2, 1e2),
            signal_variance_bounds: (1e-3, 1e3),
            seed: 0,
        }
    }
}

impl FitConfig {
    fn log_bounds(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.lengthscale_bounds.0.ln(); dim];
        let mut hi = vec![self.lengthscale_bounds.1.ln(); dim];
        lo.push(self.signal_variance_bounds.0.ln());
        hi.push(self.signal_variance_bounds.1.ln());
        (lo, hi)
    }
}

/// Log marginal likelihood of one standardized objective.
pub struct MarginalLikelihood<'a> {
    kernel: KernelKind,
    /// Unit-cube inputs, row per design point.
    inputs: &'a [Vec<f64>],
    targets: &'a DVector<f64>,
}

impl<'a> MarginalLikelihood<'a> {
    pub fn new(kernel: KernelKind, inputs: &'a [Vec<f64>], targets: &'a DVector<f64>) -> Self {
        Self {
            kernel,
            inputs,
            targets,
        }
    }

    fn covariance(&self, hyper: &Hyperparameters, jitter: f64) -> DMatrix<f64> {
        covariance_matrix(self.kernel, self.inputs, hyper, jitter)
    }

    /// Log marginal likelihood at log-parameters `theta = (log ℓ_1.., log σ²_f)`
    /// and its gradient with respect to `theta`, for a fixed jitter.
    /// Returns `None` if the kernel matrix is not positive definite.
    pub fn value_and_gradient(&self, theta: &[f64], jitter: f64) -> Option<(f64, Vec<f64>)> {
        let n = self.inputs.len();
        let dim = theta.len() - 1;
        let hyper = Hyperparameters::from_log(theta);
        let k = self.covariance(&hyper, jitter);
        let chol = Cholesky::new(k)?;
        let alpha = chol.solve(self.targets);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let value =
            -0.5 * self.targets.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        // W = ααᵀ − K⁻¹; dL/dθ = ½ tr(W ∂K/∂θ).
        let kinv = chol.inverse();
        let mut grad = vec![0.0; dim + 1];
        let sf2 = hyper.signal_variance;
        let inv_l: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut scaled = vec![0.0; dim];
        for i in 0..n {
            let wii = alpha[i] * alpha[i] - kinv[(i, i)];
            grad[dim] += 0.5 * wii * sf2;
            for j in 0..i {
                let w = alpha[i] * alpha[j] - kinv[(i, j)];
                let mut s2 = 0.0;
                for k in 0..dim {
                    let t = (self.inputs[i][k] - self.inputs[j][k]) * inv_l[k];
                    scaled[k] = t * t;
                    s2 += scaled[k];
                }
                let s = s2.sqrt();
                // Off-diagonal terms appear twice in the trace.
                grad[dim] += w * sf2 * self.kernel.correlation(s);
                let base = w * sf2 * self.kernel.lengthscale_factor(s);
                for k in 0..dim {
                    grad[k] += base * scaled[k];
                }
            }
        }
        Some((value, grad))
    }

    /// As [`Self::value_and_gradient`], escalating the jitter ×10 from `initial`
    /// up to `max` until the factorization succeeds.
    pub fn value_and_gradient_escalating(&self, theta: &[f64], initial: f64, max: f64) -> Option<(f64, Vec<f64>, f64)> {
        let mut jitter = initial;
        loop {
            if let Some((v, g)) = self.value_and_gradient(theta, jitter) {
                return Some((v, g, jitter));
            }
            jitter *= 10.0;
            if jitter > max * (1.0 + 1e-9) {
                return None;
            }
        }
    }
}

fn covariance_matrix(kernel: KernelKind, inputs: &[Vec<f64>], hyper: &Hyperparameters, jitter: f64) -> DMatrix<f64> {
    let n = inputs.len();
    let inv_l: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.signal_variance + jitter;
        for j in 0..i {
            let v = hyper.signal_variance * kernel.correlation(scaled_distance(&inputs[i], &inputs[j], &inv_l));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[inline]
fn scaled_distance(a: &[f64], b: &[f64], inv_l: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_l)
        .map(|((x, y), il)| {
            let t = (x - y) * il;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Fitted single-objective GP in standardized units.
#[derive(Debug, Clone)]
struct ObjectiveModel {
    hyper: Hyperparameters,
    inv_lengthscales: Vec<f64>,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    log_likelihood: f64,
}

/// Output standardization constants of one objective.
fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = var.sqrt();
    if scale > 1e-12 * (1.0 + mean.abs()) {
        (mean, scale)
    } else {
        (mean, 1.0)
    }
}

/// Per-objective hyperparameter record, as stored in snapshots and history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSnapshot {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub jitter: f64,
    pub y_mean: f64,
    pub y_scale: f64,
    pub log_likelihood: f64,
}

/// JSON-serializable model description; training data is referenced, not embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub version: u32,
    pub kernel: KernelKind,
    pub input_bounds: Bounds,
    pub nx: usize,
    pub nu: usize,
    pub n_train: usize,
    pub training_data: String,
    pub fit: FitConfig,
    pub objectives: Vec<ObjectiveSnapshot>,
}

/// Independent GP posteriors, one per objective, conditioned on a design.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    kernel: KernelKind,
    input_bounds: Bounds,
    nx: usize,
    nu: usize,
    train_unit: Vec<Vec<f64>>,
    objectives: Vec<ObjectiveModel>,
    fit: FitConfig,
}

/// Standardized predictions: per point, per objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub means: Vec<Vec<f64>>,
    pub stddevs: Vec<Vec<f64>>,
}

impl GpSurrogate {
    /// Fits all objectives by maximizing the marginal likelihood.
    ///
    /// `warm_start`, when given, holds one hyperparameter set per objective used
    /// as the first optimizer start; the remaining `restarts − 1` starts are random.
    pub fn fit(
        doe: &DesignOfExperiments,
        input_bounds: &Bounds,
        config: &FitConfig,
        warm_start: Option<&[Hyperparameters]>,
    ) -> Result<Self> {
        let (train_unit, targets) = Self::prepare(doe, input_bounds)?;
        let dim = input_bounds.dim();
        let objectives = (0..targets.len())
            .into_par_iter()
            .map(|obj| {
                let (y_mean, y_scale) = standardize(&targets[obj]);
                let y = DVector::from_iterator(targets[obj].len(), targets[obj].iter().map(|v| (v - y_mean) / y_scale));
                let constant = targets[obj].iter().all(|v| *v == targets[obj][0]);
                let hyper = if constant {
                    Hyperparameters {
                        lengthscales: vec![0.5; dim],
                        signal_variance: 1.0,
                    }
                } else {
                    let warm = warm_start.and_then(|w| w.get(obj));
                    optimize_hyperparameters(config, &train_unit, &y, warm, derive_seed(config.seed, obj as u64))
                        .ok_or(Error::Factorization {
                            objective: obj,
                            jitter: config.max_jitter,
                        })?
                };
                factorize(config, &train_unit, y, hyper, y_mean, y_scale, obj)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel: config.kernel,
            input_bounds: input_bounds.clone(),
            nx: doe.nx(),
            nu: doe.nu(),
            train_unit,
            objectives,
            fit: config.clone(),
        })
    }

    /// Conditions on `doe` with fixed hyperparameters (one set per objective).
    pub fn with_hyperparameters(
        doe: &DesignOfExperiments,
        input_bounds: &Bounds,
        config: &FitConfig,
        hypers: &[Hyperparameters],
    ) -> Result<Self> {
        let (train_unit, targets) = Self::prepare(doe, input_bounds)?;
        if hypers.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                got: hypers.len(),
            });
        }
        let objectives = targets
            .iter()
            .zip(hypers)
            .enumerate()
            .map(|(obj, (t, h))| {
                let (y_mean, y_scale) = standardize(t);
                let y = DVector::from_iterator(t.len(), t.iter().map(|v| (v - y_mean) / y_scale));
                factorize(config, &train_unit, y, h.clone(), y_mean, y_scale, obj)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel: config.kernel,
            input_bounds: input_bounds.clone(),
            nx: doe.nx(),
            nu: doe.nu(),
            train_unit,
            objectives,
            fit: config.clone(),
        })
    }

    /// Rebuilds a model from a snapshot and the design it references.
    pub fn from_snapshot(snapshot: &GpSnapshot, doe: &DesignOfExperiments) -> Result<Self> {
        if doe.len() != snapshot.n_train {
            return Err(Error::InvalidArgument(format!(
                "snapshot was fitted on {} points, design has {}",
                snapshot.n_train,
                doe.len()
            )));
        }
        let (train_unit, targets) = Self::prepare(doe, &snapshot.input_bounds)?;
        if targets.len() != snapshot.objectives.len() {
            return Err(Error::DimensionMismatch {
                expected: snapshot.objectives.len(),
                got: targets.len(),
            });
        }
        let objectives = snapshot
            .objectives
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(obj, (s, t))| {
                let y = DVector::from_iterator(t.len(), t.iter().map(|v| (v - s.y_mean) / s.y_scale));
                let hyper = Hyperparameters {
                    lengthscales: s.lengthscales.clone(),
                    signal_variance: s.signal_variance,
                };
                let k = covariance_matrix(snapshot.kernel, &train_unit, &hyper, s.jitter);
                let chol = Cholesky::new(k).ok_or(Error::Factorization {
                    objective: obj,
                    jitter: s.jitter,
                })?;
                let alpha = chol.solve(&y);
                Ok(ObjectiveModel {
                    inv_lengthscales: hyper.lengthscales.iter().map(|l| 1.0 / l).collect(),
                    hyper,
                    jitter: s.jitter,
                    chol,
                    alpha,
                    y_mean: s.y_mean,
                    y_scale: s.y_scale,
                    log_likelihood: s.log_likelihood,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel: snapshot.kernel,
            input_bounds: snapshot.input_bounds.clone(),
            nx: snapshot.nx,
            nu: snapshot.nu,
            train_unit,
            objectives,
            fit: snapshot.fit.clone(),
        })
    }

    fn prepare(doe: &DesignOfExperiments, input_bounds: &Bounds) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if doe.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fitting needs at least 2 design points, got {}",
                doe.len()
            )));
        }
        if doe.nx() + doe.nu() != input_bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: input_bounds.dim(),
                got: doe.nx() + doe.nu(),
            });
        }
        let train_unit = doe.inputs().iter().map(|p| input_bounds.to_unit(&p.concat())).collect();
        let d = doe.n_objectives();
        let targets = (0..d).map(|k| doe.outputs().iter().map(|o| o[k]).collect()).collect();
        Ok((train_unit, targets))
    }

    pub fn snapshot(&self, training_data: &str) -> GpSnapshot {
        GpSnapshot {
            version: 1,
            kernel: self.kernel,
            input_bounds: self.input_bounds.clone(),
            nx: self.nx,
            nu: self.nu,
            n_train: self.train_unit.len(),
            training_data: training_data.to_string(),
            fit: self.fit.clone(),
            objectives: self.objectives.iter().map(ObjectiveModel::snapshot).collect(),
        }
    }

    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.objectives.iter().map(|o| o.hyper.clone()).collect()
    }

    pub fn objective_snapshots(&self) -> Vec<ObjectiveSnapshot> {
        self.objectives.iter().map(ObjectiveModel::snapshot).collect()
    }

    pub fn n_objectives(&self) -> usize {
        self.objectives.len()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn input_bounds(&self) -> &Bounds {
        &self.input_bounds
    }

    pub fn n_train(&self) -> usize {
        self.train_unit.len()
    }

    /// Posterior mean and standard deviation in original output units for joint
    /// inputs given as concatenated `(x, u)` rows.
    pub fn predict_joint(&self, points: &[Vec<f64>]) -> Prediction {
        let mut pred = self.predict_standardized(points, true);
        for (k, obj) in self.objectives.iter().enumerate() {
            for (m, s) in pred.means.iter_mut().zip(pred.stddevs.iter_mut()) {
                m[k] = obj.y_mean + obj.y_scale * m[k];
                s[k] *= obj.y_scale;
            }
        }
        pred
    }

    /// Posterior mean only, in original units.
    pub fn predict_mean_joint(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut pred = self.predict_standardized(points, false);
        for (k, obj) in self.objectives.iter().enumerate() {
            for m in pred.means.iter_mut() {
                m[k] = obj.y_mean + obj.y_scale * m[k];
            }
        }
        pred.means
    }

    /// Posterior mean and standard deviation at `JointPoint`s, original units.
    pub fn predict(&self, points: &[JointPoint]) -> Result<(Vec<ObjectiveVector>, Vec<Vec<f64>>)> {
        let rows = points
            .iter()
            .map(|p| {
                if p.x.len() != self.nx || p.u.len() != self.nu {
                    Err(Error::DimensionMismatch {
                        expected: self.nx + self.nu,
                        got: p.x.len() + p.u.len(),
                    })
                } else {
                    Ok(p.concat())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let pred = self.predict_joint(&rows);
        let means = pred
            .means
            .into_iter()
            .map(ObjectiveVector::new)
            .collect::<Result<Vec<_>>>()?;
        Ok((means, pred.stddevs))
    }

    /// Predictions in standardized output units (zero prior mean, unit-scaled).
    pub fn predict_standardized(&self, points: &[Vec<f64>], with_variance: bool) -> Prediction {
        let m = points.len();
        let d = self.objectives.len();
        let mut means = vec![vec![0.0; d]; m];
        let mut stddevs = vec![vec![0.0; d]; m];
        if m == 0 {
            return Prediction { means, stddevs };
        }
        let unit: Vec<Vec<f64>> = points.iter().map(|p| self.input_bounds.to_unit(p)).collect();
        let n = self.train_unit.len();
        for (k, obj) in self.objectives.iter().enumerate() {
            let mut kstar = DMatrix::zeros(n, m);
            for (j, z) in unit.iter().enumerate() {
                for (i, t) in self.train_unit.iter().enumerate() {
                    kstar[(i, j)] = obj.hyper.signal_variance
                        * self.kernel.correlation(scaled_distance(t, z, &obj.inv_lengthscales));
                }
            }
            let mu = kstar.tr_mul(&obj.alpha);
            for j in 0..m {
                means[j][k] = mu[j];
            }
            if with_variance {
                obj.chol.l_dirty().solve_lower_triangular_mut(&mut kstar);
                for j in 0..m {
                    let explained = kstar.column(j).norm_squared();
                    stddevs[j][k] = (obj.hyper.signal_variance - explained).max(0.0).sqrt();
                }
            }
        }
        Prediction { means, stddevs }
    }
}

impl ObjectiveModel {
    fn snapshot(&self) -> ObjectiveSnapshot {
        ObjectiveSnapshot {
            lengthscales: self.hyper.lengthscales.clone(),
            signal_variance: self.hyper.signal_variance,
            jitter: self.jitter,
            y_mean: self.y_mean,
            y_scale: self.y_scale,
            log_likelihood: self.log_likelihood,
        }
    }
}

fn factorize(
    config: &FitConfig,
    train_unit: &[Vec<f64>],
    y: DVector<f64>,
    hyper: Hyperparameters,
    y_mean: f64,
    y_scale: f64,
    objective: usize,
) -> Result<ObjectiveModel> {
    let mut jitter = config.initial_jitter;
    loop {
        let k = covariance_matrix(config.kernel, train_unit, &hyper, jitter);
        if let Some(chol) = Cholesky::new(k) {
            let alpha = chol.solve(&y);
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
            let log_likelihood =
                -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln();
            return Ok(ObjectiveModel {
                inv_lengthscales: hyper.lengthscales.iter().map(|l| 1.0 / l).collect(),
                hyper,
                jitter,
                chol,
                alpha,
                y_mean,
                y_scale,
                log_likelihood,
            });
        }
        jitter *= 10.0;
        if jitter > config.max_jitter * (1.0 + 1e-9) {
            return Err(Error::Factorization {
                objective,
                jitter: config.max_jitter,
            });
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn optimize_hyperparameters(
    config: &FitConfig,
    train_unit: &[Vec<f64>],
    y: &DVector<f64>,
    warm: Option<&Hyperparameters>,
    seed: u64,
) -> Option<Hyperparameters> {
    let dim = train_unit.first().map_or(0, |r| r.len());
    let (lo, hi) = config.log_bounds(dim);
    let lml = MarginalLikelihood::new(config.kernel, train_unit, y);
    let mut rng = rng_from_seed(seed);

    let to_z = |theta: &[f64]| -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let p = ((t - lo[i]) / (hi[i] - lo[i])).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            })
            .collect()
    };
    let to_theta = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, zi)| lo[i] + (hi[i] - lo[i]) * sigmoid(*zi))
            .collect()
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.restarts.max(1));
    if let Some(w) = warm.filter(|w| w.lengthscales.len() == dim) {
        starts.push(w.to_log());
    } else {
        let mut theta = vec![0.5f64.ln(); dim];
        theta.push(0.0);
        starts.push(theta);
    }
    while starts.len() < config.restarts.max(1) {
        let mut theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05f64.ln()..5f64.ln())).collect();
        theta.push(rng.gen_range(0.2f64.ln()..5f64.ln()));
        starts.push(theta);
    }

    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        let theta = to_theta(z);
        match lml.value_and_gradient_escalating(&theta, config.initial_jitter, config.max_jitter) {
            Some((v, g, _)) => {
                let gz = g
                    .iter()
                    .zip(z)
                    .enumerate()
                    .map(|(i, (gi, zi))| {
                        let s = sigmoid(*zi);
                        -gi * (hi[i] - lo[i]) * s * (1.0 - s)
                    })
                    .collect();
                (-v, gz)
            }
            None => (f64::INFINITY, vec![0.0; z.len()]),
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for theta0 in starts {
        let r = lbfgs_minimize(&objective, &to_z(&theta0), config.max_iters, 1e-6);
        if r.value.is_finite() && best.as_ref().is_none_or(|(v, _)| r.value < *v) {
            best = Some((r.value, r.x));
        }
    }
    best.map(|(_, z)| Hyperparameters::from_log(&to_theta(&z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_doe(xs: &[f64]) -> DesignOfExperiments {
        let inputs = xs.iter().map(|&x| JointPoint::new(vec![x], vec![0.5])).collect();
        let outputs = xs
            .iter()
            .map(|&x| ObjectiveVector::new(vec![(3.0 * x).sin(), x * x]).unwrap())
            .collect();
        DesignOfExperiments::new(inputs, outputs).unwrap()
    }

    #[test]
    fn matern_examples() {
        assert_eq!(matern52(0.0, 0.7, 2.5).unwrap(), 2.5);
        assert!(matern52(1e4, 0.7, 2.5).unwrap() < 1e-300);
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let v = matern52(i as f64 * 0.01, 1.3, 1.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert!(matern52(1.0, 0.0, 1.0).is_err());
        assert!(matern52(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn interpolates_training_outputs() {
        let doe = toy_doe(&[0.0, 0.2, 0.45, 0.7, 1.0]);
        let bounds = Bounds::unit(2);
        let model = GpSurrogate::fit(&doe, &bounds, &FitConfig::default(), None).unwrap();
        let rows: Vec<Vec<f64>> = doe.inputs().iter().map(|p| p.concat()).collect();
        let pred = model.predict_standardized(&rows, true);
        for (i, out) in doe.outputs().iter().enumerate() {
            for k in 0..2 {
                let obj = &model.objectives[k];
                let target = (out[k] - obj.y_mean) / obj.y_scale;
                assert!((pred.means[i][k] - target).abs() < 1e-6);
                assert!(pred.stddevs[i][k] < 1e-3);
            }
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let doe = toy_doe(&[0.0, 0.2, 0.45, 0.7, 1.0]);
        let bounds = Bounds::unit(2);
        let model = GpSurrogate::fit(&doe, &bounds, &FitConfig::default(), None).unwrap();
        let far = vec![vec![1e4, 0.5]];
        let pred = model.predict_joint(&far);
        for k in 0..2 {
            let obj = &model.objectives[k];
            assert!((pred.means[0][k] - obj.y_mean).abs() < 1e-9);
            let prior = obj.hyper.signal_variance.sqrt() * obj.y_scale;
            assert!((pred.stddevs[0][k] - prior).abs() < 1e-9 * prior);
        }
    }

    #[test]
    fn duplicate_rows_fit_through_jitter() {
        let doe = toy_doe(&[0.1, 0.1, 0.1, 0.5, 0.9, 0.9]);
        let model = GpSurrogate::fit(&doe, &Bounds::unit(2), &FitConfig::default(), None).unwrap();
        assert!(model.objectives.iter().all(|o| o.jitter >= 1e-8));
    }

    #[test]
    fn constant_outputs_fall_back_to_prior() {
        let inputs = (0..4)
            .map(|i| JointPoint::new(vec![i as f64 / 3.0], vec![0.0]))
            .collect();
        let outputs = (0..4).map(|_| ObjectiveVector::new(vec![2.0, 3.0]).unwrap()).collect();
        let doe = DesignOfExperiments::new(inputs, outputs).unwrap();
        let model = GpSurrogate::fit(&doe, &Bounds::unit(2), &FitConfig::default(), None).unwrap();
        let pred = model.predict_joint(&[vec![0.4, 0.0]]);
        assert!((pred.means[0][0] - 2.0).abs() < 1e-12);
        assert!((pred.means[0][1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_designs() {
        let doe = toy_doe(&[0.3]);
        assert!(GpSurrogate::fit(&doe, &Bounds::unit(2), &FitConfig::default(), None).is_err());
    }
}
