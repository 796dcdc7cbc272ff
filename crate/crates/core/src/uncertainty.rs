//! Distributions of the environmental variable, conditional Pareto sets, and
//! coverage probability estimation.

use std::io::{Read, Write};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::GpSurrogate;
use crate::hypervolume::normal_cdf;
use crate::pareto::{non_dominated, CandidateSet, FrontEstimate, ObjectiveVector, Provenance};
use crate::sampling::{rng_from_seed, uniform_in};

/// Minimum acceptance rate of the truncated-Gaussian rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// Anything that maps a joint point `(x, u)` to an objective vector.
pub trait Evaluator: Sync {
    fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>>;
}

impl<F> Evaluator for F
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Sync,
{
    fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self(x, u)
    }
}

/// Law of the environmental variable `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UDistribution {
    Uniform {
        bounds: Bounds,
    },
    /// Independent Gaussians truncated to a box.
    DiagonalGaussian {
        center: Vec<f64>,
        variances: Vec<f64>,
        bounds: Bounds,
    },
}

impl UDistribution {
    pub fn uniform(bounds: Bounds) -> Self {
        UDistribution::Uniform { bounds }
    }

    pub fn diagonal_gaussian(center: Vec<f64>, variances: Vec<f64>, bounds: Bounds) -> Result<Self> {
        let dist = UDistribution::DiagonalGaussian {
            center,
            variances,
            bounds,
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UDistribution::Uniform { bounds } => {
                if bounds.volume() <= 0.0 {
                    return Err(Error::InvalidArgument("uniform distribution over an empty box".into()));
                }
            }
            UDistribution::DiagonalGaussian {
                center,
                variances,
                bounds,
            } => {
                if center.len() != bounds.dim() || variances.len() != bounds.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: bounds.dim(),
                        got: center.len().max(variances.len()),
                    });
                }
                if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "variances must be positive, got {variances:?}"
                    )));
                }
                if !bounds.contains(center) {
                    return Err(Error::InvalidArgument("truncation box must contain the center".into()));
                }
            }
        }
        Ok(())
    }

    /// The support of the distribution.
    pub fn support(&self) -> &Bounds {
        match self {
            UDistribution::Uniform { bounds } | UDistribution::DiagonalGaussian { bounds, .. } => bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.support().dim()
    }

    /// Probability that an untruncated draw lands inside the truncation box.
    pub fn acceptance_probability(&self) -> f64 {
        match self {
            UDistribution::Uniform { .. } => 1.0,
            UDistribution::DiagonalGaussian {
                center,
                variances,
                bounds,
            } => (0..bounds.dim())
                .map(|k| {
                    let s = variances[k].sqrt();
                    normal_cdf((bounds.hi()[k] - center[k]) / s) - normal_cdf((bounds.lo()[k] - center[k]) / s)
                })
                .product(),
        }
    }

    /// Density `p_U(u)`; truncated Gaussians are renormalized over their box.
    pub fn density(&self, u: &[f64]) -> f64 {
        let support = self.support();
        if !support.contains(u) {
            return 0.0;
        }
        match self {
            UDistribution::Uniform { bounds } => 1.0 / bounds.volume(),
            UDistribution::DiagonalGaussian {
                center,
                variances,
                bounds,
            } => (0..bounds.dim())
                .map(|k| {
                    let s = variances[k].sqrt();
                    let z = (u[k] - center[k]) / s;
                    let mass =
                        normal_cdf((bounds.hi()[k] - center[k]) / s) - normal_cdf((bounds.lo()[k] - center[k]) / s);
                    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s * mass)
                })
                .product(),
        }
    }

    /// One draw from a seeded generator, by rejection for truncated Gaussians.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            UDistribution::Uniform { bounds } => uniform_in(bounds, rng),
            UDistribution::DiagonalGaussian {
                center,
                variances,
                bounds,
            } => {
                let normals: Vec<Normal<f64>> = center
                    .iter()
                    .zip(variances)
                    .map(|(c, v)| Normal::new(*c, v.sqrt()).expect("validated variance"))
                    .collect();
                loop {
                    let u: Vec<f64> = normals.iter().map(|n| n.sample(rng)).collect();
                    if bounds.contains(&u) {
                        return u;
                    }
                }
            }
        }
    }

    /// `n` i.i.d. samples, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64, crn: bool) -> Result<USampleSet> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one U sample".into()));
        }
        self.validate()?;
        let acceptance = self.acceptance_probability();
        if acceptance < MIN_ACCEPTANCE {
            return Err(Error::TruncationTooSmall(acceptance));
        }
        let mut rng = rng_from_seed(seed);
        let samples = (0..n).map(|_| self.draw(&mut rng)).collect();
        Ok(USampleSet { samples, seed, crn })
    }
}

/// A fixed set of `U` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct USampleSet {
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    /// Whether the same set is reused across optimization iterations.
    pub crn: bool,
}

impl USampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Wraps explicit samples (e.g. a single `u`).
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Self {
        Self {
            samples,
            seed: 0,
            crn: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageEstimator {
    TrueFunction,
    GpPlugin,
}

/// Per-candidate estimate of `P_U[x ∈ CPS(U)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageField {
    pub candidates: CandidateSet,
    /// Number of `u` samples for which the candidate was non-dominated.
    pub counts: Vec<u32>,
    pub n_u: usize,
    pub estimator: CoverageEstimator,
}

impl CoverageField {
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n_u as f64).collect()
    }

    /// Index of the largest probability (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    /// Indices whose probability is at least the `(100 − percent)`-th percentile; ties are kept.
    pub fn top_quantile(&self, percent: f64) -> Vec<usize> {
        if self.counts.is_empty() || percent <= 0.0 {
            return Vec::new();
        }
        let mut sorted = self.counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let k = ((percent / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        let threshold = sorted[k - 1];
        (0..self.counts.len())
            .filter(|&i| self.counts[i] >= threshold)
            .collect()
    }

    /// Writes `x1..x_nx,probability` rows for the given candidate indices.
    pub fn write_csv<W: Write>(&self, writer: W, rows: Option<&[usize]>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let nx = self.candidates.dim();
        let mut header: Vec<String> = (1..=nx).map(|i| format!("x{i}")).collect();
        header.push("probability".into());
        w.write_record(&header)?;
        let probs = self.probabilities();
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..self.counts.len()).collect();
                &all
            }
        };
        for &i in rows {
            let mut rec: Vec<String> = self.candidates.points()[i].iter().map(|v| v.to_string()).collect();
            rec.push(probs[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `(x, probability)` rows of a coverage CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut r = csv::Reader::from_reader(reader);
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("bad number `{s}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (x, p) = vals.split_at(vals.len() - 1);
            xs.push(x.to_vec());
            ps.push(p[0]);
        }
        Ok((xs, ps))
    }
}

fn evaluate_candidates<E: Evaluator + ?Sized>(
    evaluator: &E,
    candidates: &CandidateSet,
    u: &[f64],
) -> Result<Vec<Vec<f64>>> {
    candidates
        .points()
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let y = evaluator.evaluate(x, u)?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index, values: y });
            }
            Ok(y)
        })
        .collect()
}

fn front_of(values: &[Vec<f64>], indices: &[usize], provenance: Provenance) -> Result<FrontEstimate> {
    let points = indices
        .iter()
        .map(|&i| ObjectiveVector::new(values[i].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontEstimate::from_non_dominated(points, provenance))
}

/// The discretized conditional Pareto front at `u` and the candidate indices forming the set.
pub fn conditional_front_and_set<E: Evaluator + ?Sized>(
    evaluator: &E,
    candidates: &CandidateSet,
    u: &[f64],
) -> Result<(FrontEstimate, Vec<usize>)> {
    let values = evaluate_candidates(evaluator, candidates, u)?;
    let set = non_dominated(&values)?;
    let front = front_of(&values, &set, Provenance::TrueEvaluations)?;
    Ok((front, set))
}

fn accumulate<F>(n_candidates: usize, u_samples: &USampleSet, set_at: F) -> Result<Vec<u32>>
where
    F: Fn(&[f64]) -> Result<Vec<usize>> + Sync,
{
    let sets = u_samples
        .samples
        .par_iter()
        .map(|u| set_at(u))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u32; n_candidates];
    for set in sets {
        for i in set {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Fraction of `u` samples for which each candidate belongs to the conditional Pareto set.
pub fn coverage_probability<E: Evaluator + ?Sized>(
    evaluator: &E,
    candidates: &CandidateSet,
    u_samples: &USampleSet,
) -> Result<CoverageField> {
    if candidates.is_empty() {
        return Err(Error::Empty("coverage candidates"));
    }
    if u_samples.is_empty() {
        return Err(Error::Empty("coverage u samples"));
    }
    let counts = accumulate(candidates.len(), u_samples, |u| {
        let values = evaluate_candidates(evaluator, candidates, u)?;
        non_dominated(&values)
    })?;
    Ok(CoverageField {
        candidates: candidates.clone(),
        counts,
        n_u: u_samples.len(),
        estimator: CoverageEstimator::TrueFunction,
    })
}

/// GP-mean objectives of every candidate at a fixed `u`.
pub fn plugin_objectives(model: &GpSurrogate, candidates: &CandidateSet, u: &[f64]) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = candidates
        .points()
        .iter()
        .map(|x| {
            let mut z = x.clone();
            z.extend_from_slice(u);
            z
        })
        .collect();
    model.predict_mean_joint(&rows)
}

/// Coverage estimated with the GP mean in place of the true function.
pub fn coverage_probability_plugin(
    model: &GpSurrogate,
    candidates: &CandidateSet,
    u_samples: &USampleSet,
) -> Result<CoverageField> {
    if candidates.is_empty() {
        return Err(Error::Empty("coverage candidates"));
    }
    if u_samples.is_empty() {
        return Err(Error::Empty("coverage u samples"));
    }
    let counts = accumulate(candidates.len(), u_samples, |u| {
        non_dominated(&plugin_objectives(model, candidates, u))
    })?;
    Ok(CoverageField {
        candidates: candidates.clone(),
        counts,
        n_u: u_samples.len(),
        estimator: CoverageEstimator::GpPlugin,
    })
}
