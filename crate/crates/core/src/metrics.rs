//! Front-quality metrics and coverage comparison.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpSurrogate;
use crate::pareto::{non_dominated, CandidateSet, FrontEstimate};
use crate::uncertainty::{plugin_objectives, CoverageEstimator, CoverageField, Evaluator, USampleSet};

fn check_fronts(a: &FrontEstimate, b: &FrontEstimate) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("front"));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim().unwrap_or(0),
            got: b.dim().unwrap_or(0),
        });
    }
    Ok(())
}

fn directed<P: AsRef<[f64]>, Q: AsRef<[f64]>>(from: &[P], to: &[Q], p: f64) -> f64 {
    let total: f64 = from
        .iter()
        .map(|y| {
            let y = y.as_ref();
            let d2 = to
                .iter()
                .map(|z| z.as_ref().iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            d2.sqrt().powf(p)
        })
        .sum();
    (total / from.len() as f64).powf(1.0 / p)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be a positive real, got {p}")));
    }
    Ok(())
}

/// Generational distance of `approx` to `reference`.
pub fn gd_p(approx: &FrontEstimate, reference: &FrontEstimate, p: f64) -> Result<f64> {
    check_p(p)?;
    check_fronts(approx, reference)?;
    Ok(directed(approx.points(), reference.points(), p))
}

/// Inverted generational distance: averaged over the reference front.
pub fn igd_p(approx: &FrontEstimate, reference: &FrontEstimate, p: f64) -> Result<f64> {
    check_p(p)?;
    check_fronts(approx, reference)?;
    Ok(directed(reference.points(), approx.points(), p))
}

/// Averaged Hausdorff distance `max(GD_p, IGD_p)`.
pub fn delta_p(approx: &FrontEstimate, reference: &FrontEstimate, p: f64) -> Result<f64> {
    Ok(gd_p(approx, reference, p)?.max(igd_p(approx, reference, p)?))
}

/// Mean squared difference between two coverage fields on the same candidates.
pub fn coverage_l2(truth: &CoverageField, estimate: &CoverageField) -> Result<f64> {
    if truth.candidates.points() != estimate.candidates.points() {
        return Err(Error::InvalidArgument(
            "coverage fields use different candidate sets".into(),
        ));
    }
    let (a, b) = (truth.probabilities(), estimate.probabilities());
    if a.is_empty() {
        return Err(Error::Empty("coverage candidates"));
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("summary values"));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            min: s[0],
            q25: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q75: quantile(&s, 0.75),
            max: s[s.len() - 1],
            mean: s.iter().sum::<f64>() / s.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub run_id: String,
    pub n_u: usize,
    pub u_seed: u64,
    pub x_test: serde_json::Value,
    /// How the acquisition's `X_pareto` was drawn, recorded to document disjointness.
    pub x_pareto: serde_json::Value,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `Δ_p` between the true and plug-in conditional fronts, one per `u` sample.
    pub deltas: Vec<f64>,
    pub summary: Summary,
    pub coverage_l2: f64,
    pub provenance: ReportProvenance,
}

impl MetricReport {
    pub fn write_deltas_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["u_index", "delta"])?;
        for (i, d) in self.deltas.iter().enumerate() {
            w.write_record([i.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares true and plug-in conditional fronts on `x_test` for each `u` sample.
///
/// The same per-u sets give both coverage fields, so their L2 distance is
/// reported alongside.
pub fn delta_distribution<E: Evaluator + ?Sized>(
    model: &GpSurrogate,
    evaluator: &E,
    u_samples: &USampleSet,
    x_test: &CandidateSet,
    p: f64,
    provenance: ReportProvenance,
) -> Result<MetricReport> {
    check_p(p)?;
    if u_samples.is_empty() {
        return Err(Error::Empty("u samples"));
    }
    if x_test.is_empty() {
        return Err(Error::Empty("test candidates"));
    }
    let per_u = u_samples
        .samples
        .par_iter()
        .map(|u| {
            let truth = x_test
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
                .collect::<Result<Vec<_>>>()?;
            let plugin = plugin_objectives(model, x_test, u);
            let true_set = non_dominated(&truth)?;
            let plugin_set = non_dominated(&plugin)?;
            let a: Vec<&[f64]> = plugin_set.iter().map(|&i| plugin[i].as_slice()).collect();
            let b: Vec<&[f64]> = true_set.iter().map(|&i| truth[i].as_slice()).collect();
            let delta = directed(&a, &b, p).max(directed(&b, &a, p));
            Ok((delta, true_set, plugin_set))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = x_test.len();
    let mut true_counts = vec![0u32; n];
    let mut plugin_counts = vec![0u32; n];
    let mut deltas = Vec::with_capacity(per_u.len());
    for (d, ts, ps) in per_u {
        deltas.push(d);
        ts.into_iter().for_each(|i| true_counts[i] += 1);
        ps.into_iter().for_each(|i| plugin_counts[i] += 1);
    }
    let field = |counts, estimator| CoverageField {
        candidates: x_test.clone(),
        counts,
        n_u: u_samples.len(),
        estimator,
    };
    let l2 = coverage_l2(
        &field(true_counts, CoverageEstimator::TrueFunction),
        &field(plugin_counts, CoverageEstimator::GpPlugin),
    )?;
    Ok(MetricReport {
        summary: Summary::of(&deltas)?,
        deltas,
        coverage_l2: l2,
        provenance,
    })
}
