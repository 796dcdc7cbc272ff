//! Conservative conditional-front estimates and the profile, weighted and
//! integrated EHVI acquisitions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::GpSurrogate;
use crate::hypervolume::{ehvi, ReferencePoint, Strips2d};
use crate::pareto::{ideal_nadir, non_dominated, CandidateSet, FrontEstimate, ObjectiveVector, Provenance};
use crate::uncertainty::{UDistribution, USampleSet};

pub const DEFAULT_BETA: f64 = 10.0;
pub const DEFAULT_PARETO_CANDIDATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Pehvi,
    Wpehvi,
    Iehvi,
    Random,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Pehvi => "pehvi",
            AcquisitionKind::Wpehvi => "wpehvi",
            AcquisitionKind::Iehvi => "iehvi",
            AcquisitionKind::Random => "random",
        }
    }

    /// Whether the acquisition is maximized over the joint space.
    pub fn is_joint(self) -> bool {
        matches!(self, AcquisitionKind::Pehvi | AcquisitionKind::Wpehvi)
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pehvi" => Ok(AcquisitionKind::Pehvi),
            "wpehvi" => Ok(AcquisitionKind::Wpehvi),
            "iehvi" => Ok(AcquisitionKind::Iehvi),
            "random" => Ok(AcquisitionKind::Random),
            other => Err(Error::Config(format!(
                "unknown acquisition kind `{other}` (expected pehvi, wpehvi, iehvi or random)"
            ))),
        }
    }
}

/// Rule turning an estimated front into a hypervolume reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferencePolicy {
    /// `nadir + margin · (nadir − ideal)`, with `floor` used where the range is zero.
    NadirMargin {
        margin: f64,
        floor: f64,
    },
    Fixed {
        point: Vec<f64>,
    },
}

impl Default for ReferencePolicy {
    fn default() -> Self {
        ReferencePolicy::NadirMargin {
            margin: 0.1,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub beta: f64,
    /// `X_pareto`: control points used to estimate each conditional front.
    pub pareto_candidates: CandidateSet,
    /// Integration samples for the integrated criterion.
    pub u_samples: Option<USampleSet>,
    pub ref_policy: ReferencePolicy,
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::Config("beta must be finite".into()));
        }
        if self.kind != AcquisitionKind::Random && self.pareto_candidates.is_empty() {
            return Err(Error::Config("pareto candidates must not be empty".into()));
        }
        if self.kind == AcquisitionKind::Iehvi && self.u_samples.as_ref().is_none_or(|s| s.is_empty()) {
            return Err(Error::Config("iehvi needs a non-empty set of u samples".into()));
        }
        Ok(())
    }
}

fn join(x: &[f64], u: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + u.len());
    z.extend_from_slice(x);
    z.extend_from_slice(u);
    z
}

fn check_inputs(model: &GpSurrogate, x: Option<&[f64]>, u: &[f64]) -> Result<()> {
    if u.len() != model.nu() {
        return Err(Error::DimensionMismatch {
            expected: model.nu(),
            got: u.len(),
        });
    }
    if let Some(x) = x {
        if x.len() != model.nx() {
            return Err(Error::DimensionMismatch {
                expected: model.nx(),
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Non-dominated points of `m(x, u) + β σ(x, u)` over the control candidates.
pub fn beta_front_for(model: &GpSurrogate, candidates: &CandidateSet, u: &[f64], beta: f64) -> Result<FrontEstimate> {
    check_inputs(model, None, u)?;
    if candidates.dim() != model.nx() {
        return Err(Error::DimensionMismatch {
            expected: model.nx(),
            got: candidates.dim(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::Empty("pareto candidates"));
    }
    let rows: Vec<Vec<f64>> = candidates.points().iter().map(|x| join(x, u)).collect();
    let values: Vec<Vec<f64>> = if beta == 0.0 {
        model.predict_mean_joint(&rows)
    } else {
        let pred = model.predict_joint(&rows);
        pred.means
            .into_iter()
            .zip(pred.stddevs)
            .map(|(m, s)| m.iter().zip(&s).map(|(a, b)| a + beta * b).collect())
            .collect()
    };
    let keep = non_dominated(&values)?;
    let points = keep
        .into_iter()
        .map(|i| ObjectiveVector::new(values[i].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontEstimate::from_non_dominated(
        points,
        Provenance::GpMeanBeta { beta },
    ))
}

/// The β-front at `u` using the spec's candidates and β.
pub fn beta_front(model: &GpSurrogate, u: &[f64], spec: &AcquisitionSpec) -> Result<FrontEstimate> {
    beta_front_for(model, &spec.pareto_candidates, u, spec.beta)
}

pub fn reference_point(front: &FrontEstimate, policy: &ReferencePolicy) -> Result<ReferencePoint> {
    match policy {
        ReferencePolicy::Fixed { point } => {
            if let Some(d) = front.dim() {
                if d != point.len() {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: point.len(),
                    });
                }
            }
            ReferencePoint::new(point.clone())
        }
        ReferencePolicy::NadirMargin { margin, floor } => {
            if front.is_empty() {
                return Err(Error::Empty("front"));
            }
            let (ideal, nadir) = ideal_nadir(front.points())?;
            let r = ideal
                .iter()
                .zip(&nadir)
                .map(|(lo, hi)| {
                    let range = hi - lo;
                    if range > 0.0 {
                        hi + margin * range
                    } else {
                        hi + floor
                    }
                })
                .collect();
            ReferencePoint::new(r)
        }
    }
}

/// A conditional front estimate with its reference point, ready for EHVI queries.
#[derive(Debug, Clone)]
pub struct ConditionalFront {
    pub u: Vec<f64>,
    pub front: FrontEstimate,
    pub reference: ReferencePoint,
    strips: Option<Strips2d>,
}

impl ConditionalFront {
    pub fn build(model: &GpSurrogate, u: &[f64], spec: &AcquisitionSpec) -> Result<Self> {
        let front = beta_front(model, u, spec)?;
        let reference = reference_point(&front, &spec.ref_policy)?;
        let strips = if reference.dim() == 2 {
            Some(Strips2d::new(front.points(), &reference)?)
        } else {
            None
        };
        Ok(Self {
            u: u.to_vec(),
            front,
            reference,
            strips,
        })
    }

    pub fn ehvi(&self, mean: &[f64], stddev: &[f64]) -> Result<f64> {
        match &self.strips {
            Some(s) => {
                if mean.len() != 2 || stddev.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: mean.len().max(stddev.len()),
                    });
                }
                Ok(s.ehvi(mean, stddev))
            }
            None => ehvi(mean, stddev, self.front.points(), &self.reference),
        }
    }
}

/// Profile EHVI of the prediction at `(x, u)` against the β-front at `u`.
pub fn pehvi(model: &GpSurrogate, x: &[f64], u: &[f64], spec: &AcquisitionSpec) -> Result<f64> {
    check_inputs(model, Some(x), u)?;
    let cf = ConditionalFront::build(model, u, spec)?;
    let pred = model.predict_joint(&[join(x, u)]);
    cf.ehvi(&pred.means[0], &pred.stddevs[0])
}

/// Profile EHVI weighted by the density of `U`.
pub fn wpehvi(model: &GpSurrogate, x: &[f64], u: &[f64], spec: &AcquisitionSpec, dist: &UDistribution) -> Result<f64> {
    check_inputs(model, Some(x), u)?;
    let p = dist.density(u);
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(pehvi(model, x, u, spec)? * p)
}

/// Per-u conditional fronts, built once per model and shared by all probes.
#[derive(Debug, Clone)]
pub struct FrontCache {
    pub fronts: Vec<ConditionalFront>,
}

impl FrontCache {
    pub fn build(model: &GpSurrogate, u_samples: &USampleSet, spec: &AcquisitionSpec) -> Result<Self> {
        if u_samples.is_empty() {
            return Err(Error::Empty("u samples"));
        }
        let fronts = u_samples
            .samples
            .par_iter()
            .map(|u| ConditionalFront::build(model, u, spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { fronts })
    }

    /// Integrated EHVI at each control point.
    pub fn iehvi_batch(&self, model: &GpSurrogate, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n_u = self.fronts.len();
        let rows: Vec<Vec<f64>> = xs
            .iter()
            .flat_map(|x| self.fronts.iter().map(move |cf| join(x, &cf.u)))
            .collect();
        for x in xs {
            check_inputs(model, Some(x), &self.fronts[0].u)?;
        }
        let pred = model.predict_joint(&rows);
        (0..xs.len())
            .map(|j| {
                let mut total = 0.0;
                for (i, cf) in self.fronts.iter().enumerate() {
                    let k = j * n_u + i;
                    total += cf.ehvi(&pred.means[k], &pred.stddevs[k])?;
                }
                Ok(total / n_u as f64)
            })
            .collect()
    }
}

/// Integrated EHVI: the profile EHVI averaged over the `u` samples.
pub fn iehvi(model: &GpSurrogate, x: &[f64], u_samples: &USampleSet, spec: &AcquisitionSpec) -> Result<f64> {
    let cache = FrontCache::build(model, u_samples, spec)?;
    Ok(cache.iehvi_batch(model, &[x.to_vec()])?[0])
}

/// An acquisition bound to a fitted model, evaluated on points of its search space.
///
/// For the integrated criterion the search space is `X` and the per-u fronts are
/// cached at construction; otherwise it is `X × U`.
pub struct Acquisition<'a> {
    model: &'a GpSurrogate,
    spec: &'a AcquisitionSpec,
    dist: &'a UDistribution,
    cache: Option<FrontCache>,
    search: Bounds,
}

impl<'a> Acquisition<'a> {
    pub fn new(model: &'a GpSurrogate, spec: &'a AcquisitionSpec, dist: &'a UDistribution) -> Result<Self> {
        spec.validate()?;
        let joint = model.input_bounds().clone();
        let x_bounds = Bounds::new(joint.lo()[..model.nx()].to_vec(), joint.hi()[..model.nx()].to_vec())?;
        let (cache, search) = match spec.kind {
            AcquisitionKind::Iehvi => {
                let samples = spec.u_samples.as_ref().ok_or(Error::Empty("u samples"))?;
                (Some(FrontCache::build(model, samples, spec)?), x_bounds)
            }
            AcquisitionKind::Pehvi | AcquisitionKind::Wpehvi => (None, joint),
            AcquisitionKind::Random => return Err(Error::Config("random selection has no acquisition".into())),
        };
        Ok(Self {
            model,
            spec,
            dist,
            cache,
            search,
        })
    }

    pub fn search_bounds(&self) -> &Bounds {
        &self.search
    }

    pub fn kind(&self) -> AcquisitionKind {
        self.spec.kind
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        Ok(self.values(&[z.to_vec()])?[0])
    }

    /// Acquisition values at many search-space points.
    pub fn values(&self, zs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let nx = self.model.nx();
        match &self.cache {
            Some(cache) => cache.iehvi_batch(self.model, zs),
            None => zs
                .par_iter()
                .map(|z| {
                    if z.len() != self.search.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: self.search.dim(),
                            got: z.len(),
                        });
                    }
                    let (x, u) = z.split_at(nx);
                    match self.spec.kind {
                        AcquisitionKind::Wpehvi => wpehvi(self.model, x, u, self.spec, self.dist),
                        _ => pehvi(self.model, x, u, self.spec),
                    }
                })
                .collect(),
        }
    }

    /// Sum of predictive standard deviations, used when the acquisition is flat.
    pub fn uncertainty(&self, zs: &[Vec<f64>]) -> Vec<f64> {
        let rows: Vec<Vec<f64>> = match &self.cache {
            Some(cache) => zs
                .iter()
                .flat_map(|x| cache.fronts.iter().map(move |cf| join(x, &cf.u)))
                .collect(),
            None => zs.to_vec(),
        };
        let per_row: Vec<f64> = self
            .model
            .predict_joint(&rows)
            .stddevs
            .iter()
            .map(|s| s.iter().sum())
            .collect();
        let k = rows.len() / zs.len().max(1);
        per_row
            .chunks(k.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}
