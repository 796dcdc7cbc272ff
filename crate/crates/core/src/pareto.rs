//! Weak dominance, non-dominated filtering and discretization utilities.
//!
//! All objectives are minimized. Functions accept any slice of `AsRef<[f64]>`
//! so that plain `Vec<f64>` rows and [`ObjectiveVector`]s can be mixed freely.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

/// A point of the objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "objective vectors need at least two objectives, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite objective vector {values:?}"
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Where the points of a [`FrontEstimate`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    TrueEvaluations,
    GpMeanBeta { beta: f64 },
    External,
}

/// A finite, mutually non-dominated set approximating a Pareto front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEstimate {
    points: Vec<ObjectiveVector>,
    provenance: Provenance,
}

impl FrontEstimate {
    /// Builds a front from arbitrary points, keeping only the non-dominated ones.
    pub fn from_points(points: Vec<ObjectiveVector>, provenance: Provenance) -> Result<Self> {
        let keep = non_dominated(&points)?;
        let mut points: Vec<Option<ObjectiveVector>> = points.into_iter().map(Some).collect();
        let points = keep.iter().map(|&i| points[i].take().unwrap()).collect();
        Ok(Self { points, provenance })
    }

    /// Wraps points already known to be mutually non-dominated.
    pub fn from_non_dominated(points: Vec<ObjectiveVector>, provenance: Provenance) -> Self {
        debug_assert_eq!(non_dominated(&points).map(|v| v.len()).ok(), Some(points.len()));
        Self { points, provenance }
    }

    pub fn empty(provenance: Provenance) -> Self {
        Self {
            points: Vec::new(),
            provenance,
        }
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Objective dimension, `None` for the empty front.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|p| p.dim())
    }
}

/// Finite set of design points inside a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    points: Vec<Vec<f64>>,
    bounds: Bounds,
}

impl CandidateSet {
    pub fn new(points: Vec<Vec<f64>>, bounds: Bounds) -> Result<Self> {
        for p in &points {
            if p.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidArgument(format!("NaN in candidate {p:?}")));
            }
            bounds.check(p)?;
        }
        Ok(Self { points, bounds })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            bounds: self.bounds.clone(),
        }
    }
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Weak dominance `a ≺ b`: `a` is no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dominates_unchecked(a, b))
}

fn common_dim<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let d = points.first().map_or(0, |p| p.as_ref().len());
    for p in points {
        if p.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.as_ref().len(),
            });
        }
    }
    Ok(d)
}

/// Indices of the points not dominated by any other point, in increasing order.
///
/// Equal vectors do not dominate each other, so duplicates are all kept.
pub fn non_dominated<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<usize>> {
    let d = common_dim(points)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    if d == 2 {
        Ok(sweep_2d(points))
    } else {
        Ok(pairwise(points))
    }
}

fn pairwise<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    // Scanning dominators in the order of their coordinate sum finds one early for
    // most dominated points; a dominator always has a strictly smaller sum.
    let mut order: Vec<usize> = (0..points.len()).collect();
    let sums: Vec<f64> = points.iter().map(|p| p.as_ref().iter().sum()).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]));
    (0..points.len())
        .filter(|&i| {
            let pi = points[i].as_ref();
            !order
                .iter()
                .take_while(|&&j| sums[j] <= sums[i])
                .any(|&j| j != i && dominates_unchecked(points[j].as_ref(), pi))
        })
        .collect()
}

fn sweep_2d<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a].as_ref(), points[b].as_ref());
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
    });
    let mut keep = Vec::new();
    // Smallest second objective among strictly smaller first objectives.
    let mut best_before = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let x0 = points[order[g]].as_ref()[0];
        let mut end = g;
        while end < order.len() && points[order[end]].as_ref()[0] == x0 {
            end += 1;
        }
        let group_min = points[order[g]].as_ref()[1];
        if group_min < best_before {
            keep.extend(
                order[g..end]
                    .iter()
                    .copied()
                    .take_while(|&i| points[i].as_ref()[1] == group_min),
            );
            best_before = group_min;
        }
        g = end;
    }
    keep.sort_unstable();
    keep
}

/// Indices `i` such that no point dominates `points[i] − ε` (ε applied to every objective).
pub fn epsilon_non_dominated<P: AsRef<[f64]>>(points: &[P], epsilon: f64) -> Result<Vec<usize>> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return non_dominated(points);
    }
    common_dim(points)?;
    let mut shifted = Vec::new();
    Ok((0..points.len())
        .filter(|&i| {
            shifted.clear();
            shifted.extend(points[i].as_ref().iter().map(|v| v - epsilon));
            !points.iter().any(|pj| dominates_unchecked(pj.as_ref(), &shifted))
        })
        .collect())
}

/// Componentwise minimum (ideal) and maximum (nadir).
pub fn ideal_nadir<P: AsRef<[f64]>>(points: &[P]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = common_dim(points)?;
    if points.is_empty() {
        return Err(Error::Empty("ideal/nadir of an empty set"));
    }
    let mut ideal = vec![f64::INFINITY; d];
    let mut nadir = vec![f64::NEG_INFINITY; d];
    for p in points {
        for (k, v) in p.as_ref().iter().enumerate() {
            ideal[k] = ideal[k].min(*v);
            nadir[k] = nadir[k].max(*v);
        }
    }
    Ok((ideal, nadir))
}

/// Largest distance from a probe point to its nearest design point (Euclidean).
///
/// Multiplied by a Lipschitz constant `L` of the objective, this bounds how far
/// the discretized front can be from the continuous one.
pub fn maximin_distance<P: AsRef<[f64]>, Q: AsRef<[f64]>>(design: &[P], probe: &[Q]) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::Empty("maximin distance design"));
    }
    if probe.is_empty() {
        return Err(Error::Empty("maximin distance probe"));
    }
    let d = common_dim(design)?;
    let dq = common_dim(probe)?;
    if d != dq {
        return Err(Error::DimensionMismatch { expected: d, got: dq });
    }
    let worst_sq = probe
        .iter()
        .map(|q| {
            design
                .iter()
                .map(|p| {
                    p.as_ref()
                        .iter()
                        .zip(q.as_ref())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(worst_sq.sqrt())
}

/// Accuracy `L·δ` of a discretized front, when a Lipschitz constant is known.
pub fn discretization_bound(lipschitz: f64, maximin: f64) -> f64 {
    lipschitz * maximin
}
