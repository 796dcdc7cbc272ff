//! Exact hypervolume (d = 2, 3), hypervolume improvement, and expected
//! hypervolume improvement under independent Gaussian predictions.
//!
//! The dominated region is always intersected with the box below the reference
//! point, so points outside it are clipped rather than rejected. For d = 2 the
//! non-dominated region below the reference is split into vertical strips
//! `[a_i, b_i) × (−∞, h_i)`; the improvement of a point `y` is then
//! `Σ_i (b_i − max(a_i, y₁))⁺ (h_i − y₂)⁺`, and since both factors depend on
//! one coordinate each, the expectation factorizes into one-dimensional
//! Gaussian partial moments per strip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::sobol_unit;

/// Default number of quasi-random draws for d = 3 EHVI.
pub const DEFAULT_QMC_SAMPLES: usize = 4096;

/// Upper corner bounding the dominated region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(Vec<f64>);

impl ReferencePoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite reference point {values:?}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile: Acklam's rational approximation polished by one
/// Halley step against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const LOW: f64 = 0.024_25;
    let x = if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `E[(t − Y)⁺]` for `Y ~ N(μ, σ²)`; the deterministic limit when `σ ≤ 0`.
#[inline]
fn lower_partial_moment(t: f64, mu: f64, sigma: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if sigma <= 0.0 {
        return (t - mu).max(0.0);
    }
    let z = (t - mu) / sigma;
    ((t - mu) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

fn check_dims<P: AsRef<[f64]>>(points: &[P], reference: &ReferencePoint) -> Result<usize> {
    let d = reference.dim();
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

/// Points strictly below the reference in every coordinate; others dominate no volume.
fn clipped<'a, P: AsRef<[f64]>>(points: &'a [P], r: &[f64]) -> Vec<&'a [f64]> {
    points
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| p.iter().zip(r).all(|(a, b)| a < b))
        .collect()
}

fn hv2(points: &mut [&[f64]], r: &[f64]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut floor = r[1];
    for (i, p) in points.iter().enumerate() {
        if p[1] < floor {
            floor = p[1];
        }
        let next_x = points.get(i + 1).map_or(r[0], |q| q[0]);
        area += (next_x - p[0]) * (r[1] - floor);
    }
    area
}

fn hv3(points: &mut [&[f64]], r: &[f64]) -> f64 {
    points.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut slice: Vec<&[f64]> = Vec::with_capacity(points.len());
    let mut i = 0;
    while i < points.len() {
        let z = points[i][2];
        while i < points.len() && points[i][2] == z {
            slice.push(points[i]);
            i += 1;
        }
        let next_z = points.get(i).map_or(r[2], |p| p[2]);
        volume += hv2(&mut slice, r) * (next_z - z);
    }
    volume
}

/// Lebesgue measure of the region dominated by `points` and bounded by `reference`.
pub fn hv<P: AsRef<[f64]>>(points: &[P], reference: &ReferencePoint) -> Result<f64> {
    let d = check_dims(points, reference)?;
    let r = reference.values();
    let mut pts = clipped(points, r);
    match d {
        2 => Ok(hv2(&mut pts, r)),
        3 => Ok(hv3(&mut pts, r)),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Hypervolume gained by adding `y` to `points`.
pub fn hvi<P: AsRef<[f64]>>(y: &[f64], points: &[P], reference: &ReferencePoint) -> Result<f64> {
    let d = check_dims(points, reference)?;
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    match d {
        2 => Ok(Strips2d::new(points, reference)?.hvi(y)),
        3 => {
            let r = reference.values();
            if !y.iter().zip(r).all(|(a, b)| a < b) {
                return Ok(0.0);
            }
            let base = hv(points, reference)?;
            let mut with: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
            with.push(y);
            Ok((hv(&with, reference)? - base).max(0.0))
        }
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// The non-dominated region of a 2-D front below the reference point, as strips.
///
/// Building this once per front makes repeated improvement queries `O(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strips2d {
    /// `(a_i, b_i, h_i)`: strip `[a_i, b_i)` with ceiling `h_i`; `a_0 = −∞`.
    strips: Vec<(f64, f64, f64)>,
}

impl Strips2d {
    pub fn new<P: AsRef<[f64]>>(points: &[P], reference: &ReferencePoint) -> Result<Self> {
        let d = check_dims(points, reference)?;
        if d != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: d });
        }
        let r = reference.values();
        let mut pts = clipped(points, r);
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut front: Vec<&[f64]> = Vec::with_capacity(pts.len());
        for p in pts {
            if front.last().is_none_or(|q| p[1] < q[1]) {
                front.push(p);
            }
        }
        let mut strips = Vec::with_capacity(front.len() + 1);
        let first_x = front.first().map_or(r[0], |p| p[0]);
        strips.push((f64::NEG_INFINITY, first_x, r[1]));
        for (i, p) in front.iter().enumerate() {
            let next_x = front.get(i + 1).map_or(r[0], |q| q[0]);
            strips.push((p[0], next_x, p[1]));
        }
        Ok(Self { strips })
    }

    pub fn hvi(&self, y: &[f64]) -> f64 {
        self.strips
            .iter()
            .map(|&(a, b, h)| (b - a.max(y[0])).max(0.0) * (h - y[1]).max(0.0))
            .sum()
    }

    /// Expected improvement of `Y ~ N(mean, diag(stddev²))`.
    pub fn ehvi(&self, mean: &[f64], stddev: &[f64]) -> f64 {
        let (m1, m2) = (mean[0], mean[1]);
        let (s1, s2) = (stddev[0], stddev[1]);
        self.strips
            .iter()
            .map(|&(a, b, h)| {
                let width = lower_partial_moment(b, m1, s1) - lower_partial_moment(a, m1, s1);
                if width <= 0.0 {
                    return 0.0;
                }
                width * lower_partial_moment(h, m2, s2)
            })
            .sum::<f64>()
            .max(0.0)
    }
}

fn check_gaussian(mean: &[f64], stddev: &[f64], d: usize) -> Result<()> {
    if mean.len() != d || stddev.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mean.len().max(stddev.len()),
        });
    }
    if mean.iter().chain(stddev).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite Gaussian parameters".into()));
    }
    Ok(())
}

/// Closed-form EHVI for two objectives. Nonpositive standard deviations are
/// treated as deterministic coordinates.
pub fn ehvi_2d<P: AsRef<[f64]>>(mean: &[f64], stddev: &[f64], points: &[P], reference: &ReferencePoint) -> Result<f64> {
    if reference.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: reference.dim(),
        });
    }
    check_gaussian(mean, stddev, 2)?;
    Ok(Strips2d::new(points, reference)?.ehvi(mean, stddev))
}

/// Monte-Carlo mean and standard error of the improvement over `n_samples`
/// Gaussian draws. Sample `i` uses ChaCha stream `i` of `seed`.
pub fn ehvi_mc<P: AsRef<[f64]> + Sync>(
    mean: &[f64],
    stddev: &[f64],
    points: &[P],
    reference: &ReferencePoint,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = check_dims(points, reference)?;
    check_gaussian(mean, stddev, d)?;
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 samples, got {n_samples}"
        )));
    }
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let strips = if d == 2 {
        Some(Strips2d::new(points, reference)?)
    } else {
        None
    };
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let y: Vec<f64> = (0..d)
                .map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean[k] + stddev[k].max(0.0) * z
                })
                .collect();
            match &strips {
                Some(s) => Ok(s.hvi(&y)),
                None => hvi(&y, points, reference),
            }
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_stderr(&values))
}

/// Randomized quasi-Monte-Carlo EHVI from scrambled Sobol normal draws.
pub fn ehvi_qmc<P: AsRef<[f64]>>(
    mean: &[f64],
    stddev: &[f64],
    points: &[P],
    reference: &ReferencePoint,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let d = check_dims(points, reference)?;
    check_gaussian(mean, stddev, d)?;
    let draws = sobol_unit(n_samples, d, seed)?;
    let base = hv(points, reference)?;
    let r = reference.values();
    let kept: Vec<&[f64]> = clipped(points, r);
    let mut total = 0.0;
    for t in &draws {
        let y: Vec<f64> = (0..d)
            .map(|k| mean[k] + stddev[k].max(0.0) * normal_quantile(t[k].clamp(1e-12, 1.0 - 1e-12)))
            .collect();
        if !y.iter().zip(r).all(|(a, b)| a < b) {
            continue;
        }
        let mut with = kept.clone();
        with.push(&y);
        total += (hv(&with, reference)? - base).max(0.0);
    }
    Ok(total / n_samples as f64)
}

/// Dispatches to the analytic d = 2 formula or quasi-random d = 3 estimate.
pub fn ehvi<P: AsRef<[f64]>>(mean: &[f64], stddev: &[f64], points: &[P], reference: &ReferencePoint) -> Result<f64> {
    match reference.dim() {
        2 => ehvi_2d(mean, stddev, points, reference),
        3 => ehvi_qmc(mean, stddev, points, reference, DEFAULT_QMC_SAMPLES, 0),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Welford mean and standard error; exact when all values are equal.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = values.len() as f64;
    let var = if values.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: &[f64]) -> ReferencePoint {
        ReferencePoint::new(v.to_vec()).unwrap()
    }

    fn front() -> Vec<Vec<f64>> {
        vec![vec![1.0, 2.0], vec![2.0, 1.0]]
    }

    #[test]
    fn hv_examples() {
        assert_eq!(hv(&front(), &r(&[3.0, 3.0])).unwrap(), 3.0);
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(hv(&empty, &r(&[3.0, 3.0])).unwrap(), 0.0);
        let four = vec![vec![0.0; 4]];
        assert!(matches!(hv(&four, &r(&[1.0; 4])), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn hv_clips_points_outside_the_reference_box() {
        let pts = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.5, 4.0], vec![3.0, 3.0]];
        assert_eq!(hv(&pts, &r(&[3.0, 3.0])).unwrap(), 3.0);
    }

    #[test]
    fn hv3_unit_cubes() {
        let pts = vec![vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        // [0,2]²×[1,2] ∪ [1,2]²×[0,2] = 4 + 1·2 − 1·1 = 5
        assert!((hv(&pts, &r(&[2.0, 2.0, 2.0])).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hvi_examples() {
        let rf = r(&[3.0, 3.0]);
        assert!((hvi(&[0.5, 0.5], &front(), &rf).unwrap() - 3.25).abs() < 1e-12);
        assert_eq!(hvi(&[2.5, 2.5], &front(), &rf).unwrap(), 0.0);
        assert_eq!(hvi(&[3.5, 0.0], &front(), &rf).unwrap(), 0.0);
    }

    #[test]
    fn ehvi_degenerate_limits() {
        let rf = r(&[3.0, 3.0]);
        let v = ehvi_2d(&[0.5, 0.5], &[0.0, 0.0], &front(), &rf).unwrap();
        assert!((v - 3.25).abs() < 1e-12);
        let tiny = ehvi_2d(&[0.5, 0.5], &[1e-9, 1e-9], &front(), &rf).unwrap();
        assert!((tiny - 3.25).abs() < 1e-6);
        assert_eq!(ehvi_2d(&[2.5, 2.5], &[0.0, 0.0], &front(), &rf).unwrap(), 0.0);
        assert!(ehvi_2d(&[0.0, 0.0, 0.0], &[1.0; 3], &front(), &rf).is_err());
    }

    #[test]
    fn ehvi_mc_zero_variance_is_exact() {
        let rf = r(&[3.0, 3.0]);
        let (m, se) = ehvi_mc(&[0.5, 1.5], &[0.0, 0.0], &front(), &rf, 500, 3).unwrap();
        assert_eq!(m, hvi(&[0.5, 1.5], &front(), &rf).unwrap());
        assert_eq!(se, 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12 * p.max(1e-3) * 1e3);
        }
        // Reference values from 30-digit arithmetic.
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 1.349_898_031_630_094_5e-3).abs() < 1e-17);
        assert!((normal_cdf(0.3) - 0.617_911_422_188_952_6).abs() < 1e-15);
    }
}
