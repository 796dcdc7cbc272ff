//! Small local optimizers: L-BFGS for the smooth marginal-likelihood surface
//! and a box-clamped Nelder–Mead simplex for derivative-free acquisition refinement.

use std::collections::VecDeque;

use crate::bounds::Bounds;

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes a smooth function with limited-memory BFGS and Armijo backtracking.
///
/// `f` returns the value and gradient; a non-finite value is treated as an
/// infeasible step and triggers backtracking.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], max_iters: usize, grad_tol: f64) -> LocalResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 7;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return LocalResult {
            x,
            value: fx,
            evaluations,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);

    for _ in 0..max_iters {
        if g.iter().all(|v| v.abs() <= grad_tol) {
            break;
        }
        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gnorm = dot(&g, &g).sqrt();
            let scale = if gnorm > 1.0 { 1.0 / gnorm } else { 1.0 };
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            evaluations += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement.abs() <= 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    LocalResult {
        x,
        value: fx,
        evaluations,
    }
}

/// Minimizes `f` over `bounds` with a Nelder–Mead simplex whose vertices are
/// clamped to the box. `step` is the initial simplex edge as a fraction of each
/// box width.
pub fn nelder_mead_minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, max_evals: usize, step: f64) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |p: &mut Vec<f64>, evals: &mut usize| {
        bounds.clamp(p);
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    let f0 = eval(&mut start, &mut evaluations);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut p = start.clone();
        let h = step * bounds.width(i);
        // Step inward when the start sits on the upper face.
        p[i] = if p[i] + h <= bounds.hi()[i] { p[i] + h } else { p[i] - h };
        let v = eval(&mut p, &mut evaluations);
        simplex.push((p, v));
    }

    while evaluations < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .enumerate()
                    .map(|(i, (a, b))| {
                        let w = bounds.width(i);
                        if w > 0.0 {
                            ((a - b) / w).abs()
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < 1e-9 || (spread <= 1e-14 * (1.0 + best.abs()) && size < 1e-4) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i]))
                .collect()
        };

        let mut reflected = along(-1.0);
        let fr = eval(&mut reflected, &mut evaluations);
        if fr < simplex[0].1 {
            let mut expanded = along(-2.0);
            let fe = eval(&mut expanded, &mut evaluations);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (mut contracted, fc) = if fr < simplex[n].1 {
                let mut c = along(-0.5);
                let v = eval(&mut c, &mut evaluations);
                (c, v)
            } else {
                let mut c = along(0.5);
                let v = eval(&mut c, &mut evaluations);
                (c, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (std::mem::take(&mut contracted), fc);
            } else {
                let best = simplex[0].0.clone();
                for (p, v) in simplex[1..].iter_mut() {
                    for i in 0..n {
                        p[i] = best[i] + 0.5 * (p[i] - best[i]);
                    }
                    *v = eval(p, &mut evaluations);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    LocalResult { x, value, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let r = lbfgs_minimize(f, &[-1.2, 1.0], 500, 1e-10);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn nelder_mead_finds_interior_minimum() {
        let b = Bounds::unit(3);
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2) + (x[2] - 0.5).powi(2);
        let r = nelder_mead_minimize(f, &[0.9, 0.1, 0.9], &b, 2000, 0.1);
        for (v, t) in r.x.iter().zip([0.3, 0.7, 0.5]) {
            assert!((v - t).abs() < 1e-4);
        }
    }

    #[test]
    fn nelder_mead_stays_in_box() {
        let b = Bounds::unit(2);
        let f = |x: &[f64]| x[0] + x[1];
        let r = nelder_mead_minimize(f, &[0.5, 0.5], &b, 500, 0.2);
        assert!(b.contains(&r.x));
        assert!(r.value < 1e-6);
    }
}
