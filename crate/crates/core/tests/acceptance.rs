//! End-to-end acceptance checks, one line per criterion.
//!
//! Set `ACCEPTANCE_ONLY=1,4` to run a subset.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use robust_mobo::acquisition::AcquisitionKind;
use robust_mobo::bench::{run_bench, BenchSpec};
use robust_mobo::bounds::Bounds;
use robust_mobo::engine::{initial_design, AcquisitionConfig, OptimizerConfig, SCHEMA_VERSION};
use robust_mobo::gp::{DesignOfExperiments, FitConfig, GpSurrogate, JointPoint, KernelKind, MarginalLikelihood};
use robust_mobo::hypervolume::{ehvi_2d, ehvi_mc, hv, hvi, ReferencePoint};
use robust_mobo::metrics::{delta_p, gd_p, igd_p};
use robust_mobo::pareto::{CandidateSet, FrontEstimate, ObjectiveVector, Provenance};
use robust_mobo::problems::{f2x2, f2x2_mean, problem};
use robust_mobo::sampling::{grid_in, rng_from_seed};
use robust_mobo::uncertainty::coverage_probability;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn criterion_1() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let p = problem("4d").unwrap();
        let candidates = CandidateSet::new(grid_in(&p.x_bounds, 64), p.x_bounds.clone()).unwrap();
        let u = p.u_distribution.sample(2048, 1, true).unwrap();
        let field = coverage_probability(&p, &candidates, &u).unwrap();
        let best = &candidates.points()[field.argmax()];
        let secs = start.elapsed().as_secs_f64();
        let near = (best[0] - 0.4).abs() <= 0.1 && (best[1] - 1.4).abs() <= 0.1;
        outcome(
            near && secs <= 120.0,
            format!(
                "argmax ({:.4}, {:.4}), p = {:.4}, {:.1}s single-threaded",
                best[0],
                best[1],
                field.probabilities()[field.argmax()],
                secs
            ),
        )
    })
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = problem("4d").unwrap();
    let mut rng = rng_from_seed(2);
    let u = p.u_distribution.sample(1_000_000, 3, true).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = vec![rng.gen_range(0.0..1.0), rng.gen_range(1.0..2.0)];
        let exact = f2x2_mean(&x).unwrap();
        for k in 0..2 {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, ui) in u.samples.iter().enumerate() {
                let v = f2x2(&x, ui).unwrap()[k];
                let delta = v - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (v - mean);
            }
            let n = u.len() as f64;
            let se = (m2 / (n - 1.0) / n).sqrt();
            worst = worst.max((mean - exact[k]).abs() / se);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 3.0 && secs <= 60.0,
        format!("max |z| = {worst:.3} over 20 components, {secs:.1}s"),
    )
}

fn mc_hv(points: &[Vec<f64>], reference: &[f64], n: usize, seed: u64) -> (f64, f64) {
    let d = reference.len();
    let lo: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let volume: f64 = (0..d).map(|k| reference[k] - lo[k]).product();
    let mut rng = rng_from_seed(seed);
    let mut hits = 0usize;
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for k in 0..d {
            z[k] = rng.gen_range(lo[k]..reference[k]);
        }
        if points.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / n as f64;
    (volume * frac, volume * (frac * (1.0 - frac) / n as f64).sqrt())
}

fn random_front(d: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            if d == 2 {
                let t = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
                vec![t.cos(), t.sin()]
            } else {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05f64..1.0)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.iter().map(|a| a / norm).collect()
            }
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst_z = 0.0f64;
    let mut worst_rel = 0.0f64;
    for (d, count, max_k) in [(2usize, 50usize, 15usize), (3, 20, 10)] {
        for case in 0..count {
            let k = rng.gen_range(1..=max_k);
            let front = random_front(d, k, &mut rng);
            let r: Vec<f64> = (0..d).map(|_| rng.gen_range(1.05..1.5)).collect();
            let reference = ReferencePoint::new(r.clone()).unwrap();
            let exact = hv(&front, &reference).unwrap();
            let (est, se) = mc_hv(&front, &r, 1_000_000, 1000 + case as u64 + 100 * d as u64);
            worst_z = worst_z.max((exact - est).abs() / se.max(1e-300));

            for _ in 0..5 {
                let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.3)).collect();
                let gain = hvi(&y, &front, &reference).unwrap();
                let mut with = front.clone();
                with.push(y);
                let total = hv(&with, &reference).unwrap();
                let diff = total - exact;
                worst_rel = worst_rel.max((gain - diff).abs() / total.max(f64::MIN_POSITIVE));
            }
        }
    }
    outcome(
        worst_z <= 3.0 && worst_rel <= 1e-12,
        format!("hv vs MC max |z| = {worst_z:.3}; hvi vs hv difference max rel err = {worst_rel:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut worst_z = 0.0f64;
    let mut worst_limit = 0.0f64;
    for case in 0..20 {
        let k = rng.gen_range(1..=10);
        let front = random_front(2, k, &mut rng);
        let reference = ReferencePoint::new(vec![rng.gen_range(1.05..1.5), rng.gen_range(1.05..1.5)]).unwrap();
        let mean = vec![rng.gen_range(0.0..1.2), rng.gen_range(0.0..1.2)];
        let sd = vec![rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5)];
        let exact = ehvi_2d(&mean, &sd, &front, &reference).unwrap();
        let (est, se) = ehvi_mc(&mean, &sd, &front, &reference, 100_000, 40 + case).unwrap();
        let z = if se > 0.0 {
            (exact - est).abs() / se
        } else if exact == est {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);

        let scale: f64 = reference.values().iter().copied().fold(0.0, f64::max);
        let target = hvi(&mean, &front, &reference).unwrap();
        for s in [0.0, 1e-9 * scale] {
            let limit = ehvi_2d(&mean, &[s, s], &front, &reference).unwrap();
            worst_limit = worst_limit.max((limit - target).abs() / (scale * scale));
        }
    }
    outcome(
        worst_z <= 3.0 && worst_limit <= 1e-6,
        format!("analytic vs MC max |z| = {worst_z:.3}; zero-stddev max error / scale^2 = {worst_limit:.2e}"),
    )
}

fn interpolation_error(doe: &DesignOfExperiments, bounds: &Bounds) -> f64 {
    let model = GpSurrogate::fit(doe, bounds, &FitConfig::default(), None).unwrap();
    let rows: Vec<Vec<f64>> = doe.inputs().iter().map(|q| q.concat()).collect();
    let pred = model.predict_standardized(&rows, false);
    let mut worst = 0.0f64;
    for (k, snap) in model.objective_snapshots().iter().enumerate() {
        for (i, y) in doe.outputs().iter().enumerate() {
            let target = (y[k] - snap.y_mean) / snap.y_scale;
            worst = worst.max((pred.means[i][k] - target).abs());
        }
    }
    worst
}

fn criterion_5() -> Outcome {
    let xs = [0.05, 0.3, 0.5, 0.72, 0.95];
    let toy = DesignOfExperiments::new(
        xs.iter().map(|&x| JointPoint::new(vec![x], vec![])).collect(),
        xs.iter()
            .map(|&x| ObjectiveVector::new(vec![(6.0 * x).sin(), (4.0 * x).cos()]).unwrap())
            .collect(),
    )
    .unwrap();
    let toy_err = interpolation_error(&toy, &Bounds::unit(1));
    let p10 = problem("10d").unwrap();
    let err_10d = interpolation_error(&initial_design(&p10, 100, 5).unwrap(), &p10.joint_bounds());
    let worst_interp = toy_err.max(err_10d);
    // Reported only: the smooth 4d quadratic drives the fit to huge lengthscales,
    // where the 1e-8 nugget itself leaves a residual of order 1e-6.
    let p4 = problem("4d").unwrap();
    let err_4d = interpolation_error(&initial_design(&p4, 40, 5).unwrap(), &p4.joint_bounds());

    let p = problem("4d").unwrap();
    let doe = initial_design(&p, 30, 6).unwrap();
    let bounds = p.joint_bounds();
    let unit: Vec<Vec<f64>> = doe.inputs().iter().map(|q| bounds.to_unit(&q.concat())).collect();
    let raw: Vec<f64> = doe.outputs().iter().map(|o| o[0]).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
    let y = DVector::from_iterator(raw.len(), raw.iter().map(|v| (v - mean) / sd));
    let lml = MarginalLikelihood::new(KernelKind::Matern52, &unit, &y);
    let mut rng = rng_from_seed(7);
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    for _ in 0..10 {
        let mut theta: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1f64.ln()..1f64.ln())).collect();
        theta.push(rng.gen_range(0.3f64.ln()..3f64.ln()));
        let (_, grad) = lml.value_and_gradient(&theta, 1e-6).unwrap();
        let fd: Vec<f64> = (0..theta.len())
            .map(|k| {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[k] += h;
                down[k] -= h;
                let fu = lml.value_and_gradient(&up, 1e-6).unwrap().0;
                let fl = lml.value_and_gradient(&down, 1e-6).unwrap().0;
                (fu - fl) / (2.0 * h)
            })
            .collect();
        let num: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(num / den);
    }
    outcome(
        worst_interp <= 1e-6 && worst_grad <= 1e-4,
        format!("standardized interpolation error: 1d toy {toy_err:.2e}, 10d {err_10d:.2e} (4d, ungated: {err_4d:.2e}); max gradient rel err = {worst_grad:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let spec = BenchSpec {
        schema_version: SCHEMA_VERSION,
        problem: "10d".into(),
        kinds: vec![AcquisitionKind::Iehvi, AcquisitionKind::Pehvi, AcquisitionKind::Random],
        replications: 5,
        n_initial: Some(100),
        budget: 100,
        acquisition: AcquisitionConfig {
            beta: 10.0,
            n_pareto: 256,
            ..AcquisitionConfig::default()
        },
        optimizer: OptimizerConfig::default(),
        n_u_eval: 128,
        n_test: 2000,
        seed: 2024,
    };
    let dir = tempfile::tempdir().unwrap();
    let summary = match run_bench(&spec, dir.path(), |r| {
        eprintln!(
            "  bench {} rep {}: {}",
            r.kind.name(),
            r.replication,
            r.median_delta.map_or_else(
                || r.error.clone().unwrap_or_default(),
                |m| format!("median delta {m:.4e}")
            )
        )
    }) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("bench failed: {e}")),
    };
    let med = |k| summary.kind(k).and_then(|s| s.median_delta).unwrap_or(f64::NAN);
    let (i, p, r) = (
        med(AcquisitionKind::Iehvi),
        med(AcquisitionKind::Pehvi),
        med(AcquisitionKind::Random),
    );
    let complete = summary.kinds.iter().all(|k| k.complete);
    outcome(
        complete && i < r,
        format!(
            "median delta iehvi {i:.4e} < random {r:.4e}; pehvi {p:.4e} ({} random, not gated); {:.0}s",
            if p < r { "below" } else { "not below" },
            start.elapsed().as_secs_f64()
        ),
    )
}

fn run_cli(config: &Path, out: &Path, threads: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_robust-mobo"))
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(out)
        .arg("run")
        .arg(config)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for kind in ["iehvi", "pehvi"] {
        let config = dir.path().join(format!("{kind}.json"));
        std::fs::write(
            &config,
            format!(
                r#"{{"schema_version": 1, "problem": "4d", "n_initial": 12, "budget": 4, "seed": 11,
                    "acquisition": {{"kind": "{kind}", "n_pareto": 64, "n_u": 16}},
                    "optimizer": {{"n_probes": 128, "local_evals": 40}}}}"#
            ),
        )
        .unwrap();
        let runs: Vec<_> = [(1, "a"), (3, "b"), (1, "c")]
            .iter()
            .map(|(t, tag)| {
                let out = dir.path().join(format!("{kind}-{tag}"));
                (run_cli(&config, &out, *t), out)
            })
            .collect();
        if runs.iter().any(|(ok, _)| !ok) {
            return outcome(false, format!("{kind}: CLI run failed"));
        }
        for file in ["doe.csv", "history.jsonl"] {
            let bytes: Vec<Vec<u8>> = runs.iter().map(|(_, d)| std::fs::read(d.join(file)).unwrap()).collect();
            let same = bytes.windows(2).all(|w| w[0] == w[1]);
            pass &= same;
            detail.push(format!("{kind} {file} {}", if same { "identical" } else { "DIFFERS" }));
        }
    }
    outcome(pass, format!("{} (threads 1, 3, 1)", detail.join(", ")))
}

fn front(points: &[[f64; 2]]) -> FrontEstimate {
    FrontEstimate::from_points(
        points
            .iter()
            .map(|p| ObjectiveVector::new(p.to_vec()).unwrap())
            .collect(),
        Provenance::External,
    )
    .unwrap()
}

fn criterion_8() -> Outcome {
    let r = front(&[[1.0, 0.0], [0.0, 1.0]]);
    let origin = front(&[[0.0, 0.0]]);
    let corner = front(&[[1.0, 0.0]]);
    let checks = [
        ("delta(A, A)", delta_p(&r, &r, 2.0).unwrap(), 0.0),
        ("gd origin", gd_p(&origin, &r, 2.0).unwrap(), 1.0),
        ("igd origin", igd_p(&origin, &r, 2.0).unwrap(), 1.0),
        ("igd corner", igd_p(&corner, &r, 2.0).unwrap(), 1.0),
        ("delta corner", delta_p(&corner, &r, 2.0).unwrap(), 1.0),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(n, got, want)| format!("{n}: {got} != {want}"))
        .collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            "all identities exact".into()
        } else {
            failed.join("; ")
        },
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [Criterion; 8] = [
        (1, "coverage argmax", criterion_1),
        (2, "closed-form mean", criterion_2),
        (3, "hypervolume oracle", criterion_3),
        (4, "ehvi analytic vs MC", criterion_4),
        (5, "gp correctness", criterion_5),
        (6, "10d benchmark", criterion_6),
        (7, "determinism", criterion_7),
        (8, "metric identities", criterion_8),
    ];
    let mut failures = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {id} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
