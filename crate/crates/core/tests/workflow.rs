use std::fs;
use std::path::Path;
use std::process::Command;

use robust_mobo::acquisition::AcquisitionKind;
use robust_mobo::bench::{run_bench, BenchSpec};
use robust_mobo::bounds::Bounds;
use robust_mobo::engine::{
    read_doe, read_history, run, run_problem, AcquisitionConfig, OptimizerConfig, RunConfig, SCHEMA_VERSION,
};
use robust_mobo::metrics::MetricReport;
use robust_mobo::problems::ExternalProblemSpec;
use robust_mobo::uncertainty::CoverageField;

const BIN: &str = env!("CARGO_BIN_EXE_robust-mobo");

fn small(problem: &str, budget: usize, kind: AcquisitionKind) -> RunConfig {
    let mut c = RunConfig::new(problem, budget);
    c.n_initial = Some(12);
    c.seed = 3;
    c.acquisition = AcquisitionConfig {
        kind,
        n_pareto: 64,
        n_u: 8,
        ..AcquisitionConfig::default()
    };
    c.optimizer = OptimizerConfig {
        n_probes: 64,
        top_k: 2,
        local_evals: 20,
        ..OptimizerConfig::default()
    };
    c
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("config-in.json");
    fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn zero_budget_keeps_only_the_initial_design() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&small("4d", 0, AcquisitionKind::Iehvi), tmp.path()).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.doe.len(), 12);
    assert!(tmp.path().join("model.json").exists());
}

#[test]
fn design_grows_by_the_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&small("4d", 3, AcquisitionKind::Pehvi), tmp.path()).unwrap();
    assert_eq!(out.doe.len(), 15);
    assert_eq!(out.history.len(), 3);
    assert_eq!(read_doe(&tmp.path().join("doe.csv")).unwrap(), out.doe);
    assert_eq!(read_history(tmp.path()).unwrap(), out.history);
}

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    let cfg = small("4d", 4, AcquisitionKind::Iehvi);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();

    // cut b back to two iterations, with one stray design row as after a crash
    let history = fs::read_to_string(b.path().join("history.jsonl")).unwrap();
    let kept: Vec<&str> = history.lines().take(2).collect();
    fs::write(b.path().join("history.jsonl"), format!("{}\n", kept.join("\n"))).unwrap();
    let doe = fs::read_to_string(b.path().join("doe.csv")).unwrap();
    let rows: Vec<&str> = doe.lines().take(1 + 12 + 3).collect();
    fs::write(b.path().join("doe.csv"), format!("{}\n", rows.join("\n"))).unwrap();
    fs::remove_file(b.path().join("model.json")).unwrap();

    run(&cfg, b.path()).unwrap();
    for f in ["doe.csv", "history.jsonl", "model.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn resume_refuses_a_different_config() {
    let tmp = tempfile::tempdir().unwrap();
    run(&small("4d", 0, AcquisitionKind::Iehvi), tmp.path()).unwrap();
    let mut other = small("4d", 0, AcquisitionKind::Iehvi);
    other.seed = 4;
    assert!(matches!(
        run(&other, tmp.path()),
        Err(robust_mobo::error::Error::Config(_))
    ));
}

#[test]
fn external_evaluator_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("obj.sh");
    fs::write(&script, "while read line; do\n  echo '{\"f\": [1.5, -2.25]}'\ndone\n").unwrap();
    let spec = ExternalProblemSpec {
        name: "ext".into(),
        command: "sh".into(),
        args: vec![script.display().to_string()],
        x_bounds: Bounds::unit(1),
        u_bounds: Bounds::unit(1),
        n_objectives: 2,
        u_distribution: None,
    };
    let problem = spec.build().unwrap();
    let mut cfg = small("ext", 0, AcquisitionKind::Random);
    cfg.n_initial = Some(4);
    let out = run_problem(&cfg, &problem, &tmp.path().join("run")).unwrap();
    assert!(out.doe.outputs().iter().all(|o| o.to_vec() == vec![1.5, -2.25]));
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();

    let typo = tmp.path().join("typo.json");
    fs::write(
        &typo,
        r#"{"schema_version": 1, "problem": "4d", "budget": 1, "budjet": 2}"#,
    )
    .unwrap();
    assert_eq!(cli(&["run", typo.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cli(&["coverage", "--problem", "11d"]).status.code(), Some(2));

    let mut cfg = small("dead", 0, AcquisitionKind::Random);
    cfg.external_problem = Some(ExternalProblemSpec {
        name: "dead".into(),
        command: "sh".into(),
        args: vec!["-c".into(), "exit 1".into()],
        x_bounds: Bounds::unit(1),
        u_bounds: Bounds::unit(1),
        n_objectives: 2,
        u_distribution: None,
    });
    let path = write_config(tmp.path(), &cfg);
    let out_dir = tmp.path().join("dead-run");
    let status = cli(&["run", &path, "--out", out_dir.to_str().unwrap()]).status;
    assert_eq!(status.code(), Some(3));

    let run_dir = tmp.path().join("no-model");
    run(&small("4d", 0, AcquisitionKind::Random), &run_dir).unwrap();
    fs::remove_file(run_dir.join("model.json")).unwrap();
    assert_eq!(cli(&["metrics", run_dir.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn cli_problems_lists_the_catalog() {
    let out = cli(&["problems"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["4d", "10d", "10d-bis"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)));
    }
}

#[test]
fn cli_metrics_writes_one_delta_per_u() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    run(&small("4d", 1, AcquisitionKind::Iehvi), &dir).unwrap();
    let status = cli(&["metrics", dir.to_str().unwrap(), "--n-u", "40", "--n-test", "256"]).status;
    assert!(status.success());
    let csv = fs::read_to_string(dir.join("deltas.csv")).unwrap();
    assert_eq!(csv.lines().count(), 41);
    let report: MetricReport = serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    let mut d: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    d.sort_by(f64::total_cmp);
    assert_eq!(report.summary.median, (d[19] + d[20]) / 2.0);
    assert_eq!(report.provenance.n_u, 40);
}

#[test]
fn cli_coverage_top_quantile() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = [
        "coverage",
        "--problem",
        "4d",
        "--grid",
        "20",
        "--n-u",
        "64",
        "--top-quantile",
        "10",
        "--out",
        out,
    ];
    assert!(cli(&args).status.success());
    let (points, probs) = CoverageField::read_csv(fs::File::open(tmp.path().join("coverage.csv")).unwrap()).unwrap();
    assert!(probs.len() >= 40 && probs.len() < 400, "{} rows", probs.len());
    assert_eq!(points.len(), probs.len());

    assert!(cli(&[
        "coverage",
        "--problem",
        "4d",
        "--grid",
        "20",
        "--n-u",
        "64",
        "--out",
        out
    ])
    .status
    .success());
    let (_, all) = CoverageField::read_csv(fs::File::open(tmp.path().join("coverage.csv")).unwrap()).unwrap();
    assert_eq!(all.len(), 400);
    let cut = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(all.iter().filter(|&&p| p > cut).count() < probs.len());
}

#[test]
fn coverage_refuses_huge_grids() {
    assert_eq!(
        cli(&["coverage", "--problem", "10d", "--grid", "30"]).status.code(),
        Some(2)
    );
}

#[test]
fn bench_counts_runs_and_medians() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = BenchSpec {
        schema_version: SCHEMA_VERSION,
        problem: "4d".into(),
        kinds: vec![AcquisitionKind::Iehvi, AcquisitionKind::Random],
        replications: 2,
        n_initial: Some(8),
        budget: 2,
        acquisition: AcquisitionConfig {
            n_pareto: 32,
            n_u: 4,
            ..AcquisitionConfig::default()
        },
        optimizer: OptimizerConfig {
            n_probes: 32,
            top_k: 1,
            local_evals: 10,
            ..OptimizerConfig::default()
        },
        n_u_eval: 16,
        n_test: 128,
        seed: 1,
    };
    let summary = run_bench(&spec, tmp.path(), |_| {}).unwrap();
    assert_eq!(summary.runs.len(), 4);
    for k in &summary.kinds {
        assert!(k.complete);
        assert_eq!(k.run_medians.len(), 2);
        assert!(k.median_delta.is_some() && k.median_coverage_l2.is_some());
    }
    assert!(tmp.path().join("bench-summary.json").exists());
    assert!(tmp.path().join("iehvi-rep1").join("metrics.json").exists());
    // replications share their initial design across kinds
    let a = fs::read_to_string(tmp.path().join("iehvi-rep0/doe.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("random-rep0/doe.csv")).unwrap();
    assert_eq!(
        a.lines().take(9).collect::<Vec<_>>(),
        b.lines().take(9).collect::<Vec<_>>()
    );
}
