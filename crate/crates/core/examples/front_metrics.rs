//! Short run on the 4D problem, then Δ₂ between the true and plug-in conditional fronts.

use robust_mobo::bench::{evaluate_run, EvaluationSpec};
use robust_mobo::engine::{run, RunConfig};

fn main() -> robust_mobo::error::Result<()> {
    let mut config = RunConfig::new("4d", 8);
    config.n_initial = Some(16);
    config.seed = 21;
    let dir = std::env::temp_dir().join("robust-mobo-metrics");
    let _ = std::fs::remove_dir_all(&dir);
    run(&config, &dir)?;

    let report = evaluate_run(&dir, &EvaluationSpec::new(128, 1024, 0))?;
    let s = report.summary;
    println!("delta_2 over {} u samples:", report.deltas.len());
    println!(
        "  min {:.4}  q25 {:.4}  median {:.4}  q75 {:.4}  max {:.4}",
        s.min, s.q25, s.median, s.q75, s.max
    );
    println!("coverage L2 {:.5}", report.coverage_l2);
    Ok(())
}
