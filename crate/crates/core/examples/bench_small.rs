//! A tiny replicated comparison of IEHVI against random search on the 4D problem.

use robust_mobo::acquisition::AcquisitionKind;
use robust_mobo::bench::{run_bench, BenchSpec};
use robust_mobo::engine::{AcquisitionConfig, OptimizerConfig, SCHEMA_VERSION};

fn main() -> robust_mobo::error::Result<()> {
    let spec = BenchSpec {
        schema_version: SCHEMA_VERSION,
        problem: "4d".into(),
        kinds: vec![AcquisitionKind::Iehvi, AcquisitionKind::Random],
        replications: 2,
        n_initial: Some(12),
        budget: 6,
        acquisition: AcquisitionConfig {
            n_u: 16,
            n_pareto: 128,
            ..AcquisitionConfig::default()
        },
        optimizer: OptimizerConfig {
            n_probes: 128,
            ..OptimizerConfig::default()
        },
        n_u_eval: 64,
        n_test: 512,
        seed: 5,
    };
    let out = std::env::temp_dir().join("robust-mobo-bench");
    let _ = std::fs::remove_dir_all(&out);
    let summary = run_bench(&spec, &out, |r| {
        println!(
            "{:7} rep {}  median delta {:.4e}",
            r.kind.name(),
            r.replication,
            r.median_delta.unwrap_or(f64::NAN)
        )
    })?;
    for k in &summary.kinds {
        println!(
            "{:7} median of medians {:.4e}",
            k.kind.name(),
            k.median_delta.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
