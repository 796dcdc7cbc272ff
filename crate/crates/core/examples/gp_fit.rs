//! Fits the Matérn 5/2 surrogate on an initial 4D design and checks it on held-out points.

use robust_mobo::engine::initial_design;
use robust_mobo::gp::{FitConfig, GpSurrogate, JointPoint};
use robust_mobo::problems::problem;
use robust_mobo::sampling::sobol_in;

fn main() -> robust_mobo::error::Result<()> {
    let p = problem("4d")?;
    let doe = initial_design(&p, 30, 3)?;
    let model = GpSurrogate::fit(&doe, &p.joint_bounds(), &FitConfig::default(), None)?;
    for (k, h) in model.hyperparameters().iter().enumerate() {
        println!(
            "objective {k}: lengthscales {:.3?}  signal variance {:.3}",
            h.lengthscales, h.signal_variance
        );
    }

    let test: Vec<JointPoint> = sobol_in(&p.joint_bounds(), 8, 99)?
        .iter()
        .map(|z| JointPoint::split(z, p.nx()))
        .collect();
    let (means, sds) = model.predict(&test)?;
    for ((q, m), s) in test.iter().zip(&means).zip(&sds) {
        let truth = p.evaluate_checked(&q.x, &q.u)?;
        println!(
            "f1 {:8.4} ~ {:8.4} ± {:.4}   f2 {:8.4} ~ {:8.4} ± {:.4}",
            truth[0], m[0], s[0], truth[1], m[1], s[1]
        );
    }
    let json = serde_json::to_string(&model.snapshot("in-memory"))?;
    println!("snapshot is {} bytes", json.len());
    Ok(())
}
