//! Drives an optimization of a problem evaluated by a child process speaking JSON lines.
//!
//! The child reads `{"x": [...], "u": [...]}` per line and answers `{"f": [...]}`.

use robust_mobo::bounds::Bounds;
use robust_mobo::engine::{run_problem, RunConfig};
use robust_mobo::problems::ExternalProblemSpec;

const SCRIPT: &str = r#"
import json, sys
for line in sys.stdin:
    q = json.loads(line)
    x, u = q["x"], q["u"]
    f1 = (x[0] - u[0]) ** 2 + x[1] ** 2
    f2 = (x[0] - 1) ** 2 + (x[1] - u[0]) ** 2
    print(json.dumps({"f": [f1, f2]}), flush=True)
"#;

fn main() -> robust_mobo::error::Result<()> {
    let tmp = std::env::temp_dir().join("robust-mobo-external");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp)?;
    let script = tmp.join("toy.py");
    std::fs::write(&script, SCRIPT)?;

    let spec = ExternalProblemSpec {
        name: "toy".into(),
        command: "python3".into(),
        args: vec![script.display().to_string()],
        x_bounds: Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0])?,
        u_bounds: Bounds::new(vec![0.0], vec![1.0])?,
        n_objectives: 2,
        u_distribution: None,
    };
    let problem = spec.build()?;
    let mut config = RunConfig::new("toy", 5);
    config.n_initial = Some(10);
    let outcome = run_problem(&config, &problem, &tmp.join("run"))?;
    for (q, f) in outcome.doe.inputs().iter().zip(outcome.doe.outputs()).skip(10) {
        println!("x = {:.3?}  u = {:.3?}  f = ({:.4}, {:.4})", q.x, q.u, f[0], f[1]);
    }
    Ok(())
}
