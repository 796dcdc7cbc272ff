//! Runs a short integrated-EHVI loop on the 4D problem and prints the chosen points.

use robust_mobo::engine::{run, RunConfig};

fn main() -> robust_mobo::error::Result<()> {
    let mut config = RunConfig::new("4d", 10);
    config.n_initial = Some(20);
    config.seed = 7;
    let dir = std::env::temp_dir().join("robust-mobo-bo-loop");
    let _ = std::fs::remove_dir_all(&dir);

    let outcome = run(&config, &dir)?;
    for h in &outcome.history {
        println!(
            "iter {:2}  x = ({:.3}, {:.3})  u = ({:.3}, {:.3})  iehvi = {:.4}",
            h.iteration,
            h.x[0],
            h.x[1],
            h.u[0],
            h.u[1],
            h.acquisition_value.unwrap_or(0.0)
        );
    }
    println!("design size {} in {}", outcome.doe.len(), dir.display());
    Ok(())
}
