//! Coverage probability of the 4D problem on a 64×64 grid of X, with the true objectives.

use robust_mobo::pareto::CandidateSet;
use robust_mobo::problems::problem;
use robust_mobo::sampling::grid_in;
use robust_mobo::uncertainty::coverage_probability;

fn main() -> robust_mobo::error::Result<()> {
    let p = problem("4d")?;
    let candidates = CandidateSet::new(grid_in(&p.x_bounds, 64), p.x_bounds.clone())?;
    let u = p.u_distribution.sample(512, 11, true)?;
    let field = coverage_probability(&p, &candidates, &u)?;

    let best = field.argmax();
    let prob = field.probabilities();
    println!("argmax x = {:.4?}  p = {:.3}", candidates.points()[best], prob[best]);
    let top = field.top_quantile(5.0);
    println!(
        "top 5%: {} candidates, p >= {:.3}",
        top.len(),
        top.iter().map(|&i| prob[i]).fold(1.0, f64::min)
    );
    let never = prob.iter().filter(|&&v| v == 0.0).count();
    println!("{never} of {} candidates are never Pareto optimal", prob.len());

    let path = std::env::temp_dir().join("coverage-4d.csv");
    field.write_csv(std::fs::File::create(&path)?, None)?;
    println!("wrote {}", path.display());
    Ok(())
}
