//! Evaluates PEHVI, WPEHVI and IEHVI of one fitted surrogate at a few probe points.

use robust_mobo::acquisition::{iehvi, pehvi, wpehvi, AcquisitionKind, AcquisitionSpec, ReferencePolicy};
use robust_mobo::engine::initial_design;
use robust_mobo::gp::{FitConfig, GpSurrogate};
use robust_mobo::pareto::CandidateSet;
use robust_mobo::problems::problem;
use robust_mobo::sampling::sobol_in;

fn main() -> robust_mobo::error::Result<()> {
    let p = problem("10d-bis")?;
    let doe = initial_design(&p, 60, 1)?;
    let model = GpSurrogate::fit(&doe, &p.joint_bounds(), &FitConfig::default(), None)?;

    let mut spec = AcquisitionSpec {
        kind: AcquisitionKind::Pehvi,
        beta: 10.0,
        pareto_candidates: CandidateSet::new(sobol_in(&p.x_bounds, 256, 2)?, p.x_bounds.clone())?,
        u_samples: None,
        ref_policy: ReferencePolicy::default(),
    };
    let u_set = p.u_distribution.sample(32, 3, true)?;

    let probes = sobol_in(&p.joint_bounds(), 5, 4)?;
    println!("{:>10} {:>10} {:>10} {:>10}", "density", "pehvi", "wpehvi", "iehvi");
    for z in &probes {
        let (x, u) = z.split_at(p.nx());
        spec.kind = AcquisitionKind::Pehvi;
        let a = pehvi(&model, x, u, &spec)?;
        let b = wpehvi(&model, x, u, &spec, &p.u_distribution)?;
        spec.kind = AcquisitionKind::Iehvi;
        spec.u_samples = Some(u_set.clone());
        let c = iehvi(&model, x, &u_set, &spec)?;
        println!("{:10.4} {a:10.4e} {b:10.4e} {c:10.4e}", p.u_distribution.density(u));
    }
    Ok(())
}
