//! Closed-form 2D expected hypervolume improvement against Monte Carlo.

use robust_mobo::hypervolume::{ehvi_2d, ehvi_mc, ehvi_qmc, ReferencePoint};

fn main() -> robust_mobo::error::Result<()> {
    let front = vec![vec![0.2, 0.8], vec![0.5, 0.5], vec![0.8, 0.2]];
    let r = ReferencePoint::new(vec![1.0, 1.0])?;
    let cases = [
        ([0.4, 0.4], [0.1, 0.1]),
        ([0.9, 0.9], [0.3, 0.05]),
        ([0.3, 0.6], [0.0, 0.0]),
    ];
    println!("{:>12} {:>12} {:>12} {:>10}", "exact", "mc", "qmc", "z");
    for (mean, sd) in cases {
        let exact = ehvi_2d(&mean, &sd, &front, &r)?;
        let (mc, se) = ehvi_mc(&mean, &sd, &front, &r, 20_000, 1)?;
        let qmc = ehvi_qmc(&mean, &sd, &front, &r, 4096, 1)?;
        let z = if se > 0.0 { (exact - mc) / se } else { 0.0 };
        println!("{exact:12.6} {mc:12.6} {qmc:12.6} {z:10.2}");
    }
    Ok(())
}
