//! Non-dominated filtering and exact hypervolume on a small 2D point cloud.

use robust_mobo::hypervolume::{hv, hvi, ReferencePoint};
use robust_mobo::pareto::{dominates, ideal_nadir, non_dominated};

fn main() -> robust_mobo::error::Result<()> {
    let cloud = vec![
        vec![1.0, 5.0],
        vec![2.0, 3.0],
        vec![2.5, 3.5],
        vec![3.0, 2.0],
        vec![4.0, 4.0],
        vec![5.0, 1.0],
    ];
    let front_idx = non_dominated(&cloud)?;
    let front: Vec<&[f64]> = front_idx.iter().map(|&i| cloud[i].as_slice()).collect();
    println!("front indices {front_idx:?}");
    println!("(2,3) dominates (2.5,3.5): {}", dominates(&cloud[1], &cloud[2])?);

    let (ideal, nadir) = ideal_nadir(&front)?;
    println!("ideal {ideal:?}  nadir {nadir:?}");
    let r = ReferencePoint::new(vec![6.0, 6.0])?;
    println!("hv = {}", hv(&front, &r)?);
    for y in [[1.5, 2.5], [4.0, 4.0], [0.5, 0.5]] {
        println!("hvi{y:?} = {}", hvi(&y, &front, &r)?);
    }
    Ok(())
}
