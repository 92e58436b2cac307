//! Points where the tangents of the two curves of a separable map are
//! colinear. For the difference map they form the diagonal `x = y`, where
//! `Du` drops to rank 1.

use aronsson_lab::solutions::{exp_diff_map, interface_locus, GridSpec};

fn main() -> aronsson_lab::error::Result<()> {
    let f = exp_diff_map();
    let grid = GridSpec::square(-3.0, 3.0, 121);
    let locus = interface_locus(&f, &grid, 1e-3)?;
    let confirmed: Vec<_> = locus.iter().filter(|p| p.confirmed).collect();
    println!("{} grid hits, {} confirmed", locus.len(), confirmed.len());
    let far = confirmed
        .iter()
        .map(|p| (p.refined[0] - p.refined[1]).abs() / 2f64.sqrt())
        .fold(0.0, f64::max);
    println!("max distance of confirmed points from x = y: {far:.2e}");
    println!(
        "{:>22} {:>5} {:>22} {:>10}",
        "grid point", "rank", "refined", "defect"
    );
    for p in confirmed.iter().step_by((confirmed.len() / 8).max(1)) {
        println!(
            "({:>9.5}, {:>9.5}) {:>5} ({:>9.5}, {:>9.5}) {:>10.1e}",
            p.point[0], p.point[1], p.rank, p.refined[0], p.refined[1], p.refined_defect
        );
    }
    Ok(())
}
