//! On a small convex box away from the diagonal, the sampled `Lip` of the
//! difference map matches the supremum of the operator norm of `Du`, while
//! the Euclidean norm of `Du` is about 40% larger.

use aronsson_lab::relaxation::{lip_estimate, sup_operator_norm, sup_over_region};
use aronsson_lab::solutions::{exp_diff_map, Domain};
use std::f64::consts::FRAC_PI_2;

fn main() -> aronsson_lab::error::Result<()> {
    let f = exp_diff_map();
    let region = Domain::Box {
        lo: vec![0.7, 0.7 - FRAC_PI_2],
        hi: vec![0.85, 0.85 - FRAC_PI_2],
    };
    let op = sup_operator_norm(&f, &region, 20_000, 0)?;
    let eu = sup_over_region(&f, &region, 20_000, 0, |g| Ok(g.frobenius_norm()))?;
    println!("sup |Du|_op = {op:.6}, sup |Du| = {eu:.6}");
    println!("{:>8} {:>8} {:>10} {:>10}", "pairs", "used", "Lip", "gap");
    for pairs in [1_000, 10_000, 100_000] {
        let est = lip_estimate(&f, &region, pairs, 0)?;
        println!(
            "{pairs:>8} {:>8} {:>10.6} {:>9.3}%",
            est.pairs_used,
            est.value,
            100.0 * (op - est.value).abs() / est.value
        );
    }
    Ok(())
}
