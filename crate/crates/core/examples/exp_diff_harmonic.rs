//! The difference map `(cos x - cos y, sin x + sin y)` is infinity-harmonic
//! inside the rhombus `|x +- y| < pi`, fails at `(0, pi)`, and the sum map
//! carries all of its residual on the diagonal.

use aronsson_lab::linalg::DEFAULT_RANK_TOL;
use aronsson_lab::operators::{gamma_inf, inf_laplacian};
use aronsson_lab::solutions::{exp_diff_map, exp_sum_map};
use aronsson_lab::tensor::norm;
use std::f64::consts::PI;

fn main() -> aronsson_lab::error::Result<()> {
    let diff = exp_diff_map();
    let sum = exp_sum_map();

    println!(
        "{:>16} {:>12} {:>12} {:>12}",
        "point", "|Delta_inf|", "tangential", "normal"
    );
    for x in [[0.3, -0.2], [1.0, 0.5], [-2.0, 0.4], [0.0, PI]] {
        let r = inf_laplacian(&diff.jet(&x)?, DEFAULT_RANK_TOL)?;
        println!(
            "({:>6.3}, {:>6.3}) {:>12.3e} {:>12.3e} {:>12.3e}",
            x[0],
            x[1],
            norm(&r.value),
            norm(&r.tangential_part),
            norm(&r.normal_part)
        );
    }
    let at = inf_laplacian(&diff.jet(&[0.0, PI])?, DEFAULT_RANK_TOL)?.value;
    println!("Delta_inf u(0, pi) = ({:.12}, {:.3e})", at[0], at[1]);
    let g = gamma_inf(&diff.jet(&[0.3, -0.2])?, DEFAULT_RANK_TOL)?.value;
    println!("|Gamma_inf u(0.3, -0.2)| = {:.3e}", norm(&g));

    println!("\nsum map across the diagonal");
    for d in [0.0, 1e-3, 1e-1, 0.5] {
        let x = [0.4 + d, 0.4 - d];
        let r = inf_laplacian(&sum.jet(&x)?, DEFAULT_RANK_TOL)?;
        println!(
            "x - y = {:>6.3}: |Delta_inf| = {:.3e}",
            2.0 * d,
            norm(&r.value)
        );
    }
    Ok(())
}
