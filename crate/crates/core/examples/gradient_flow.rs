//! Tangential gradient flow `Phi' = Du(Phi)^T xi` on the difference map:
//! `|Du|` is conserved, `xi^T u` increases, and the trajectory identities
//! hold to the accuracy of the time differences.

use aronsson_lab::flows::{tangential_flow, trajectory_identities};
use aronsson_lab::solutions::exp_diff_map;

fn main() -> aronsson_lab::error::Result<()> {
    let f = exp_diff_map();
    let xi = [1.0, 0.0];
    let x0 = [0.2, 0.1];
    let tr = tangential_flow(&f, &x0, &xi, 1.0, 1e-3)?;
    println!("termination: {:?}", tr.termination);
    println!(
        "{:>6} {:>10} {:>10} {:>12} {:>10}",
        "t", "x", "y", "|Du|", "xi.u"
    );
    let (gn, xu) = (tr.monitor("grad_norm"), tr.monitor("xi_u"));
    for k in (0..tr.times.len()).step_by(200) {
        let p = &tr.points[k];
        println!(
            "{:>6.3} {:>10.6} {:>10.6} {:>12.10} {:>10.6}",
            tr.times[k], p[0], p[1], gn[k], xu[k]
        );
    }
    println!(
        "|Du| drift {:.2e}, min xi.u increment {:.3e}",
        tr.drift("grad_norm"),
        tr.min_increment("xi_u")
    );

    println!("\n{:>8} {:>14} {:>14}", "dt", "first id", "second id");
    for dt in [2e-3, 1e-3, 5e-4] {
        let tr = tangential_flow(&f, &x0, &xi, 1.0, dt)?;
        let id = trajectory_identities(&tr, &f, &xi, &xi)?;
        println!(
            "{dt:>8.0e} {:>14.3e} {:>14.3e}",
            id.first_derivative,
            id.second_derivative.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
