//! p-sweep on the scalar saddle `x^2 - y^2`: the renormalised right hand side
//! of the p-Euler-Lagrange split decays like `1/(p - 1)`.

use aronsson_lab::hamiltonians::euclidean_hamiltonian;
use aronsson_lab::relaxation::{p_sweep_diagnostics, SolverParams};
use aronsson_lab::solutions::saddle_map;

fn main() -> aronsson_lab::error::Result<()> {
    let h = euclidean_hamiltonian(1, 2);
    let saddle = saddle_map();
    let p_list = [4.0, 8.0, 16.0, 32.0, 64.0];
    let rep = p_sweep_diagnostics(
        &h,
        &saddle,
        [-1.0, -1.0],
        [1.0, 1.0],
        [21, 21],
        &p_list,
        &SolverParams::default(),
    )?;
    println!(
        "{:>6} {:>6} {:>10} {:>12} {:>12} {:>12}",
        "p", "iters", "converged", "med|RHS|", "med|LHS|", "med|gap|"
    );
    for r in &rep.rows {
        println!(
            "{:>6} {:>6} {:>10} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.p, r.iterations, r.converged, r.median_rhs, r.median_lhs, r.median_gap
        );
    }
    match rep.slope {
        Some(s) => println!("slope of log med|RHS| vs log(p - 1): {s:.3}"),
        None => println!("slope undefined (some median vanished)"),
    }

    println!("\nrefinement at p = 8");
    for m in [11, 21, 41] {
        let r = p_sweep_diagnostics(
            &h,
            &saddle,
            [-1.0, -1.0],
            [1.0, 1.0],
            [m, m],
            &[8.0],
            &SolverParams::default(),
        )?;
        println!(
            "{m:>3}x{m:<3} med|LHS - RHS| = {:.4e}",
            r.rows[0].median_gap
        );
    }
    Ok(())
}
