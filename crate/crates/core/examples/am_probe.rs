//! Perturbation probe for absolute minimality: compares `E_inf` of `u` and
//! of `u + g` on a small ball, where `g` vanishes on the boundary sphere.
//! A negative margin would certify that `u` is not absolutely minimising.

use aronsson_lab::hamiltonians::euclidean_hamiltonian;
use aronsson_lab::relaxation::am_perturbation_probe;
use aronsson_lab::solutions::{exp_diff_map, exp_sum_map};

fn main() -> aronsson_lab::error::Result<()> {
    let h = euclidean_hamiltonian(2, 2);
    println!(
        "{:>9} {:>14} {:>12} {:>10} {:>10} {:>10}",
        "family", "x", "xi", "E(u)", "E(w)", "margin"
    );
    for f in [exp_diff_map(), exp_sum_map()] {
        for (x, xi) in [
            ([0.3, -0.2], [0.6, 0.8]),
            ([0.5, 0.5], [1.0, 0.0]),
            ([1.0, -0.5], [0.0, 1.0]),
        ] {
            let r = am_perturbation_probe(&f, &h, &x, 0.1, 0.05, &xi, 400)?;
            println!(
                "{:>9} ({:>5.2},{:>5.2}) ({:>4.1},{:>4.1}) {:>10.6} {:>10.6} {:>10.3e}",
                f.name, x[0], x[1], xi[0], xi[1], r.e_u, r.e_w, r.margin
            );
        }
    }
    Ok(())
}
