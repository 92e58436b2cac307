//! Along the unit circle the tangential operator vanishes while the full
//! infinity-Laplacian has length 1; a constant competitor has less energy.

use aronsson_lab::hamiltonians::Hamiltonian;
use aronsson_lab::linalg::DEFAULT_RANK_TOL;
use aronsson_lab::operators::{inf_laplacian, tangential_inf_laplacian};
use aronsson_lab::relaxation::competitor_probe;
use aronsson_lab::solutions::{circle_curve_map, constant_map, parabola_curve_map, Domain};
use aronsson_lab::tensor::norm;
use std::f64::consts::PI;

fn main() -> aronsson_lab::error::Result<()> {
    let circle = circle_curve_map();
    println!("{:>6} {:>14} {:>14}", "t", "|Delta_T|", "|Delta_inf|");
    for k in 0..6 {
        let t = k as f64 * PI / 3.0;
        let j = circle.jet(&[t])?;
        println!(
            "{t:>6.3} {:>14.3e} {:>14.12}",
            norm(&tangential_inf_laplacian(&j)),
            norm(&inf_laplacian(&j, DEFAULT_RANK_TOL)?.value)
        );
    }

    let h = Hamiltonian::euclidean_weighted(2, 1, 1.0);
    let region = Domain::Box {
        lo: vec![0.0],
        hi: vec![2.0 * PI],
    };
    let e = competitor_probe(&circle, &constant_map(vec![1.0, 0.0], 1), &h, &region, 1000)?;
    println!(
        "E(circle) = {:.15}, E(constant) = {}, margin {}",
        e.e_u, e.e_w, e.margin
    );

    println!("\nparabola (t^2, 0)");
    let parabola = parabola_curve_map();
    for t in [0.25, 0.5, 1.0] {
        let j = parabola.jet(&[t])?;
        println!("t = {t}: Delta_T = {:?}", tangential_inf_laplacian(&j));
    }
    Ok(())
}
