//! Horizontal/vertical split of a direction field against `H_P(Du)` for the
//! embedded scalar Aronsson map, the vertical system residual, and the
//! horizontal flow that conserves `H(Du)`.

use aronsson_lab::flows::{
    horizontal_flow, phase_split, vertical_field_derivative, vertical_system_residual,
};
use aronsson_lab::hamiltonians::euclidean_hamiltonian;
use aronsson_lab::linalg::DEFAULT_RANK_TOL;
use aronsson_lab::solutions::embedded_aronsson_map;
use aronsson_lab::tensor::{dot, norm};

fn main() -> aronsson_lab::error::Result<()> {
    let h = euclidean_hamiltonian(2, 2);
    let f = embedded_aronsson_map([1.0, -1.0]);
    let e2 = |_: &[f64]| vec![0.0, 1.0];

    println!(
        "{:>14} {:>12} {:>12} {:>12} {:>12}",
        "point", "|h|", "|v|", "v.Du", "Dv:H_P"
    );
    for x in [[0.4, 0.9], [0.7, -0.3], [-0.5, 0.6]] {
        let g = f.grad(&x)?;
        let s = phase_split(&h, &g, &e2(&x), DEFAULT_RANK_TOL)?;
        let dv = vertical_field_derivative(&h, &f, &x, e2, 1e-5, DEFAULT_RANK_TOL)?;
        let (r1, r2) = vertical_system_residual(&h, &f.jet(&x)?, &s.v, &dv)?;
        println!(
            "({:>5.2}, {:>5.2}) {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            x[0],
            x[1],
            norm(&s.h),
            norm(&s.v),
            norm(&r1),
            r2.abs()
        );
        assert!(dot(&s.h, &s.v).abs() < 1e-12);
    }

    let tr = horizontal_flow(
        &h,
        &f,
        &[0.4, 0.9],
        |_| vec![1.0, 0.0],
        0.5,
        1e-3,
        DEFAULT_RANK_TOL,
    )?;
    println!("\nhorizontal flow from (0.4, 0.9): {:?}", tr.termination);
    println!("end point {:?}", tr.points.last().unwrap());
    println!("H(Du) drift {:.2e}", tr.drift("hamiltonian"));
    let m = tr.monitor("inequality_margin");
    println!(
        "inequality margin min {:.3e}",
        m.iter().copied().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}
