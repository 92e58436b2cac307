//! Maps built from a 1-Lipschitz profile `K`: the K-integral map has
//! `|Du|^2 = 2` and solves the contracted system, and the rank-one map lies
//! where a segment-flat Hamiltonian vanishes with its gradient.

use aronsson_lab::hamiltonians::{
    euclidean_hamiltonian, rank1_monotonicity_probe, segment_flat_hamiltonian,
};
use aronsson_lab::linalg::{svd_projections, DEFAULT_RANK_TOL};
use aronsson_lab::operators::{contracted_aronsson_system, contracted_inf_system, ContractedData};
use aronsson_lab::solutions::{k_integral_map, rank_one_map, KProfile};
use aronsson_lab::tensor::norm;

fn main() -> aronsson_lab::error::Result<()> {
    for k in [KProfile::smooth_sine(0.7), KProfile::weierstrass(0.7)] {
        let f = k_integral_map(k.clone())?;
        println!("K-integral, profile {}", k.name());
        for x in [[0.3, -0.4], [1.2, 0.8]] {
            let j = f.jet(&x)?;
            let rank = svd_projections(&j.grad, DEFAULT_RANK_TOL)?.rank;
            let c = if f.jet_order() == 2 {
                format!(
                    "{:.2e}",
                    norm(&contracted_inf_system(&j, DEFAULT_RANK_TOL)?)
                )
            } else {
                "n/a".into()
            };
            println!(
                "  x = {x:?}: rank {rank}, |Du|^2 = {:.15}, contracted {c}",
                j.grad.frobenius_dot(&j.grad)
            );
        }
    }

    let (eta, a, b) = ([0.6, 0.8], [1.0, 0.0], [0.0, 1.0]);
    let flat = segment_flat_hamiltonian(&eta, &a, &b)?;
    let u = rank_one_map(&eta, &a, &b, KProfile::smooth_sine(0.7))?;
    println!("\nrank-one map, segment-flat H");
    for x in [[0.1, 0.2], [-0.7, 0.5]] {
        let j = u.jet(&x)?;
        let data = ContractedData::from_jet(&flat, &j)?;
        let sys = contracted_aronsson_system(&flat, &j.grad, &data, DEFAULT_RANK_TOL)?;
        println!(
            "  x = {x:?}: H {:.1e}, |H_P| {:.1e}, system {:.1e}, lambda {:.4}",
            flat.eval(&j.grad)?,
            flat.grad(&j.grad)?.max_abs(),
            norm(&sys),
            u.combination_coefficient(&x).unwrap_or(f64::NAN)
        );
    }
    // H_P vanishes on the flat segment, so no modulus can bound it from below
    for (name, h) in [
        ("segment-flat", flat),
        ("euclidean", euclidean_hamiltonian(2, 2)),
    ] {
        let m = rank1_monotonicity_probe(&h, 2000, 1)?;
        println!(
            "rank-one monotonicity, {name}: holds {}, worst margin {:.3e}",
            m.holds, m.worst_margin
        );
    }
    Ok(())
}
