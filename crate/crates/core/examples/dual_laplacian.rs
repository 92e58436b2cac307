//! The dual infinity-Laplacian on a jet with a separated top eigenvalue of
//! `Du Du^T`, with the eigenvector derivative taken by finite differences
//! and by the perturbation formula.

use aronsson_lab::hamiltonians::dual_norm_hamiltonian;
use aronsson_lab::operators::{dual_inf_laplacian, random_jet, tangential_aronsson, EigenFieldJet};
use aronsson_lab::tensor::{dot, norm, scaled, sub};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aronsson_lab::error::Result<()> {
    let gap = 0.5;
    let h = dual_norm_hamiltonian(2, 2, gap);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shown = 0;
    while shown < 5 {
        let j = random_jet(&mut rng, 2, 2);
        let Ok(an) = EigenFieldJet::from_jet_analytic(&j, gap) else {
            continue;
        };
        let fd = EigenFieldJet::from_jet_fd(&j, gap, 1e-5)?;
        let d = dual_inf_laplacian(&j, &an, gap)?;
        let d_fd = dual_inf_laplacian(&j, &fd, gap)?;
        let flip = dual_inf_laplacian(&j, &an.flipped(), gap)?;
        // e e^T Delta_dual against the tangential Aronsson operator of the dual norm
        let proj = scaled(&an.e, dot(&an.e, &d));
        let t = tangential_aronsson(&h, &j)?;
        println!(
            "|Delta_dual| {:.4}, fd vs analytic De {:.1e}, sign flip {:.1e}, e e^T Delta_dual - A_T {:.1e}",
            norm(&d),
            norm(&sub(&d, &d_fd)),
            norm(&sub(&d, &flip)),
            norm(&sub(&proj, &t))
        );
        shown += 1;
    }
    Ok(())
}
