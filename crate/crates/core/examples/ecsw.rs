//! Energy-conserving sampling: trained weights and the hand-picked weight
//! that concentrates on one element.

use nalgebra::DMatrix;
use rand::Rng;
use romstab::hyper::{ecsw_reduce, ecsw_train, ecsw_weighted_operator, EcswWeights};
use romstab::instances::rng;
use romstab::linalg::sym_eig;
use romstab::model::{build_string_model, StringParams};
use romstab::reduction::{galerkin_reduce, modal_basis, SnapshotMatrix};
use romstab::stability::{element_dt_bound, reduced_report};

fn main() -> romstab::Result<()> {
    let model = build_string_model(&StringParams::new(5, 1.0, 10.0))?;
    let basis = modal_basis(&model, &[1])?;

    let w = EcswWeights::from_slice(&[0.0, 4.0, 0.0, 0.0])?;
    let r = sym_eig(&ecsw_weighted_operator(&model, &w)?)?;
    println!("eig(R) = {:.6?}", r.values.as_slice());
    let hrom = ecsw_reduce(&model, &w, &basis)?;
    let rom = galerkin_reduce(&model, &basis)?;
    println!("Kr: ecsw {:.5}, galerkin {:.5}", hrom.kr[(0, 0)], rom.kr[(0, 0)]);
    println!("element bound mu <= {:.1}", element_dt_bound(model.elements(), 0.0, 0.0, Some(&w))?.mu_max);

    let mut r = rng(1);
    let snaps = DMatrix::from_fn(5, 8, |_, _| r.gen_range(-1.0..1.0));
    let trained = ecsw_train(&model, &basis, &SnapshotMatrix::new(snaps)?, 1e-6)?;
    println!(
        "trained xi = {:.4?} (residual {:.1e})",
        trained.xi().as_slice(),
        trained.training_residual()
    );
    let rep = reduced_report(&ecsw_reduce(&model, &trained, &basis)?)?;
    println!("trained HROM dt_crit = {:.5}", rep.dt_crit);
    Ok(())
}
