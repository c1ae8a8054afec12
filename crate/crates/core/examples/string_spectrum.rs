//! Five-node string: generalized eigenvalues of (K, M) and the critical step.

use romstab::linalg::gen_eig_diag_mass;
use romstab::model::{build_string_model, StringParams};
use romstab::stability::fom_report;

fn main() -> romstab::Result<()> {
    let model = build_string_model(&StringParams::new(5, 1.0, 10.0))?;
    let eig = gen_eig_diag_mass(model.stiffness(), model.mass())?;
    for (i, mu) in eig.values.iter().enumerate() {
        println!("mu_{i} = {mu:.6}");
    }
    println!("trace(M^-1 K) = {}", model.system_matrix().trace());
    let rep = fom_report(&model)?;
    println!("dt_crit = {:.6e}", rep.dt_crit);
    Ok(())
}
