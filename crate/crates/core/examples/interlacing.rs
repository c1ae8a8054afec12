//! Eigenvalues of a random Galerkin ROM interlace those of the full model.

use romstab::instances::{spectral_instance, trial_rng};
use romstab::linalg::{gen_eig_diag_mass, sym_eig, SymmetricMatrix};
use romstab::reduction::galerkin_reduce;
use romstab::stability::check_interlacing;

fn main() -> romstab::Result<()> {
    let inst = spectral_instance(&mut trial_rng(42, 0), 12)?;
    let full = gen_eig_diag_mass(inst.model.stiffness(), inst.model.mass())?.values;
    let rom = galerkin_reduce(&inst.model, &inst.basis)?;
    let red = sym_eig(&SymmetricMatrix::symmetrize(&rom.kr))?.values;
    println!("full:    {:.4?}", full.as_slice());
    println!("reduced: {:.4?}", red.as_slice());
    let chk = check_interlacing(full.as_slice(), red.as_slice())?;
    println!("interlaced: {} (worst violation {:.1e})", chk.ok, chk.worst_violation);
    Ok(())
}
