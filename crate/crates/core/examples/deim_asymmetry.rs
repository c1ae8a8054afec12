//! DEIM on a random mesh gives a nonsymmetric reduced stiffness, so the
//! critical step falls back to bisection on the amplification matrix.

use romstab::stability::reduced_report;
use romstab::verify::{deim_asymmetry_instance, DEIM_ASYMMETRY_SEED};

fn main() -> romstab::Result<()> {
    let rm = deim_asymmetry_instance(DEIM_ASYMMETRY_SEED)?;
    println!("Kr =\n{:.4}", rm.kr);
    println!("relative asymmetry {:.4}", rm.stiffness_asymmetry());
    let rep = reduced_report(&rm)?;
    println!("dt_crit {:.6e} via {:?}", rep.dt_crit, rep.method);
    Ok(())
}
