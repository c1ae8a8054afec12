//! Galerkin ROMs of a 100-node string: low modes allow a much larger step,
//! the highest modes do not.

use romstab::model::{build_string_model, StringParams};
use romstab::reduction::modal_basis;
use romstab::stability::verify_rom_dt_dominance;

fn main() -> romstab::Result<()> {
    let model = build_string_model(&StringParams::new(100, 1.0, 10.0))?;
    for (label, modes) in [("lowest 10", 0..10), ("highest 10", 90..100)] {
        let basis = modal_basis(&model, &modes.collect::<Vec<_>>())?;
        let d = verify_rom_dt_dominance(&model, &basis)?;
        println!(
            "{label:>10}: dt_fom {:.4e}  dt_rom {:.4e}  gain {:.2}",
            d.dt_fom,
            d.dt_rom,
            d.dt_rom / d.dt_fom
        );
    }
    Ok(())
}
