//! For a chain of rod elements the element bound is the CFL step l/c.

use romstab::model::build_rod_chain;
use romstab::stability::{element_dt_bound, fom_report};

fn main() -> romstab::Result<()> {
    let lengths = [1.0, 0.5, 2.0, 0.8];
    let speeds = [2.0, 2.0, 1.0, 4.0];
    let rod = build_rod_chain(&lengths, &speeds)?;
    let cfl = lengths.iter().zip(&speeds).map(|(l, c)| l / c).fold(f64::INFINITY, f64::min);
    let bound = element_dt_bound(rod.elements(), 0.0, 0.0, None)?;
    println!("min l/c        {cfl:.6}");
    println!("element bound  {:.6}", bound.dt_crit);
    println!("exact          {:.6}", fom_report(&rod)?.dt_crit);
    Ok(())
}
