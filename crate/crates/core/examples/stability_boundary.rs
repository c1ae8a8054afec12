//! Integrates a 20-node string just below and just above its critical step.

use nalgebra::DVector;
use romstab::integrator::{integrate, IntegrateOptions};
use romstab::model::{build_string_model, StringParams};
use romstab::stability::fom_report;

fn main() -> romstab::Result<()> {
    let model = build_string_model(&StringParams::new(20, 1.0, 10.0))?;
    let dt_crit = fom_report(&model)?.dt_crit;
    let x0 = DVector::from_fn(20, |i, _| 1e-3 * (0.37 * i as f64).sin());
    let v0 = DVector::zeros(20);
    for frac in [0.99, 1.01] {
        let dt = frac * dt_crit;
        let opts = IntegrateOptions {
            record_every: 1000,
            ..IntegrateOptions::new(dt, 10_000.0 * dt)
        };
        let traj = integrate(&model, &x0, &v0, &opts)?;
        match traj.divergence_step {
            Some(n) => println!("{frac:.2} dt_crit: diverged at step {n}"),
            None => println!("{frac:.2} dt_crit: bounded, max |x| = {:.3e}", traj.max_norm),
        }
    }
    Ok(())
}
