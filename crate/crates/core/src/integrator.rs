//! Staggered central-difference integration.
//!
//! One step maps `(xⁿ, ẋⁿ⁻¹ᐟ², tⁿ)` to `(xⁿ⁺¹, ẋⁿ⁺¹ᐟ², tⁿ⁺¹)`:
//!
//! ```text
//! ẍⁿ      = M⁻¹ (f_ext(tⁿ) − C ẋⁿ⁻¹ᐟ² − K xⁿ)
//! ẋⁿ⁺¹ᐟ² = ẋⁿ⁻¹ᐟ² + Δt ẍⁿ
//! xⁿ⁺¹    = xⁿ + Δt ẋⁿ⁺¹ᐟ²
//! ```
//!
//! The damping force uses the lagged half-step velocity. On the first step the
//! initial velocity `ẋ⁰` stands in for `ẋ⁻¹ᐟ²`. Recorded velocities are the
//! half-step values as produced; they are not interpolated to `tⁿ`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, DiagonalPositiveMatrix};
use crate::model::FullOrderModel;

/// Default divergence threshold relative to `max(1, ‖x⁰‖)`.
pub const DEFAULT_BLOWUP: f64 = 1e6;

/// A linear(ized) second-order system as seen by the integrator.
pub trait SecondOrderSystem {
    /// Length of the state vectors.
    fn dim(&self) -> usize;

    /// Nodal force `f_ext(t) − C v − K x`.
    fn force_at(&self, x: &DVector<f64>, v_half: &DVector<f64>, t: f64) -> DVector<f64>;

    /// Accelerations from nodal forces (`M⁻¹ f`, or a least-squares solve for
    /// non-square hyper-reduced mass operators).
    fn mass_inverse_apply(&self, force: &DVector<f64>) -> DVector<f64>;
}

impl SecondOrderSystem for FullOrderModel {
    fn dim(&self) -> usize {
        FullOrderModel::dim(self)
    }

    fn force_at(&self, x: &DVector<f64>, v_half: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut f = self.external_force().eval(t, self.dim());
        f -= self.damping_apply(v_half);
        f -= self.stiffness().as_matrix() * x;
        f
    }

    fn mass_inverse_apply(&self, force: &DVector<f64>) -> DVector<f64> {
        self.mass().apply_inverse(force)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorState {
    pub x: DVector<f64>,
    /// `ẋⁿ⁻¹ᐟ²`; holds `ẋ⁰` before the first step.
    pub v_half: DVector<f64>,
    pub t: f64,
    pub n: usize,
}

impl IntegratorState {
    pub fn initial(x0: DVector<f64>, v0: DVector<f64>, t0: f64) -> Result<Self> {
        if x0.len() != v0.len() {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: x0.len(),
                actual: v0.len(),
            });
        }
        Ok(IntegratorState {
            x: x0,
            v_half: v0,
            t: t0,
            n: 0,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v_half.iter()).all(|v| v.is_finite())
    }
}

/// One central-difference step with explicit operator closures.
pub fn cd_step_with<Minv, Force>(
    mass_inverse_apply: Minv,
    force_at: Force,
    state: &IntegratorState,
    dt: f64,
) -> IntegratorState
where
    Minv: Fn(&DVector<f64>) -> DVector<f64>,
    Force: Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
{
    let acc = mass_inverse_apply(&force_at(&state.x, &state.v_half, state.t));
    let v_half = &state.v_half + acc * dt;
    let x = &state.x + &v_half * dt;
    IntegratorState {
        x,
        v_half,
        t: state.t + dt,
        n: state.n + 1,
    }
}

/// One central-difference step of `sys`.
pub fn cd_step<S: SecondOrderSystem + ?Sized>(
    sys: &S,
    state: &IntegratorState,
    dt: f64,
) -> IntegratorState {
    cd_step_with(
        |f| sys.mass_inverse_apply(f),
        |x, v, t| sys.force_at(x, v, t),
        state,
        dt,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub blowup: f64,
}

impl IntegrateOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegrateOptions {
            dt,
            t_end,
            record_every: 1,
            blowup: DEFAULT_BLOWUP,
        }
    }

    /// Number of steps needed to reach `t_end` (rounded to the nearest step).
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor().max(0.0) as usize
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Displacements, one entry per record; the first is the initial state.
    pub states: Vec<DVector<f64>>,
    /// Step index of each record.
    pub steps: Vec<usize>,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
    /// Largest `‖xⁿ‖₂` seen over all steps, recorded or not.
    pub max_norm: f64,
    pub final_state: IntegratorState,
}

impl Trajectory {
    /// Writes `t,x_0,…,x_{d-1}` rows for every recorded step after the
    /// initial condition, followed by `# diverged=<bool> step=<n>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_mapped(out, |x| x.clone())
    }

    /// As [`Trajectory::write_csv`] with each state passed through `map`
    /// (e.g. reconstruction from reduced coordinates).
    pub fn write_csv_mapped<W: Write, F>(&self, out: W, map: F) -> Result<()>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let d = self.states.first().map(|x| map(x).len()).unwrap_or(0);
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for ((t, x), &n) in self.times.iter().zip(&self.states).zip(&self.steps) {
            if n == 0 {
                continue;
            }
            let mut row = vec![format_float(*t)];
            row.extend(map(x).iter().map(|v| format_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let step = self.divergence_step.unwrap_or(self.final_state.n);
        writeln!(inner, "# diverged={} step={}", self.diverged, step)?;
        Ok(())
    }
}

fn format_float(v: f64) -> String {
    format!("{v:e}")
}

/// Repeated [`cd_step`] from `(x0, v0)` at `t = 0`. Stops early and flags
/// divergence when `‖x‖₂ > blowup·max(1, ‖x0‖₂)` or the state is non-finite.
pub fn integrate<S: SecondOrderSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let d = sys.dim();
    for (ctx, len) in [("x0", x0.len()), ("v0", v0.len())] {
        if len != d {
            return Err(Error::DimensionMismatch {
                context: if ctx == "x0" { "initial displacement" } else { "initial velocity" },
                expected: d,
                actual: len,
            });
        }
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", opts.dt)));
    }
    if !(opts.blowup > 0.0) {
        return Err(Error::InvalidParameter("blowup must be > 0".into()));
    }
    if opts.t_end < 0.0 {
        return Err(Error::InvalidParameter("t_end must be >= 0".into()));
    }
    let every = opts.record_every.max(1);
    let threshold = opts.blowup * x0.norm().max(1.0);
    let mut state = IntegratorState::initial(x0.clone(), v0.clone(), 0.0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        steps: vec![0],
        diverged: false,
        divergence_step: None,
        max_norm: x0.norm(),
        final_state: state.clone(),
    };
    let total = opts.steps();
    for _ in 0..total {
        state = cd_step(sys, &state, opts.dt);
        let norm = state.x.norm();
        if norm.is_finite() {
            traj.max_norm = traj.max_norm.max(norm);
        }
        let blown = !state.is_finite() || norm > threshold;
        if blown || state.n % every == 0 || state.n == total {
            traj.times.push(state.t);
            traj.states.push(state.x.clone());
            traj.steps.push(state.n);
        }
        if blown {
            traj.diverged = true;
            traj.divergence_step = Some(state.n);
            break;
        }
    }
    traj.final_state = state;
    Ok(traj)
}

/// Amplification matrix of the homogeneous recurrence on `yⁿ = [xⁿ; xⁿ⁻¹]`
/// built from the operators `M⁻¹K` and `M⁻¹C`.
pub fn amplification_from_operators(
    minv_k: &DMatrix<f64>,
    minv_c: &DMatrix<f64>,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let k = minv_k.nrows();
    if minv_k.shape() != (k, k) || minv_c.shape() != (k, k) {
        return Err(Error::DimensionMismatch {
            context: "amplification operators",
            expected: k,
            actual: minv_c.nrows(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let id = DMatrix::<f64>::identity(k, k);
    let mut a = DMatrix::<f64>::zeros(2 * k, 2 * k);
    let top_left = &id * 2.0 - minv_k * (dt * dt) - minv_c * dt;
    let top_right = minv_c * dt - &id;
    a.view_mut((0, 0), (k, k)).copy_from(&top_left);
    a.view_mut((0, k), (k, k)).copy_from(&top_right);
    a.view_mut((k, 0), (k, k)).copy_from(&id);
    Ok(a)
}

/// `[[2I − Δt²M⁻¹K − ΔtM⁻¹C, ΔtM⁻¹C − I], [I, 0]]`
pub fn amplification_matrix(
    m: &DiagonalPositiveMatrix,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let n = m.order();
    if k.shape() != (n, n) || c.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "amplification matrix",
            expected: n,
            actual: k.nrows(),
        });
    }
    let d = m.diag();
    let minv_k = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / d[i]);
    let minv_c = DMatrix::from_fn(n, n, |i, j| c[(i, j)] / d[i]);
    amplification_from_operators(&minv_k, &minv_c, dt)
}

/// 2×2 amplification matrix of a single mode with eigenvalue `mu` and damping
/// ratio `xi`.
pub fn modal_amplification(mu: f64, xi: f64, dt: f64) -> DMatrix<f64> {
    let d = 2.0 * xi * mu.sqrt() * dt;
    DMatrix::from_row_slice(2, 2, &[2.0 - d - dt * dt * mu, d - 1.0, 1.0, 0.0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationStability {
    pub stable: bool,
    pub radius: f64,
    pub repeated_unit_root: bool,
}

/// Stable iff `ρ(A) ≤ 1 + 1e-10` and no eigenvalue of unit modulus is repeated.
pub fn assess_amplification_stability(a: &DMatrix<f64>) -> Result<AmplificationStability> {
    let sr = spectral_radius(a)?;
    let repeated_unit_root = sr.repeated_at_radius && (sr.radius - 1.0).abs() <= 1e-8;
    Ok(AmplificationStability {
        stable: sr.radius <= 1.0 + 1e-10 && !repeated_unit_root,
        radius: sr.radius,
        repeated_unit_root,
    })
}
