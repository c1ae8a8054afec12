//! Critical time steps of the central-difference scheme.
//!
//! For Rayleigh damping a mode with eigenvalue `μ` has damping ratio
//! `ξ = a1/(2√μ) + a2√μ/2` and is stable for `Δt ≤ (2/√μ)(√(ξ²+1) − ξ)`. As a
//! function of `x = √μ` this bound is `g(x)`, which is decreasing, so the
//! largest eigenvalue alone fixes the critical step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::EcswWeights;
use crate::integrator::amplification_from_operators;
use crate::linalg::{gen_eig_diag_mass, general_eigenvalues, spectral_radius, sym_eig};
use crate::model::{ElementBlock, FullOrderModel};
use crate::reduction::{galerkin_reduce, reduced_eigenvalues, Provenance, ReducedBasis, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ModalExact,
    ElementBound,
    EcswBound,
    /// Bisection on the spectral radius of the amplification matrix; used
    /// when the reduced operators are not symmetric with Rayleigh damping.
    AmplificationBisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Fom,
    Rom,
    Hrom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mu_max: f64,
    pub xi: f64,
    pub dt_crit: f64,
    pub method: Method,
    pub model_kind: ModelKind,
}

impl StabilityReport {
    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.model_kind = kind;
        self
    }

    /// Applies a safety factor to `dt_crit`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.dt_crit *= factor;
        self
    }
}

fn check_damping(a1: f64, a2: f64) -> Result<()> {
    if !(a1 >= 0.0 && a2 >= 0.0 && a1.is_finite() && a2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Rayleigh coefficients must be non-negative (a1 = {a1}, a2 = {a2})"
        )));
    }
    Ok(())
}

/// `ξ = a1/(2√μ) + a2√μ/2`
pub fn damping_ratio(mu: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("eigenvalue {mu} must be positive")));
    }
    check_damping(a1, a2)?;
    let s = mu.sqrt();
    Ok(a1 / (2.0 * s) + a2 * s / 2.0)
}

/// `Δt = (2/√μ)(√(ξ²+1) − ξ)`, evaluated as `2/(√μ(√(ξ²+1) + ξ))`.
pub fn critical_dt_modal(mu: f64, xi: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("eigenvalue {mu} must be positive")));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidParameter(format!("damping ratio {xi} must be non-negative")));
    }
    Ok(2.0 / (mu.sqrt() * (xi.hypot(1.0) + xi)))
}

/// `g(x) = (2/x)(√(h²+1) − h)`, `h = a1/(2x) + a2 x/2`, evaluated as
/// `2/(x(√(h²+1) + h))`. Tends to `2/a1` as `x → 0` and to zero as `x → ∞`.
pub fn g_eval(x: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("g(x) needs x > 0, got {x}")));
    }
    check_damping(a1, a2)?;
    let h = a1 / (2.0 * x) + a2 * x / 2.0;
    Ok(2.0 / (x * (h.hypot(1.0) + h)))
}

/// `Δt_crit = g(√μ_max)`; the report is tagged as a full-order, modal-exact
/// result (see [`StabilityReport::with_kind`]).
pub fn critical_dt_system(mu_max: f64, a1: f64, a2: f64) -> Result<StabilityReport> {
    let xi = damping_ratio(mu_max, a1, a2)?;
    Ok(StabilityReport {
        mu_max,
        xi,
        dt_crit: g_eval(mu_max.sqrt(), a1, a2)?,
        method: Method::ModalExact,
        model_kind: ModelKind::Fom,
    })
}

/// Exact critical step of the full-order model from the largest eigenvalue
/// of `M⁻¹K`.
pub fn fom_report(model: &FullOrderModel) -> Result<StabilityReport> {
    let mu = gen_eig_diag_mass(model.stiffness(), model.mass())?.max();
    critical_dt_system(mu, model.a1(), model.a2())
}

fn kind_of(rm: &ReducedModel) -> ModelKind {
    match rm.provenance {
        Provenance::Galerkin => ModelKind::Rom,
        _ => ModelKind::Hrom,
    }
}

/// `Cr = a1 Mr + a2 Kr` and all three symmetric.
fn rayleigh_consistent(rm: &ReducedModel) -> bool {
    if !rm.is_square() {
        return false;
    }
    let scale = rm.kr.amax().max(rm.mr.amax()).max(f64::MIN_POSITIVE);
    let sym = |a: &DMatrix<f64>| (a - a.transpose()).amax() <= 1e-10 * scale;
    let expected = &rm.mr * rm.a1 + &rm.kr * rm.a2;
    let cscale = expected.amax().max(scale);
    sym(&rm.mr) && sym(&rm.kr) && (&rm.cr - expected).amax() <= 1e-10 * cscale
}

/// Critical step of a reduced or hyper-reduced model.
///
/// Symmetric Rayleigh-damped reduced models use the modal formula on the
/// largest eigenvalue of `Mr⁻¹Kr`. Anything else is handled by bisection on
/// the spectral radius of the reduced amplification matrix, assuming
/// stability is lost once and for all past the critical step; models that
/// are unstable at every positive step yield [`Error::Unstable`].
pub fn reduced_report(rm: &ReducedModel) -> Result<StabilityReport> {
    let kind = kind_of(rm);
    if rayleigh_consistent(rm) {
        let mu = reduced_eigenvalues(rm)?.max();
        return Ok(critical_dt_system(mu, rm.a1, rm.a2)?.with_kind(kind));
    }
    let minv_k = rm.minv_k();
    let minv_c = rm.minv_c();
    let mu = general_eigenvalues(&minv_k)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("reduced stiffness has no nonzero eigenvalue".into()));
    }
    let dt = amplification_bisection(&minv_k, &minv_c, 2.0 / mu.sqrt())?;
    Ok(StabilityReport {
        mu_max: mu,
        xi: damping_ratio(mu, rm.a1, rm.a2)?,
        dt_crit: dt,
        method: Method::AmplificationBisection,
        model_kind: kind,
    })
}

/// Spectral radius tolerance of the bisection. Zero-stiffness modes produce
/// a Jordan block at 1 whose computed eigenvalues are perturbed by `O(√ε)`.
const BISECTION_RADIUS_TOL: f64 = 1e-7;

fn amplification_bisection(minv_k: &DMatrix<f64>, minv_c: &DMatrix<f64>, guess: f64) -> Result<f64> {
    let stable = |dt: f64| -> Result<bool> {
        let a = amplification_from_operators(minv_k, minv_c, dt)?;
        Ok(spectral_radius(&a)?.radius <= 1.0 + BISECTION_RADIUS_TOL)
    };
    let mut lo = guess * 1e-6;
    if !stable(lo)? {
        return Err(Error::Unstable);
    }
    let mut hi = guess;
    let mut expansions = 0;
    while stable(hi)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NotConverged {
                routine: "amplification bisection bracket",
                residual: hi,
            });
        }
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Element-wise upper bound on the system eigenvalue,
/// `μ ≤ max_e ξ_e λ_max(M_e⁻¹K_e)` (`ξ_e = 1` without weights), and the
/// resulting conservative step.
pub fn element_dt_bound(
    elements: &[ElementBlock],
    a1: f64,
    a2: f64,
    weights: Option<&EcswWeights>,
) -> Result<StabilityReport> {
    if elements.is_empty() {
        return Err(Error::InvalidParameter("element bound needs at least one element".into()));
    }
    if let Some(w) = weights {
        if w.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                context: "ECSW weights vs elements",
                expected: elements.len(),
                actual: w.len(),
            });
        }
    }
    let mut mu = 0.0f64;
    for (e, el) in elements.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w.xi()[e]);
        mu = mu.max((w * el.max_eigenvalue()?).abs());
    }
    let (method, kind) = match weights {
        Some(_) => (Method::EcswBound, ModelKind::Hrom),
        None => (Method::ElementBound, ModelKind::Fom),
    };
    Ok(StabilityReport {
        method,
        model_kind: kind,
        ..critical_dt_system(mu, a1, a2)?
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterlacingCheck {
    pub ok: bool,
    /// Largest signed amount by which a bound is exceeded (≤ 0 when all hold).
    pub worst_violation: f64,
}

/// Checks `λ_i − tol ≤ λ̃_i ≤ λ_{m−k+i} + tol` with `tol = 1e-8·max|λ|`.
pub fn check_interlacing(full: &[f64], reduced: &[f64]) -> Result<InterlacingCheck> {
    let (m, k) = (full.len(), reduced.len());
    if k > m {
        return Err(Error::InvalidParameter(format!("{k} reduced eigenvalues for {m} full ones")));
    }
    for v in [full, reduced] {
        if let Some(i) = (1..v.len()).find(|&i| !(v[i] >= v[i - 1])) {
            return Err(Error::Unsorted(i));
        }
    }
    let scale = full
        .iter()
        .chain(reduced)
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-8 * scale;
    let worst = (0..k)
        .map(|i| (full[i] - reduced[i]).max(reduced[i] - full[m - k + i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let worst = if k == 0 { 0.0 } else { worst };
    Ok(InterlacingCheck {
        ok: worst <= tol,
        worst_violation: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dominance {
    pub dt_fom: f64,
    pub dt_rom: f64,
    pub ok: bool,
}

/// Critical steps of the model and of its Galerkin ROM on a mass-orthonormal
/// basis; `ok` when `dt_rom ≥ dt_fom(1 − 1e-10)`.
pub fn verify_rom_dt_dominance(model: &FullOrderModel, basis: &ReducedBasis) -> Result<Dominance> {
    if basis.kind() != crate::reduction::BasisKind::MassOrthonormal {
        return Err(Error::InvalidParameter("dominance check needs a mass-orthonormal basis".into()));
    }
    let dt_fom = fom_report(model)?.dt_crit;
    let rom = galerkin_reduce(model, basis)?;
    let mu = sym_eig(&crate::linalg::SymmetricMatrix::symmetrize(&rom.kr))?.max();
    let dt_rom = critical_dt_system(mu, model.a1(), model.a2())?.dt_crit;
    Ok(Dominance {
        dt_fom,
        dt_rom,
        ok: dt_rom >= dt_fom * (1.0 - 1e-10),
    })
}

/// Eigenvalues of `M⁻¹K` for convenience in reports.
pub fn fom_eigenvalues(model: &FullOrderModel) -> Result<DVector<f64>> {
    Ok(gen_eig_diag_mass(model.stiffness(), model.mass())?.values)
}
