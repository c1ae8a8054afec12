//! Randomized property suites behind `romstab verify`.
//!
//! Every trial draws from its own seeded stream, so results do not depend on
//! how trials are scheduled across threads.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyper::{
    collocate_projected, deim_points, deim_reduce, ecsw_reduce, EcswWeights, SampleSet,
};
use crate::instances::{
    random_mass_basis, random_matrix, random_mesh, random_plain_basis, spectral_instance, trial_rng,
};
use crate::integrator::modal_amplification;
use crate::linalg::{
    gen_eig_diag_mass, relative_asymmetry, select_rows, spectral_radius, sym_eig, thin_svd,
    SymmetricMatrix,
};
use crate::model::damping_matrix;
use crate::reduction::{galerkin_reduce, ReducedModel};
use crate::stability::{
    check_interlacing, critical_dt_modal, element_dt_bound, fom_report, g_eval,
    verify_rom_dt_dominance,
};

pub const DEFAULT_SEED: u64 = 20240611;
pub const DEFAULT_TRIALS: usize = 200;
/// Seed of the stored DEIM instance with a visibly nonsymmetric `Kr`.
pub const DEIM_ASYMMETRY_SEED: u64 = 7;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    /// Also run the DEIM counterexample, which passes when it finds the
    /// expected asymmetry.
    pub break_symmetry: bool,
    /// Largest model order drawn by the spectral suites.
    pub max_order: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            break_symmetry: false,
            max_order: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    /// Worst value of the property's violation measure (≤ 0 or tiny is good).
    pub worst: f64,
    /// First failure message, if any.
    pub failure: Option<String>,
}

impl PropertyResult {
    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }
}

/// Outcome of one trial: pass flag and violation measure.
type Outcome = Result<(bool, f64)>;

fn run_property<F>(name: &'static str, opts: &VerifyOptions, salt: u64, f: F) -> PropertyResult
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Outcome + Sync,
{
    let outcomes: Vec<Outcome> = (0..opts.trials)
        .into_par_iter()
        .map(|i| f(&mut trial_rng(opts.seed ^ salt, i as u64)))
        .collect();
    let mut passed = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut failure = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((ok, v)) => {
                worst = worst.max(v);
                if ok {
                    passed += 1;
                } else if failure.is_none() {
                    failure = Some(format!("trial {i}: measure {v:.3e}"));
                }
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(format!("trial {i}: {e}"));
                }
            }
        }
    }
    PropertyResult {
        name,
        trials: opts.trials,
        passed,
        worst,
        failure,
    }
}

/// Interlacing of Galerkin eigenvalues on a random instance; measure is the
/// worst signed violation relative to the spectrum scale.
pub fn interlacing_trial<R: Rng>(rng: &mut R, max_order: usize) -> Outcome {
    let inst = spectral_instance(rng, max_order)?;
    let full = gen_eig_diag_mass(inst.model.stiffness(), inst.model.mass())?.values;
    let rom = galerkin_reduce(&inst.model, &inst.basis)?;
    let red = sym_eig(&SymmetricMatrix::symmetrize(&rom.kr))?.values;
    let chk = check_interlacing(full.as_slice(), red.as_slice())?;
    let scale = full.amax().max(f64::MIN_POSITIVE);
    Ok((chk.ok, chk.worst_violation / scale))
}

/// Critical-step dominance of the Galerkin ROM; measure is
/// `1 − dt_rom/dt_fom` (≤ 0 when the ROM step is at least as large).
pub fn dominance_trial<R: Rng>(rng: &mut R, max_order: usize) -> Outcome {
    let inst = spectral_instance(rng, max_order)?;
    let d = verify_rom_dt_dominance(&inst.model, &inst.basis)?;
    Ok((d.ok, 1.0 - d.dt_rom / d.dt_fom))
}

pub fn rayleigh_trial<R: Rng>(rng: &mut R, max_order: usize) -> Outcome {
    let inst = spectral_instance(rng, max_order)?;
    let rom = galerkin_reduce(&inst.model, &inst.basis)?;
    let (a1, a2) = (inst.model.a1(), inst.model.a2());
    let k = rom.dim();
    let expected = DMatrix::identity(k, k) * a1 + &rom.kr * a2;
    let direct = damping_matrix(&inst.model).congruence(inst.basis.matrix()).into_inner();
    let scale = expected.amax().max(1.0);
    let err = (&rom.cr - &expected).amax().max((direct - expected).amax()) / scale;
    Ok((err <= 1e-10, err))
}

pub fn congruence_trial<R: Rng>(rng: &mut R, max_order: usize) -> Outcome {
    let inst = spectral_instance(rng, max_order)?;
    let k = inst.model.stiffness();
    let cols = rng.gen_range(1..=k.order());
    let v = random_matrix(rng, k.order(), cols);
    let raw = v.transpose() * k.as_matrix() * &v;
    let asym = (&raw - raw.transpose()).norm() / raw.norm().max(f64::MIN_POSITIVE);
    let min = sym_eig(&SymmetricMatrix::symmetrize(&raw))?.min();
    let neg = -min / (k.norm() * v.norm().powi(2)).max(f64::MIN_POSITIVE);
    Ok((asym <= 1e-12 && neg <= 1e-8, asym.max(neg)))
}

pub fn g_monotone_trial<R: Rng>(rng: &mut R) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let a1 = rng.gen_range(0.0..2.0);
        let a2 = rng.gen_range(0.0..2.0);
        let x1 = 10f64.powf(rng.gen_range(-4.0..4.0));
        let x2 = x1 * (1.0 + 10f64.powf(rng.gen_range(-6.0..2.0)));
        let (g1, g2) = (g_eval(x1, a1, a2)?, g_eval(x2, a1, a2)?);
        worst = worst.max((g2 - g1) / g1);
    }
    Ok((worst <= 1e-12, worst))
}

/// Modal amplification radius at and just beyond the critical step; measure
/// is `|ρ(Δt_crit) − 1|`.
pub fn modal_boundary_trial<R: Rng>(rng: &mut R) -> Outcome {
    let mu = 10f64.powf(rng.gen_range(-2.0..4.0));
    let xi = rng.gen_range(0.0..2.0);
    let dt = critical_dt_modal(mu, xi)?;
    let at = spectral_radius(&modal_amplification(mu, xi, dt))?.radius;
    let beyond = spectral_radius(&modal_amplification(mu, xi, 1.001 * dt))?.radius;
    let dev = (at - 1.0).abs();
    Ok((dev <= 1e-7 && beyond > 1.0, dev))
}

/// Element bound never undercuts the assembled eigenvalue; measure is
/// `μ_exact/μ_bound − 1`.
pub fn element_bound_trial<R: Rng>(rng: &mut R) -> Outcome {
    let m = rng.gen_range(2..=15);
    let extra = rng.gen_range(0..4);
    let model = random_mesh(rng, m, extra)?;
    let exact = fom_report(&model)?;
    let bound = element_dt_bound(model.elements(), 0.0, 0.0, None)?;
    let v = exact.mu_max / bound.mu_max - 1.0;
    Ok((v <= 1e-8 && bound.dt_crit <= exact.dt_crit * (1.0 + 1e-10), v))
}

/// ECSW with random non-negative weights: symmetric PSD `Kr`, `Cr` and the
/// weighted element bound.
pub fn ecsw_trial<R: Rng>(rng: &mut R) -> Outcome {
    let m = rng.gen_range(3..=15);
    let extra = rng.gen_range(0..4);
    let model = random_mesh(rng, m, extra)?
        .with_damping(rng.gen_range(0.0..2.0), rng.gen_range(0.0..0.1))?;
    let n = model.elements().len();
    let xi: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.0..5.0) })
        .collect();
    let w = EcswWeights::from_slice(&xi)?;
    let k = rng.gen_range(1..=m);
    let basis = random_mass_basis(rng, model.mass(), k)?;
    let rom = ecsw_reduce(&model, &w, &basis)?;
    let asym = relative_asymmetry(&rom.kr).max(relative_asymmetry(&rom.cr));
    let kr = SymmetricMatrix::symmetrize(&rom.kr);
    let eig = sym_eig(&kr)?;
    let cmin = sym_eig(&SymmetricMatrix::symmetrize(&rom.cr))?.min();
    let scale = kr.norm().max(f64::MIN_POSITIVE);
    let bound = xi
        .iter()
        .zip(model.elements())
        .map(|(w, e)| e.max_eigenvalue().map(|l| (w * l).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let excess = eig.max() - bound;
    let ok = asym <= 1e-12
        && eig.min() >= -1e-8 * scale
        && cmin >= -1e-8 * rom.cr.norm().max(f64::MIN_POSITIVE)
        && excess <= 1e-8 * bound.max(1.0);
    Ok((ok, asym.max(excess / bound.max(1.0))))
}

/// Projected-collocation mass is symmetric positive semi-definite.
pub fn projected_mass_trial<R: Rng>(rng: &mut R) -> Outcome {
    let m = rng.gen_range(3..=15);
    let model = random_mesh(rng, m, 1)?;
    let k = rng.gen_range(1..=m);
    let basis = random_plain_basis(rng, m, k)?;
    let p = rng.gen_range(1..=m);
    let mut rows: Vec<usize> = rand::seq::index::sample(rng, m, p).into_vec();
    rows.sort_unstable();
    let samples = SampleSet::from_structure(&model, &rows)?;
    let mr = match collocate_projected(&model, &basis, &samples) {
        Ok(rm) => rm.mr,
        // Too few rows for PᵀV to have full column rank: form the mass directly.
        Err(Error::RankDeficient { .. }) => {
            let pv = select_rows(basis.matrix(), &rows);
            let mp = DMatrix::from_fn(p, p, |i, j| {
                if i == j {
                    model.mass().diag()[rows[i]]
                } else {
                    0.0
                }
            });
            pv.transpose() * mp * pv
        }
        Err(e) => return Err(e),
    };
    let asym = (&mr - mr.transpose()).amax();
    let min = sym_eig(&SymmetricMatrix::symmetrize(&mr))?.min();
    let neg = -min / mr.norm().max(f64::MIN_POSITIVE);
    Ok((asym <= 1e-12 * mr.amax() && neg <= 1e-10, asym.max(neg)))
}

/// `U(PᵀU)⁻¹Pᵀ` is idempotent for DEIM points.
pub fn deim_projector_trial<R: Rng>(rng: &mut R) -> Outcome {
    let m = rng.gen_range(3..=20);
    let k = rng.gen_range(1..=m);
    let u = thin_svd(&random_matrix(rng, m, k))?.u;
    let pts = deim_points(&u)?;
    let pu = select_rows(&u, &pts);
    let inv = pu
        .try_inverse()
        .ok_or(Error::SingularInterpolation { cond: f64::INFINITY })?;
    let mut pt = DMatrix::zeros(k, m);
    for (i, &r) in pts.iter().enumerate() {
        pt[(i, r)] = 1.0;
    }
    let proj = &u * inv * pt;
    let err = (&proj * &proj - &proj).amax() / proj.amax();
    Ok((err <= 1e-10, err))
}

/// The stored DEIM instance: a random mesh, a 2-vector basis, and a
/// 4-vector force basis from stiffness forces on random displacements.
pub fn deim_asymmetry_instance(seed: u64) -> Result<ReducedModel> {
    let mut rng = crate::instances::rng(seed);
    let model = random_mesh(&mut rng, 10, 3)?;
    let basis = random_plain_basis(&mut rng, 10, 2)?;
    let forces = model.stiffness().as_matrix() * random_matrix(&mut rng, 10, 8);
    let u = thin_svd(&forces)?.u.columns(0, 4).into_owned();
    let pts = deim_points(&u)?;
    deim_reduce(&model, &basis, &u, &pts)
}

/// Runs every property suite; results are in a fixed order.
pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = opts.max_order;
    let mut out = vec![
        run_property("poincare-interlacing", opts, 1, |r| interlacing_trial(r, n)),
        run_property("rom-dt-dominance", opts, 2, |r| dominance_trial(r, n)),
        run_property("rayleigh-structure", opts, 3, |r| rayleigh_trial(r, n)),
        run_property("congruence-symmetry-psd", opts, 4, |r| congruence_trial(r, n)),
        run_property("g-monotone", opts, 5, g_monotone_trial),
        run_property("modal-stability-boundary", opts, 6, modal_boundary_trial),
        run_property("element-bound-sound", opts, 7, element_bound_trial),
        run_property("ecsw-symmetric-psd-bounded", opts, 8, ecsw_trial),
        run_property("projected-mass-symmetric-psd", opts, 9, projected_mass_trial),
        run_property("deim-projector-idempotent", opts, 10, deim_projector_trial),
    ];
    if opts.break_symmetry {
        let (passed, worst, failure) = match deim_asymmetry_instance(DEIM_ASYMMETRY_SEED) {
            Ok(rm) => {
                let a = rm.stiffness_asymmetry();
                (usize::from(a > 1e-3), a, None)
            }
            Err(e) => (0, f64::NAN, Some(e.to_string())),
        };
        out.push(PropertyResult {
            name: "deim-asymmetry-exists",
            trials: 1,
            passed,
            worst,
            failure,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let opts = VerifyOptions {
            trials: 8,
            break_symmetry: true,
            ..Default::default()
        };
        let a = run_suite(&opts).unwrap();
        for r in &a {
            assert!(r.ok(), "{} failed: {:?}", r.name, r.failure);
        }
        let b = run_suite(&opts).unwrap();
        let worst = |v: &[PropertyResult]| v.iter().map(|r| r.worst.to_bits()).collect::<Vec<_>>();
        assert_eq!(worst(&a), worst(&b));
    }

    #[test]
    fn zero_trials_rejected() {
        let opts = VerifyOptions {
            trials: 0,
            ..Default::default()
        };
        assert!(run_suite(&opts).is_err());
    }

    #[test]
    fn stored_deim_instance_is_nonsymmetric() {
        let rm = deim_asymmetry_instance(DEIM_ASYMMETRY_SEED).unwrap();
        assert!(rm.stiffness_asymmetry() > 1e-3);
    }
}
