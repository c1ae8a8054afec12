//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always shown; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use romstab::hyper::{
    collocate_naive, collocate_projected, deim_reduce, ecsw_reduce, ecsw_weighted_operator,
    gnat_reduce, hrom_step, EcswWeights, HromState, SampleSet, VelocityUpdate,
};
use romstab::instances::{random_mesh, random_plain_basis, rng, spectral_instance, trial_rng};
use romstab::integrator::{integrate, modal_amplification, IntegrateOptions, Trajectory};
use romstab::linalg::{
    gen_eig_diag_mass, spectral_radius, sym_eig, DiagonalPositiveMatrix, SymmetricMatrix,
};
use romstab::model::{build_rod_chain, build_string_model, FullOrderModel, LoadTable, StringParams};
use romstab::reduction::{
    galerkin_reduce, modal_basis, reduced_eigenvalues, ReducedModel,
};
use romstab::stability::{
    check_interlacing, critical_dt_modal, element_dt_bound, fom_report, g_eval,
    verify_rom_dt_dominance,
};
use romstab::verify::{
    deim_asymmetry_instance, ecsw_trial, projected_mass_trial, DEIM_ASYMMETRY_SEED,
};

const SEED: u64 = 20240611;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn string(m: usize) -> FullOrderModel {
    build_string_model(&StringParams::new(m, 1.0, 10.0)).unwrap()
}

fn ac1() -> Check {
    let model = string(5);
    let eig = gen_eig_diag_mass(model.stiffness(), model.mass()).map_err(|e| e.to_string())?;
    let expect = [5.81, 19.90, 34.09, 2000.101, 2000.101];
    for (i, (&e, &c)) in expect.iter().zip(eig.values.iter()).enumerate() {
        ensure((c - e).abs() <= 0.01, || format!("eigenvalue {i}: {c} vs {e}"))?;
    }
    let trace = model.system_matrix().trace();
    ensure((trace - 4060.0).abs() <= 1e-9 * 4060.0, || format!("trace {trace}"))?;
    let sum: f64 = eig.values.iter().sum();
    ensure((sum - trace).abs() <= 1e-9 * 4060.0, || format!("eigenvalue sum {sum}"))?;
    Ok(format!("eigenvalues {:.3?}, trace {trace}", eig.values.as_slice()))
}

fn ac2() -> Check {
    let model = string(5);
    let basis = modal_basis(&model, &[1]).map_err(|e| e.to_string())?;
    let w = EcswWeights::from_slice(&[0.0, 4.0, 0.0, 0.0]).unwrap();
    let r = sym_eig(&ecsw_weighted_operator(&model, &w).unwrap()).unwrap().values;
    for (i, (&c, e)) in r.iter().zip([0.0, 0.0, 0.0, 0.0, 80.0]).enumerate() {
        ensure((c - e).abs() <= 1e-9, || format!("R eigenvalue {i}: {c} vs {e}"))?;
    }
    let hrom = ecsw_reduce(&model, &w, &basis).map_err(|e| e.to_string())?;
    let kr = hrom.kr[(0, 0)];
    ensure((kr - 20.0).abs() <= 0.1, || format!("ECSW Kr {kr}"))?;
    let rom = galerkin_reduce(&model, &basis).map_err(|e| e.to_string())?;
    let g = rom.kr[(0, 0)];
    ensure((g - 19.90).abs() <= 0.05, || format!("Galerkin Kr {g}"))?;
    Ok(format!("R max {:.9}, ECSW Kr {kr:.5}, Galerkin Kr {g:.5}", r.max()))
}

fn ac3() -> Check {
    let model = string(100);
    let first = modal_basis(&model, &(0..10).collect::<Vec<_>>()).unwrap();
    let last = modal_basis(&model, &(90..100).collect::<Vec<_>>()).unwrap();
    let mu_fom = gen_eig_diag_mass(model.stiffness(), model.mass()).unwrap().max();
    let mu_rom = reduced_eigenvalues(&galerkin_reduce(&model, &first).unwrap())
        .unwrap()
        .max();
    let ratio = mu_fom / mu_rom;
    ensure((1800.0..=2200.0).contains(&ratio), || format!("eigenvalue ratio {ratio}"))?;
    let d = verify_rom_dt_dominance(&model, &first).unwrap();
    let gain = d.dt_rom / d.dt_fom;
    ensure((gain / 44.72 - 1.0).abs() <= 0.05, || format!("dt gain {gain}"))?;
    let d = verify_rom_dt_dominance(&model, &last).unwrap();
    let same = d.dt_rom / d.dt_fom;
    ensure((same - 1.0).abs() <= 1e-8, || format!("last-10 dt ratio {same}"))?;
    Ok(format!("eigenvalue ratio {ratio:.2}, dt gain {gain:.3}, last-10 ratio {same:.12}"))
}

/// 200 random (model, basis) instances with orders up to 60.
fn spectral_instances() -> Vec<romstab::instances::SpectralInstance> {
    (0..200)
        .map(|i| spectral_instance(&mut trial_rng(SEED, i as u64), 60).unwrap())
        .collect()
}

fn ac4(instances: &[romstab::instances::SpectralInstance]) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for (i, inst) in instances.iter().enumerate() {
        let d = verify_rom_dt_dominance(&inst.model, &inst.basis).map_err(|e| e.to_string())?;
        worst = worst.max(1.0 - d.dt_rom / d.dt_fom);
        ensure(d.dt_rom >= d.dt_fom * (1.0 - 1e-10), || {
            format!("instance {i}: dt_rom {} < dt_fom {}", d.dt_rom, d.dt_fom)
        })?;
    }
    Ok(format!("{} instances, worst 1 - dt_rom/dt_fom = {worst:.3e}", instances.len()))
}

fn ac5(instances: &[romstab::instances::SpectralInstance]) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for (i, inst) in instances.iter().enumerate() {
        let full = gen_eig_diag_mass(inst.model.stiffness(), inst.model.mass()).unwrap().values;
        let rom = galerkin_reduce(&inst.model, &inst.basis).unwrap();
        let red = sym_eig(&SymmetricMatrix::symmetrize(&rom.kr)).unwrap().values;
        let chk = check_interlacing(full.as_slice(), red.as_slice()).unwrap();
        let rel = chk.worst_violation / full.amax();
        worst = worst.max(rel);
        ensure(chk.ok && rel <= 1e-8, || format!("instance {i}: violation {rel:e}"))?;
    }
    Ok(format!("{} instances, worst relative violation {worst:.3e}", instances.len()))
}

fn ac6() -> Check {
    let mut r = rng(SEED ^ 6);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let a1 = r.gen_range(0.0..2.0);
        let a2 = r.gen_range(0.0..2.0);
        let x1 = 10f64.powf(r.gen_range(-4.0..4.0));
        let x2 = x1 * (1.0 + 10f64.powf(r.gen_range(-8.0..2.0)));
        let (g1, g2) = (g_eval(x1, a1, a2).unwrap(), g_eval(x2, a1, a2).unwrap());
        worst = worst.max((g2 - g1) / g1);
        ensure(g1 >= g2 - 1e-12 * g1, || format!("g({x1}) = {g1} < g({x2}) = {g2}"))?;
    }
    for a1 in [0.01, 0.5, 1.0, 2.0] {
        for a2 in [0.0, 0.3] {
            let g = g_eval(1e-8, a1, a2).unwrap();
            ensure((g * a1 / 2.0 - 1.0).abs() <= 1e-6, || format!("limit a1={a1}: {g}"))?;
        }
    }
    let mut worst_oracle = 0.0f64;
    for _ in 0..100 {
        let x = 10f64.powf(r.gen_range(-3.0..3.0));
        let a1 = r.gen_range(0.0..2.0);
        let a2 = r.gen_range(0.0..2.0);
        let fast = g_eval(x, a1, a2).unwrap();
        let exact = common::g_naive_extended(x, a1, a2);
        let rel = (fast - exact).abs() / exact;
        worst_oracle = worst_oracle.max(rel);
        ensure(rel <= 1e-12, || format!("g({x}; {a1}, {a2}): {fast} vs {exact}"))?;
    }
    Ok(format!(
        "worst monotonicity excess {worst:.3e}, worst oracle deviation {worst_oracle:.3e}"
    ))
}

fn string20_run(frac: f64) -> Trajectory {
    let model = string(20);
    let dt = fom_report(&model).unwrap().dt_crit * frac;
    let mut r = rng(SEED ^ 7);
    let x0 = DVector::from_fn(20, |_, _| 1e-3 * r.gen_range(-1.0..1.0));
    let opts = IntegrateOptions {
        record_every: 1000,
        ..IntegrateOptions::new(dt, 10_000.0 * dt)
    };
    integrate(&model, &x0, &DVector::zeros(20), &opts).unwrap()
}

fn ac7() -> Check {
    let mut r = rng(SEED ^ 8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = 10f64.powf(r.gen_range(-2.0..4.0));
        let xi = r.gen_range(0.0..2.0);
        let dt = critical_dt_modal(mu, xi).unwrap();
        let at = spectral_radius(&modal_amplification(mu, xi, dt)).unwrap().radius;
        let beyond = spectral_radius(&modal_amplification(mu, xi, 1.001 * dt)).unwrap().radius;
        worst = worst.max((at - 1.0).abs());
        ensure((at - 1.0).abs() <= 1e-7, || format!("mu={mu}, xi={xi}: radius {at}"))?;
        ensure(beyond > 1.0, || format!("mu={mu}, xi={xi}: radius {beyond} past the step"))?;
        let oracle = common::modal_radius(mu, xi, dt);
        ensure((oracle - at).abs() <= 1e-7, || format!("oracle radius {oracle} vs {at}"))?;
    }
    let stable = string20_run(0.99);
    ensure(!stable.diverged && stable.final_state.n == 10_000, || {
        format!("0.99 dt_crit diverged at {:?}", stable.divergence_step)
    })?;
    let unstable = string20_run(1.01);
    ensure(unstable.diverged, || "1.01 dt_crit stayed bounded".into())?;
    Ok(format!(
        "worst |rho - 1| {worst:.3e}; m=20 bounded at 0.99 (max |x| {:.3e}), diverged at 1.01 after {} steps",
        stable.max_norm,
        unstable.divergence_step.unwrap()
    ))
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn trajectory(rm: &ReducedModel, x0: &DVector<f64>, dt: f64) -> Vec<DVector<f64>> {
    let opts = IntegrateOptions::new(dt, 50.0 * dt);
    integrate(rm, x0, &DVector::zeros(x0.len()), &opts).unwrap().states
}

fn traj_diff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let scale = b.iter().map(|x| x.amax()).fold(1e-300, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
        / scale
}

fn ac8() -> Check {
    let mut p = StringParams::new(6, 1.0, 10.0);
    p.a1 = 0.1;
    p.a2 = 1e-3;
    let model = build_string_model(&p).unwrap();
    let m = model.dim();
    let mut r = rng(SEED ^ 9);
    let dt = 0.5 * fom_report(&model).unwrap().dt_crit;
    let mut notes = Vec::new();
    let all = SampleSet::from_structure(&model, &(0..m).collect::<Vec<_>>()).unwrap();

    // Naive collocation: full sampling with a square plain basis.
    let vfull = random_plain_basis(&mut r, m, m).unwrap();
    let gal = galerkin_reduce(&model, &vfull).unwrap();
    let naive = collocate_naive(&model, &vfull, &all).unwrap();
    let x0 = DVector::from_fn(m, |_, _| r.gen_range(-1.0..1.0));
    let d = traj_diff(&trajectory(&naive, &x0, dt), &trajectory(&gal, &x0, dt));
    ensure(d <= 1e-10, || format!("naive collocation steps differ by {d:e}"))?;
    let mut st = HromState::initial(&naive, x0.clone(), DVector::zeros(m)).unwrap();
    let gtraj = trajectory(&gal, &x0, dt);
    let mut worst_alg = 0.0f64;
    for g in gtraj.iter().skip(1) {
        st = hrom_step(&naive, &st, dt, VelocityUpdate::Displacement).unwrap();
        worst_alg = worst_alg.max((&st.x - g).amax());
    }
    let worst_alg = worst_alg / gtraj.iter().map(|x| x.amax()).fold(0.0, f64::max);
    ensure(worst_alg <= 1e-10, || format!("collocation scheme differs by {worst_alg:e}"))?;
    notes.push(format!("naive {:.1e}", d.max(worst_alg)));

    // Naive collocation with k < m on a unit-mass model.
    let unit = FullOrderModel::new(
        DiagonalPositiveMatrix::from_slice(&vec![1.0; m]).unwrap(),
        model.stiffness().clone(),
        0.1,
        1e-3,
        Vec::new(),
        LoadTable::zero(),
    )
    .unwrap();
    let v3 = random_plain_basis(&mut r, m, 3).unwrap();
    let all_u = SampleSet::from_structure(&unit, &(0..m).collect::<Vec<_>>()).unwrap();
    let naive3 = collocate_naive(&unit, &v3, &all_u).unwrap();
    let gal3 = galerkin_reduce(&unit, &v3).unwrap();
    let x3 = DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0));
    let d = traj_diff(&trajectory(&naive3, &x3, dt), &trajectory(&gal3, &x3, dt));
    ensure(d <= 1e-10, || format!("oversampled naive collocation differs by {d:e}"))?;

    // Projected collocation on a mass-orthonormal basis.
    let vm = modal_basis(&model, &[0, 2, 4]).unwrap();
    let galm = galerkin_reduce(&model, &vm).unwrap();
    let proj = collocate_projected(&model, &vm, &all).unwrap();
    let d = max_diff(&proj.mr, &galm.mr)
        .max(max_diff(&proj.cr, &galm.cr))
        .max(max_diff(&proj.kr, &galm.kr));
    ensure(d <= 1e-10, || format!("projected collocation differs by {d:e}"))?;
    let xm = DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0));
    let dt_traj = traj_diff(&trajectory(&proj, &xm, dt), &trajectory(&galm, &xm, dt));
    ensure(dt_traj <= 1e-10, || format!("projected steps differ by {dt_traj:e}"))?;
    notes.push(format!("projected {:.1e}", d.max(dt_traj)));

    // DEIM with U = V spanning everything.
    let u = vfull.matrix().clone();
    let deim = deim_reduce(&model, &vfull, &u, &(0..m).collect::<Vec<_>>()).unwrap();
    let d = max_diff(&deim.kr, &gal.kr).max(max_diff(&deim.cr, &gal.cr));
    ensure(d <= 1e-10, || format!("DEIM differs by {d:e}"))?;
    let dd = traj_diff(&trajectory(&deim, &x0, dt), &gtraj);
    ensure(dd <= 1e-10, || format!("DEIM steps differ by {dd:e}"))?;
    notes.push(format!("deim {:.1e}", d.max(dd)));

    // GNAT: p = k reproduces DEIM; p = m with U = V reproduces Galerkin.
    let pts3: Vec<usize> = romstab::hyper::deim_points(v3.matrix()).unwrap();
    let deim3 = deim_reduce(&unit, &v3, v3.matrix(), &pts3).unwrap();
    let gnat3 = gnat_reduce(&unit, &v3, v3.matrix(), &pts3).unwrap();
    let d1 = max_diff(&gnat3.kr, &deim3.kr);
    ensure(d1 <= 1e-12, || format!("GNAT p=k differs from DEIM by {d1:e}"))?;
    let gnat_full = gnat_reduce(&unit, &v3, v3.matrix(), &(0..m).collect::<Vec<_>>()).unwrap();
    let d2 = max_diff(&gnat_full.kr, &gal3.kr).max(max_diff(&gnat_full.cr, &gal3.cr));
    ensure(d2 <= 1e-10, || format!("GNAT p=m differs from Galerkin by {d2:e}"))?;
    let dg = traj_diff(&trajectory(&gnat_full, &x3, dt), &trajectory(&gal3, &x3, dt));
    ensure(dg <= 1e-10, || format!("GNAT steps differ by {dg:e}"))?;
    notes.push(format!("gnat {:.1e}", d1.max(d2).max(dg)));

    // ECSW with unit weights.
    let ecsw = ecsw_reduce(&model, &EcswWeights::unit(model.elements().len()), &vm).unwrap();
    let d = max_diff(&ecsw.kr, &galm.kr).max(max_diff(&ecsw.cr, &galm.cr));
    ensure(d <= 1e-10, || format!("ECSW differs by {d:e}"))?;
    let de = traj_diff(&trajectory(&ecsw, &xm, dt), &trajectory(&galm, &xm, dt));
    ensure(de <= 1e-10, || format!("ECSW steps differ by {de:e}"))?;
    notes.push(format!("ecsw {:.1e}", d.max(de)));
    Ok(format!("max deviations: {}", notes.join(", ")))
}

fn ac9() -> Check {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..200 {
        let (ok, v) = ecsw_trial(&mut trial_rng(SEED ^ 10, i as u64)).map_err(|e| e.to_string())?;
        ensure(ok, || format!("ECSW trial {i}: measure {v:e}"))?;
        let (ok, w) = projected_mass_trial(&mut trial_rng(SEED ^ 11, i as u64)).map_err(|e| e.to_string())?;
        ensure(ok, || format!("projected-collocation trial {i}: measure {w:e}"))?;
        worst = worst.max(v).max(w);
    }
    let deim = deim_asymmetry_instance(DEIM_ASYMMETRY_SEED).map_err(|e| e.to_string())?;
    let asym = deim.stiffness_asymmetry();
    ensure(asym > 1e-3, || format!("stored DEIM instance asymmetry {asym:e}"))?;
    Ok(format!(
        "200+200 trials symmetric PSD (worst {worst:.2e}); DEIM seed {DEIM_ASYMMETRY_SEED} asymmetry {asym:.3e}"
    ))
}

fn ac10() -> Check {
    let mut meshes: Vec<FullOrderModel> = vec![string(5), string(20), string(100)];
    let mut r = rng(SEED ^ 12);
    for _ in 0..40 {
        let m = r.gen_range(2..=20);
        let extra = r.gen_range(0..5);
        meshes.push(random_mesh(&mut r, m, extra).unwrap());
    }
    let mut count = 0;
    for (i, model) in meshes.iter().enumerate() {
        let exact = fom_report(model).unwrap();
        let bound = element_dt_bound(model.elements(), 0.0, 0.0, None).unwrap();
        ensure(bound.mu_max >= exact.mu_max * (1.0 - 1e-10), || {
            format!("mesh {i}: element bound {} < {}", bound.mu_max, exact.mu_max)
        })?;
        ensure(bound.dt_crit <= exact.dt_crit * (1.0 + 1e-10), || format!("mesh {i}: dt"))?;
        let n = model.elements().len();
        let xi: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..4.0)).collect();
        let w = EcswWeights::from_slice(&xi).unwrap();
        let weighted = sym_eig(&ecsw_weighted_operator(model, &w).unwrap()).unwrap().max();
        let eb = element_dt_bound(model.elements(), 0.0, 0.0, Some(&w)).unwrap();
        ensure(eb.mu_max >= weighted * (1.0 - 1e-10), || {
            format!("mesh {i}: ECSW bound {} < {weighted}", eb.mu_max)
        })?;
        count += 1;
    }
    // Worked ECSW example.
    let s5 = string(5);
    let w = EcswWeights::from_slice(&[0.0, 4.0, 0.0, 0.0]).unwrap();
    let eb = element_dt_bound(s5.elements(), 0.0, 0.0, Some(&w)).unwrap();
    ensure(eb.mu_max >= 20.0, || format!("ECSW bound {} below 20", eb.mu_max))?;
    // Rod CFL identity.
    let mut worst_cfl = 0.0f64;
    for _ in 0..20 {
        let n = r.gen_range(1..=10);
        let l: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| r.gen_range(0.5..5.0)).collect();
        let rod = build_rod_chain(&l, &c).unwrap();
        let cfl = l.iter().zip(&c).map(|(l, c)| l / c).fold(f64::INFINITY, f64::min);
        let b = element_dt_bound(rod.elements(), 0.0, 0.0, None).unwrap();
        worst_cfl = worst_cfl.max((b.dt_crit / cfl - 1.0).abs());
        ensure((b.dt_crit / cfl - 1.0).abs() <= 1e-12, || format!("CFL {} vs {cfl}", b.dt_crit))?;
        ensure(b.dt_crit <= fom_report(&rod).unwrap().dt_crit * (1.0 + 1e-10), || "rod dt".into())?;
    }
    Ok(format!(
        "{count} meshes sound; ECSW worked-example bound {:.1} >= 20; rod CFL deviation {worst_cfl:.1e}",
        eb.mu_max
    ))
}

fn report(id: &str, title: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match res {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; runtime {elapsed:?} exceeds {limit:?}")),
        Err(e) => (false, e),
    };
    println!(
        "{id:<5} {} {title}: {detail} [{:.3} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() {
    // `cargo test -- --list` and filters are passed through by cargo; this
    // target always runs every criterion.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let secs = Duration::from_secs_f64;
    let mut ok = true;
    ok &= report("AC1", "five-node string spectrum", secs(0.1), ac1);
    ok &= report("AC2", "ECSW worked example", secs(0.1), ac2);
    ok &= report("AC3", "hundred-node string ratios", secs(1.0), ac3);
    let start = Instant::now();
    let instances = spectral_instances();
    let gen = start.elapsed();
    ok &= report("AC4", "ROM critical-step dominance", secs(10.0) - gen, || ac4(&instances));
    ok &= report("AC5", "Poincare interlacing", secs(10.0), || ac5(&instances));
    ok &= report("AC6", "g(x) properties", secs(1.0), ac6);
    ok &= report("AC7", "stability boundary", secs(20.0), ac7);
    ok &= report("AC8", "saturation equivalences", secs(5.0), ac8);
    ok &= report("AC9", "structure preservation split", secs(5.0), ac9);
    ok &= report("AC10", "bound soundness", secs(2.0), ac10);
    if !ok {
        std::process::exit(1);
    }
}
