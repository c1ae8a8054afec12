use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use romstab::integrator::modal_amplification;
use romstab::linalg::{sparse_nnls, DiagonalPositiveMatrix, SymmetricMatrix};
use romstab::model::{build_string_model, FullOrderModel, LoadTable, StringParams};
use romstab::stability::{critical_dt_modal, fom_report, g_eval};

fn model(m: &[f64], k: &DMatrix<f64>) -> FullOrderModel {
    FullOrderModel::new(
        DiagonalPositiveMatrix::from_slice(m).unwrap(),
        SymmetricMatrix::symmetrize(k),
        0.0,
        0.0,
        Vec::new(),
        LoadTable::zero(),
    )
    .unwrap()
}

fn psd(entries: &[f64], n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &b * b.transpose() + DMatrix::identity(n, n) * 1e-3
}

proptest! {
    #[test]
    fn modal_amplification_trace_and_determinant(
        mu in 1e-3f64..1e4, xi in 0.0f64..3.0, frac in 0.01f64..1.5,
    ) {
        let dt = frac * critical_dt_modal(mu, xi).unwrap();
        let a = modal_amplification(mu, xi, dt);
        let s = 2.0 * xi * mu.sqrt() * dt;
        prop_assert!((a.trace() - (2.0 - s - dt * dt * mu)).abs() <= 1e-12 * (1.0 + s + dt * dt * mu));
        prop_assert!((a.determinant() - (1.0 - s)).abs() <= 1e-12 * (1.0 + s));
    }

    #[test]
    fn nnls_weights_are_nonnegative(
        g in proptest::collection::vec(-1.0f64..1.0, 24),
        b in proptest::collection::vec(-1.0f64..1.0, 6),
    ) {
        let g = DMatrix::from_row_slice(6, 4, &g);
        let b = DVector::from_vec(b);
        prop_assume!(b.norm() > 1e-3);
        if let Ok(sol) = sparse_nnls(&g, &b, 0.5) {
            prop_assert!(sol.weights.iter().all(|&w| w >= 0.0));
            let r = (&g * &sol.weights - &b).norm() / b.norm();
            prop_assert!((r - sol.relative_residual).abs() <= 1e-9);
        }
    }

    #[test]
    fn common_scaling_of_mass_and_stiffness_keeps_the_step(
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
        mass in proptest::collection::vec(0.1f64..2.0, 4),
        c in 0.01f64..100.0,
    ) {
        let k = psd(&entries, 4);
        let dt = fom_report(&model(&mass, &k)).unwrap().dt_crit;
        let scaled: Vec<f64> = mass.iter().map(|m| m * c).collect();
        let dt2 = fom_report(&model(&scaled, &(&k * c))).unwrap().dt_crit;
        prop_assert!((dt - dt2).abs() <= 1e-9 * dt);
    }

    #[test]
    fn doubling_stiffness_shrinks_the_undamped_step(
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
        mass in proptest::collection::vec(0.1f64..2.0, 4),
    ) {
        let k = psd(&entries, 4);
        let dt = fom_report(&model(&mass, &k)).unwrap().dt_crit;
        let dt2 = fom_report(&model(&mass, &(&k * 2.0))).unwrap().dt_crit;
        prop_assert!((dt / dt2 - 2f64.sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn permuting_dofs_keeps_the_step(
        entries in proptest::collection::vec(-1.0f64..1.0, 25),
        mass in proptest::collection::vec(0.1f64..2.0, 5),
    ) {
        let k = psd(&entries, 5);
        let rev = DMatrix::from_fn(5, 5, |i, j| k[(4 - i, 4 - j)]);
        let mrev: Vec<f64> = mass.iter().rev().copied().collect();
        let a = fom_report(&model(&mass, &k)).unwrap().dt_crit;
        let b = fom_report(&model(&mrev, &rev)).unwrap().dt_crit;
        prop_assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn g_decreases(x in 1e-3f64..1e3, step in 1e-6f64..10.0, a1 in 0.0f64..2.0, a2 in 0.0f64..2.0) {
        let g1 = g_eval(x, a1, a2).unwrap();
        let g2 = g_eval(x * (1.0 + step), a1, a2).unwrap();
        prop_assert!(g2 <= g1 * (1.0 + 1e-12));
    }

    #[test]
    fn string_step_scales_with_stiffness(m in 3usize..30, k in 0.5f64..50.0) {
        let base = fom_report(&build_string_model(&StringParams::new(m, 1.0, k)).unwrap()).unwrap();
        let quad = fom_report(&build_string_model(&StringParams::new(m, 1.0, 4.0 * k)).unwrap()).unwrap();
        prop_assert!((base.dt_crit / quad.dt_crit - 2.0).abs() <= 1e-8);
    }
}
