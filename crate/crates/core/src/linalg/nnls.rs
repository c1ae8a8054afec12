//! Greedy active-set non-negative least squares with a residual stopping rule.

use nalgebra::{DMatrix, DVector};

use super::select_cols;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub weights: DVector<f64>,
    /// `‖Gξ − b‖ / ‖b‖`
    pub relative_residual: f64,
}

/// Lawson–Hanson active-set iteration that stops as soon as
/// `‖Gξ − b‖ ≤ tau·‖b‖`. Columns enter the passive set greedily by largest
/// positive gradient `Gᵀ(b − Gξ)`, which keeps the support small without any
/// optimality guarantee on its cardinality.
pub fn sparse_nnls(g: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> Result<NnlsSolution> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    if g.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "sparse_nnls",
            expected: g.nrows(),
            actual: b.len(),
        });
    }
    let b_norm = b.norm();
    if b_norm == 0.0 || !b_norm.is_finite() {
        return Err(Error::InvalidParameter("right-hand side must be nonzero".into()));
    }
    let n = g.ncols();
    let target = tau * b_norm;
    let grad_tol = 1e-14 * g.norm() * b_norm;

    let mut x = DVector::<f64>::zeros(n);
    let mut passive: Vec<usize> = Vec::new();
    let mut blocked = vec![false; n];
    let mut residual = b.clone();

    for _ in 0..(3 * n + 10) {
        if residual.norm() <= target {
            break;
        }
        let w = g.transpose() * &residual;
        let candidate = (0..n)
            .filter(|&j| !blocked[j] && !passive.contains(&j) && w[j] > grad_tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        passive.push(j);

        let mut first = true;
        loop {
            let z = passive_least_squares(g, b, &passive);
            if z.iter().all(|&v| v > 0.0) {
                for (p, &col) in passive.iter().enumerate() {
                    x[col] = z[p];
                }
                break;
            }
            // A freshly added column with non-positive weight is numerically
            // dependent on the passive set.
            if first && z[passive.len() - 1] <= 0.0 {
                passive.pop();
                break;
            }
            first = false;
            // Step towards z until the first passive weight hits zero.
            let mut alpha = f64::INFINITY;
            for (p, &col) in passive.iter().enumerate() {
                if z[p] <= 0.0 {
                    let denom = x[col] - z[p];
                    if denom > 0.0 {
                        alpha = alpha.min(x[col] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (p, &col) in passive.iter().enumerate() {
                x[col] += alpha * (z[p] - x[col]);
            }
            let tiny = 1e-14 * x.amax().max(f64::MIN_POSITIVE);
            passive.retain(|&col| {
                if x[col] <= tiny {
                    x[col] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
        residual = b - g * &x;
        if passive.iter().all(|&c| c != j) {
            // j was rejected or dropped; allow others to be tried first
            blocked[j] = true;
        } else {
            blocked.iter_mut().for_each(|f| *f = false);
        }
    }

    let rel = (b - g * &x).norm() / b_norm;
    if rel > tau {
        return Err(Error::Infeasible { residual: rel, tau });
    }
    Ok(NnlsSolution {
        weights: x,
        relative_residual: rel,
    })
}

fn passive_least_squares(g: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = select_cols(g, passive);
    let svd = sub.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    svd.solve(b, cutoff).expect("U and V computed")
}
