//! Hyper-reduced models: naive and projected collocation, DEIM, GNAT and
//! ECSW, together with DEIM point selection, ECSW weight training and the
//! collocation time step.
//!
//! Throughout, `P`, `Y`, `Z` are Boolean row selections: `P` picks the
//! collocation rows, `Y` and `Z` the DoFs coupled to them through `C` and `K`.

mod io;

pub use io::{read_sample_set_json, read_weights_json, write_sample_set_json, write_weights_json};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{IntegrateOptions, IntegratorState, Trajectory};
use crate::linalg::{
    pseudoinverse, select_rows, sparse_nnls, sym_eig, thin_svd, SymmetricMatrix,
};
use crate::model::{damping_matrix, FullOrderModel};
use crate::reduction::{
    check_basis, BasisKind, CollocationRows, Provenance, ReducedBasis, ReducedModel,
    SnapshotMatrix,
};

/// Collocation rows and their structural reach through `C` and `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSet {
    pub collocation: Vec<usize>,
    pub damping_reach: Vec<usize>,
    pub stiffness_reach: Vec<usize>,
}

impl SampleSet {
    /// Reach sets from the nonzero pattern of the rows of `C` and `K` at the
    /// collocation DoFs (each collocation DoF is always in its own reach).
    pub fn from_structure(model: &FullOrderModel, collocation: &[usize]) -> Result<Self> {
        check_collocation(collocation, model.dim())?;
        let k = model.stiffness().as_matrix();
        let c = damping_matrix(model).into_inner();
        let reach = |a: &DMatrix<f64>| -> Vec<usize> {
            let mut set: BTreeSet<usize> = collocation.iter().copied().collect();
            for &r in collocation {
                set.extend((0..a.ncols()).filter(|&j| a[(r, j)] != 0.0));
            }
            set.into_iter().collect()
        };
        Ok(SampleSet {
            collocation: collocation.to_vec(),
            damping_reach: reach(&c),
            stiffness_reach: reach(k),
        })
    }

    /// Reach sets equal to every DoF.
    pub fn dense(m: usize, collocation: &[usize]) -> Result<Self> {
        check_collocation(collocation, m)?;
        Ok(SampleSet {
            collocation: collocation.to_vec(),
            damping_reach: (0..m).collect(),
            stiffness_reach: (0..m).collect(),
        })
    }

    /// Every DoF sampled.
    pub fn saturated(m: usize) -> Self {
        let all: Vec<usize> = (0..m).collect();
        SampleSet {
            collocation: all.clone(),
            damping_reach: all.clone(),
            stiffness_reach: all,
        }
    }

    /// Checks ranges, distinctness, `collocation ⊆ reach`, and that no
    /// sampled row of `C` or `K` couples to a DoF outside its reach set.
    pub fn validate(&self, model: &FullOrderModel) -> Result<()> {
        let m = model.dim();
        check_collocation(&self.collocation, m)?;
        for (set, name) in [
            (&self.damping_reach, "damping_reach"),
            (&self.stiffness_reach, "stiffness_reach"),
        ] {
            if let Some(&bad) = set.iter().find(|&&i| i >= m) {
                return Err(Error::IndexOutOfRange { index: bad, dim: m });
            }
            if let Some(&row) = self.collocation.iter().find(|r| !set.contains(r)) {
                return Err(Error::ReachInconsistent { row, dof: row, set: name });
            }
        }
        let c = damping_matrix(model).into_inner();
        for (a, set, name) in [
            (model.stiffness().as_matrix(), &self.stiffness_reach, "stiffness_reach"),
            (&c, &self.damping_reach, "damping_reach"),
        ] {
            for &row in &self.collocation {
                if let Some(dof) = (0..m).find(|&j| a[(row, j)] != 0.0 && !set.contains(&j)) {
                    return Err(Error::ReachInconsistent { row, dof, set: name });
                }
            }
        }
        Ok(())
    }
}

fn check_collocation(rows: &[usize], m: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty collocation set".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index: bad, dim: m });
    }
    let distinct: BTreeSet<_> = rows.iter().collect();
    if distinct.len() != rows.len() {
        return Err(Error::InvalidParameter("collocation indices must be distinct".into()));
    }
    Ok(())
}

/// `RRᵀB`: rows of `b` outside `reach` set to zero.
fn mask_rows(b: &DMatrix<f64>, reach: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for &i in reach {
        out.set_row(i, &b.row(i));
    }
    out
}

/// `PᵀCYYᵀB` and `PᵀKZZᵀB`.
fn sampled_operators(
    model: &FullOrderModel,
    b: &DMatrix<f64>,
    samples: &SampleSet,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = damping_matrix(model).into_inner();
    let cp = select_rows(&c, &samples.collocation) * mask_rows(b, &samples.damping_reach);
    let kp = select_rows(model.stiffness().as_matrix(), &samples.collocation)
        * mask_rows(b, &samples.stiffness_reach);
    (cp, kp)
}

/// Row selection `Pᵀ` as a `p×m` matrix.
fn selection(rows: &[usize], m: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(rows.len(), m);
    for (i, &r) in rows.iter().enumerate() {
        p[(i, r)] = 1.0;
    }
    p
}

/// Pseudoinverse of a matrix required to have full column rank.
fn full_rank_pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = thin_svd(a)?;
    let k = a.ncols();
    if a.nrows() < k {
        return Err(Error::RankDeficient { column: a.nrows() });
    }
    let smax = svd.sigma.iter().copied().next().unwrap_or(0.0);
    if let Some(col) = (0..k).find(|&i| !(svd.sigma[i] > 1e-12 * smax)) {
        return Err(Error::RankDeficient { column: col });
    }
    pseudoinverse(a)
}

fn collocation_rows(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    samples: &SampleSet,
) -> Result<CollocationRows> {
    let pv = select_rows(basis.matrix(), &samples.collocation);
    let pv_pinv = full_rank_pinv(&pv)?;
    let mass_rows = DVector::from_iterator(
        samples.collocation.len(),
        samples.collocation.iter().map(|&i| model.mass().diag()[i]),
    );
    let (c_rows, k_rows) = sampled_operators(model, basis.matrix(), samples);
    Ok(CollocationRows {
        rows: samples.collocation.clone(),
        pv,
        pv_pinv,
        mass_rows,
        c_rows,
        k_rows,
    })
}

/// Residual forced to zero at the collocation rows:
/// `diag(m_P)PᵀV x̃̈ + PᵀCYYᵀV x̃̇ + PᵀKZZᵀV x̃ = Pᵀf`.
///
/// With more rows than basis vectors the accelerations are the least-squares
/// solution.
pub fn collocate_naive(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    samples: &SampleSet,
) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    samples.validate(model)?;
    if samples.collocation.len() < basis.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} collocation rows for a {}-vector basis",
            samples.collocation.len(),
            basis.dim()
        )));
    }
    let rows = collocation_rows(model, basis, samples)?;
    let mr = DMatrix::from_diagonal(&rows.mass_rows) * &rows.pv;
    let force_map = selection(&samples.collocation, model.dim());
    let mut rm = ReducedModel::assemble(
        mr,
        rows.c_rows.clone(),
        rows.k_rows.clone(),
        force_map,
        false,
        Provenance::NaiveCollocation,
        basis,
        model,
    )?;
    rm.collocation = Some(rows);
    Ok(rm)
}

/// Sampled residual rows projected onto the basis:
/// `Mr = (PᵀV)ᵀPᵀMP(PᵀV)`, `Kr = (PᵀV)ᵀPᵀKZZᵀV`, force `(PᵀV)ᵀPᵀf`.
pub fn collocate_projected(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    samples: &SampleSet,
) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    samples.validate(model)?;
    let rows = collocation_rows(model, basis, samples)?;
    let pvt = rows.pv.transpose();
    let mr = SymmetricMatrix::symmetrize(
        &(&pvt * DMatrix::from_diagonal(&rows.mass_rows) * &rows.pv),
    )
    .into_inner();
    let cr = &pvt * &rows.c_rows;
    let kr = &pvt * &rows.k_rows;
    let force_map = &pvt * selection(&samples.collocation, model.dim());
    let mut rm = ReducedModel::assemble(
        mr,
        cr,
        kr,
        force_map,
        false,
        Provenance::ProjectedCollocation,
        basis,
        model,
    )?;
    rm.collocation = Some(rows);
    Ok(rm)
}

/// Greedy DEIM interpolation indices for the columns of `u`.
///
/// Index `j` maximizes the absolute residual of column `j` after
/// interpolating it at the previously chosen indices; ties go to the lowest
/// index.
pub fn deim_points(u: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (m, k) = u.shape();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("DEIM basis of shape {m}x{k}")));
    }
    let scale = u.amax();
    let mut points: Vec<usize> = Vec::with_capacity(k);
    for j in 0..k {
        let col = u.column(j).into_owned();
        let r = if j == 0 {
            col
        } else {
            let uj = u.columns(0, j).into_owned();
            let pu = select_rows(&uj, &points);
            let rhs = DVector::from_iterator(j, points.iter().map(|&p| u[(p, j)]));
            let c = pu
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularInterpolation { cond: f64::INFINITY })?;
            col - uj * c
        };
        let mut best = 0;
        for i in 1..m {
            if r[i].abs() > r[best].abs() {
                best = i;
            }
        }
        if !(r[best].abs() > 1e-12 * scale) {
            return Err(Error::SingularInterpolation { cond: f64::INFINITY });
        }
        points.push(best);
    }
    Ok(points)
}

fn interpolation_condition(pu: &DMatrix<f64>) -> Result<f64> {
    let s = thin_svd(pu)?.sigma;
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if smin > 0.0 { s[0] / smin } else { f64::INFINITY })
}

fn oblique_reduce(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    u: &DMatrix<f64>,
    points: &[usize],
    pu_inv: DMatrix<f64>,
    provenance: Provenance,
) -> Result<ReducedModel> {
    let samples = SampleSet::from_structure(model, points)?;
    let b = basis.matrix();
    // W = BᵀU(PᵀU)⁻¹, k×p
    let w = b.transpose() * u * pu_inv;
    let (cp, kp) = sampled_operators(model, b, &samples);
    let k = basis.dim();
    let mr = match basis.kind() {
        BasisKind::MassOrthonormal => DMatrix::identity(k, k),
        BasisKind::PlainOrthonormal => SymmetricMatrix::from_lower(model.mass().to_dense())
            .congruence(b)
            .into_inner(),
    };
    let force_map = &w * selection(points, model.dim());
    ReducedModel::assemble(mr, &w * cp, &w * kp, force_map, false, provenance, basis, model)
}

fn check_force_basis(model: &FullOrderModel, u: &DMatrix<f64>, points: &[usize]) -> Result<()> {
    if u.nrows() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "force basis rows",
            expected: model.dim(),
            actual: u.nrows(),
        });
    }
    check_collocation(points, model.dim())
}

/// DEIM: `Kr = BᵀU(PᵀU)⁻¹PᵀKZZᵀB` (and `Cr` likewise), Galerkin mass.
pub fn deim_reduce(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    u: &DMatrix<f64>,
    points: &[usize],
) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    check_force_basis(model, u, points)?;
    if points.len() != u.ncols() {
        return Err(Error::DimensionMismatch {
            context: "DEIM points vs force basis columns",
            expected: u.ncols(),
            actual: points.len(),
        });
    }
    let pu = select_rows(u, points);
    let cond = interpolation_condition(&pu)?;
    if !(cond < 1e12) {
        return Err(Error::SingularInterpolation { cond });
    }
    let inv = pu.try_inverse().ok_or(Error::SingularInterpolation { cond })?;
    oblique_reduce(model, basis, u, points, inv, Provenance::Deim)
}

/// GNAT: DEIM with `(PᵀU)⁻¹` replaced by `(PᵀU)†`, allowing more points than
/// force-basis vectors.
pub fn gnat_reduce(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    u: &DMatrix<f64>,
    points: &[usize],
) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    check_force_basis(model, u, points)?;
    let pu = select_rows(u, points);
    let inv = full_rank_pinv(&pu)?;
    oblique_reduce(model, basis, u, points, inv, Provenance::Gnat)
}

/// Non-negative element weights `ξ_e`; the support is the reduced mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct EcswWeights {
    xi: DVector<f64>,
    support: Vec<usize>,
    training_residual: f64,
}

impl EcswWeights {
    pub fn new(xi: DVector<f64>, training_residual: f64) -> Result<Self> {
        if let Some((index, &value)) = xi.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeWeight { index, value });
        }
        let support = (0..xi.len()).filter(|&i| xi[i] > 0.0).collect();
        Ok(EcswWeights {
            xi,
            support,
            training_residual,
        })
    }

    pub fn from_slice(xi: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(xi), 0.0)
    }

    /// `ξ_e = 1` for every element (plain assembly).
    pub fn unit(n: usize) -> Self {
        EcswWeights {
            xi: DVector::from_element(n, 1.0),
            support: (0..n).collect(),
            training_residual: 0.0,
        }
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn training_residual(&self) -> f64 {
        self.training_residual
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

fn require_mass_orthonormal(basis: &ReducedBasis) -> Result<()> {
    if basis.kind() != BasisKind::MassOrthonormal {
        return Err(Error::InvalidParameter("ECSW needs a mass-orthonormal basis".into()));
    }
    Ok(())
}

/// Trains element weights on stiffness-force snapshots `K x_s`.
///
/// Column `e` of the training matrix stacks `V_MᵀL_eᵀK_eL_eV_M x̃_s` over all
/// snapshots, with `x̃_s = V_MᵀM x_s`; the target stacks `V_MᵀKV_M x̃_s`.
pub fn ecsw_train(
    model: &FullOrderModel,
    basis: &ReducedBasis,
    snapshots: &SnapshotMatrix,
    tau: f64,
) -> Result<EcswWeights> {
    check_basis(model, basis)?;
    require_mass_orthonormal(basis)?;
    if model.elements().is_empty() {
        return Err(Error::InvalidParameter("ECSW needs an element decomposition".into()));
    }
    if snapshots.data.ncols() == 0 {
        return Err(Error::InvalidParameter("no snapshots".into()));
    }
    if snapshots.data.nrows() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "snapshot rows",
            expected: model.dim(),
            actual: snapshots.data.nrows(),
        });
    }
    let b = basis.matrix();
    let centered = snapshots.centered();
    let xr: Vec<DVector<f64>> = centered
        .column_iter()
        .map(|c| basis.project(&c.into_owned()))
        .collect();
    let k = basis.dim();
    let rows = k * xr.len();

    let columns: Vec<DVector<f64>> = model
        .elements()
        .par_iter()
        .map(|e| {
            let lb = e.gather_rows(b);
            let kre = lb.transpose() * e.ke.as_matrix() * &lb;
            let mut col = DVector::zeros(rows);
            for (s, x) in xr.iter().enumerate() {
                col.rows_mut(s * k, k).copy_from(&(&kre * x));
            }
            col
        })
        .collect();
    let g = DMatrix::from_columns(&columns);

    let kr = model.stiffness().congruence(b).into_inner();
    let mut target = DVector::zeros(rows);
    for (s, x) in xr.iter().enumerate() {
        target.rows_mut(s * k, k).copy_from(&(&kr * x));
    }
    let sol = sparse_nnls(&g, &target, tau)?;
    EcswWeights::new(sol.weights, sol.relative_residual)
}

fn check_weights(model: &FullOrderModel, weights: &EcswWeights) -> Result<()> {
    if weights.len() != model.elements().len() {
        return Err(Error::DimensionMismatch {
            context: "ECSW weights vs elements",
            expected: model.elements().len(),
            actual: weights.len(),
        });
    }
    Ok(())
}

/// `Σ_e ξ_e L_eᵀK_eL_e`
pub fn ecsw_weighted_stiffness(
    model: &FullOrderModel,
    weights: &EcswWeights,
) -> Result<SymmetricMatrix> {
    check_weights(model, weights)?;
    let m = model.dim();
    let mut k = DMatrix::zeros(m, m);
    for &e in weights.support() {
        let el = &model.elements()[e];
        el.scatter_into(el.ke.as_matrix(), weights.xi()[e], &mut k);
    }
    Ok(SymmetricMatrix::from_lower(k))
}

/// `R = M⁻¹ᐟ²(Σ_e ξ_e L_eᵀK_eL_e)M⁻¹ᐟ²`, whose spectrum is that of the
/// weighted full-space operator `M⁻¹K_ξ`.
pub fn ecsw_weighted_operator(
    model: &FullOrderModel,
    weights: &EcswWeights,
) -> Result<SymmetricMatrix> {
    let k = ecsw_weighted_stiffness(model, weights)?;
    let isq = model.mass().inv_sqrt();
    Ok(SymmetricMatrix::from_lower(
        crate::linalg::DiagonalPositiveMatrix::scale_both(k.as_matrix(), &isq),
    ))
}

/// `Kr = Σ_e ξ_e (L_eV_M)ᵀK_e(L_eV_M)`, `Cr` from `a1 M_e + a2 K_e` likewise,
/// `Mr = I`. Symmetric and positive semi-definite by construction.
pub fn ecsw_reduce(
    model: &FullOrderModel,
    weights: &EcswWeights,
    basis: &ReducedBasis,
) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    require_mass_orthonormal(basis)?;
    check_weights(model, weights)?;
    let b = basis.matrix();
    let k = basis.dim();
    let (a1, a2) = (model.a1(), model.a2());
    let mut kr = DMatrix::zeros(k, k);
    let mut cr = DMatrix::zeros(k, k);
    let mut force_map = DMatrix::zeros(k, model.dim());
    for &e in weights.support() {
        let el = &model.elements()[e];
        let w = weights.xi()[e];
        let lb = el.gather_rows(b);
        let ke = el.ke.as_matrix();
        let ce = el.me.to_dense() * a1 + ke * a2;
        kr += (lb.transpose() * ke * &lb) * w;
        cr += (lb.transpose() * ce * &lb) * w;
    }
    force_map.copy_from(&b.transpose());
    let kr = SymmetricMatrix::from_lower(kr);
    let min = sym_eig(&kr)?.min();
    if min < -1e-8 * kr.norm() {
        return Err(Error::NotPsd { min_eig: min });
    }
    ReducedModel::assemble(
        DMatrix::identity(k, k),
        SymmetricMatrix::from_lower(cr).into_inner(),
        kr.into_inner(),
        force_map,
        true,
        Provenance::Ecsw,
        basis,
        model,
    )
}

/// Reduced velocity update used by [`hrom_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityUpdate {
    /// `x̃ⁿ⁺¹ = (PᵀV)†(PᵀVx̃ⁿ + Δt v_Pⁿ⁺¹ᐟ²)`, then
    /// `x̃̇ⁿ⁺¹ᐟ² = (x̃ⁿ⁺¹ − x̃ⁿ)/Δt`.
    #[default]
    Displacement,
    /// `x̃̇ⁿ⁺¹ᐟ² = (PᵀV)† v_Pⁿ⁺¹ᐟ²`, then `x̃ⁿ⁺¹ = x̃ⁿ + Δt x̃̇ⁿ⁺¹ᐟ²`.
    Velocity,
}

/// State of the collocation scheme: reduced displacements and velocities
/// plus the sampled-row velocities `v_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct HromState {
    pub x: DVector<f64>,
    pub v_half: DVector<f64>,
    pub v_rows: DVector<f64>,
    pub t: f64,
    pub n: usize,
}

impl HromState {
    pub fn initial(hrom: &ReducedModel, x0: DVector<f64>, v0: DVector<f64>) -> Result<Self> {
        let rows = hrom
            .collocation
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("model has no collocation rows".into()))?;
        let k = hrom.dim();
        for (v, what) in [(&x0, "initial reduced displacement"), (&v0, "initial reduced velocity")]
        {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    context: what,
                    expected: k,
                    actual: v.len(),
                });
            }
        }
        let v_rows = &rows.pv * &v0;
        Ok(HromState {
            x: x0,
            v_half: v0,
            v_rows,
            t: 0.0,
            n: 0,
        })
    }
}

/// One step of the collocation central-difference scheme: accelerations at
/// the sampled rows, sampled-row velocity update, least-squares reduced
/// update.
pub fn hrom_step(
    hrom: &ReducedModel,
    state: &HromState,
    dt: f64,
    update: VelocityUpdate,
) -> Result<HromState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let rows = hrom
        .collocation
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("model has no collocation rows".into()))?;
    let f = hrom.load().eval(state.t, hrom.basis.full_dim());
    let fp = DVector::from_iterator(rows.rows.len(), rows.rows.iter().map(|&i| f[i]));
    let rhs = fp - &rows.c_rows * &state.v_half - &rows.k_rows * &state.x;
    let a = rhs.component_div(&rows.mass_rows);
    let v_rows = &state.v_rows + &a * dt;
    let (x, v_half) = match update {
        VelocityUpdate::Displacement => {
            let x = &rows.pv_pinv * (&rows.pv * &state.x + &v_rows * dt);
            let v = (&x - &state.x) / dt;
            (x, v)
        }
        VelocityUpdate::Velocity => {
            let v = &rows.pv_pinv * &v_rows;
            (&state.x + &v * dt, v)
        }
    };
    Ok(HromState {
        x,
        v_half,
        v_rows,
        t: state.t + dt,
        n: state.n + 1,
    })
}

/// Repeated [`hrom_step`] from reduced `(x̃⁰, x̃̇⁰)`, with the same recording
/// and divergence rules as [`integrate`](crate::integrator::integrate).
pub fn integrate_collocation(
    hrom: &ReducedModel,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    opts: &IntegrateOptions,
    update: VelocityUpdate,
) -> Result<Trajectory> {
    if !(opts.blowup > 0.0) || opts.t_end < 0.0 {
        return Err(Error::InvalidParameter("blowup must be > 0 and t_end >= 0".into()));
    }
    let mut state = HromState::initial(hrom, x0.clone(), v0.clone())?;
    let every = opts.record_every.max(1);
    let threshold = opts.blowup * x0.norm().max(1.0);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        steps: vec![0],
        diverged: false,
        divergence_step: None,
        max_norm: x0.norm(),
        final_state: IntegratorState::initial(x0.clone(), v0.clone(), 0.0)?,
    };
    let total = opts.steps();
    for _ in 0..total {
        state = hrom_step(hrom, &state, opts.dt, update)?;
        let norm = state.x.norm();
        if norm.is_finite() {
            traj.max_norm = traj.max_norm.max(norm);
        }
        let finite = state.x.iter().chain(state.v_half.iter()).all(|v| v.is_finite());
        let blown = !finite || norm > threshold;
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
    traj.final_state = IntegratorState {
        x: state.x,
        v_half: state.v_half,
        t: state.t,
        n: state.n,
    };
    Ok(traj)
}
