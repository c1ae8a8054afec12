//! Reduced bases and Galerkin reduced-order models.
//!
//! Displacements are approximated as `x ≈ x⁰ + V x̃`. With a mass-orthonormal
//! basis (`VᵀMV = I`) the reduced mass is the identity and the eigenvalues of
//! `Kr = VᵀKV` interlace those of `M⁻¹K`.

mod io;

pub use io::{read_basis_json, read_snapshot_csv, write_basis_json, BasisFile};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::SecondOrderSystem;
use crate::linalg::{
    gen_eig_diag_mass, m_orthonormalize, pseudoinverse, relative_asymmetry, sym_eig, thin_svd,
    DiagonalPositiveMatrix, SymmetricMatrix,
};
use crate::model::{damping_matrix, FullOrderModel, LoadTable};

const ORTHO_TOL: f64 = 1e-10;

/// Snapshot columns `x_s` with a reference configuration subtracted before
/// compression. The reference defaults to zero.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub reference: DVector<f64>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let m = data.nrows();
        Self::with_reference(data, DVector::zeros(m))
    }

    pub fn with_reference(data: DMatrix<f64>, reference: DVector<f64>) -> Result<Self> {
        if reference.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                context: "snapshot reference",
                expected: data.nrows(),
                actual: reference.len(),
            });
        }
        if data.iter().chain(reference.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite snapshot entry".into()));
        }
        Ok(SnapshotMatrix { data, reference })
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let mut d = self.data.clone();
        for mut col in d.column_iter_mut() {
            col -= &self.reference;
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    PlainOrthonormal,
    MassOrthonormal,
}

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    v: DMatrix<f64>,
    kind: BasisKind,
    mass: Option<DiagonalPositiveMatrix>,
}

impl ReducedBasis {
    /// Basis with `VᵀV = I` (checked to 1e-10).
    pub fn plain(v: DMatrix<f64>) -> Result<Self> {
        let k = v.ncols();
        let err = (v.transpose() * &v - DMatrix::identity(k, k)).amax();
        if err > ORTHO_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(ReducedBasis {
            v,
            kind: BasisKind::PlainOrthonormal,
            mass: None,
        })
    }

    /// Basis with `VᵀMV = I` (checked to 1e-10).
    pub fn mass_orthonormal(v: DMatrix<f64>, mass: DiagonalPositiveMatrix) -> Result<Self> {
        if v.nrows() != mass.order() {
            return Err(Error::DimensionMismatch {
                context: "basis rows",
                expected: mass.order(),
                actual: v.nrows(),
            });
        }
        let k = v.ncols();
        let g = v.transpose() * DMatrix::from_diagonal(mass.diag()) * &v;
        let err = (g - DMatrix::identity(k, k)).amax();
        if err > ORTHO_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not mass-orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(ReducedBasis {
            v,
            kind: BasisKind::MassOrthonormal,
            mass: Some(mass),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn mass(&self) -> Option<&DiagonalPositiveMatrix> {
        self.mass.as_ref()
    }

    /// Full dimension `m`.
    pub fn full_dim(&self) -> usize {
        self.v.nrows()
    }

    /// Reduced dimension `k`.
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    /// Orthogonal projection coordinates: `Vᵀx` for plain bases, `VᵀMx` for
    /// mass-orthonormal ones.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.mass {
            Some(m) => self.v.transpose() * m.apply(x),
            None => self.v.transpose() * x,
        }
    }
}

/// Left singular vectors of the centered snapshots, truncated to `k`, then
/// mass-orthonormalized within the same span when `mass` is given.
pub fn pod_basis(
    snapshots: &SnapshotMatrix,
    k: usize,
    mass: Option<&DiagonalPositiveMatrix>,
) -> Result<ReducedBasis> {
    let svd = thin_svd(&snapshots.centered())?;
    if k == 0 || k > svd.sigma.len() || svd.sigma[k - 1] < 1e-12 * svd.sigma[0] || svd.sigma[0] == 0.0
    {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the numerical rank of the snapshots"
        )));
    }
    let v = svd.u.columns(0, k).into_owned();
    match mass {
        None => ReducedBasis::plain(v),
        Some(m) => ReducedBasis::mass_orthonormal(m_orthonormalize(&v, m)?, m.clone()),
    }
}

/// Mass-orthonormal eigenvectors of `M⁻¹K` for the selected (0-based,
/// ascending-eigenvalue) mode indices.
pub fn modal_basis(model: &FullOrderModel, mode_indices: &[usize]) -> Result<ReducedBasis> {
    let m = model.dim();
    if mode_indices.is_empty() {
        return Err(Error::InvalidParameter("no modes selected".into()));
    }
    if let Some(&bad) = mode_indices.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index: bad, dim: m });
    }
    let eig = gen_eig_diag_mass(model.stiffness(), model.mass())?;
    let isq = model.mass().inv_sqrt();
    let v = DMatrix::from_fn(m, mode_indices.len(), |i, j| {
        isq[i] * eig.vectors[(i, mode_indices[j])]
    });
    ReducedBasis::mass_orthonormal(v, model.mass().clone())
}

/// `x⁰ + V x̃`
pub fn reconstruct(
    basis: &ReducedBasis,
    x_reduced: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x_reduced.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            context: "reduced coordinates",
            expected: basis.dim(),
            actual: x_reduced.len(),
        });
    }
    if x0.len() != basis.full_dim() {
        return Err(Error::DimensionMismatch {
            context: "reference configuration",
            expected: basis.full_dim(),
            actual: x0.len(),
        });
    }
    Ok(x0 + basis.matrix() * x_reduced)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Galerkin,
    NaiveCollocation,
    ProjectedCollocation,
    Deim,
    Gnat,
    Ecsw,
}

/// Sampled-row data needed by the collocation time stepper.
#[derive(Debug, Clone)]
pub struct CollocationRows {
    pub rows: Vec<usize>,
    /// `PᵀV`
    pub pv: DMatrix<f64>,
    /// `(PᵀV)†`
    pub pv_pinv: DMatrix<f64>,
    /// Diagonal of `PᵀMP`.
    pub mass_rows: DVector<f64>,
    /// `PᵀCYYᵀV`
    pub c_rows: DMatrix<f64>,
    /// `PᵀKZZᵀV`
    pub k_rows: DMatrix<f64>,
}

/// Reduced (or hyper-reduced) second-order system
/// `Mr x̃̈ + Cr x̃̇ + Kr x̃ = F f_ext(t)`.
///
/// `Mr`, `Cr`, `Kr` have `rows` rows and `k` columns; `rows = k` except for
/// over-sampled naive collocation, where accelerations are obtained in the
/// least-squares sense.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub mr: DMatrix<f64>,
    pub cr: DMatrix<f64>,
    pub kr: DMatrix<f64>,
    /// Maps `f_ext ∈ ℝᵐ` to the reduced right-hand side.
    pub force_map: DMatrix<f64>,
    /// `Cr` and `Kr` are symmetric by construction.
    pub symmetric: bool,
    pub provenance: Provenance,
    pub basis: ReducedBasis,
    pub collocation: Option<CollocationRows>,
    pub a1: f64,
    pub a2: f64,
    mass_solve: DMatrix<f64>,
    load: LoadTable,
}

impl ReducedModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        mr: DMatrix<f64>,
        cr: DMatrix<f64>,
        kr: DMatrix<f64>,
        force_map: DMatrix<f64>,
        symmetric: bool,
        provenance: Provenance,
        basis: &ReducedBasis,
        model: &FullOrderModel,
    ) -> Result<Self> {
        let k = basis.dim();
        let rows = mr.nrows();
        for (name, a) in [("Mr", &mr), ("Cr", &cr), ("Kr", &kr)] {
            if a.shape() != (rows, k) {
                return Err(Error::InvalidParameter(format!(
                    "{name} has shape {:?}, expected ({rows}, {k})",
                    a.shape()
                )));
            }
        }
        let identity = rows == k && mr == DMatrix::identity(k, k);
        let mass_solve = if identity {
            DMatrix::identity(k, k)
        } else {
            pseudoinverse(&mr)?
        };
        Ok(ReducedModel {
            mr,
            cr,
            kr,
            force_map,
            symmetric,
            provenance,
            basis: basis.clone(),
            collocation: None,
            a1: model.a1(),
            a2: model.a2(),
            mass_solve,
            load: model.external_force().clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn is_square(&self) -> bool {
        self.mr.nrows() == self.mr.ncols()
    }

    /// `Mr⁻¹Kr` (least-squares operator `Mr†Kr` when not square).
    pub fn minv_k(&self) -> DMatrix<f64> {
        &self.mass_solve * &self.kr
    }

    pub fn minv_c(&self) -> DMatrix<f64> {
        &self.mass_solve * &self.cr
    }

    /// `‖Kr − Krᵀ‖_F / ‖Kr‖_F` for square models.
    pub fn stiffness_asymmetry(&self) -> f64 {
        if self.is_square() {
            relative_asymmetry(&self.kr)
        } else {
            f64::NAN
        }
    }

    pub fn load(&self) -> &LoadTable {
        &self.load
    }

    pub fn reduced_force(&self, t: f64) -> DVector<f64> {
        &self.force_map * self.load.eval(t, self.basis.full_dim())
    }
}

impl SecondOrderSystem for ReducedModel {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn force_at(&self, x: &DVector<f64>, v_half: &DVector<f64>, t: f64) -> DVector<f64> {
        self.reduced_force(t) - &self.cr * v_half - &self.kr * x
    }

    fn mass_inverse_apply(&self, force: &DVector<f64>) -> DVector<f64> {
        &self.mass_solve * force
    }
}

pub(crate) fn check_basis(model: &FullOrderModel, basis: &ReducedBasis) -> Result<()> {
    if basis.full_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "basis rows vs model DoFs",
            expected: model.dim(),
            actual: basis.full_dim(),
        });
    }
    if let Some(bm) = basis.mass() {
        let md = model.mass().diag();
        if (bm.diag() - md).amax() > 1e-12 * md.amax() {
            return Err(Error::InvalidParameter(
                "basis is mass-orthonormal with respect to a different mass".into(),
            ));
        }
    }
    Ok(())
}

/// Galerkin projection `Mr = VᵀMV`, `Cr = VᵀCV`, `Kr = VᵀKV`, force `Vᵀf`.
/// For a mass-orthonormal basis `Mr` is exactly the identity.
pub fn galerkin_reduce(model: &FullOrderModel, basis: &ReducedBasis) -> Result<ReducedModel> {
    check_basis(model, basis)?;
    let v = basis.matrix();
    let k = basis.dim();
    let mr = match basis.kind() {
        BasisKind::MassOrthonormal => DMatrix::identity(k, k),
        BasisKind::PlainOrthonormal => {
            SymmetricMatrix::from_lower(model.mass().to_dense()).congruence(v).into_inner()
        }
    };
    let kr = model.stiffness().congruence(v).into_inner();
    let cr = damping_matrix(model).congruence(v).into_inner();
    ReducedModel::assemble(
        mr,
        cr,
        kr,
        v.transpose(),
        true,
        Provenance::Galerkin,
        basis,
        model,
    )
}

/// Ascending eigenvalues of `Mr⁻¹Kr` for a symmetric square reduced model
/// with positive definite `Mr`, via the Cholesky-similar form `L⁻¹KrL⁻ᵀ`.
pub fn reduced_eigenvalues(rm: &ReducedModel) -> Result<DVector<f64>> {
    if !rm.is_square() {
        return Err(Error::InvalidParameter("reduced model is not square".into()));
    }
    let k = rm.dim();
    if rm.mr == DMatrix::identity(k, k) {
        return Ok(sym_eig(&SymmetricMatrix::symmetrize(&rm.kr))?.values);
    }
    let chol = rm
        .mr
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("reduced mass is not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular reduced mass".into()))?;
    let s = &linv * &rm.kr * linv.transpose();
    Ok(sym_eig(&SymmetricMatrix::symmetrize(&s))?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_string_model, StringParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_snapshots_full_basis() {
        let s = SnapshotMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let b = pod_basis(&s, 4, None).unwrap();
        assert!((b.matrix().transpose() * b.matrix() - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn rank_one_snapshots() {
        let a = DVector::from_column_slice(&[1.0, -2.0, 2.0]);
        let w = DVector::from_column_slice(&[0.5, 1.0, 3.0, -1.0]);
        let s = SnapshotMatrix::new(&a * w.transpose()).unwrap();
        let b = pod_basis(&s, 1, None).unwrap();
        let col = b.matrix().column(0);
        let unit = &a / a.norm();
        assert!((col - &unit).norm().min((col + &unit).norm()) < 1e-12);
        assert!(pod_basis(&s, 2, None).is_err());
    }

    #[test]
    fn pod_tail_energy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data = DMatrix::from_fn(9, 7, |_, _| rng.gen_range(-1.0..1.0));
        let s = SnapshotMatrix::new(data.clone()).unwrap();
        let b = pod_basis(&s, 3, None).unwrap();
        let v = b.matrix();
        let residual = (&data - v * v.transpose() * &data).norm();
        let sigma = thin_svd(&data).unwrap().sigma;
        let tail: f64 = sigma.iter().skip(3).map(|x| x * x).sum::<f64>().sqrt();
        assert!((residual - tail).abs() < 1e-8);
    }

    #[test]
    fn pod_with_mass_preserves_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let data = DMatrix::from_fn(6, 5, |_, _| rng.gen_range(-1.0..1.0));
        let mass =
            DiagonalPositiveMatrix::new(DVector::from_fn(6, |_, _| rng.gen_range(0.5..2.0))).unwrap();
        let s = SnapshotMatrix::new(data).unwrap();
        let plain = pod_basis(&s, 2, None).unwrap();
        let massb = pod_basis(&s, 2, Some(&mass)).unwrap();
        assert_eq!(massb.kind(), BasisKind::MassOrthonormal);
        // span(V_M) = span(V): projecting V_M onto span(V) leaves it unchanged.
        let v = plain.matrix();
        let vm = massb.matrix();
        assert!((v * v.transpose() * vm - vm).amax() < 1e-10);
    }

    #[test]
    fn full_modal_basis_reproduces_spectrum() {
        let model = build_string_model(&StringParams::new(7, 1.0, 3.0)).unwrap();
        let b = modal_basis(&model, &(0..7).collect::<Vec<_>>()).unwrap();
        let rom = galerkin_reduce(&model, &b).unwrap();
        let fom = gen_eig_diag_mass(model.stiffness(), model.mass()).unwrap().values;
        let red = reduced_eigenvalues(&rom).unwrap();
        assert!((fom - red).amax() < 1e-10 * 600.0);
        assert!(matches!(modal_basis(&model, &[7]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn second_mode_of_five_node_string() {
        let model = build_string_model(&StringParams::new(5, 1.0, 10.0)).unwrap();
        let b = modal_basis(&model, &[1]).unwrap();
        let rom = galerkin_reduce(&model, &b).unwrap();
        assert!((rom.kr[(0, 0)] - 19.90).abs() < 0.05);
        assert_eq!(rom.mr[(0, 0)], 1.0);
    }

    #[test]
    fn identity_basis_reproduces_model() {
        let mut p = StringParams::new(4, 1.0, 2.0);
        p.a1 = 0.3;
        p.a2 = 0.01;
        let model = build_string_model(&p).unwrap();
        let unit = FullOrderModel::new(
            DiagonalPositiveMatrix::from_slice(&[1.0; 4]).unwrap(),
            model.stiffness().clone(),
            0.3,
            0.01,
            vec![],
            LoadTable::zero(),
        )
        .unwrap();
        let b = ReducedBasis::plain(DMatrix::identity(4, 4)).unwrap();
        let rom = galerkin_reduce(&unit, &b).unwrap();
        assert_eq!(&rom.kr, unit.stiffness().as_matrix());
        assert_eq!(rom.mr, DMatrix::identity(4, 4));
        assert_eq!(&rom.cr, damping_matrix(&unit).as_matrix());
    }

    #[test]
    fn reconstruct_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let v = thin_svd(&DMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0))).unwrap().u;
        let b = ReducedBasis::plain(v.clone()).unwrap();
        let x0 = DVector::from_fn(5, |i, _| i as f64);
        assert_eq!(reconstruct(&b, &DVector::zeros(2), &x0).unwrap(), x0);

        let x = &v * DVector::from_column_slice(&[0.7, -1.3]);
        let back = reconstruct(&b, &b.project(&x), &DVector::zeros(5)).unwrap();
        assert!((back - &x).amax() < 1e-10);

        let xr = DVector::from_column_slice(&[2.0, -0.5]);
        let got = reconstruct(&b, &xr, &x0).unwrap();
        for i in 0..5 {
            let mut acc = x0[i];
            for j in 0..2 {
                acc += v[(i, j)] * xr[j];
            }
            assert!((got[i] - acc).abs() < 1e-14);
        }
        assert!(reconstruct(&b, &DVector::zeros(3), &x0).is_err());
    }
}
