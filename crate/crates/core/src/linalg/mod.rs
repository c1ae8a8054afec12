//! Dense linear-algebra kernels.
//!
//! Eigenvalues are always reported in ascending order, singular values in
//! descending order. Symmetric eigenproblems, SVD, QR and the real Schur form
//! are delegated to `nalgebra`; the wrappers here fix ordering, tolerances and
//! error reporting.

mod nnls;

pub use nnls::{sparse_nnls, NnlsSolution};

use nalgebra::linalg::{Schur, SymmetricEigen, QR, SVD};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

const EIG_EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// Real symmetric matrix. Storage is kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Accepts a square matrix that is symmetric to within `1e-10` relative to
    /// its largest entry and mirrors the lower triangle onto the upper one.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        check_square(&a, "SymmetricMatrix::new")?;
        check_finite(&a)?;
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let n = a.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_lower(a))
    }

    /// Builds the symmetric matrix defined by the lower triangle of `a`.
    pub fn from_lower(mut a: DMatrix<f64>) -> Self {
        let n = a.nrows().min(a.ncols());
        for j in 0..n {
            for i in (j + 1)..n {
                a[(j, i)] = a[(i, j)];
            }
        }
        SymmetricMatrix(a)
    }

    /// Symmetric part `(a + aᵀ)/2`.
    pub fn symmetrize(a: &DMatrix<f64>) -> Self {
        SymmetricMatrix((a + a.transpose()) * 0.5)
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymmetricMatrix(&self.0 * c)
    }

    /// Congruence transform `Bᵀ A B`, returned exactly symmetric.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Self {
        let prod = b.transpose() * &self.0 * b;
        Self::symmetrize(&prod)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl std::ops::Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Diagonal matrix with strictly positive entries, typically a lumped mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPositiveMatrix(DVector<f64>);

impl DiagonalPositiveMatrix {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty diagonal".into()));
        }
        if let Some(i) = diag.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "diagonal entry {i} is {} (must be finite and > 0)",
                diag[i]
            )));
        }
        Ok(DiagonalPositiveMatrix(diag))
    }

    pub fn from_slice(diag: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(diag))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.0)
    }

    pub fn sqrt(&self) -> DVector<f64> {
        self.0.map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DVector<f64> {
        self.0.map(|d| 1.0 / d.sqrt())
    }

    /// `M⁻¹ f`
    pub fn apply_inverse(&self, f: &DVector<f64>) -> DVector<f64> {
        f.component_div(&self.0)
    }

    /// `M x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.0)
    }

    /// `diag(s) A diag(s)` for a vector `s`.
    pub fn scale_both(a: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| s[i] * a[(i, j)] * s[j])
    }
}

/// Eigenvalues in ascending order; column `i` of `vectors` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn sym_eig(a: &SymmetricMatrix) -> Result<EigenPairs> {
    let mat = a.as_matrix();
    let n = mat.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let eig = SymmetricEigen::try_new(mat.clone(), EIG_EPS, MAX_ITER).ok_or(
        Error::NotConverged {
            routine: "symmetric eigensolver",
            residual: f64::NAN,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let scale = mat.norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..n {
        let v = vectors.column(i);
        let res = (mat * v - v * values[i]).norm();
        worst = worst.max(res);
    }
    if worst > 1e-8 * scale {
        return Err(Error::NotConverged {
            routine: "symmetric eigensolver",
            residual: worst / scale,
        });
    }
    Ok(EigenPairs { values, vectors })
}

/// Eigenpairs of `M⁻¹K`, computed through the similar symmetric matrix
/// `M⁻¹ᐟ² K M⁻¹ᐟ²`. The returned vectors belong to the symmetric form; FOM-space
/// modes are `M⁻¹ᐟ² · vectors`.
pub fn gen_eig_diag_mass(k: &SymmetricMatrix, m: &DiagonalPositiveMatrix) -> Result<EigenPairs> {
    if k.order() != m.order() {
        return Err(Error::DimensionMismatch {
            context: "gen_eig_diag_mass",
            expected: m.order(),
            actual: k.order(),
        });
    }
    sym_eig(&mass_normalized(k, m))
}

/// `M⁻¹ᐟ² K M⁻¹ᐟ²`
pub fn mass_normalized(k: &SymmetricMatrix, m: &DiagonalPositiveMatrix) -> SymmetricMatrix {
    let s = m.inv_sqrt();
    SymmetricMatrix::from_lower(DiagonalPositiveMatrix::scale_both(k.as_matrix(), &s))
}

/// Thin SVD `S = U diag(σ) Wᵀ` with descending singular values.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub w: DMatrix<f64>,
}

pub fn thin_svd(s: &DMatrix<f64>) -> Result<ThinSvd> {
    check_finite(s)?;
    let (rows, cols) = s.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            w: DMatrix::zeros(cols, 0),
        });
    }
    let svd = SVD::try_new(s.clone(), true, true, EIG_EPS, MAX_ITER).ok_or(Error::NotConverged {
        routine: "SVD",
        residual: f64::NAN,
    })?;
    let u_raw = svd.u.expect("U requested");
    let vt_raw = svd.v_t.expect("Vᵀ requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = DVector::from_iterator(r, order.iter().map(|&i| svd.singular_values[i]));
    let u = DMatrix::from_fn(rows, r, |i, c| u_raw[(i, order[c])]);
    let w = DMatrix::from_fn(cols, r, |i, c| vt_raw[(order[c], i)]);
    Ok(ThinSvd { u, sigma, w })
}

/// Returns `R` with `RᵀMR = I` spanning the same space as `V`: `M¹ᐟ²V` is
/// orthonormalized by Householder QR and mapped back with `M⁻¹ᐟ²`.
pub fn m_orthonormalize(v: &DMatrix<f64>, m: &DiagonalPositiveMatrix) -> Result<DMatrix<f64>> {
    if v.nrows() != m.order() {
        return Err(Error::DimensionMismatch {
            context: "m_orthonormalize",
            expected: m.order(),
            actual: v.nrows(),
        });
    }
    let k = v.ncols();
    if k > v.nrows() {
        return Err(Error::RankDeficient { column: v.nrows() });
    }
    check_finite(v)?;
    let sq = m.sqrt();
    let x = DMatrix::from_fn(v.nrows(), k, |i, j| sq[i] * v[(i, j)]);
    let qr = QR::new(x.clone());
    let r = qr.r();
    let mut q = qr.q();
    // Rank test against the column norms of the scaled input.
    let scale = (0..k).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    for j in 0..k {
        if r[(j, j)].abs() <= 1e-10 * scale || scale == 0.0 {
            return Err(Error::RankDeficient { column: j });
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let isq = m.inv_sqrt();
    Ok(DMatrix::from_fn(v.nrows(), k, |i, j| isq[i] * q[(i, j)]))
}

/// Moore–Penrose pseudoinverse; singular values below `1e-12·σ_max` count as zero.
pub fn pseudoinverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, k) = a.shape();
    let svd = thin_svd(a)?;
    let mut out = DMatrix::zeros(k, p);
    if svd.sigma.is_empty() || svd.sigma[0] == 0.0 {
        return Ok(out);
    }
    let cutoff = 1e-12 * svd.sigma[0];
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s > cutoff {
            out += (svd.w.column(i) / s) * svd.u.column(i).transpose();
        }
    }
    Ok(out)
}

/// Largest eigenvalue magnitude of a general square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub radius: f64,
    /// Some eigenvalue on the radius (within `1e-8` relative) is repeated.
    pub repeated_at_radius: bool,
}

/// Eigenvalues of a general real square matrix via the real Schur form.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    check_square(a, "general_eigenvalues")?;
    check_finite(a)?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), EIG_EPS, MAX_ITER).ok_or(Error::NotConverged {
        routine: "Schur decomposition",
        residual: f64::NAN,
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<SpectralRadius> {
    let eigs = general_eigenvalues(a)?;
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let on_circle = 1e-8 * radius.max(1.0);
    // Defective eigenvalues are perturbed by O(√ε) in floating point, so the
    // clustering tolerance is looser than the on-radius one.
    let cluster = 1e-7 * radius.max(1.0);
    let repeated_at_radius = eigs.iter().enumerate().any(|(i, zi)| {
        (zi.norm() - radius).abs() <= on_circle
            && eigs
                .iter()
                .enumerate()
                .any(|(j, zj)| j != i && (zi - zj).norm() <= cluster)
    });
    Ok(SpectralRadius {
        radius,
        repeated_at_radius,
    })
}

pub(crate) fn check_square(a: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("non-finite matrix entry".into()))
    }
}

/// Rows `rows` of `a`, in the given order.
pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Columns `cols` of `a`, in the given order.
pub fn select_cols(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Largest entrywise deviation from symmetry relative to the Frobenius norm.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        0.0
    } else {
        (a - a.transpose()).norm() / n
    }
}
