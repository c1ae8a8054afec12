//! Seeded random test instances shared by the property suites, the examples
//! and the acceptance tests.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{m_orthonormalize, thin_svd, DiagonalPositiveMatrix, SymmetricMatrix};
use crate::model::{ElementBlock, FullOrderModel, LoadTable};
use crate::reduction::ReducedBasis;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for trial `index` of a suite seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `BBᵀ` with `B` of random rank in `1..=n`, so singular matrices occur.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    let r = rng.gen_range(1..=n);
    let b = random_matrix(rng, n, r);
    SymmetricMatrix::from_lower(&b * b.transpose())
}

pub fn random_mass<R: Rng>(rng: &mut R, n: usize) -> DiagonalPositiveMatrix {
    DiagonalPositiveMatrix::new(DVector::from_fn(n, |_, _| rng.gen_range(0.1..2.0)))
        .expect("positive by construction")
}

/// Random `k`-column basis with `VᵀV = I`.
pub fn random_plain_basis<R: Rng>(rng: &mut R, m: usize, k: usize) -> Result<ReducedBasis> {
    let u = thin_svd(&random_matrix(rng, m, k))?.u;
    ReducedBasis::plain(u)
}

/// Random `k`-column basis with `VᵀMV = I`.
pub fn random_mass_basis<R: Rng>(
    rng: &mut R,
    mass: &DiagonalPositiveMatrix,
    k: usize,
) -> Result<ReducedBasis> {
    let v = m_orthonormalize(&random_matrix(rng, mass.order(), k), mass)?;
    ReducedBasis::mass_orthonormal(v, mass.clone())
}

/// Model with random PSD stiffness (no element decomposition) and a
/// mass-orthonormal basis of random size.
#[derive(Debug, Clone)]
pub struct SpectralInstance {
    pub model: FullOrderModel,
    pub basis: ReducedBasis,
}

/// `m ∈ [2, max_order]`, `k ∈ [1, m]`, `a1, a2 ∈ [0, 2]`.
pub fn spectral_instance<R: Rng>(rng: &mut R, max_order: usize) -> Result<SpectralInstance> {
    let m = rng.gen_range(2..=max_order.max(2));
    let k = rng.gen_range(1..=m);
    let stiffness = random_psd(rng, m);
    let mass = random_mass(rng, m);
    let a1 = rng.gen_range(0.0..2.0);
    let a2 = rng.gen_range(0.0..2.0);
    let basis = random_mass_basis(rng, &mass, k)?;
    let model = FullOrderModel::new(mass, stiffness, a1, a2, Vec::new(), LoadTable::zero())?;
    Ok(SpectralInstance { model, basis })
}

/// Random element mesh on `m` DoFs: a chain of 2-node elements covering
/// every DoF, plus a few 3-node elements on random DoF triples. Element
/// stiffnesses are random PSD, element masses random positive.
pub fn random_mesh<R: Rng>(rng: &mut R, m: usize, extra: usize) -> Result<FullOrderModel> {
    let mut elements = Vec::new();
    let mut push = |rng: &mut R, dofs: Vec<usize>| -> Result<()> {
        let n = dofs.len();
        let ke = random_psd(rng, n).scaled(rng.gen_range(0.5..5.0));
        let me = random_mass(rng, n);
        elements.push(ElementBlock::new(dofs, ke, me)?);
        Ok(())
    };
    for i in 0..m.saturating_sub(1) {
        push(rng, vec![i, i + 1])?;
    }
    if m == 1 {
        push(rng, vec![0])?;
    }
    let all: Vec<usize> = (0..m).collect();
    for _ in 0..extra {
        if m >= 3 {
            let dofs: Vec<usize> = all.choose_multiple(rng, 3).copied().collect();
            push(rng, dofs)?;
        }
    }
    FullOrderModel::from_elements(elements, m, 0.0, 0.0)
}
