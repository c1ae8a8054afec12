//! Full-order linearized models `M ẍ + C ẋ + K x = f_ext(t)` with a lumped
//! (diagonal) mass, Rayleigh damping `C = a1·M + a2·K` and an optional element
//! decomposition `K = Σ_e L_eᵀ K_e L_e`, `M = Σ_e L_eᵀ M_e L_e`.

mod io;

pub use io::{read_model_json, write_model_json, ElementFile, ExternalForceFile, ModelFile};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{gen_eig_diag_mass, sym_eig, DiagonalPositiveMatrix, SymmetricMatrix};

/// Relative tolerance on the minimum eigenvalue when testing PSD.
pub const PSD_TOL: f64 = 1e-10;

/// One element's contribution: connectivity plus local stiffness and lumped mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBlock {
    pub dofs: Vec<usize>,
    pub ke: SymmetricMatrix,
    pub me: DiagonalPositiveMatrix,
    pub length: Option<f64>,
    pub wave_speed: Option<f64>,
}

impl ElementBlock {
    pub fn new(dofs: Vec<usize>, ke: SymmetricMatrix, me: DiagonalPositiveMatrix) -> Result<Self> {
        let n = dofs.len();
        if n == 0 {
            return Err(Error::InvalidParameter("element without DoFs".into()));
        }
        if ke.order() != n || me.order() != n {
            return Err(Error::DimensionMismatch {
                context: "element block",
                expected: n,
                actual: if ke.order() != n { ke.order() } else { me.order() },
            });
        }
        let mut sorted = dofs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("repeated DoF in element {dofs:?}")));
        }
        check_psd(&ke)?;
        Ok(ElementBlock {
            dofs,
            ke,
            me,
            length: None,
            wave_speed: None,
        })
    }

    pub fn with_geometry(mut self, length: Option<f64>, wave_speed: Option<f64>) -> Result<Self> {
        for (name, v) in [("length", length), ("wave_speed", wave_speed)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        self.length = length;
        self.wave_speed = wave_speed;
        Ok(self)
    }

    /// Largest eigenvalue of `M_e⁻¹ K_e`.
    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(gen_eig_diag_mass(&self.ke, &self.me)?.max())
    }

    /// `L_eᵀ K_e L_e` added into `target` with weight `w`.
    pub fn scatter_into(&self, local: &DMatrix<f64>, w: f64, target: &mut DMatrix<f64>) {
        for (a, &i) in self.dofs.iter().enumerate() {
            for (b, &j) in self.dofs.iter().enumerate() {
                target[(i, j)] += w * local[(a, b)];
            }
        }
    }

    /// Rows `dofs` of a global matrix (`L_e B`).
    pub fn gather_rows(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        crate::linalg::select_rows(b, &self.dofs)
    }
}

/// Uniform 2-node rod element in uniaxial strain with unit cross-section
/// density: `M_e = (l/2)·I`, `K_e = (c²/l)·[[1, −1], [−1, 1]]`, so that the
/// element eigenvalue is `4c²/l²`.
pub fn rod_element(dofs: [usize; 2], length: f64, wave_speed: f64) -> Result<ElementBlock> {
    if !(length > 0.0 && wave_speed > 0.0) {
        return Err(Error::InvalidParameter("rod length and wave speed must be > 0".into()));
    }
    let k = wave_speed * wave_speed / length;
    let ke = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[k, -k, -k, k]))?;
    let me = DiagonalPositiveMatrix::from_slice(&[length / 2.0, length / 2.0])?;
    ElementBlock::new(dofs.to_vec(), ke, me)?.with_geometry(Some(length), Some(wave_speed))
}

/// Piecewise-linear external load table. Outside the sampled interval the
/// nearest endpoint value is held; an empty table is a zero load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadTable {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl LoadTable {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "load table",
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("load times must be strictly increasing".into()));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.len() != first.len()) {
                return Err(Error::InvalidParameter("ragged load table".into()));
            }
        }
        Ok(LoadTable { times, values })
    }

    pub fn zero() -> Self {
        LoadTable::default()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn width(&self) -> Option<usize> {
        self.values.first().map(|v| v.len())
    }

    pub fn eval(&self, t: f64, m: usize) -> DVector<f64> {
        let n = self.times.len();
        if n == 0 {
            return DVector::zeros(m);
        }
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let i = self.times.partition_point(|&ti| ti <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let s = (t - t0) / (t1 - t0);
        &self.values[i] * (1.0 - s) + &self.values[i + 1] * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullOrderModel {
    mass: DiagonalPositiveMatrix,
    stiffness: SymmetricMatrix,
    a1: f64,
    a2: f64,
    elements: Vec<ElementBlock>,
    external_force: LoadTable,
}

impl FullOrderModel {
    pub fn new(
        mass: DiagonalPositiveMatrix,
        stiffness: SymmetricMatrix,
        a1: f64,
        a2: f64,
        elements: Vec<ElementBlock>,
        external_force: LoadTable,
    ) -> Result<Self> {
        let m = mass.order();
        if stiffness.order() != m {
            return Err(Error::DimensionMismatch {
                context: "model stiffness",
                expected: m,
                actual: stiffness.order(),
            });
        }
        for (name, a) in [("a1", a1), ("a2", a2)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {a}")));
            }
        }
        check_psd(&stiffness)?;
        if !elements.is_empty() {
            let mut lumped = DVector::<f64>::zeros(m);
            for e in &elements {
                for (a, &i) in e.dofs.iter().enumerate() {
                    if i >= m {
                        return Err(Error::IndexOutOfRange { index: i, dim: m });
                    }
                    lumped[i] += e.me.diag()[a];
                }
            }
            let scale = mass.diag().amax();
            if (&lumped - mass.diag()).amax() > 1e-12 * scale {
                return Err(Error::InvalidParameter(
                    "mass does not equal the sum of element masses".into(),
                ));
            }
        }
        if let Some(w) = external_force.width() {
            if w != m {
                return Err(Error::DimensionMismatch {
                    context: "external force",
                    expected: m,
                    actual: w,
                });
            }
        }
        Ok(FullOrderModel {
            mass,
            stiffness,
            a1,
            a2,
            elements,
            external_force,
        })
    }

    /// Model whose mass and stiffness are assembled from `elements`.
    pub fn from_elements(elements: Vec<ElementBlock>, m: usize, a1: f64, a2: f64) -> Result<Self> {
        let (mass, stiffness) = assemble(&elements, m)?;
        Self::new(mass, stiffness, a1, a2, elements, LoadTable::zero())
    }

    pub fn with_external_force(mut self, load: LoadTable) -> Result<Self> {
        if let Some(w) = load.width() {
            if w != self.dim() {
                return Err(Error::DimensionMismatch {
                    context: "external force",
                    expected: self.dim(),
                    actual: w,
                });
            }
        }
        self.external_force = load;
        Ok(self)
    }

    pub fn with_damping(mut self, a1: f64, a2: f64) -> Result<Self> {
        if !(a1 >= 0.0 && a2 >= 0.0) {
            return Err(Error::InvalidParameter("Rayleigh coefficients must be >= 0".into()));
        }
        self.a1 = a1;
        self.a2 = a2;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mass.order()
    }

    pub fn mass(&self) -> &DiagonalPositiveMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymmetricMatrix {
        &self.stiffness
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn elements(&self) -> &[ElementBlock] {
        &self.elements
    }

    pub fn external_force(&self) -> &LoadTable {
        &self.external_force
    }

    /// `M⁻¹K` as a dense (nonsymmetric) matrix.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let k = self.stiffness.as_matrix();
        let d = self.mass.diag();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| k[(i, j)] / d[i])
    }

    /// `C·v` without forming `C`.
    pub fn damping_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        if self.a1 != 0.0 {
            out += self.mass.apply(v) * self.a1;
        }
        if self.a2 != 0.0 {
            out += self.stiffness.as_matrix() * v * self.a2;
        }
        out
    }
}

/// Scatters element blocks into global mass and stiffness matrices.
pub fn assemble(
    elements: &[ElementBlock],
    m: usize,
) -> Result<(DiagonalPositiveMatrix, SymmetricMatrix)> {
    let mut k = DMatrix::<f64>::zeros(m, m);
    let mut mass = DVector::<f64>::zeros(m);
    for e in elements {
        if let Some(&bad) = e.dofs.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: bad, dim: m });
        }
        check_psd(&e.ke)?;
        e.scatter_into(e.ke.as_matrix(), 1.0, &mut k);
        for (a, &i) in e.dofs.iter().enumerate() {
            mass[i] += e.me.diag()[a];
        }
    }
    if let Some(i) = mass.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter(format!("DoF {i} receives no mass")));
    }
    Ok((
        DiagonalPositiveMatrix::new(mass)?,
        SymmetricMatrix::from_lower(k),
    ))
}

/// Parameters of the uniform string with stiff boundary springs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringParams {
    /// Node count (≥ 3).
    pub m: usize,
    /// Nodal mass of an interior node.
    pub mass: f64,
    /// Element stiffness.
    pub stiffness: f64,
    /// Total length.
    pub length: f64,
    /// Boundary spring stiffness as a multiple of `stiffness`.
    pub boundary_factor: f64,
    pub a1: f64,
    pub a2: f64,
}

impl StringParams {
    pub const DEFAULT_BOUNDARY_FACTOR: f64 = 99.0;

    pub fn new(m: usize, mass: f64, stiffness: f64) -> Self {
        StringParams {
            m,
            mass,
            stiffness,
            length: 1.0,
            boundary_factor: Self::DEFAULT_BOUNDARY_FACTOR,
            a1: 0.0,
            a2: 0.0,
        }
    }
}

/// Uniform string of `m` nodes and `m − 1` two-node elements.
///
/// Every element carries `K·[[1, −1], [−1, 1]]` and a lumped mass of `M/2` per
/// node, so interior nodes hold `M` and the end nodes `M/2`. The boundary
/// springs `boundary_factor·K` at the first and last DoF are folded into the
/// first and last element so that the stiffness stays fully element-assembled.
pub fn build_string_model(p: &StringParams) -> Result<FullOrderModel> {
    if p.m < 3 {
        return Err(Error::InvalidParameter(format!("string needs m >= 3, got {}", p.m)));
    }
    for (name, v) in [("M", p.mass), ("K", p.stiffness), ("L", p.length)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
        }
    }
    if !(p.boundary_factor.is_finite() && p.boundary_factor >= 0.0) {
        return Err(Error::InvalidParameter("boundary factor must be >= 0".into()));
    }
    let k = p.stiffness;
    let spring = p.boundary_factor * k;
    let le = p.length / (p.m - 1) as f64;
    let last = p.m - 2;
    let elements = (0..p.m - 1)
        .map(|e| {
            let mut ke = DMatrix::from_row_slice(2, 2, &[k, -k, -k, k]);
            if e == 0 {
                ke[(0, 0)] += spring;
            }
            if e == last {
                ke[(1, 1)] += spring;
            }
            let me = DiagonalPositiveMatrix::from_slice(&[p.mass / 2.0, p.mass / 2.0])?;
            ElementBlock::new(vec![e, e + 1], SymmetricMatrix::new(ke)?, me)?
                .with_geometry(Some(le), None)
        })
        .collect::<Result<Vec<_>>>()?;
    FullOrderModel::from_elements(elements, p.m, p.a1, p.a2)
}

/// Chain of rod elements with the given per-element lengths and wave speeds.
pub fn build_rod_chain(lengths: &[f64], wave_speeds: &[f64]) -> Result<FullOrderModel> {
    if lengths.is_empty() || lengths.len() != wave_speeds.len() {
        return Err(Error::InvalidParameter("need matching, nonempty lengths and speeds".into()));
    }
    let elements = lengths
        .iter()
        .zip(wave_speeds)
        .enumerate()
        .map(|(e, (&l, &c))| rod_element([e, e + 1], l, c))
        .collect::<Result<Vec<_>>>()?;
    FullOrderModel::from_elements(elements, lengths.len() + 1, 0.0, 0.0)
}

/// Rayleigh damping `C = a1·M + a2·K`.
pub fn damping_matrix(model: &FullOrderModel) -> SymmetricMatrix {
    let c = model.mass.to_dense() * model.a1 + model.stiffness.as_matrix() * model.a2;
    SymmetricMatrix::from_lower(c)
}

/// Fails with [`Error::NotPsd`] when `λ_min(A) < −PSD_TOL·‖A‖`.
pub fn check_psd(a: &SymmetricMatrix) -> Result<()> {
    let norm = a.norm();
    if norm == 0.0 {
        return Ok(());
    }
    let min = sym_eig(a)?.min();
    if min < -PSD_TOL * norm {
        return Err(Error::NotPsd { min_eig: min });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spring_element(dofs: [usize; 2], k: f64) -> ElementBlock {
        ElementBlock::new(
            dofs.to_vec(),
            SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[k, -k, -k, k])).unwrap(),
            DiagonalPositiveMatrix::from_slice(&[1.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_element_assembly() {
        let e = spring_element([0, 1], 3.0);
        let (m, k) = assemble(std::slice::from_ref(&e), 2).unwrap();
        assert_eq!(k.as_matrix(), e.ke.as_matrix());
        assert_eq!(m.diag().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn chain_overlap() {
        let k = 2.0;
        let els = [spring_element([0, 1], k), spring_element([1, 2], k)];
        let (_, km) = assemble(&els, 3).unwrap();
        assert_eq!(km[(1, 1)], 2.0 * k);
        assert_eq!(km[(0, 1)], -k);
        assert_eq!(km[(2, 1)], -k);
        assert_eq!(km[(0, 2)], 0.0);
    }

    #[test]
    fn assembly_errors() {
        let e = spring_element([0, 3], 1.0);
        assert!(matches!(assemble(&[e], 3), Err(Error::IndexOutOfRange { index: 3, .. })));
        let bad = ElementBlock::new(
            vec![0, 1],
            SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap(),
            DiagonalPositiveMatrix::from_slice(&[1.0, 1.0]).unwrap(),
        );
        assert!(matches!(bad, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn string_m5_matches_published_system_matrix() {
        let model = build_string_model(&StringParams::new(5, 1.0, 10.0)).unwrap();
        let a = model.system_matrix();
        let kom = 10.0;
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(5, 5, &[
            200.0, -2.0, 0.0, 0.0, 0.0,
            -1.0, 2.0, -1.0, 0.0, 0.0,
            0.0, -1.0, 2.0, -1.0, 0.0,
            0.0, 0.0, -1.0, 2.0, -1.0,
            0.0, 0.0, 0.0, -2.0, 200.0,
        ]) * kom;
        assert!((a - expected).amax() < 1e-12);
        assert!((model.system_matrix().trace() - 4060.0).abs() < 1e-9 * 4060.0);
    }

    #[test]
    fn string_m3_hand_assembly() {
        let mut p = StringParams::new(3, 2.0, 1.0);
        p.boundary_factor = 0.0;
        let model = build_string_model(&p).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
            1.0, -1.0, 0.0,
            -0.5, 1.0, -0.5,
            0.0, -1.0, 1.0,
        ]);
        assert!((model.system_matrix() - expected).amax() < 1e-15);
        assert_eq!(model.mass().diag().as_slice(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn string_parameter_errors() {
        assert!(build_string_model(&StringParams::new(2, 1.0, 1.0)).is_err());
        assert!(build_string_model(&StringParams::new(3, 1.0, 0.0)).is_err());
        assert!(build_string_model(&StringParams::new(3, -1.0, 1.0)).is_err());
        let mut p = StringParams::new(4, 1.0, 1.0);
        p.boundary_factor = -1.0;
        assert!(build_string_model(&p).is_err());
    }

    #[test]
    fn damping_cases() {
        let mut p = StringParams::new(5, 1.0, 10.0);
        let undamped = build_string_model(&p).unwrap();
        assert_eq!(damping_matrix(&undamped).as_matrix().amax(), 0.0);

        p.a1 = 1.0;
        let m_only = build_string_model(&p).unwrap();
        assert_eq!(damping_matrix(&m_only).as_matrix(), &m_only.mass().to_dense());

        p.a1 = 0.1;
        p.a2 = 0.01;
        let model = build_string_model(&p).unwrap();
        let c = damping_matrix(&model);
        for i in 0..5 {
            for j in 0..5 {
                let mij = if i == j { model.mass().diag()[i] } else { 0.0 };
                let expected = 0.1 * mij + 0.01 * model.stiffness()[(i, j)];
                assert!((c[(i, j)] - expected).abs() <= 1e-14 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn load_table_interpolates() {
        let load = LoadTable::new(
            vec![0.0, 1.0],
            vec![DVector::from_element(2, 0.0), DVector::from_element(2, 2.0)],
        )
        .unwrap();
        assert_eq!(load.eval(0.25, 2)[0], 0.5);
        assert_eq!(load.eval(5.0, 2)[1], 2.0);
        assert_eq!(LoadTable::zero().eval(1.0, 3), DVector::zeros(3));
        assert!(LoadTable::new(vec![1.0, 0.0], vec![DVector::zeros(1), DVector::zeros(1)]).is_err());
    }

    #[test]
    fn rod_element_eigenvalue() {
        let e = rod_element([0, 1], 0.5, 3.0).unwrap();
        assert!((e.max_eigenvalue().unwrap() - 4.0 * 9.0 / 0.25).abs() < 1e-10);
    }
}
