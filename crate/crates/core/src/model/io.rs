//! JSON model file.
//!
//! ```json
//! {"m": 2, "mass": [1, 1], "stiffness_coo": [[0, 0, 1.0], [0, 1, -1.0], [1, 1, 1.0]],
//!  "a1": 0, "a2": 0, "elements": []}
//! ```
//!
//! `stiffness_coo` lists upper-triangle triplets `[i, j, value]` with `i ≤ j`;
//! element `Ke` is a row-major flattened dense block and `Me` its diagonal.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ElementBlock, FullOrderModel, LoadTable};
use crate::error::{Error, Result};
use crate::linalg::{DiagonalPositiveMatrix, SymmetricMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub m: usize,
    pub mass: Vec<f64>,
    pub stiffness_coo: Vec<(usize, usize, f64)>,
    pub a1: f64,
    pub a2: f64,
    pub elements: Vec<ElementFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_force: Option<ExternalForceFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementFile {
    pub dofs: Vec<usize>,
    #[serde(rename = "Ke")]
    pub ke: Vec<f64>,
    #[serde(rename = "Me")]
    pub me: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalForceFile {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl From<&FullOrderModel> for ModelFile {
    fn from(model: &FullOrderModel) -> Self {
        let m = model.dim();
        let k = model.stiffness().as_matrix();
        let mut coo = Vec::new();
        for i in 0..m {
            for j in i..m {
                if k[(i, j)] != 0.0 {
                    coo.push((i, j, k[(i, j)]));
                }
            }
        }
        let elements = model
            .elements()
            .iter()
            .map(|e| {
                let n = e.dofs.len();
                let ke = e.ke.as_matrix();
                ElementFile {
                    dofs: e.dofs.clone(),
                    ke: (0..n * n).map(|idx| ke[(idx / n, idx % n)]).collect(),
                    me: e.me.diag().iter().copied().collect(),
                    length: e.length,
                    wave_speed: e.wave_speed,
                }
            })
            .collect();
        let load = model.external_force();
        let external_force = (!load.is_empty()).then(|| ExternalForceFile {
            times: load.times().to_vec(),
            values: load.values().iter().map(|v| v.iter().copied().collect()).collect(),
        });
        ModelFile {
            m,
            mass: model.mass().diag().iter().copied().collect(),
            stiffness_coo: coo,
            a1: model.a1(),
            a2: model.a2(),
            elements,
            external_force,
        }
    }
}

impl TryFrom<ModelFile> for FullOrderModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.mass.len() != f.m {
            return Err(Error::DimensionMismatch {
                context: "model file mass",
                expected: f.m,
                actual: f.mass.len(),
            });
        }
        let mass = DiagonalPositiveMatrix::from_slice(&f.mass)?;
        let mut k = DMatrix::<f64>::zeros(f.m, f.m);
        for &(i, j, v) in &f.stiffness_coo {
            if i > j {
                return Err(Error::Format(format!("stiffness_coo entry ({i}, {j}) has i > j")));
            }
            if j >= f.m {
                return Err(Error::IndexOutOfRange { index: j, dim: f.m });
            }
            k[(i, j)] += v;
            if i != j {
                k[(j, i)] += v;
            }
        }
        let stiffness = SymmetricMatrix::new(k)?;
        let elements = f
            .elements
            .into_iter()
            .map(|e| {
                let n = e.dofs.len();
                if e.ke.len() != n * n {
                    return Err(Error::DimensionMismatch {
                        context: "element Ke",
                        expected: n * n,
                        actual: e.ke.len(),
                    });
                }
                let ke = SymmetricMatrix::new(DMatrix::from_row_slice(n, n, &e.ke))?;
                let me = DiagonalPositiveMatrix::from_slice(&e.me)?;
                ElementBlock::new(e.dofs, ke, me)?.with_geometry(e.length, e.wave_speed)
            })
            .collect::<Result<Vec<_>>>()?;
        let load = match f.external_force {
            None => LoadTable::zero(),
            Some(ef) => LoadTable::new(
                ef.times,
                ef.values.into_iter().map(DVector::from_vec).collect(),
            )?,
        };
        FullOrderModel::new(mass, stiffness, f.a1, f.a2, elements, load)
    }
}

pub fn write_model_json(model: &FullOrderModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &ModelFile::from(model))?;
    writeln!(w)?;
    Ok(())
}

pub fn read_model_json(path: impl AsRef<Path>) -> Result<FullOrderModel> {
    let f: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    f.try_into()
}
