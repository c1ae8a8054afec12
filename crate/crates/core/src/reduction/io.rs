//! Basis JSON and snapshot CSV.
//!
//! Basis: `{"m": 5, "k": 1, "kind": "mass-orthonormal", "columns": [[...]]}`,
//! one inner array of length `m` per basis vector. Snapshots use the
//! trajectory CSV layout `t,x_0,…` with `#` comment lines ignored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BasisKind, ReducedBasis, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::linalg::DiagonalPositiveMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisFile {
    pub m: usize,
    pub k: usize,
    pub kind: BasisKind,
    pub columns: Vec<Vec<f64>>,
}

impl From<&ReducedBasis> for BasisFile {
    fn from(b: &ReducedBasis) -> Self {
        BasisFile {
            m: b.full_dim(),
            k: b.dim(),
            kind: b.kind(),
            columns: b
                .matrix()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}

impl BasisFile {
    /// `mass` is required for mass-orthonormal bases and ignored otherwise.
    pub fn into_basis(self, mass: Option<&DiagonalPositiveMatrix>) -> Result<ReducedBasis> {
        if self.columns.len() != self.k {
            return Err(Error::Format(format!(
                "basis declares k = {} but has {} columns",
                self.k,
                self.columns.len()
            )));
        }
        if let Some(c) = self.columns.iter().find(|c| c.len() != self.m) {
            return Err(Error::Format(format!(
                "basis column of length {} (expected m = {})",
                c.len(),
                self.m
            )));
        }
        let v = DMatrix::from_fn(self.m, self.k, |i, j| self.columns[j][i]);
        match self.kind {
            BasisKind::PlainOrthonormal => ReducedBasis::plain(v),
            BasisKind::MassOrthonormal => {
                let mass = mass.ok_or_else(|| {
                    Error::InvalidParameter("mass-orthonormal basis needs the model mass".into())
                })?;
                ReducedBasis::mass_orthonormal(v, mass.clone())
            }
        }
    }
}

pub fn write_basis_json(basis: &ReducedBasis, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &BasisFile::from(basis))?;
    w.flush()?;
    Ok(())
}

pub fn read_basis_json(
    path: impl AsRef<Path>,
    mass: Option<&DiagonalPositiveMatrix>,
) -> Result<ReducedBasis> {
    let file: BasisFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    file.into_basis(mass)
}

/// Reads snapshot rows `t,x_0,…,x_{m-1}`; each row becomes one column.
pub fn read_snapshot_csv(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    parse_snapshot_csv(File::open(path)?)
}

pub(crate) fn parse_snapshot_csv<R: Read>(input: R) -> Result<SnapshotMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Format("snapshot CSV needs a t column and at least one x column".into()));
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad snapshot value {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        cols.push(row);
    }
    if cols.is_empty() {
        return Err(Error::Format("snapshot CSV has no rows".into()));
    }
    let m = width - 1;
    SnapshotMatrix::new(DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]))
}
