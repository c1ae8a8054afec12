//! Weights file `{"xi": [...], "support": [...], "residual": r}` and sample-set
//! file `{"collocation": [...], "damping_reach": [...], "stiffness_reach": [...]}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{EcswWeights, SampleSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    xi: Vec<f64>,
    support: Vec<usize>,
    residual: f64,
}

pub fn write_weights_json(w: &EcswWeights, path: impl AsRef<Path>) -> Result<()> {
    let file = WeightsFile {
        xi: w.xi().iter().copied().collect(),
        support: w.support().to_vec(),
        residual: w.training_residual(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &file)?;
    out.flush()?;
    Ok(())
}

/// Rejects files whose `support` disagrees with the positive entries of `xi`.
pub fn read_weights_json(path: impl AsRef<Path>) -> Result<EcswWeights> {
    let file: WeightsFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let w = EcswWeights::new(DVector::from_vec(file.xi), file.residual)?;
    if w.support() != file.support.as_slice() {
        return Err(Error::Format(format!(
            "support {:?} does not match positive weights {:?}",
            file.support,
            w.support()
        )));
    }
    Ok(w)
}

pub fn write_sample_set_json(s: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, s)?;
    out.flush()?;
    Ok(())
}

pub fn read_sample_set_json(path: impl AsRef<Path>) -> Result<SampleSet> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
