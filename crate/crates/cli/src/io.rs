//! File formats and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cubicphase::measurement::{HeterodyneSample, SampleBatch};
use cubicphase::DensityMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "cubicphase";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance record written next to every output.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>) -> CliResult<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config: to_value(config)?,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Numerical(format!("serialization: {e}")))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `x,p,accepted`, one row per sample.
pub fn write_samples(path: &Path, batch: &SampleBatch) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in &batch.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> CliResult<SampleBatch> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "p", "accepted"] {
        return Err(CliError::config(format!(
            "{}: expected header x,p,accepted",
            path.display()
        )));
    }
    let mut samples = Vec::new();
    for (i, row) in r.deserialize::<HeterodyneSample>().enumerate() {
        let s = row.map_err(|e| CliError::config(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if !(s.x.is_finite() && s.p.is_finite()) {
            return Err(CliError::config(format!(
                "{} row {}: non-finite value",
                path.display(),
                i + 2
            )));
        }
        samples.push(s);
    }
    Ok(SampleBatch {
        samples,
        seed: 0,
        source: path.display().to_string(),
        k: 0,
    })
}

pub fn write_density(path: &Path, rho: &DensityMatrix) -> CliResult<()> {
    write_json(path, rho)
}

pub fn read_density(path: &Path) -> CliResult<DensityMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::config(format!(
            "{} line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Writes a CSV with the given header and rows.
pub fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
