//! JSON system files and number formatting shared by CSV writers.
//!
//! System schema (one schema for single and multi-block systems):
//!
//! ```json
//! {"block_dims": [2], "beta": [1.5], "W": [[0, -1], [-1, 0]], "b": [0, 0]}
//! ```
//!
//! `W` is the full `N × N` matrix, row-major, blocks in `block_dims` order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::AffineLogitSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub block_dims: Vec<usize>,
    pub beta: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl SystemFile {
    pub fn from_system(system: &AffineLogitSystem) -> Self {
        Self {
            block_dims: system.block_dims().to_vec(),
            beta: system.beta().to_vec(),
            w: system
                .w()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            b: system.b().iter().copied().collect(),
        }
    }

    pub fn into_system(self) -> Result<AffineLogitSystem> {
        let n = self.w.len();
        if let Some((i, row)) = self.w.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "W row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        let flat: Vec<f64> = self.w.into_iter().flatten().collect();
        AffineLogitSystem::new(
            self.block_dims,
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_vec(self.b),
            self.beta,
        )
    }
}

/// Parses and validates a system from JSON text.
pub fn parse_system(text: &str) -> Result<AffineLogitSystem> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SystemFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    file.into_system()
}

pub fn read_system(path: impl AsRef<Path>) -> Result<AffineLogitSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text)
}

pub fn system_to_json(system: &AffineLogitSystem) -> String {
    serde_json::to_string_pretty(&SystemFile::from_system(system))
        .expect("system files always serialize")
}

/// Locale-free scientific notation with 17 significant digits, which
/// round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
