//! Embedding matrices, vocabulary tables and word-to-token resolution.

mod npy;
mod vocab;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use npy::{read_npy, read_npy_header, write_npy, Dtype, NpyArray, NpyData};
pub use vocab::{
    resolve_words, MatchPolicy, Resolution, SurfaceOrder, TokenSubset, VocabEntry, VocabMap,
};

use crate::error::{Error, Result};

/// Which side of the model an embedding matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Input,
    Output,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Input => "input",
            EmbeddingKind::Output => "output",
        }
    }
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(EmbeddingKind::Input),
            "output" => Ok(EmbeddingKind::Output),
            other => Err(Error::Invalid(format!("unknown embedding kind {other:?}"))),
        }
    }
}

/// A `V x d` row-major embedding matrix for one checkpoint.
///
/// Values keep their stored precision; rows are widened to `f64` on access.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: NpyData,
    step: u64,
    kind: EmbeddingKind,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: NpyData, kind: EmbeddingKind) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "embedding matrix must be non-empty, got ({rows}, {cols})"
            )));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "({rows}, {cols}) does not match {} values",
                data.len()
            )));
        }
        let bad = match &data {
            NpyData::F32(v) => v.iter().position(|x| !x.is_finite()),
            NpyData::F64(v) => v.iter().position(|x| !x.is_finite()),
        };
        if let Some(pos) = bad {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(EmbeddingMatrix {
            rows,
            cols,
            data,
            step: 0,
            kind,
        })
    }

    pub fn from_f64(rows: usize, cols: usize, data: Vec<f64>, kind: EmbeddingKind) -> Result<Self> {
        Self::new(rows, cols, NpyData::F64(data), kind)
    }

    pub fn from_f32(rows: usize, cols: usize, data: Vec<f32>, kind: EmbeddingKind) -> Result<Self> {
        Self::new(rows, cols, NpyData::F32(data), kind)
    }

    pub fn with_step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &NpyData {
        &self.data
    }

    /// Copies row `i` into `out`, widening to `f64`.
    pub fn copy_row(&self, i: usize, out: &mut [f64]) {
        let range = i * self.cols..(i + 1) * self.cols;
        match &self.data {
            NpyData::F32(v) => {
                for (o, x) in out.iter_mut().zip(&v[range]) {
                    *o = f64::from(*x);
                }
            }
            NpyData::F64(v) => out.copy_from_slice(&v[range]),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.copy_row(i, &mut out);
        out
    }
}

/// Loads a 2-D float npy file as an embedding matrix of the given kind.
pub fn load_matrix(path: impl AsRef<Path>, expected_kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let arr = read_npy(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Npy(msg) => Error::Npy(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    match arr.shape.as_slice() {
        &[rows, cols] => EmbeddingMatrix::new(rows, cols, arr.data, expected_kind),
        other => Err(Error::Shape(format!(
            "{}: expected a 2-D array, found shape {other:?}",
            path.display()
        ))),
    }
}

/// Writes an embedding matrix in its stored precision.
pub fn save_matrix(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_npy(&mut w, &[matrix.rows, matrix.cols], &matrix.data)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}
