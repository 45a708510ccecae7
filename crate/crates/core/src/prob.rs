//! Frame-wise class posterior matrices and their binary serialization.
//!
//! A [`ProbMatrix`] is a `T x C` row-stochastic matrix: row `t` holds the
//! posterior distribution over all classes (blank at column 0) for frame
//! `t`. Values are kept as `f64` in memory so that dynamic-programming
//! routines can accumulate in full precision; on disk they are stored as
//! little-endian `f32` in the PRB1 format.

use thiserror::Error;

/// Maximum absolute deviation of a row sum from 1 that still validates.
pub const ROW_SUM_TOL: f64 = 1e-6;

const PRB1_MAGIC: &[u8; 4] = b"PRB1";
const PRB1_HEADER_LEN: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix must have at least one row")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {0} does not sum to 1 within tolerance")]
    NonStochasticRow(usize),
    #[error("negative entry at row {0}, column {1}")]
    NegativeEntry(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum PrbError {
    #[error("bad magic bytes, expected \"PRB1\"")]
    BadMagic,
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("dimensions {frames}x{classes} outside the representable range")]
    DimensionOverflow { frames: u32, classes: u32 },
}

/// Row-stochastic matrix of frame-wise class posteriors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    frames: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    /// Validates a rectangular grid of probabilities and wraps it.
    ///
    /// Every entry must be nonnegative and every row must sum to 1 within
    /// [`ROW_SUM_TOL`]. Downstream consumers rely on these invariants and do
    /// not re-check them.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        if rows.is_empty() {
            return Err(MatrixError::Empty);
        }
        let classes = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * classes);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(MatrixError::RaggedRow {
                    row: t,
                    expected: classes,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), classes, data)
    }

    /// Validates a flat row-major buffer. See [`ProbMatrix::from_rows`].
    pub fn from_flat(frames: usize, classes: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if frames == 0 || classes == 0 {
            return Err(MatrixError::Empty);
        }
        assert_eq!(data.len(), frames * classes, "flat buffer length mismatch");
        for t in 0..frames {
            let row = &data[t * classes..(t + 1) * classes];
            for (c, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    return Err(MatrixError::NegativeEntry(t, c));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MatrixError::NonStochasticRow(t));
            }
        }
        Ok(Self {
            frames,
            classes,
            data,
        })
    }

    /// Wraps a buffer that is already known to be structurally sound, e.g.
    /// rows copied from an existing matrix. Not exposed outside the crate.
    pub(crate) fn from_flat_unchecked(frames: usize, classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), frames * classes);
        Self {
            frames,
            classes,
            data,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.classes + c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }

    /// Copies a contiguous frame range into a new matrix. Used to feed
    /// window-sized chunks to decoders.
    pub fn slice_rows(&self, start: usize, end: usize) -> ProbMatrix {
        assert!(start < end && end <= self.frames, "bad row range");
        ProbMatrix::from_flat_unchecked(
            end - start,
            self.classes,
            self.data[start * self.classes..end * self.classes].to_vec(),
        )
    }
}

/// Serializes a matrix into the PRB1 byte format: magic `"PRB1"`, `T` and
/// `C` as little-endian `u32`, then `T*C` little-endian `f32` row-major.
pub fn encode_prb(matrix: &ProbMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(PRB1_HEADER_LEN + matrix.data.len() * 4);
    out.extend_from_slice(PRB1_MAGIC);
    out.extend_from_slice(&(matrix.frames as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.classes as u32).to_le_bytes());
    for &p in &matrix.data {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

/// Decodes a PRB1 byte stream.
///
/// Only structural properties are checked here (magic, dimensions, payload
/// length); call [`ProbMatrix::from_flat`] on the raw data to re-validate
/// row-stochasticity when the source is untrusted.
pub fn decode_prb(bytes: &[u8]) -> Result<ProbMatrix, PrbError> {
    if bytes.len() < 4 {
        return Err(PrbError::TruncatedPayload {
            expected: PRB1_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[0..4] != PRB1_MAGIC {
        return Err(PrbError::BadMagic);
    }
    if bytes.len() < PRB1_HEADER_LEN {
        return Err(PrbError::TruncatedPayload {
            expected: PRB1_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let classes = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let cells = (frames as u64).checked_mul(classes as u64);
    let payload_len = cells.and_then(|n| n.checked_mul(4));
    let expected = match payload_len {
        Some(n) if frames > 0 && classes > 0 && n <= (usize::MAX - PRB1_HEADER_LEN) as u64 => {
            n as usize + PRB1_HEADER_LEN
        }
        _ => return Err(PrbError::DimensionOverflow { frames, classes }),
    };
    if bytes.len() != expected {
        return Err(PrbError::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    let mut data = Vec::with_capacity(frames as usize * classes as usize);
    for chunk in bytes[PRB1_HEADER_LEN..].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    Ok(ProbMatrix::from_flat_unchecked(
        frames as usize,
        classes as usize,
        data,
    ))
}
