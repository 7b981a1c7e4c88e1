//! The `SKV1` container for token embeddings and base-model label distributions.
//!
//! Layout (all little-endian):
//!
//! ```text
//! b"SKV1" | dims: u32 | rows: u64 | rows × dims f32 values, row-major
//! ```
//!
//! Distribution files use the same container with `dims == 3` and columns
//! ordered `B, I, O`.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use crate::corpus::{Sentence, TaggedCorpus};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SKV1";
const HEADER_LEN: usize = 4 + 4 + 8;

/// Tolerance on the row sums of a distribution table.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Row-major matrix of finite `f32` values, one row per word token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dims: usize,
    rows: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dims: usize, data: Vec<f32>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Format("embedding width must be positive".into()));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(Error::Dimension {
                expected: dims,
                found: data.len() % dims,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dims,
                col: pos % dims,
            });
        }
        Ok(EmbeddingMatrix {
            dims,
            rows: data.len() / dims,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dims: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dims);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        EmbeddingMatrix::new(dims, data)
    }

    pub fn empty(dims: usize) -> Result<Self> {
        EmbeddingMatrix::new(dims, Vec::new())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an SKV1 embedding file (bad magic)".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Length {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let dims = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let payload = (rows as u128) * (dims as u128) * 4;
        let found = (bytes.len() - HEADER_LEN) as u128;
        if payload > found {
            return Err(Error::Length {
                expected: (HEADER_LEN as u128 + payload).min(u64::MAX as u128) as u64,
                found: bytes.len() as u64,
            });
        }
        if payload < found {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                found - payload
            )));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        EmbeddingMatrix::new(dims, data)
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&fs::read(path)?)
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&matrix.to_bytes())?;
    Ok(())
}

/// Per-token base-model probabilities over `(B, I, O)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    matrix: EmbeddingMatrix,
}

impl DistributionTable {
    pub fn new(matrix: EmbeddingMatrix) -> Result<Self> {
        if matrix.dims() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                found: matrix.dims(),
            });
        }
        for (row, p) in matrix.iter_rows().enumerate() {
            if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Normalization {
                    row,
                    reason: format!("entry {v} outside [0, 1]"),
                });
            }
            let sum: f64 = p.iter().map(|&v| v as f64).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Normalization {
                    row,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        Ok(DistributionTable { matrix })
    }

    pub fn from_rows(rows: &[[f32; 3]]) -> Result<Self> {
        DistributionTable::new(EmbeddingMatrix::from_rows(3, rows)?)
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, i: usize) -> [f32; 3] {
        let r = self.matrix.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }
}

pub fn read_distributions(path: impl AsRef<Path>) -> Result<DistributionTable> {
    DistributionTable::new(read_embeddings(path)?)
}

pub fn write_distributions(table: &DistributionTable, path: impl AsRef<Path>) -> Result<()> {
    write_embeddings(&table.matrix, path)
}

/// A corpus whose tokens are matched row-for-row with embeddings and,
/// optionally, base distributions.
#[derive(Debug, Clone, Copy)]
pub struct AlignedCorpus<'a> {
    pub corpus: &'a TaggedCorpus,
    pub embeddings: &'a EmbeddingMatrix,
    pub distributions: Option<&'a DistributionTable>,
}

pub fn align<'a>(
    corpus: &'a TaggedCorpus,
    embeddings: &'a EmbeddingMatrix,
    distributions: Option<&'a DistributionTable>,
) -> Result<AlignedCorpus<'a>> {
    let tokens = corpus.token_count();
    if embeddings.rows() != tokens {
        return Err(Error::Alignment {
            what: "embedding rows",
            expected: tokens,
            found: embeddings.rows(),
        });
    }
    if let Some(d) = distributions {
        if d.rows() != tokens {
            return Err(Error::Alignment {
                what: "distribution rows",
                expected: tokens,
                found: d.rows(),
            });
        }
    }
    Ok(AlignedCorpus {
        corpus,
        embeddings,
        distributions,
    })
}

impl<'a> AlignedCorpus<'a> {
    /// Global row range of every sentence.
    pub fn row_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.corpus
            .sentences
            .iter()
            .map(|s| {
                let r = start..start + s.len();
                start = r.end;
                r
            })
            .collect()
    }

    /// Sentences paired with their global row range.
    pub fn sentences(&self) -> impl Iterator<Item = (&'a Sentence, Range<usize>)> + '_ {
        self.corpus.sentences.iter().zip(self.row_ranges())
    }

    pub fn embedding(&self, row: usize) -> &'a [f32] {
        self.embeddings.row(row)
    }
}
