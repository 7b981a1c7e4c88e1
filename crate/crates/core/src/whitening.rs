//! Whitening transformation `x̃ = (x − μ)W` with `W = U·Λ^(−1/2)`, where
//! `Σ = UΛUᵀ` is the eigendecomposition of the (1/N) sample covariance.
//!
//! All arithmetic is carried out in `f64`; inputs are the `f32` rows of an
//! [`EmbeddingMatrix`].

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::embedio::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Eigenvalues below `CLAMP_RELATIVE × λ_max` are raised to that floor.
pub const CLAMP_RELATIVE: f64 = 1e-10;

const CHUNK_ROWS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    dims: usize,
    mean: Vec<f64>,
    /// Row-major `dims × dims`; row `i` is input coordinate `i`.
    transform: Vec<f64>,
    /// Covariance eigenvalues in descending order, before clamping.
    eigenvalues: Vec<f64>,
    clamped: usize,
}

impl WhiteningModel {
    pub fn fit(sample: &EmbeddingMatrix) -> Result<Self> {
        let n = sample.rows();
        let d = sample.dims();
        if n < 2 {
            return Err(Error::InsufficientSample { needed: 2, found: n });
        }

        let mut mean = vec![0.0f64; d];
        for row in sample.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }

        // Chunked Xcᵀ·Xc, summed in chunk order so the result is deterministic.
        let partials: Vec<DMatrix<f64>> = sample
            .data()
            .par_chunks(CHUNK_ROWS * d)
            .map(|chunk| {
                let rows = chunk.len() / d;
                let centered = DMatrix::from_fn(rows, d, |r, c| chunk[r * d + c] as f64 - mean[c]);
                centered.tr_mul(&centered)
            })
            .collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in partials {
            cov += p;
        }
        cov /= n as f64;
        // Exact symmetry for the eigensolver.
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }

        let eigen = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eigen.eigenvalues[b]
                .total_cmp(&eigen.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let eigenvalues: Vec<f64> = order.iter().map(|&j| eigen.eigenvalues[j]).collect();
        let largest = eigenvalues[0];
        if largest.is_nan() || largest <= 0.0 {
            return Err(Error::DegenerateSample);
        }
        let floor = CLAMP_RELATIVE * largest;

        let mut clamped = 0;
        let mut transform = vec![0.0f64; d * d];
        for (col, &src) in order.iter().enumerate() {
            let mut lambda = eigenvalues[col];
            if lambda < floor {
                lambda = floor;
                clamped += 1;
            }
            let vector = eigen.eigenvectors.column(src);
            let sign = match vector.iter().find(|c| c.abs() > 1e-12) {
                Some(&c) if c < 0.0 => -1.0,
                _ => 1.0,
            };
            let scale = sign / lambda.sqrt();
            for row in 0..d {
                transform[row * d + col] = vector[row] * scale;
            }
        }

        Ok(WhiteningModel {
            dims: d,
            mean,
            transform,
            eigenvalues,
            clamped,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn transform(&self) -> &[f64] {
        &self.transform
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues raised to the clamp floor during fit.
    pub fn clamp_count(&self) -> usize {
        self.clamped
    }

    pub fn apply(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(&v, m)| v as f64 - m).collect();
        Ok(self.project(&centered))
    }

    pub fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.project(&centered))
    }

    /// Whitens every row; returns a row-major `rows × dims` buffer.
    ///
    /// Each row goes through the same kernel as [`WhiteningModel::apply`], so
    /// whitening a row alone or as part of a matrix gives identical bits.
    pub fn apply_matrix(&self, m: &EmbeddingMatrix) -> Result<Vec<f64>> {
        self.check(m.dims())?;
        let d = self.dims;
        let mut out = vec![0.0f64; m.rows() * d];
        out.par_chunks_mut(d)
            .zip(m.data().par_chunks(d))
            .for_each(|(dst, src)| {
                let centered: Vec<f64> =
                    src.iter().zip(&self.mean).map(|(&v, m)| v as f64 - m).collect();
                dst.copy_from_slice(&self.project(&centered));
            });
        Ok(out)
    }

    fn check(&self, width: usize) -> Result<()> {
        if width != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                found: width,
            });
        }
        Ok(())
    }

    fn project(&self, centered: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let mut out = vec![0.0f64; d];
        for (i, &c) in centered.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.transform[i * d..(i + 1) * d];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += c * w;
            }
        }
        out
    }

    /// `f64` little-endian: mean, transform, eigenvalues, then u32 clamp count.
    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        for v in self.mean.iter().chain(&self.transform).chain(&self.eigenvalues) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.clamped as u32).to_le_bytes());
    }

    pub(crate) fn encoded_len(dims: usize) -> usize {
        (dims + dims * dims + dims) * 8 + 4
    }

    pub(crate) fn read_from(dims: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::encoded_len(dims) {
            return Err(Error::Length {
                expected: Self::encoded_len(dims) as u64,
                found: bytes.len() as u64,
            });
        }
        let floats: Vec<f64> = bytes[..bytes.len() - 4]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite whitening parameter".into()));
        }
        let clamped = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()) as usize;
        let (mean, rest) = floats.split_at(dims);
        let (transform, eigenvalues) = rest.split_at(dims * dims);
        Ok(WhiteningModel {
            dims,
            mean: mean.to_vec(),
            transform: transform.to_vec(),
            eigenvalues: eigenvalues.to_vec(),
            clamped,
        })
    }
}
