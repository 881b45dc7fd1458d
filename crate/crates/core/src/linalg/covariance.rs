use crate::error::{Error, Result};
use crate::signals::SampleBuffer;

/// Relative asymmetry tolerated when wrapping an arbitrary matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real symmetric matrix, row-major. Produced as a sample covariance
/// (and then positive semidefinite up to round-off), but any symmetric matrix
/// is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    /// Wrap row-major `data`. Rejects non-square, non-finite or asymmetric
    /// input; small asymmetry is averaged away.
    pub fn from_row_major(dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asymmetry = 0.0f64;
        for i in 0..dim {
            for j in i + 1..dim {
                asymmetry = asymmetry.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::param("rows", "matrix must be square"));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// Trusted constructor for internally built symmetric data.
    pub(crate) fn from_symmetric_unchecked(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `count` overlapping length-`dim` windows of `samples`, stride 1, the first
/// starting at `offset`.
pub fn sliding_vectors(
    samples: &[f64],
    dim: usize,
    offset: usize,
    count: usize,
) -> Result<impl Iterator<Item = &[f64]>> {
    if dim == 0 {
        return Err(Error::param("n", "vector dimension must be at least 1"));
    }
    let needed = offset + count + dim - 1;
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: samples.len(),
        });
    }
    Ok(samples.windows(dim).skip(offset).take(count))
}

/// Running sum of outer products `v v^T`. Accumulators over disjoint data
/// can be merged in any grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct CovAccumulator {
    dim: usize,
    // Upper triangle only is maintained; finalize mirrors it.
    sum: Vec<f64>,
    count: u64,
}

impl CovAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sum: vec![0.0; dim * dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn accumulate(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let n = self.dim;
        for i in 0..n {
            let vi = v[i];
            let row = &mut self.sum[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += vi * v[j];
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &CovAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.count += other.count;
        Ok(())
    }

    /// `(1 / count) * sum v v^T`.
    pub fn finalize(&self) -> Result<CovMatrix> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.dim;
        let inv = 1.0 / self.count as f64;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.sum[i * n + j] * inv;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(CovMatrix::from_symmetric_unchecked(n, data))
    }
}

/// Sample covariance of every length-`dim` window of `samples`, normalized
/// by the window count.
///
/// Entry `(i, i + d)` is `sum_t x[t + i] x[t + i + d]` over the windows. Along
/// each diagonal `d` the sum is computed once directly and then slid one
/// sample at a time, so the cost is O(dim * windows) rather than
/// O(dim^2 * windows).
pub fn window_covariance(samples: &[f64], dim: usize) -> Result<CovMatrix> {
    if dim == 0 {
        return Err(Error::param("n", "vector dimension must be at least 1"));
    }
    if samples.len() < dim {
        return Err(Error::InsufficientSamples {
            needed: dim,
            available: samples.len(),
        });
    }
    let windows = samples.len() - dim + 1;
    let inv = 1.0 / windows as f64;
    let mut data = vec![0.0; dim * dim];
    for d in 0..dim {
        let mut acc: f64 = samples[..windows]
            .iter()
            .zip(&samples[d..d + windows])
            .map(|(a, b)| a * b)
            .sum();
        for i in 0..dim - d {
            if i > 0 {
                acc += samples[i - 1 + windows] * samples[i - 1 + windows + d]
                    - samples[i - 1] * samples[i - 1 + d];
            }
            let v = acc * inv;
            data[i * dim + i + d] = v;
            data[(i + d) * dim + i] = v;
        }
    }
    Ok(CovMatrix::from_symmetric_unchecked(dim, data))
}

/// Covariance of sensing segment `index` (zero-based) of `buffer`: windows
/// starting at `index * windows .. (index + 1) * windows`.
pub fn segment_covariance(
    buffer: &SampleBuffer,
    dim: usize,
    index: usize,
    windows: usize,
) -> Result<CovMatrix> {
    window_covariance(buffer.segment(index, dim, windows)?, dim)
}
