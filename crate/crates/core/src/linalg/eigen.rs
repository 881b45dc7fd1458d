use rand::Rng as _;

use super::covariance::{dot, norm, CovMatrix};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

const JACOBI_MAX_SWEEPS: usize = 100;
const START_SEED: u64 = 0x5EED_F00D;
const START_PERTURBATION: f64 = 1e-3;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn leading(&self) -> (f64, &[f64]) {
        (self.values[0], &self.vectors[0])
    }

    /// `Phi diag(values) Phi^T` as a row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for (lambda, phi) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lambda * phi[i] * phi[j];
                }
            }
        }
        out
    }
}

/// Flip `v` so its first non-negligible component is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(r: &CovMatrix) -> Result<EigenPairs> {
    let n = r.dim();
    let mut a = r.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = r.frobenius_norm();
    if scale > 0.0 {
        let target = f64::EPSILON * scale;
        let mut prev_off = f64::INFINITY;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum::<f64>()
                .sqrt();
            // Converged, or stalled at round-off level.
            if off <= target || (off < 1e-12 * scale && off >= 0.5 * prev_off) {
                break;
            }
            prev_off = off;
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, n, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
            normalize_sign(&mut col);
            col
        })
        .collect();
    Ok(EigenPairs { values, vectors })
}

/// Annihilate `a[p][q]` with one plane rotation, accumulating it into `v`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

fn power_start(n: usize) -> Vec<f64> {
    let mut rng = seed::rng(START_SEED, &[seed::stream::POWER_START, n as u64]);
    let base = 1.0 / (n as f64).sqrt();
    let mut v: Vec<f64> = (0..n)
        .map(|_| base + START_PERTURBATION * rng.random_range(-1.0..1.0))
        .collect();
    let len = norm(&v);
    v.iter_mut().for_each(|x| *x /= len);
    v
}

/// Leading eigenpair of a symmetric PSD matrix by power iteration, O(N^2) per
/// step. Stops once `||R phi - lambda phi|| <= tol * lambda`.
pub fn leading_eigenvector(r: &CovMatrix, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let mut v = power_start(r.dim());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let w = r.mul_vec(&v);
        let lambda = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            // Zero matrix: every direction is an eigenvector of eigenvalue 0.
            normalize_sign(&mut v);
            return Ok((0.0, v));
        }
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda {
            normalize_sign(&mut v);
            return Ok((lambda, v));
        }
        v = w.into_iter().map(|x| x / wn).collect();
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}
