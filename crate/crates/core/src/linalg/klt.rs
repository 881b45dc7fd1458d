use super::covariance::dot;
use super::eigen::EigenPairs;
use crate::error::{Error, Result};

/// Coefficients of `x` in the eigenbasis: `kappa = Phi^T x`.
pub fn klt_transform(pairs: &EigenPairs, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(pairs, x)?;
    Ok(pairs.vectors.iter().map(|phi| dot(phi, x)).collect())
}

/// Reconstruction of `x` from its first `m` coefficients.
pub fn klt_truncate(pairs: &EigenPairs, x: &[f64], m: usize) -> Result<Vec<f64>> {
    check_dim(pairs, x)?;
    if m == 0 || m > pairs.dim() {
        return Err(Error::param("m", format!("must lie in 1..={}", pairs.dim())));
    }
    let mut out = vec![0.0; x.len()];
    for phi in &pairs.vectors[..m] {
        let kappa = dot(phi, x);
        out.iter_mut().zip(phi).for_each(|(o, p)| *o += kappa * p);
    }
    Ok(out)
}

fn check_dim(pairs: &EigenPairs, x: &[f64]) -> Result<()> {
    if x.len() != pairs.dim() {
        return Err(Error::DimensionMismatch {
            expected: pairs.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_sym, CovMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_pairs(n: usize) -> EigenPairs {
        eig_sym(&CovMatrix::identity(n)).unwrap()
    }

    #[test]
    fn identity_basis_is_passthrough() {
        let x = [0.5, -2.0, 3.0];
        let kappa = klt_transform(&identity_pairs(3), &x).unwrap();
        let mut sorted = kappa.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![-2.0, 0.5, 3.0]);
    }

    #[test]
    fn full_truncation_reconstructs() {
        let r =
            CovMatrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]]).unwrap();
        let pairs = eig_sym(&r).unwrap();
        let x = [1.0, -2.0, 0.25];
        let xh = klt_truncate(&pairs, &x, 3).unwrap();
        for (a, b) in xh.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10 * 2.0);
        }
        assert!(klt_truncate(&pairs, &x, 0).is_err());
        assert!(klt_truncate(&pairs, &x, 4).is_err());
        assert!(klt_transform(&pairs, &x[..2]).is_err());
    }

    #[test]
    fn rank_one_truncation_beats_random_directions() {
        // Property 1 spot-check: on the covariance's own ensemble, projecting
        // onto phi_1 leaves less mean residual energy than any other unit
        // direction. Oracle: brute-force search over random directions.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mix = [
            [2.0, 0.3, 0.0, 0.1],
            [0.0, 1.0, 0.4, 0.0],
            [0.5, 0.0, 0.6, 0.2],
            [0.0, 0.1, 0.0, 0.3],
        ];
        let samples: Vec<[f64; 4]> = (0..2000)
            .map(|_| {
                let z: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                std::array::from_fn(|i| (0..4).map(|j| mix[i][j] * z[j]).sum())
            })
            .collect();
        let mut acc = crate::linalg::CovAccumulator::new(4);
        samples.iter().for_each(|s| acc.accumulate(s).unwrap());
        let pairs = eig_sym(&acc.finalize().unwrap()).unwrap();

        let resid = |dir: &[f64]| -> f64 {
            samples
                .iter()
                .map(|s| {
                    let k = dot(dir, s);
                    s.iter().zip(dir).map(|(a, d)| (a - k * d).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        };
        let best = samples
            .iter()
            .map(|s| {
                let xh = klt_truncate(&pairs, s, 1).unwrap();
                s.iter().zip(&xh).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>();
        assert!((best - resid(&pairs.vectors[0])).abs() < 1e-9 * best);
        for _ in 0..10_000 {
            let mut d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = dot(&d, &d).sqrt();
            d.iter_mut().for_each(|v| *v /= n);
            assert!(best <= resid(&d) * (1.0 + 1e-12));
        }
    }
}
