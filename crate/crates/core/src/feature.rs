//! The signal feature: leading eigenvector of a segment's sample covariance.
//!
//! Consecutive features of a wide-sense-stationary signal point the same way,
//! while consecutive features of white noise are random. Blind learning and
//! template matching both rest on that contrast, measured by a lag-searched
//! absolute cross-correlation of unit vectors.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::format::{self, Container, FEATURE_MAGIC};
use crate::linalg::{
    self, eig_sym, leading_eigenvector, window_covariance, CovMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::seed;
use crate::stats;

/// Learning threshold used in the original field trial.
pub const PRESET_TE: f64 = 0.9;

const UNIT_NORM_TOL: f64 = 1e-10;

/// Unit-norm leading eigenvector of a sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    vector: Vec<f64>,
    lambda1: f64,
    source_segment: Option<usize>,
}

impl Feature {
    pub fn new(vector: Vec<f64>, lambda1: f64) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::param("feature", "vector must be non-empty"));
        }
        if vector.iter().any(|v| !v.is_finite()) || !lambda1.is_finite() {
            return Err(Error::NonFinite);
        }
        let len = linalg::norm(&vector);
        if (len - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::param("feature", format!("vector norm {len} is not 1")));
        }
        if lambda1 < 0.0 {
            return Err(Error::param("lambda1", "leading eigenvalue must be >= 0"));
        }
        Ok(Self {
            vector,
            lambda1,
            source_segment: None,
        })
    }

    pub fn with_source_segment(mut self, index: usize) -> Self {
        self.source_segment = Some(index);
        self
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn source_segment(&self) -> Option<usize> {
        self.source_segment
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let container = Container {
            scalar: self.lambda1,
            values: self.vector.clone(),
        };
        format::write_file(path, FEATURE_MAGIC, &container)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let Container { scalar, values } = format::read_file(path, FEATURE_MAGIC)?;
        Self::new(values, scalar).map_err(|e| Error::InvalidData(e.to_string()))
    }
}

/// Output of one blind-learning attempt, kept only when the two segment
/// features agreed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedFeature {
    pub feature: Feature,
    pub similarity_at_learning: f64,
    pub threshold_used: f64,
}

impl LearnedFeature {
    /// Treat an externally supplied feature (e.g. loaded from disk) as learned.
    pub fn from_feature(feature: Feature) -> Self {
        Self {
            feature,
            similarity_at_learning: 1.0,
            threshold_used: 0.0,
        }
    }
}

/// Leading eigenvector of `r`, falling back to the full decomposition when
/// power iteration stalls on a near-degenerate spectrum.
pub fn extract_feature(r: &CovMatrix) -> Result<Feature> {
    let (lambda1, vector) = match leading_eigenvector(r, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(pair) => pair,
        Err(Error::NoConvergence { .. }) => {
            let pairs = eig_sym(r)?;
            let (l, v) = pairs.leading();
            (l, v.to_vec())
        }
        Err(e) => return Err(e),
    };
    Feature::new(vector, lambda1.max(0.0))
}

/// Feature of a raw segment of `windows + dim - 1` samples.
pub fn segment_feature(samples: &[f64], dim: usize) -> Result<Feature> {
    extract_feature(&window_covariance(samples, dim)?)
}

/// Maximum over lags `l in [-max_lag, max_lag]` of `|sum_k a[k] b[k + l]|`,
/// zero-padded outside the vectors.
pub fn similarity_vectors(a: &[f64], b: &[f64], max_lag: usize) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if n > 0 && max_lag >= n {
        return Err(Error::param("max_lag", format!("must be <= {}", n - 1)));
    }
    let mut best = 0.0f64;
    for lag in 0..=max_lag {
        let pos: f64 = a[..n - lag].iter().zip(&b[lag..]).map(|(x, y)| x * y).sum();
        let neg: f64 = a[lag..].iter().zip(&b[..n - lag]).map(|(x, y)| x * y).sum();
        best = best.max(pos.abs()).max(neg.abs());
    }
    Ok(best.min(1.0))
}

pub fn similarity(f1: &Feature, f2: &Feature, max_lag: usize) -> Result<f64> {
    similarity_vectors(f1.vector(), f2.vector(), max_lag)
}

/// Similarity over every lag the dimension allows.
pub fn full_similarity(f1: &Feature, f2: &Feature) -> Result<f64> {
    similarity(f1, f2, f1.dim().saturating_sub(1))
}

/// Both features of a learning attempt and their similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaOutcome {
    pub similarity: f64,
    pub threshold: f64,
    pub first: Feature,
    pub second: Feature,
}

impl FlaOutcome {
    pub fn is_learned(&self) -> bool {
        self.similarity > self.threshold
    }

    /// The second segment's feature when the similarity cleared the threshold.
    pub fn learned(self) -> Option<LearnedFeature> {
        self.is_learned().then_some(LearnedFeature {
            feature: self.second,
            similarity_at_learning: self.similarity,
            threshold_used: self.threshold,
        })
    }
}

/// Blind feature learning from two consecutive segments.
pub fn fla(seg_a: &[f64], seg_b: &[f64], dim: usize, te: f64) -> Result<FlaOutcome> {
    if seg_a.len() != seg_b.len() {
        return Err(Error::DimensionMismatch {
            expected: seg_a.len(),
            found: seg_b.len(),
        });
    }
    if !(te > 0.0 && te < 1.0) {
        return Err(Error::param("te", "learning threshold must lie in (0, 1)"));
    }
    let first = segment_feature(seg_a, dim)?;
    let second = segment_feature(seg_b, dim)?;
    let similarity = full_similarity(&first, &second)?;
    Ok(FlaOutcome {
        similarity,
        threshold: te,
        first,
        second,
    })
}

/// `N * lambda_1 / sum(lambda_i)` for a clean-signal spectrum.
pub fn snr_gain(signal_eigs: &[f64]) -> Result<f64> {
    if signal_eigs.is_empty() {
        return Err(Error::ZeroSpectrum);
    }
    let total: f64 = signal_eigs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let lead = signal_eigs.iter().cloned().fold(f64::MIN, f64::max);
    Ok(signal_eigs.len() as f64 * lead / total)
}

/// `(SNR_x, SNR_xhat)`: input SNR and SNR after projecting onto the leading
/// eigenvector, for white noise of variance `noise_variance`.
pub fn effective_snrs(signal_eigs: &[f64], noise_variance: f64) -> Result<(f64, f64)> {
    if !(noise_variance > 0.0) {
        return Err(Error::param("noise_variance", "must be > 0"));
    }
    if signal_eigs.is_empty() {
        return Err(Error::ZeroSpectrum);
    }
    let total: f64 = signal_eigs.iter().sum();
    let lead = signal_eigs.iter().cloned().fold(f64::MIN, f64::max);
    let n = signal_eigs.len() as f64;
    Ok((total / (n * noise_variance), lead / noise_variance))
}

/// Random unit vector with isotropic direction.
pub fn random_unit_vector(rng: &mut seed::Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = linalg::norm(&v);
        if len > 0.0 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Quantile of the full-lag similarity between independent isotropic unit
/// vectors: the similarity two unrelated noise features reach by chance.
pub fn noise_similarity_quantile(dim: usize, pairs: usize, quantile: f64, seed: u64) -> Result<f64> {
    let mut rng = seed::rng(seed, &[seed::stream::CALIBRATION, dim as u64]);
    let sims = (0..pairs)
        .map(|_| {
            let a = random_unit_vector(&mut rng, dim);
            let b = random_unit_vector(&mut rng, dim);
            similarity_vectors(&a, &b, dim - 1)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats::empirical_quantile(&sims, quantile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovAccumulator;
    use crate::signals::{
        generate_noise, generate_signal, mix_at_snr, NoiseSpec, SampleBuffer, SignalKind, SignalSpec,
    };

    fn unit(v: &[f64]) -> Feature {
        let n = linalg::norm(v);
        Feature::new(v.iter().map(|x| x / n).collect(), 1.0).unwrap()
    }

    #[test]
    fn rank_one_feature_is_sign_normalized_vector() {
        let v = [-0.6, 0.0, 0.8];
        let mut acc = CovAccumulator::new(3);
        acc.accumulate(&v).unwrap();
        let f = extract_feature(&acc.finalize().unwrap()).unwrap();
        assert!((f.vector()[0] - 0.6).abs() < 1e-9);
        assert!((f.vector()[2] + 0.8).abs() < 1e-9);
        assert!((f.lambda1() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn white_covariance_still_yields_a_deterministic_feature() {
        let r = CovMatrix::identity(6).scaled(4.0);
        let a = extract_feature(&r).unwrap();
        let b = extract_feature(&r).unwrap();
        assert_eq!(a, b);
        assert!((linalg::norm(a.vector()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_examples() {
        let f = unit(&[0.3, -0.2, 0.9, 0.1]);
        let neg = unit(&f.vector().iter().map(|x| -x).collect::<Vec<_>>());
        assert!((full_similarity(&f, &f).unwrap() - 1.0).abs() < 1e-12);
        assert!((full_similarity(&f, &neg).unwrap() - 1.0).abs() < 1e-12);
        let e1 = unit(&[1.0, 0.0, 0.0, 0.0]);
        let e2 = unit(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(similarity(&e1, &e2, 3).unwrap(), 1.0);
        assert_eq!(similarity(&e1, &e2, 0).unwrap(), 0.0);
        assert!(similarity(&e1, &unit(&[1.0, 1.0]), 1).is_err());
        assert!(similarity(&e1, &e2, 4).is_err());
    }

    #[test]
    fn random_pair_similarity_is_well_below_09() {
        let q99 = noise_similarity_quantile(64, 10_000, 0.99, 1).unwrap();
        assert!(q99 < 0.9, "99th percentile {q99}");
        assert!(q99 > 0.2);
    }

    #[test]
    fn fla_learns_identical_sine_segments() {
        let spec = SignalSpec::new(
            SignalKind::Sine {
                freq_hz: 500.0,
                phase_rad: 0.0,
            },
            1.0,
        );
        // Period of 16 samples; segments start 2000 samples apart, a whole
        // number of periods, so both segments are identical.
        let buf = generate_signal(&spec, 2 * 2000 + 15, 8000.0, 0).unwrap();
        let a = buf.segment(0, 16, 2000).unwrap();
        let b = buf.segment(1, 16, 2000).unwrap();
        let out = fla(a, b, 16, 0.99).unwrap();
        assert!((out.similarity - 1.0).abs() < 1e-9);
        let learned = out.learned().unwrap();
        assert_eq!(learned.threshold_used, 0.99);
    }

    #[test]
    fn fla_rejects_bad_arguments() {
        let x = vec![1.0; 50];
        assert!(fla(&x, &x[..40], 4, 0.9).is_err());
        assert!(fla(&x, &x, 4, 1.0).is_err());
        assert!(fla(&x, &x, 4, 0.0).is_err());
    }

    #[test]
    fn fla_rarely_learns_from_noise() {
        let (n, ns) = (64, 4000);
        let trials = 100;
        let learned = (0..trials)
            .filter(|&t| {
                let buf = generate_noise(
                    &NoiseSpec {
                        variance: 1.0,
                        seed: t,
                    },
                    2 * ns + n - 1,
                    1.0,
                )
                .unwrap();
                fla(
                    buf.segment(0, n, ns).unwrap(),
                    buf.segment(1, n, ns).unwrap(),
                    n,
                    0.9,
                )
                .unwrap()
                .is_learned()
            })
            .count();
        assert!(learned <= trials as usize / 10, "learned {learned}/{trials}");
    }

    #[test]
    fn fla_learns_band_signal_at_0db() {
        let (n, ns) = (32, 10_000);
        let spec = SignalSpec::new(
            SignalKind::BandlimitedFlat {
                f_low: 0.9e6,
                f_high: 1.1e6,
            },
            1.0,
        );
        let trials = 40;
        let learned = (0..trials)
            .filter(|&t| {
                let s = generate_signal(&spec, 2 * ns + n - 1, 4e6, t).unwrap();
                let x = mix_at_snr(&s, 1000 + t, 0.0).unwrap();
                fla(x.segment(0, n, ns).unwrap(), x.segment(1, n, ns).unwrap(), n, 0.9)
                    .unwrap()
                    .is_learned()
            })
            .count();
        assert!(
            learned as f64 >= 0.95 * trials as f64,
            "learned {learned}/{trials}"
        );
    }

    #[test]
    fn feature_is_amplitude_invariant() {
        let spec = SignalSpec::new(SignalKind::Ar1 { coeff: 0.8 }, 1.0);
        let x = generate_signal(&spec, 5031, 1.0, 3).unwrap();
        let x = mix_at_snr(&x, 4, -5.0).unwrap();
        let base = segment_feature(x.samples(), 32).unwrap();
        for c in [1e-3, 0.5, 1e3] {
            let scaled: SampleBuffer = x.scaled(c).unwrap();
            let f = segment_feature(scaled.samples(), 32).unwrap();
            for (a, b) in f.vector().iter().zip(base.vector()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn snr_gain_anchors() {
        assert!((snr_gain(&[2.0; 8]).unwrap() - 1.0).abs() < 1e-15);
        let mut rank1 = vec![0.0; 64];
        rank1[0] = 3.5;
        assert!((snr_gain(&rank1).unwrap() - 64.0).abs() < 1e-12);
        assert!(matches!(snr_gain(&[0.0; 4]), Err(Error::ZeroSpectrum)));

        let (sx, sxh) = effective_snrs(&[1.5; 16], 0.5).unwrap();
        assert!((sx - sxh).abs() < 1e-15);
        let (sx, sxh) = effective_snrs(&rank1, 1.0).unwrap();
        assert!((sx - 3.5 / 64.0).abs() < 1e-15 && (sxh - 3.5).abs() < 1e-15);
        assert!(effective_snrs(&rank1, 0.0).is_err());
    }

    #[test]
    fn ar1_gain_from_analytic_toeplitz() {
        // Oracle: analytic autocorrelation r_k = a^k, diagonalized with
        // nalgebra's symmetric solver (independent of eig_sym).
        let a: f64 = 0.9;
        let m = nalgebra::DMatrix::from_fn(4, 4, |i, j| a.powi((i as i32 - j as i32).abs()));
        let eigs: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        let lead = eigs.iter().cloned().fold(f64::MIN, f64::max);
        let expected = 4.0 * lead / eigs.iter().sum::<f64>();

        let r = CovMatrix::from_row_major(4, m.as_slice().to_vec()).unwrap();
        let ours = eig_sym(&r).unwrap();
        let g = snr_gain(&ours.values).unwrap();
        assert!((g - expected).abs() < 1e-12);
        assert!(g > 3.0 && g < 4.0);
        let (sx, sxh) = effective_snrs(&ours.values, 0.7).unwrap();
        assert!((sxh / sx - g).abs() <= 1e-12 * g);
    }

    #[test]
    fn feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.sfea");
        let f = unit(&[0.1, 0.2, -0.3, 0.4]);
        f.save(&path).unwrap();
        let back = Feature::load(&path).unwrap();
        assert_eq!(back.vector(), f.vector());
        assert_eq!(&std::fs::read(&path).unwrap()[..4], b"SFEA");
        let not_unit = dir.path().join("bad.sfea");
        format::write_file(
            &not_unit,
            FEATURE_MAGIC,
            &Container {
                scalar: 1.0,
                values: vec![1.0, 1.0],
            },
        )
        .unwrap();
        assert!(matches!(Feature::load(&not_unit), Err(Error::InvalidData(_))));
    }
}
