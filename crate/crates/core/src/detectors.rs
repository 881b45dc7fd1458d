//! Binary hypothesis tests on one sensing segment.
//!
//! A segment is `windows + dim - 1` raw samples; its covariance averages the
//! `windows` sliding vectors of length `dim`.
//!
//! - FTM matches the segment's feature against a learned feature.
//! - MME uses the max/min eigenvalue ratio and needs no prior knowledge.
//! - The energy detector needs the noise variance and is therefore exposed
//!   to noise-power misestimation.
//!
//! FTM and MME statistics are invariant to scaling the samples, so their
//! thresholds do not depend on the noise level.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature::{extract_feature, full_similarity, Feature, LearnedFeature};
use crate::linalg::{eig_sym, window_covariance, CovMatrix};
use crate::seed::{self, stream};
use crate::signals::{generate_noise, mean_square, segment_len, NoiseSpec};
use crate::stats;

/// Relative floor on the smallest eigenvalue before MME refuses the ratio.
pub const MME_SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

/// A verdict: H1 exactly when `statistic > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub threshold: f64,
}

impl Decision {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        let hypothesis = if statistic > threshold {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        };
        Self {
            hypothesis,
            statistic,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DetectorKind {
    #[serde(rename = "FTM")]
    Ftm,
    #[serde(rename = "MME")]
    Mme,
    #[serde(rename = "ED")]
    Energy,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Ftm, DetectorKind::Mme, DetectorKind::Energy];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Ftm => "FTM",
            DetectorKind::Mme => "MME",
            DetectorKind::Energy => "ED",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A detector with whatever prior knowledge it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Ftm { feature: Feature },
    Mme,
    Energy { assumed_noise_variance: f64 },
}

impl Detector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Ftm { .. } => DetectorKind::Ftm,
            Detector::Mme => DetectorKind::Mme,
            Detector::Energy { .. } => DetectorKind::Energy,
        }
    }

    /// Test statistic of one raw segment.
    pub fn statistic(&self, segment: &[f64], dim: usize) -> Result<f64> {
        match self {
            Detector::Ftm { feature } => {
                check_feature_dim(feature, dim)?;
                ftm_statistic(&window_covariance(segment, dim)?, feature)
            }
            Detector::Mme => mme_statistic(&window_covariance(segment, dim)?),
            Detector::Energy {
                assumed_noise_variance,
            } => energy_statistic(segment, *assumed_noise_variance),
        }
    }
}

fn check_feature_dim(feature: &Feature, dim: usize) -> Result<()> {
    if feature.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: feature.dim(),
        });
    }
    Ok(())
}

/// Similarity between the learned feature and the feature of `cov`.
pub fn ftm_statistic(cov: &CovMatrix, learned: &Feature) -> Result<f64> {
    check_feature_dim(learned, cov.dim())?;
    full_similarity(learned, &extract_feature(cov)?)
}

/// `lambda_max / lambda_min` of `cov`.
pub fn mme_statistic(cov: &CovMatrix) -> Result<f64> {
    eigenvalue_ratio(&eig_sym(cov)?.values, cov)
}

fn eigenvalue_ratio(values: &[f64], cov: &CovMatrix) -> Result<f64> {
    let lambda_max = values[0];
    let lambda_min = values[values.len() - 1];
    let floor = MME_SINGULAR_EPS * cov.trace() / cov.dim() as f64;
    if !(lambda_min > floor) || lambda_min <= 0.0 {
        return Err(Error::SingularCovariance { lambda_min });
    }
    Ok(lambda_max / lambda_min)
}

/// Mean-square of the segment divided by the assumed noise variance.
pub fn energy_statistic(segment: &[f64], assumed_noise_variance: f64) -> Result<f64> {
    if !(assumed_noise_variance > 0.0 && assumed_noise_variance.is_finite()) {
        return Err(Error::param(
            "noise_variance",
            "assumed noise variance must be > 0",
        ));
    }
    Ok(mean_square(segment) / assumed_noise_variance)
}

/// Feature template matching on one segment.
pub fn ftm(segment: &[f64], learned: &LearnedFeature, dim: usize, tf: f64) -> Result<Decision> {
    check_feature_dim(&learned.feature, dim)?;
    let stat = ftm_statistic(&window_covariance(segment, dim)?, &learned.feature)?;
    Ok(Decision::new(stat, tf))
}

/// Max/min eigenvalue ratio test on one segment.
pub fn mme(segment: &[f64], dim: usize, gamma: f64) -> Result<Decision> {
    if !(gamma > 1.0) {
        return Err(Error::param("gamma", "MME threshold must exceed 1"));
    }
    let stat = mme_statistic(&window_covariance(segment, dim)?)?;
    Ok(Decision::new(stat, gamma))
}

/// Energy test with a presumed noise variance.
pub fn energy_detector(segment: &[f64], assumed_noise_variance: f64, threshold: f64) -> Result<Decision> {
    Ok(Decision::new(
        energy_statistic(segment, assumed_noise_variance)?,
        threshold,
    ))
}

/// Statistics of all three detectors on one segment, sharing one covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStatistics {
    pub ftm: f64,
    pub mme: f64,
    pub energy: f64,
}

impl SegmentStatistics {
    pub fn compute(
        segment: &[f64],
        dim: usize,
        learned: &Feature,
        assumed_noise_variance: f64,
    ) -> Result<Self> {
        let cov = window_covariance(segment, dim)?;
        check_feature_dim(learned, dim)?;
        // One full decomposition serves both eigen-based statistics.
        let pairs = eig_sym(&cov)?;
        let current = Feature::new(pairs.vectors[0].clone(), pairs.values[0].max(0.0))?;
        Ok(Self {
            ftm: full_similarity(learned, &current)?,
            mme: eigenvalue_ratio(&pairs.values, &cov)?,
            energy: energy_statistic(segment, assumed_noise_variance)?,
        })
    }

    pub fn get(&self, kind: DetectorKind) -> f64 {
        match kind {
            DetectorKind::Ftm => self.ftm,
            DetectorKind::Mme => self.mme,
            DetectorKind::Energy => self.energy,
        }
    }
}

/// White Gaussian noise of a given variance: the H0 model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub variance: f64,
}

/// Segment geometry: vector length and number of sliding windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SegmentShape {
    pub dim: usize,
    pub windows: usize,
}

impl SegmentShape {
    pub fn new(dim: usize, windows: usize) -> Result<Self> {
        segment_len(dim, windows)?;
        Ok(Self { dim, windows })
    }

    /// Raw samples per segment.
    pub fn samples(&self) -> usize {
        self.windows + self.dim - 1
    }
}

/// A threshold set from noise-only statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    pub target_pf: f64,
    pub trials_used: usize,
    pub detector_kind: DetectorKind,
}

/// Minimum calibration trials for a false-alarm target.
pub fn min_calibration_trials(target_pf: f64) -> usize {
    (10.0 / target_pf - 1e-9).ceil() as usize
}

/// Seed of noise-only trial `index` under base `seed`.
pub fn noise_trial_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[stream::CALIBRATION, index as u64])
}

/// One noise-only segment of calibration trial `index`.
pub fn noise_segment(noise: &NoiseModel, shape: SegmentShape, seed: u64, index: usize) -> Result<Vec<f64>> {
    let spec = NoiseSpec {
        variance: noise.variance,
        seed: noise_trial_seed(seed, index),
    };
    Ok(generate_noise(&spec, shape.samples(), 1.0)?.into_samples())
}

/// Detector statistics over `trials` independent noise-only segments, in
/// trial order. Trials run in parallel; each has its own derived seed.
pub fn noise_statistics(
    detector: &Detector,
    noise: &NoiseModel,
    shape: SegmentShape,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|i| detector.statistic(&noise_segment(noise, shape, seed, i)?, shape.dim))
        .collect()
}

/// Empirical `(1 - target_pf)` quantile of noise-only statistics.
pub fn calibrate_threshold(
    detector: &Detector,
    noise: &NoiseModel,
    shape: SegmentShape,
    target_pf: f64,
    trials: usize,
    seed: u64,
) -> Result<Threshold> {
    let stats = noise_statistics_checked(detector, noise, shape, target_pf, trials, seed)?;
    threshold_from_statistics(&stats, target_pf, detector.kind())
}

fn noise_statistics_checked(
    detector: &Detector,
    noise: &NoiseModel,
    shape: SegmentShape,
    target_pf: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_pf(target_pf)?;
    let needed = min_calibration_trials(target_pf);
    if trials < needed {
        return Err(Error::InsufficientTrials { needed, got: trials });
    }
    noise_statistics(detector, noise, shape, trials, seed)
}

fn check_pf(target_pf: f64) -> Result<()> {
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(Error::param("target_pf", "must lie in (0, 1)"));
    }
    Ok(())
}

/// Threshold at the `(1 - target_pf)` empirical quantile of `stats`.
pub fn threshold_from_statistics(stats: &[f64], target_pf: f64, kind: DetectorKind) -> Result<Threshold> {
    check_pf(target_pf)?;
    Ok(Threshold {
        value: stats::empirical_quantile(stats, 1.0 - target_pf)?,
        target_pf,
        trials_used: stats.len(),
        detector_kind: kind,
    })
}
