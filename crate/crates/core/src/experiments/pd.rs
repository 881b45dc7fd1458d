use rayon::prelude::*;
use serde::Serialize;

use super::config::fmt_f64;
use super::output::CsvRow;
use super::ExperimentConfig;
use crate::detectors::{
    noise_segment, threshold_from_statistics, DetectorKind, NoiseModel, SegmentStatistics,
};
use crate::error::{Error, Result};
use crate::feature::{fla, LearnedFeature};
use crate::seed::{self, stream};
use crate::signals::{
    generate_noise, generate_signal, mean_square, mix_at_snr, noise_variance_for_snr, NoiseSpec,
};
use crate::stats::{trapezoid_area, wilson_interval, Z95};

/// Detection probability the minimum-SNR summary refers to.
pub const PD_TARGET: f64 = 0.9;

/// Learn the H1 template by FLA from two consecutive segments at the
/// configured learning SNR. Failing to learn is an error.
pub fn learn_template(cfg: &ExperimentConfig) -> Result<LearnedFeature> {
    let seed = cfg.seed()?;
    let shape = cfg.shape()?;
    let spec = cfg.signal_spec()?;
    let signal = generate_signal(
        &spec,
        2 * cfg.windows + cfg.dim - 1,
        cfg.rate,
        seed::derive(seed, &[stream::LEARNING, stream::SIGNAL]),
    )?;
    let mixed = mix_at_snr(
        &signal,
        seed::derive(seed, &[stream::LEARNING, stream::NOISE]),
        cfg.learn_snr_db,
    )?;
    let a = mixed.segment(0, shape.dim, shape.windows)?;
    let b = mixed.segment(1, shape.dim, shape.windows)?;
    let outcome = fla(a, b, cfg.dim, cfg.te)?;
    let (similarity, threshold) = (outcome.similarity, outcome.threshold);
    outcome
        .learned()
        .map(|l| LearnedFeature {
            feature: l.feature.with_source_segment(1),
            ..l
        })
        .ok_or(Error::NotLearned {
            similarity,
            threshold,
        })
}

/// All detector statistics over the calibration noise trials.
///
/// FTM and MME are scale invariant, so unit-variance noise serves every noise
/// level. The energy detector is normalized by the true variance here, so its
/// threshold also carries over.
pub fn calibrate_all(cfg: &ExperimentConfig, learned: &LearnedFeature) -> Result<Vec<SegmentStatistics>> {
    let seed = seed::derive(cfg.seed()?, &[stream::CALIBRATION]);
    let shape = cfg.shape()?;
    let unit = NoiseModel { variance: 1.0 };
    (0..cfg.calibration_trials)
        .into_par_iter()
        .map(|i| {
            SegmentStatistics::compute(
                &noise_segment(&unit, shape, seed, i)?,
                cfg.dim,
                &learned.feature,
                1.0,
            )
        })
        .collect()
}

fn thresholds(cfg: &ExperimentConfig, h0: &[SegmentStatistics]) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, kind) in out.iter_mut().zip(DetectorKind::ALL) {
        let stats: Vec<f64> = h0.iter().map(|s| s.get(kind)).collect();
        *slot = threshold_from_statistics(&stats, cfg.target_pf, kind)?.value;
    }
    Ok(out)
}

/// H1 statistics indexed `[trial][snr]`. Each trial draws one signal and one
/// unit noise realization and reuses them at every SNR, so curves compare
/// like with like across the grid.
fn h1_statistics(
    cfg: &ExperimentConfig,
    learned: &LearnedFeature,
    snrs: &[f64],
) -> Result<Vec<Vec<SegmentStatistics>>> {
    let base = cfg.seed()?;
    let spec = cfg.signal_spec()?;
    let shape = cfg.shape()?;
    let ed_factor = 10f64.powf(cfg.ed_noise_error_db / 10.0);
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let signal = generate_signal(
                &spec,
                shape.samples(),
                cfg.rate,
                seed::derive(base, &[stream::H1_TRIAL, t, stream::SIGNAL]),
            )?
            .into_samples();
            let noise = generate_noise(
                &NoiseSpec {
                    variance: 1.0,
                    seed: seed::derive(base, &[stream::H1_TRIAL, t, stream::NOISE]),
                },
                shape.samples(),
                cfg.rate,
            )?
            .into_samples();
            let power = mean_square(&signal);
            if power == 0.0 {
                return Err(Error::ZeroPower);
            }
            let mut x = vec![0.0; signal.len()];
            snrs.iter()
                .map(|&snr| {
                    let variance = noise_variance_for_snr(power, snr);
                    let sd = variance.sqrt();
                    for ((xi, s), w) in x.iter_mut().zip(&signal).zip(&noise) {
                        *xi = s + sd * w;
                    }
                    SegmentStatistics::compute(&x, cfg.dim, &learned.feature, variance * ed_factor)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdRow {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub pd: f64,
    pub pf_target: f64,
    pub trials: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CsvRow for PdRow {
    const HEADER: &'static str = "detector,snr_db,pd,pf_target,trials,ci_low,ci_high";

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.detector,
            fmt_f64(self.snr_db),
            fmt_f64(self.pd),
            fmt_f64(self.pf_target),
            self.trials,
            fmt_f64(self.ci_low),
            fmt_f64(self.ci_high)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PdSnrReport {
    pub rows: Vec<PdRow>,
    /// Threshold per detector, in `DetectorKind::ALL` order.
    pub thresholds: [f64; 3],
    pub learning_similarity: f64,
    /// Interpolated lowest SNR with `Pd >= 0.9`, per detector.
    pub min_snr_ftm_db: Option<f64>,
    pub min_snr_mme_db: Option<f64>,
    pub min_snr_ed_db: Option<f64>,
    /// MME's minimum SNR minus FTM's: positive when FTM needs less signal.
    pub ftm_gain_over_mme_db: Option<f64>,
}

impl PdSnrReport {
    pub fn curve(&self, kind: DetectorKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.detector == kind)
            .map(|r| (r.snr_db, r.pd))
            .collect()
    }
}

/// Lowest SNR at which the curve reaches `target`, interpolating linearly
/// between the grid points around the first crossing.
pub fn min_snr_for_pd(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let k = curve.iter().position(|&(_, pd)| pd >= target)?;
    if k == 0 {
        return Some(curve[0].0);
    }
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if !x1.is_finite() {
        return Some(x0);
    }
    Some(x0 + (target - y0) / (y1 - y0) * (x1 - x0))
}

/// Detection probability against SNR for all three detectors at the
/// calibrated false-alarm target.
pub fn run_pd_vs_snr(cfg: &ExperimentConfig) -> Result<PdSnrReport> {
    cfg.validate()?;
    let learned = learn_template(cfg)?;
    let h0 = calibrate_all(cfg, &learned)?;
    let thr = thresholds(cfg, &h0)?;
    let h1 = h1_statistics(cfg, &learned, &cfg.snr_grid_db)?;

    let mut rows = Vec::new();
    for (k, kind) in DetectorKind::ALL.into_iter().enumerate() {
        for (j, &snr) in cfg.snr_grid_db.iter().enumerate() {
            let hits = h1.iter().filter(|trial| trial[j].get(kind) > thr[k]).count();
            let (ci_low, ci_high) = wilson_interval(hits, cfg.trials, Z95);
            rows.push(PdRow {
                detector: kind,
                snr_db: snr,
                pd: hits as f64 / cfg.trials as f64,
                pf_target: cfg.target_pf,
                trials: cfg.trials,
                ci_low,
                ci_high,
            });
        }
    }
    let mut report = PdSnrReport {
        rows,
        thresholds: thr,
        learning_similarity: learned.similarity_at_learning,
        min_snr_ftm_db: None,
        min_snr_mme_db: None,
        min_snr_ed_db: None,
        ftm_gain_over_mme_db: None,
    };
    report.min_snr_ftm_db = min_snr_for_pd(&report.curve(DetectorKind::Ftm), PD_TARGET);
    report.min_snr_mme_db = min_snr_for_pd(&report.curve(DetectorKind::Mme), PD_TARGET);
    report.min_snr_ed_db = min_snr_for_pd(&report.curve(DetectorKind::Energy), PD_TARGET);
    report.ftm_gain_over_mme_db = report
        .min_snr_mme_db
        .zip(report.min_snr_ftm_db)
        .map(|(m, f)| m - f);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocRow {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub pf: f64,
    pub pd: f64,
    pub trials: usize,
}

impl CsvRow for RocRow {
    const HEADER: &'static str = "detector,snr_db,pf,pd,trials";

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.detector,
            fmt_f64(self.snr_db),
            fmt_f64(self.pf),
            fmt_f64(self.pd),
            self.trials
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RocReport {
    pub rows: Vec<RocRow>,
    pub snr_db: f64,
    pub auc_ftm: f64,
    pub auc_mme: f64,
    pub auc_ed: f64,
}

impl RocReport {
    pub fn auc(&self, kind: DetectorKind) -> f64 {
        match kind {
            DetectorKind::Ftm => self.auc_ftm,
            DetectorKind::Mme => self.auc_mme,
            DetectorKind::Energy => self.auc_ed,
        }
    }
}

/// Empirical ROC from H0 and H1 statistics, sweeping the threshold from
/// above every value down past the smallest. Starts at (0, 0), ends at (1, 1)
/// and is sorted by `pf`.
pub fn roc_curve(h0: &[f64], h1: &[f64]) -> Vec<(f64, f64)> {
    let mut a = h0.to_vec();
    let mut b = h1.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    let (n0, n1) = (a.len().max(1) as f64, b.len().max(1) as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.max(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        // A threshold just below `next` admits every value >= next.
        while i < a.len() && a[i] >= next {
            i += 1;
        }
        while j < b.len() && b[j] >= next {
            j += 1;
        }
        points.push((i as f64 / n0, j as f64 / n1));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    points
}

/// ROC of all three detectors at the configured ROC SNR. H0 statistics come
/// from the calibration trials, H1 statistics from `trials` signal trials.
pub fn run_roc(cfg: &ExperimentConfig) -> Result<RocReport> {
    cfg.validate()?;
    let learned = learn_template(cfg)?;
    let h0 = calibrate_all(cfg, &learned)?;
    let h1 = h1_statistics(cfg, &learned, &[cfg.roc_snr_db])?;
    let mut rows = Vec::new();
    let mut aucs = [0.0; 3];
    for (k, kind) in DetectorKind::ALL.into_iter().enumerate() {
        let s0: Vec<f64> = h0.iter().map(|s| s.get(kind)).collect();
        let s1: Vec<f64> = h1.iter().map(|t| t[0].get(kind)).collect();
        let curve = roc_curve(&s0, &s1);
        aucs[k] = trapezoid_area(&curve);
        rows.extend(curve.into_iter().map(|(pf, pd)| RocRow {
            detector: kind,
            snr_db: cfg.roc_snr_db,
            pf,
            pd,
            trials: cfg.trials,
        }));
    }
    Ok(RocReport {
        rows,
        snr_db: cfg.roc_snr_db,
        auc_ftm: aucs[0],
        auc_mme: aucs[1],
        auc_ed: aucs[2],
    })
}
