use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::config::fmt_f64;
use super::output::CsvRow;
use super::ExperimentConfig;
use crate::error::Result;
use crate::feature::{extract_feature, full_similarity, segment_feature, Feature};
use crate::linalg::CovAccumulator;
use crate::seed::{self, stream};
use crate::signals::{generate_noise, generate_signal, mix_at_snr, NoiseSpec, SignalKind, SignalSpec};
use crate::stats::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Row {
    /// `sine` rows give the angular error against the clean feature,
    /// `noise` rows the absolute direction of a pure-noise feature.
    pub case: String,
    pub snr_db: f64,
    pub mean_angle_deg: f64,
    pub std_angle_deg: f64,
    pub repetitions: usize,
}

impl CsvRow for Prop2Row {
    const HEADER: &'static str = "case,snr_db,mean_angle_deg,std_angle_deg,repetitions";

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.case,
            fmt_f64(self.snr_db),
            fmt_f64(self.mean_angle_deg),
            fmt_f64(self.std_angle_deg),
            self.repetitions
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop2Report {
    pub rows: Vec<Prop2Row>,
    pub noise_std_angle_deg: f64,
}

impl Prop2Report {
    pub fn sine_row(&self, snr_db: f64) -> Option<&Prop2Row> {
        self.rows.iter().find(|r| r.case == "sine" && r.snr_db == snr_db)
    }
}

/// Angle between the axes of two 2-D vectors, in [0, 90] degrees.
fn axis_angle(a: &[f64], b: &[f64]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.abs().atan2(dot.abs()).to_degrees()
}

/// Feature of the non-overlapping 2x1 vectors `(x[2k], x[2k + 1])`.
fn pair_feature(samples: &[f64]) -> Result<Feature> {
    let mut acc = CovAccumulator::new(2);
    for pair in samples.chunks_exact(2) {
        acc.accumulate(pair)?;
    }
    extract_feature(&acc.finalize()?)
}

/// Leading eigenvector of 2x1 vectors of a sine, clean against noisy, over
/// `prop2_repetitions` random phases; plus the direction of the leading
/// eigenvector of pure noise.
pub fn run_property2_demo(cfg: &ExperimentConfig) -> Result<Prop2Report> {
    cfg.validate()?;
    let base = cfg.seed()?;
    let n = cfg.prop2_samples;
    let reps = cfg.prop2_repetitions;
    let mut rows = Vec::new();
    for (k, &snr) in cfg.prop2_snr_grid_db.iter().enumerate() {
        let angles = (0..reps)
            .into_par_iter()
            .map(|r| {
                let phase = seed::rng(base, &[stream::PHASE, r as u64]).random_range(0.0..2.0 * PI);
                let spec = SignalSpec::new(
                    SignalKind::Sine {
                        freq_hz: cfg.prop2_freq,
                        phase_rad: phase,
                    },
                    1.0,
                );
                // Sliding windows would force a near-Toeplitz 2x2 covariance
                // whose eigenvectors sit at +-45 degrees whatever the input;
                // disjoint pairs keep the noise direction isotropic.
                let clean = generate_signal(&spec, 2 * n, cfg.prop2_rate, 0)?;
                let noisy = mix_at_snr(
                    &clean,
                    seed::derive(base, &[stream::NOISE, k as u64, r as u64]),
                    snr,
                )?;
                let fc = pair_feature(clean.samples())?;
                let fx = pair_feature(noisy.samples())?;
                Ok(axis_angle(fc.vector(), fx.vector()))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&angles);
        rows.push(Prop2Row {
            case: "sine".into(),
            snr_db: snr,
            mean_angle_deg: mean,
            std_angle_deg: std,
            repetitions: reps,
        });
    }

    let directions = (0..reps)
        .into_par_iter()
        .map(|r| {
            let noise = generate_noise(
                &NoiseSpec {
                    variance: 1.0,
                    seed: seed::derive(base, &[stream::NOISE, u64::MAX, r as u64]),
                },
                2 * n,
                cfg.prop2_rate,
            )?;
            let f = pair_feature(noise.samples())?;
            // The sign convention keeps v[0] >= 0, so this lies in (-90, 90].
            Ok(f.vector()[1].atan2(f.vector()[0]).to_degrees())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&directions);
    rows.push(Prop2Row {
        case: "noise".into(),
        snr_db: f64::NEG_INFINITY,
        mean_angle_deg: mean,
        std_angle_deg: std,
        repetitions: reps,
    });
    Ok(Prop2Report {
        rows,
        noise_std_angle_deg: std,
    })
}

/// Similarity between the feature of a clean signal segment and that of the
/// same segment with white noise added at `snr_db`.
pub fn run_feature_robustness(
    spec: &SignalSpec,
    rate: f64,
    dim: usize,
    windows: usize,
    snr_db: f64,
    seed: u64,
) -> Result<f64> {
    let clean = generate_signal(
        spec,
        windows + dim - 1,
        rate,
        seed::derive(seed, &[stream::SIGNAL]),
    )?;
    let noisy = mix_at_snr(&clean, seed::derive(seed, &[stream::NOISE]), snr_db)?;
    full_similarity(
        &segment_feature(clean.samples(), dim)?,
        &segment_feature(noisy.samples(), dim)?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub snr_db: f64,
    pub mean_rho: f64,
    pub min_rho: f64,
    pub fraction_above_te: f64,
    pub trials: usize,
}

impl CsvRow for RobustnessRow {
    const HEADER: &'static str = "snr_db,mean_rho,min_rho,fraction_above_te,trials";

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_f64(self.snr_db),
            fmt_f64(self.mean_rho),
            fmt_f64(self.min_rho),
            fmt_f64(self.fraction_above_te),
            self.trials
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
}

/// Clean-versus-noisy feature similarity swept over the SNR grid, `trials`
/// independent segments per point.
pub fn robustness_sweep(cfg: &ExperimentConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    let base = cfg.seed()?;
    let spec = cfg.signal_spec()?;
    let rows = cfg
        .snr_grid_db
        .iter()
        .enumerate()
        .map(|(k, &snr)| {
            let rhos = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    run_feature_robustness(
                        &spec,
                        cfg.rate,
                        cfg.dim,
                        cfg.windows,
                        snr,
                        seed::derive(base, &[stream::H1_TRIAL, k as u64, t as u64]),
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, _) = mean_std(&rhos);
            Ok(RobustnessRow {
                snr_db: snr,
                mean_rho: mean,
                min_rho: rhos.iter().copied().fold(f64::INFINITY, f64::min),
                fraction_above_te: rhos.iter().filter(|&&r| r > cfg.te).count() as f64 / rhos.len() as f64,
                trials: cfg.trials,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessReport { rows })
}
