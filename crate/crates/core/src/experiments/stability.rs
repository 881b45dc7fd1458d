use rayon::prelude::*;
use serde::Serialize;

use super::config::fmt_f64;
use super::output::CsvRow;
use super::ExperimentConfig;
use crate::detectors::Hypothesis;
use crate::error::Result;
use crate::feature::{full_similarity, segment_feature, Feature};
use crate::seed::{self, stream};
use crate::signals::{generate_noise, generate_signal, mix_at_snr, segment_len, NoiseSpec, SampleBuffer};

/// Similarity of consecutive segment features, `rho` at `segment_index` being
/// between segments `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub segment_index: usize,
    pub rho: f64,
    pub hypothesis: Hypothesis,
}

impl CsvRow for StabilityRow {
    const HEADER: &'static str = "segment_index,rho,hypothesis";

    fn csv_line(&self) -> String {
        format!("{},{},{}", self.segment_index, fmt_f64(self.rho), self.hypothesis)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub signal_fraction_above_te: f64,
    pub noise_fraction_above_te: f64,
    pub signal_first_last: f64,
    pub noise_first_last: f64,
    pub te: f64,
}

fn segment_features(buffer: &SampleBuffer, cfg: &ExperimentConfig) -> Result<Vec<Feature>> {
    (0..cfg.segments)
        .into_par_iter()
        .map(|i| segment_feature(buffer.segment(i, cfg.dim, cfg.windows)?, cfg.dim))
        .collect()
}

fn series(features: &[Feature], hypothesis: Hypothesis) -> Result<Vec<StabilityRow>> {
    features
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            Ok(StabilityRow {
                segment_index: i,
                rho: full_similarity(&w[0], &w[1])?,
                hypothesis,
            })
        })
        .collect()
}

fn fraction_above(rows: &[StabilityRow], te: f64) -> f64 {
    rows.iter().filter(|r| r.rho > te).count() as f64 / rows.len() as f64
}

/// Track the feature of a continuous signal stream and of a noise-only stream
/// over `segments` consecutive segments.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let base = cfg.seed()?;
    let total = segment_len(cfg.dim, cfg.windows)? + (cfg.segments - 1) * cfg.windows;
    let clean = generate_signal(
        &cfg.signal_spec()?,
        total,
        cfg.rate,
        seed::derive(base, &[stream::SIGNAL]),
    )?;
    let signal = mix_at_snr(
        &clean,
        seed::derive(base, &[stream::NOISE, 0]),
        cfg.stability_snr_db,
    )?;
    let noise = generate_noise(
        &NoiseSpec {
            variance: 1.0,
            seed: seed::derive(base, &[stream::NOISE, 1]),
        },
        total,
        cfg.rate,
    )?;

    let fs = segment_features(&signal, cfg)?;
    let fw = segment_features(&noise, cfg)?;
    let mut rows = series(&fs, Hypothesis::H1)?;
    let signal_fraction = fraction_above(&rows, cfg.te);
    let noise_rows = series(&fw, Hypothesis::H0)?;
    let noise_fraction = fraction_above(&noise_rows, cfg.te);
    rows.extend(noise_rows);
    Ok(StabilityReport {
        rows,
        signal_fraction_above_te: signal_fraction,
        noise_fraction_above_te: noise_fraction,
        signal_first_last: full_similarity(&fs[0], &fs[fs.len() - 1])?,
        noise_first_last: full_similarity(&fw[0], &fw[fw.len() - 1])?,
        te: cfg.te,
    })
}
