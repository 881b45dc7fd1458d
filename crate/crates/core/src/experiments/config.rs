use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::detectors::{min_calibration_trials, SegmentShape};
use crate::error::{Error, Result};
use crate::feature::PRESET_TE;
use crate::signals::{SignalKind, SignalSpec};

/// Parameters of every signal kind; only those of the selected kind matter.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalParams {
    pub kind: String,
    pub f_low: f64,
    pub f_high: f64,
    pub freq: f64,
    pub phase: f64,
    pub ar_coeff: f64,
    pub pilot_offset: f64,
    pub pilot_ratio: f64,
    pub power: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self {
            kind: "bandlimited_flat".into(),
            f_low: 0.9e6,
            f_high: 1.1e6,
            freq: 0.25e6,
            phase: 0.0,
            ar_coeff: 0.9,
            pilot_offset: 0.1e6,
            pilot_ratio: 0.25,
            power: 1.0,
        }
    }
}

impl SignalParams {
    pub fn spec(&self) -> Result<SignalSpec> {
        let kind = match self.kind.as_str() {
            "ar1" => SignalKind::Ar1 { coeff: self.ar_coeff },
            "bandlimited_flat" => SignalKind::BandlimitedFlat {
                f_low: self.f_low,
                f_high: self.f_high,
            },
            "sine" => SignalKind::Sine {
                freq_hz: self.freq,
                phase_rad: self.phase,
            },
            "pilot_plus_band" => SignalKind::PilotPlusBand {
                f_low: self.f_low,
                f_high: self.f_high,
                pilot_offset_hz: self.pilot_offset,
                pilot_ratio: self.pilot_ratio,
            },
            other => {
                return Err(Error::param(
                    "signal",
                    format!("unknown kind `{other}` (ar1, bandlimited_flat, sine, pilot_plus_band)"),
                ))
            }
        };
        Ok(SignalSpec::new(kind, self.power))
    }
}

/// Everything an experiment run depends on. Identical configs produce
/// identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub signal: SignalParams,
    pub rate: f64,
    /// Vector length N.
    pub dim: usize,
    /// Sliding windows per segment, N_s.
    pub windows: usize,
    pub snr_grid_db: Vec<f64>,
    /// H1 trials per SNR point.
    pub trials: usize,
    /// Noise-only trials behind each threshold.
    pub calibration_trials: usize,
    pub target_pf: f64,
    pub te: f64,
    pub seed: Option<u64>,
    /// SNR of the segments the H1 template is learned from.
    pub learn_snr_db: f64,
    pub roc_snr_db: f64,
    pub segments: usize,
    pub stability_snr_db: f64,
    /// Energy detector's noise-variance misestimate, in dB (0 = exact).
    pub ed_noise_error_db: f64,
    pub prop2_snr_grid_db: Vec<f64>,
    /// Number of 2x1 vectors in the Property-2 demo.
    pub prop2_samples: usize,
    pub prop2_repetitions: usize,
    pub prop2_freq: f64,
    pub prop2_rate: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step).round() as usize;
    (0..=count).map(|k| start + k as f64 * step).collect()
}

impl ExperimentConfig {
    /// Single-core scale: N_s = 10^4, N = 32, 500 trials, -30..0 dB in 2 dB steps.
    pub fn desk() -> Self {
        Self {
            signal: SignalParams::default(),
            rate: 4e6,
            dim: 32,
            windows: 10_000,
            snr_grid_db: grid(-30.0, 0.0, 2.0),
            trials: 500,
            calibration_trials: 1000,
            target_pf: 0.1,
            te: PRESET_TE,
            seed: None,
            learn_snr_db: 10.0,
            roc_snr_db: -18.0,
            segments: 50,
            stability_snr_db: 0.0,
            ed_noise_error_db: 0.0,
            prop2_snr_grid_db: vec![-5.0, 0.0, 10.0, f64::INFINITY],
            prop2_samples: 1000,
            prop2_repetitions: 200,
            prop2_freq: 200.0,
            prop2_rate: 8000.0,
        }
    }

    /// Field-trial scale: N_s = 10^5, N = 64, 1000 trials.
    pub fn full() -> Self {
        Self {
            dim: 64,
            windows: 100_000,
            trials: 1000,
            calibration_trials: 1000,
            roc_snr_db: -22.0,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::param(
                "preset",
                format!("unknown preset `{other}` (desk, full)"),
            )),
        }
    }

    pub fn shape(&self) -> Result<SegmentShape> {
        SegmentShape::new(self.dim, self.windows)
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        self.signal.spec()
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::param("seed", "experiments require an explicit seed"))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.signal_spec()?.validate(self.rate)?;
        if self.dim < 2 {
            return Err(Error::param("n", "vector length must be at least 2"));
        }
        if self.windows < 1 {
            return Err(Error::param("ns", "must be at least 1"));
        }
        if self.trials < 100 {
            return Err(Error::param("trials", "must be at least 100"));
        }
        if !(self.target_pf > 0.0 && self.target_pf < 1.0) {
            return Err(Error::param("target_pf", "must lie in (0, 1)"));
        }
        let needed = min_calibration_trials(self.target_pf);
        if self.calibration_trials < needed {
            return Err(Error::param(
                "calibration_trials",
                format!("need at least {needed} for target_pf {}", self.target_pf),
            ));
        }
        if !(self.te > 0.0 && self.te < 1.0) {
            return Err(Error::param("te", "must lie in (0, 1)"));
        }
        check_grid("snr_grid", &self.snr_grid_db)?;
        check_grid("prop2_snr_grid", &self.prop2_snr_grid_db)?;
        for (field, v) in [
            ("learn_snr_db", self.learn_snr_db),
            ("roc_snr_db", self.roc_snr_db),
            ("stability_snr_db", self.stability_snr_db),
        ] {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::param(field, "must be a number above -inf"));
            }
        }
        if !self.ed_noise_error_db.is_finite() {
            return Err(Error::param("ed_noise_error_db", "must be finite"));
        }
        if self.segments < 2 {
            return Err(Error::param("segments", "need at least 2 segments"));
        }
        if self.prop2_samples < 2 || self.prop2_repetitions < 2 {
            return Err(Error::param(
                "prop2_samples",
                "need at least 2 samples and repetitions",
            ));
        }
        if !(self.prop2_freq > 0.0 && self.prop2_freq < self.prop2_rate / 2.0) {
            return Err(Error::param("prop2_freq", "must lie in (0, prop2_rate / 2)"));
        }
        Ok(())
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.signal;
        match key {
            "signal" => s.kind = value.to_string(),
            "f_low" => s.f_low = parse(key, value)?,
            "f_high" => s.f_high = parse(key, value)?,
            "freq" => s.freq = parse(key, value)?,
            "phase" => s.phase = parse(key, value)?,
            "ar_coeff" => s.ar_coeff = parse(key, value)?,
            "pilot_offset" => s.pilot_offset = parse(key, value)?,
            "pilot_ratio" => s.pilot_ratio = parse(key, value)?,
            "power" => s.power = parse(key, value)?,
            "rate" => self.rate = parse(key, value)?,
            "n" => self.dim = parse(key, value)?,
            "ns" => self.windows = parse(key, value)?,
            "snr_grid" => self.snr_grid_db = parse_grid(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "calibration_trials" => self.calibration_trials = parse(key, value)?,
            "target_pf" => self.target_pf = parse(key, value)?,
            "te" => self.te = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "learn_snr_db" => self.learn_snr_db = parse(key, value)?,
            "roc_snr_db" => self.roc_snr_db = parse(key, value)?,
            "segments" => self.segments = parse(key, value)?,
            "stability_snr_db" => self.stability_snr_db = parse(key, value)?,
            "ed_noise_error_db" => self.ed_noise_error_db = parse(key, value)?,
            "prop2_snr_grid" => self.prop2_snr_grid_db = parse_grid(key, value)?,
            "prop2_samples" => self.prop2_samples = parse(key, value)?,
            "prop2_repetitions" => self.prop2_repetitions = parse(key, value)?,
            "prop2_freq" => self.prop2_freq = parse(key, value)?,
            "prop2_rate" => self.prop2_rate = parse(key, value)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Effective configuration as `key -> value` text, in the same
    /// vocabulary `set` accepts.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let s = &self.signal;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("signal", s.kind.clone());
        put("f_low", fmt_f64(s.f_low));
        put("f_high", fmt_f64(s.f_high));
        put("freq", fmt_f64(s.freq));
        put("phase", fmt_f64(s.phase));
        put("ar_coeff", fmt_f64(s.ar_coeff));
        put("pilot_offset", fmt_f64(s.pilot_offset));
        put("pilot_ratio", fmt_f64(s.pilot_ratio));
        put("power", fmt_f64(s.power));
        put("rate", fmt_f64(self.rate));
        put("n", self.dim.to_string());
        put("ns", self.windows.to_string());
        put("snr_grid", fmt_grid(&self.snr_grid_db));
        put("trials", self.trials.to_string());
        put("calibration_trials", self.calibration_trials.to_string());
        put("target_pf", fmt_f64(self.target_pf));
        put("te", fmt_f64(self.te));
        if let Some(seed) = self.seed {
            put("seed", seed.to_string());
        }
        put("learn_snr_db", fmt_f64(self.learn_snr_db));
        put("roc_snr_db", fmt_f64(self.roc_snr_db));
        put("segments", self.segments.to_string());
        put("stability_snr_db", fmt_f64(self.stability_snr_db));
        put("ed_noise_error_db", fmt_f64(self.ed_noise_error_db));
        put("prop2_snr_grid", fmt_grid(&self.prop2_snr_grid_db));
        put("prop2_samples", self.prop2_samples.to_string());
        put("prop2_repetitions", self.prop2_repetitions.to_string());
        put("prop2_freq", fmt_f64(self.prop2_freq));
        put("prop2_rate", fmt_f64(self.prop2_rate));
        m
    }
}

fn check_grid(field: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::param(field, "grid must not be empty"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::param(field, "grid contains NaN"));
    }
    Ok(())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse::<T>().map_err(|e| Error::InvalidParameter {
        field: leak_key(key),
        reason: format!("cannot parse `{value}`: {e}"),
    })
}

// Keys come from a fixed vocabulary, so map back to a static name.
fn leak_key(key: &str) -> &'static str {
    const KEYS: &[&str] = &[
        "signal",
        "f_low",
        "f_high",
        "freq",
        "phase",
        "ar_coeff",
        "pilot_offset",
        "pilot_ratio",
        "power",
        "rate",
        "n",
        "ns",
        "snr_grid",
        "trials",
        "calibration_trials",
        "target_pf",
        "te",
        "seed",
        "learn_snr_db",
        "roc_snr_db",
        "segments",
        "stability_snr_db",
        "ed_noise_error_db",
        "prop2_snr_grid",
        "prop2_samples",
        "prop2_repetitions",
        "prop2_freq",
        "prop2_rate",
    ];
    KEYS.iter().find(|k| **k == key).copied().unwrap_or("value")
}

fn parse_snr(key: &str, token: &str) -> Result<f64> {
    match token.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => parse(key, t),
    }
}

/// Either `start:stop:step` or a comma-separated list (`inf` allowed).
/// Grids are sorted ascending.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>> {
    let mut out = if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::param("snr_grid", "range form is start:stop:step"));
        }
        let (a, b, step): (f64, f64, f64) = (
            parse(key, parts[0])?,
            parse(key, parts[1])?,
            parse(key, parts[2])?,
        );
        if !(step > 0.0) || b < a {
            return Err(Error::param("snr_grid", "need step > 0 and stop >= start"));
        }
        grid(a, b, step)
    } else {
        value
            .split(',')
            .map(|t| parse_snr(key, t))
            .collect::<Result<Vec<f64>>>()?
    };
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_grid(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults() {
        let c = ExperimentConfig::desk();
        assert_eq!((c.dim, c.windows, c.trials), (32, 10_000, 500));
        assert_eq!(c.snr_grid_db.len(), 16);
        assert_eq!(c.snr_grid_db[0], -30.0);
        assert_eq!(*c.snr_grid_db.last().unwrap(), 0.0);
        assert!(c.validate().is_err(), "seed is mandatory");
        let mut c = c;
        c.seed = Some(1);
        c.validate().unwrap();
    }

    #[test]
    fn pairs_round_trip() {
        let mut c = ExperimentConfig::full();
        c.set("seed", "42").unwrap();
        c.set("snr_grid", "-20:-10:5").unwrap();
        c.set("signal", "pilot_plus_band").unwrap();
        let mut back = ExperimentConfig::desk();
        for (k, v) in c.to_pairs() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, c);
        assert_eq!(c.snr_grid_db, vec![-20.0, -15.0, -10.0]);
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let mut c = ExperimentConfig::desk();
        match c.set("bogus", "1") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "bogus"),
            other => panic!("{other:?}"),
        }
        match c.set("trials", "many") {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "trials"),
            other => panic!("{other:?}"),
        }
        c.set("prop2_snr_grid", "0,inf,-5").unwrap();
        assert_eq!(c.prop2_snr_grid_db, vec![-5.0, 0.0, f64::INFINITY]);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = ExperimentConfig::desk();
        c.seed = Some(0);
        c.trials = 50;
        assert!(matches!(
            c.validate(),
            Err(Error::InvalidParameter { field: "trials", .. })
        ));
        let mut c = ExperimentConfig::desk();
        c.seed = Some(0);
        c.signal.kind = "bandlimited_flat".into();
        c.signal.f_high = 3e6;
        assert!(matches!(
            c.validate(),
            Err(Error::InvalidParameter { field: "f_high", .. })
        ));
    }
}
