//! Signal and noise models for the two sensing hypotheses.
//!
//! Under H0 the receiver sees white Gaussian noise only; under H1 it sees a
//! non-white wide-sense-stationary signal plus that noise. Generators here are
//! pure functions of `(spec, n, rate, seed)`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::format::{self, Container, SAMPLES_MAGIC};
use crate::seed::{self, stream};

/// Taps of the windowed-sinc bandpass used by band-shaped generators.
pub const BANDPASS_TAPS: usize = 257;

/// A finite, non-empty sequence of real samples at a known rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "buffer must hold at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz", "must be positive and finite"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_square(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// Multiply every sample by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|v| v * c).collect(), self.sample_rate_hz)
    }

    /// Raw samples of sensing segment `index` (zero-based): `windows + dim - 1`
    /// samples starting at `index * windows`. Neighbouring segments share the
    /// `dim - 1` boundary samples.
    pub fn segment(&self, index: usize, dim: usize, windows: usize) -> Result<&[f64]> {
        let start = index
            .checked_mul(windows)
            .ok_or_else(|| Error::param("segment", "index overflow"))?;
        let len = segment_len(dim, windows)?;
        let end = start + len;
        if end > self.samples.len() {
            return Err(Error::InsufficientSamples {
                needed: end,
                available: self.samples.len(),
            });
        }
        Ok(&self.samples[start..end])
    }

    /// Number of whole segments of the given shape this buffer holds.
    pub fn segment_count(&self, dim: usize, windows: usize) -> usize {
        if dim == 0 || windows == 0 || self.samples.len() < dim {
            return 0;
        }
        (self.samples.len() - (dim - 1)) / windows
    }
}

/// Samples needed for one segment of `windows` sliding vectors of length `dim`.
pub fn segment_len(dim: usize, windows: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::param("n", "vector dimension must be at least 1"));
    }
    if windows == 0 {
        return Err(Error::param("ns", "segment must hold at least one window"));
    }
    Ok(windows + dim - 1)
}

pub fn mean_square(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64
}

/// Primary-user signal model.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// White noise through a bandpass FIR: flat PSD on `[f_low, f_high]` Hz.
    BandlimitedFlat { f_low: f64, f_high: f64 },
    /// `A sin(2 pi f k / rate + phase)`.
    Sine { freq_hz: f64, phase_rad: f64 },
    /// First-order autoregression `x[k] = a x[k-1] + e[k]`.
    Ar1 { coeff: f64 },
    /// Band-shaped noise plus a sinusoidal pilot `pilot_offset_hz` above
    /// `f_low`, carrying `pilot_ratio` times the band power. Mimics a digital
    /// TV channel with its pilot tone.
    PilotPlusBand {
        f_low: f64,
        f_high: f64,
        pilot_offset_hz: f64,
        pilot_ratio: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// Target mean-square amplitude.
    pub power: f64,
}

impl SignalSpec {
    pub fn new(kind: SignalKind, power: f64) -> Self {
        Self { kind, power }
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::param("rate", "sample rate must be positive and finite"));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::param("power", "must be positive and finite"));
        }
        let nyquist = rate / 2.0;
        match self.kind {
            SignalKind::BandlimitedFlat { f_low, f_high } => check_band(f_low, f_high, nyquist),
            SignalKind::Sine { freq_hz, phase_rad } => {
                if !(freq_hz > 0.0 && freq_hz < nyquist) {
                    return Err(Error::param("freq", format!("must lie in (0, {nyquist}) Hz")));
                }
                if !phase_rad.is_finite() {
                    return Err(Error::param("phase", "must be finite"));
                }
                Ok(())
            }
            SignalKind::Ar1 { coeff } => {
                if !(coeff.abs() < 1.0) {
                    return Err(Error::param("ar_coeff", "|a| must be < 1"));
                }
                Ok(())
            }
            SignalKind::PilotPlusBand {
                f_low,
                f_high,
                pilot_offset_hz,
                pilot_ratio,
            } => {
                check_band(f_low, f_high, nyquist)?;
                let pilot = f_low + pilot_offset_hz;
                if !(pilot > 0.0 && pilot < nyquist) {
                    return Err(Error::param(
                        "pilot_offset",
                        format!("pilot at {pilot} Hz must lie in (0, {nyquist}) Hz"),
                    ));
                }
                if !(pilot_ratio.is_finite() && pilot_ratio >= 0.0) {
                    return Err(Error::param("pilot_ratio", "must be finite and >= 0"));
                }
                Ok(())
            }
        }
    }
}

fn check_band(f_low: f64, f_high: f64, nyquist: f64) -> Result<()> {
    if !(f_low > 0.0) {
        return Err(Error::param("f_low", "must be > 0"));
    }
    if !(f_high > f_low) {
        return Err(Error::param("f_high", "must exceed f_low"));
    }
    if !(f_high < nyquist) {
        return Err(Error::param(
            "f_high",
            format!("must be below Nyquist ({nyquist} Hz)"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

/// Hamming-windowed sinc bandpass. Band edges are in cycles/sample.
pub fn design_bandpass(taps: usize, f_low: f64, f_high: f64) -> Vec<f64> {
    let center = (taps as f64 - 1.0) / 2.0;
    let lowpass = |fc: f64, m: f64| {
        if m == 0.0 {
            2.0 * fc
        } else {
            (2.0 * PI * fc * m).sin() / (PI * m)
        }
    };
    (0..taps)
        .map(|i| {
            let m = i as f64 - center;
            let window = if taps == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (taps as f64 - 1.0)).cos()
            };
            window * (lowpass(f_high, m) - lowpass(f_low, m))
        })
        .collect()
}

/// Valid-mode convolution: `out[k] = sum_j h[j] x[k + len(h) - 1 - j]`.
fn convolve_valid(x: &[f64], h: &[f64]) -> Vec<f64> {
    let len = x.len() + 1 - h.len();
    (0..len)
        .map(|k| {
            let window = &x[k..k + h.len()];
            window.iter().zip(h.iter().rev()).map(|(a, b)| a * b).sum()
        })
        .collect()
}

fn white(rng: &mut seed::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Band-shaped Gaussian noise of ensemble mean-square `power`. The filter's
/// startup transient is never emitted.
fn band_noise(rng: &mut seed::Rng, n: usize, f_low: f64, f_high: f64, power: f64) -> Vec<f64> {
    let h = design_bandpass(BANDPASS_TAPS, f_low, f_high);
    let gain: f64 = h.iter().map(|v| v * v).sum();
    let scale = (power / gain).sqrt();
    let raw = white(rng, n + BANDPASS_TAPS - 1);
    let mut out = convolve_valid(&raw, &h);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Draw `n` samples of the signal described by `spec`.
pub fn generate_signal(spec: &SignalSpec, n: usize, rate: f64, seed: u64) -> Result<SampleBuffer> {
    if n == 0 {
        return Err(Error::param("n", "sample count must be at least 1"));
    }
    spec.validate(rate)?;
    let mut rng = seed::rng(seed, &[stream::SIGNAL]);
    let samples = match spec.kind {
        SignalKind::BandlimitedFlat { f_low, f_high } => {
            band_noise(&mut rng, n, f_low / rate, f_high / rate, spec.power)
        }
        SignalKind::Sine { freq_hz, phase_rad } => {
            let amp = (2.0 * spec.power).sqrt();
            let w = 2.0 * PI * freq_hz / rate;
            (0..n).map(|k| amp * (w * k as f64 + phase_rad).sin()).collect()
        }
        SignalKind::Ar1 { coeff } => {
            // Start from the stationary law so no burn-in is needed.
            let scale = (spec.power * (1.0 - coeff * coeff)).sqrt();
            let mut prev = rng.sample::<f64, _>(StandardNormal) / (1.0 - coeff * coeff).sqrt();
            let mut out = Vec::with_capacity(n);
            out.push(prev * scale);
            for _ in 1..n {
                prev = coeff * prev + rng.sample::<f64, _>(StandardNormal);
                out.push(prev * scale);
            }
            out
        }
        SignalKind::PilotPlusBand {
            f_low,
            f_high,
            pilot_offset_hz,
            pilot_ratio,
        } => {
            let band_power = spec.power / (1.0 + pilot_ratio);
            let pilot_power = spec.power - band_power;
            let mut out = band_noise(&mut rng, n, f_low / rate, f_high / rate, band_power);
            let mut phase_rng = seed::rng(seed, &[stream::PILOT_PHASE]);
            let phase = phase_rng.random_range(0.0..2.0 * PI);
            let amp = (2.0 * pilot_power).sqrt();
            let w = 2.0 * PI * (f_low + pilot_offset_hz) / rate;
            for (k, v) in out.iter_mut().enumerate() {
                *v += amp * (w * k as f64 + phase).sin();
            }
            out
        }
    };
    SampleBuffer::new(samples, rate)
}

/// I.i.d. zero-mean Gaussian samples of the given variance.
pub fn generate_noise(spec: &NoiseSpec, n: usize, rate: f64) -> Result<SampleBuffer> {
    if n == 0 {
        return Err(Error::param("n", "sample count must be at least 1"));
    }
    if !(spec.variance.is_finite() && spec.variance >= 0.0) {
        return Err(Error::param("variance", "must be finite and >= 0"));
    }
    let mut rng = seed::rng(spec.seed, &[stream::NOISE]);
    let sd = spec.variance.sqrt();
    let samples = white(&mut rng, n).into_iter().map(|v| v * sd).collect();
    SampleBuffer::new(samples, rate)
}

/// Noise variance that puts a signal of mean-square `power` at `snr_db`.
pub fn noise_variance_for_snr(power: f64, snr_db: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// `signal + w` with fresh WGN `w` whose variance is set from the signal's
/// measured mean-square. `snr_db = +inf` disables the noise.
pub fn mix_at_snr(signal: &SampleBuffer, noise_seed: u64, snr_db: f64) -> Result<SampleBuffer> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::param("snr_db", "must be a number above -inf"));
    }
    let power = signal.mean_square();
    if power == 0.0 {
        return Err(Error::ZeroPower);
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let variance = noise_variance_for_snr(power, snr_db);
    let noise = generate_noise(
        &NoiseSpec {
            variance,
            seed: noise_seed,
        },
        signal.len(),
        signal.sample_rate_hz(),
    )?;
    let samples = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, w)| s + w)
        .collect();
    SampleBuffer::new(samples, signal.sample_rate_hz())
}

/// Write `buffer` as an SSIG sample file.
pub fn write_samples(buffer: &SampleBuffer, path: &Path) -> Result<()> {
    let container = Container {
        scalar: buffer.sample_rate_hz(),
        values: buffer.samples().to_vec(),
    };
    format::write_file(path, SAMPLES_MAGIC, &container)
}

/// Read an SSIG sample file.
pub fn read_samples(path: &Path) -> Result<SampleBuffer> {
    let Container { scalar, values } = format::read_file(path, SAMPLES_MAGIC)?;
    if values.is_empty() {
        return Err(Error::InvalidData("sample file holds no samples".into()));
    }
    SampleBuffer::new(values, scalar).map_err(|e| Error::InvalidData(e.to_string()))
}
