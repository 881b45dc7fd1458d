//! Command-line front end.
//!
//! Exit status: 0 success, 2 invalid input, 3 feature not learned, 4 file or
//! I/O error, 1 anything else.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detectors::{
    calibrate_threshold, min_calibration_trials, Decision, Detector, NoiseModel, SegmentShape,
};
use crate::error::{Error, Result};
use crate::experiments::{
    robustness_sweep, run_pd_vs_snr, run_property2_demo, run_roc, run_stability, write_csv, CsvRow,
    ExperimentConfig, Manifest, SignalParams,
};
use crate::feature::{fla, Feature};
use crate::seed::{self, stream};
use crate::signals::{generate_noise, generate_signal, mix_at_snr, read_samples, write_samples, NoiseSpec};

#[derive(Debug, Parser)]
#[command(
    name = "eigensense",
    version,
    about = "Spectrum sensing with blindly learned eigenvector features"
)]
pub struct Cli {
    /// Worker threads for Monte-Carlo trials. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sample file.
    Gen(GenArgs),
    /// Learn a feature from the first two segments of a recording.
    Learn(LearnArgs),
    /// Match every segment of a recording against a learned feature.
    Detect(DetectArgs),
    /// Calibrate a detector threshold on simulated noise.
    Calibrate(CalibrateArgs),
    /// ROC of FTM, MME and ED at one SNR.
    Roc(ExperimentArgs),
    /// Detection probability against SNR.
    Pdsnr(ExperimentArgs),
    /// Consecutive-segment feature similarity over time.
    Stability(ExperimentArgs),
    /// Leading-eigenvector direction of a noisy 2-D sine.
    Prop2(ExperimentArgs),
    /// Clean-versus-noisy feature similarity across SNR.
    Robustness(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// ar1, bandlimited_flat, sine, pilot_plus_band or noise.
    #[arg(long)]
    pub kind: String,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4e6)]
    pub rate: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Add white noise at this SNR.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Variance of the `noise` kind.
    #[arg(long, default_value_t = 1.0)]
    pub noise_variance: f64,
    #[arg(long)]
    pub f_low: Option<f64>,
    #[arg(long)]
    pub f_high: Option<f64>,
    #[arg(long)]
    pub freq: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub ar_coeff: Option<f64>,
    #[arg(long)]
    pub pilot_offset: Option<f64>,
    #[arg(long)]
    pub pilot_ratio: Option<f64>,
    #[arg(long)]
    pub power: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Vector length.
    #[arg(long)]
    pub n: usize,
    /// Sliding windows per segment.
    #[arg(long)]
    pub ns: usize,
    #[arg(long, default_value_t = crate::feature::PRESET_TE)]
    pub te: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub feature: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub ns: usize,
    /// Fixed FTM threshold.
    #[arg(long, conflicts_with = "calibrate", required_unless_present = "calibrate")]
    pub threshold: Option<f64>,
    /// Derive the threshold for this false-alarm target first.
    #[arg(long)]
    pub calibrate: Option<f64>,
    #[arg(long, requires = "calibrate")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub calibration_trials: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DetectorArg {
    Ftm,
    Mme,
    Ed,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub detector: DetectorArg,
    /// Learned feature, required for FTM.
    #[arg(long)]
    pub feature: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub ns: usize,
    #[arg(long)]
    pub pf: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_variance: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// desk or full.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Result CSV; the manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse flat `key = value` text. `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::param("config", format!("line {}: expected `key = value`", lineno + 1)))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn split_assignment(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::param("set", format!("expected KEY=VALUE, got `{s}`")))
}

/// Effective configuration: preset, then file, then `--set`, then the
/// dedicated flags. Later sources win.
pub fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let file_pairs = match &args.config {
        Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let set_pairs = args
        .set
        .iter()
        .map(|s| split_assignment(s))
        .collect::<Result<Vec<_>>>()?;
    let preset = args
        .preset
        .clone()
        .or_else(|| {
            set_pairs
                .iter()
                .rev()
                .find(|(k, _)| k == "preset")
                .map(|(_, v)| v.clone())
        })
        .or_else(|| {
            file_pairs
                .iter()
                .rev()
                .find(|(k, _)| k == "preset")
                .map(|(_, v)| v.clone())
        })
        .unwrap_or_else(|| "desk".into());
    let mut cfg = ExperimentConfig::preset(&preset)?;
    for (k, v) in file_pairs.iter().chain(&set_pairs) {
        if k != "preset" {
            cfg.set(k, v)?;
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Manifest path for a result file: `out.csv` -> `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn emit<R: CsvRow, S: Serialize>(
    command: &str,
    cfg: &ExperimentConfig,
    out: &Path,
    rows: &[R],
    summary: &S,
) -> Result<()> {
    write_csv(out, rows)?;
    let manifest = Manifest::new(command, cfg, summary)?;
    manifest.write(&manifest_path(out))?;
    println!("{}", serde_json::to_string(&manifest.summary).unwrap_or_default());
    eprintln!(
        "wrote {} ({} rows) and {}",
        out.display(),
        rows.len(),
        manifest_path(out).display()
    );
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let buffer = if a.kind == "noise" {
        generate_noise(
            &NoiseSpec {
                variance: a.noise_variance,
                seed: seed::derive(a.seed, &[stream::NOISE]),
            },
            a.n,
            a.rate,
        )?
    } else {
        let d = SignalParams::default();
        let params = SignalParams {
            kind: a.kind.clone(),
            f_low: a.f_low.unwrap_or(d.f_low),
            f_high: a.f_high.unwrap_or(d.f_high),
            freq: a.freq.unwrap_or(d.freq),
            phase: a.phase.unwrap_or(d.phase),
            ar_coeff: a.ar_coeff.unwrap_or(d.ar_coeff),
            pilot_offset: a.pilot_offset.unwrap_or(d.pilot_offset),
            pilot_ratio: a.pilot_ratio.unwrap_or(d.pilot_ratio),
            power: a.power.unwrap_or(d.power),
        };
        let spec = params.spec()?;
        spec.validate(a.rate)?;
        let clean = generate_signal(&spec, a.n, a.rate, seed::derive(a.seed, &[stream::SIGNAL]))?;
        match a.snr_db {
            Some(snr) => mix_at_snr(&clean, seed::derive(a.seed, &[stream::NOISE]), snr)?,
            None => clean,
        }
    };
    write_samples(&buffer, &a.out)?;
    eprintln!("wrote {} samples to {}", buffer.len(), a.out.display());
    Ok(())
}

fn cmd_learn(a: &LearnArgs) -> Result<()> {
    let buffer = read_samples(&a.input)?;
    let seg_a = buffer.segment(0, a.n, a.ns)?;
    let seg_b = buffer.segment(1, a.n, a.ns)?;
    let outcome = fla(seg_a, seg_b, a.n, a.te)?;
    println!("rho {:.3}", outcome.similarity);
    let (similarity, threshold) = (outcome.similarity, outcome.threshold);
    match outcome.learned() {
        Some(learned) => {
            learned.feature.with_source_segment(1).save(&a.out)?;
            println!("learned");
            Ok(())
        }
        None => {
            println!("not learned");
            Err(Error::NotLearned {
                similarity,
                threshold,
            })
        }
    }
}

fn load_feature_for(path: &Path, n: usize) -> Result<Feature> {
    let feature = Feature::load(path)?;
    if feature.dim() != n {
        return Err(Error::param(
            "n",
            format!("feature has N={} but --n is {n}", feature.dim()),
        ));
    }
    Ok(feature)
}

fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let feature = load_feature_for(&a.feature, a.n)?;
    let buffer = read_samples(&a.input)?;
    let shape = SegmentShape::new(a.n, a.ns)?;
    let detector = Detector::Ftm { feature };
    let threshold = match (a.threshold, a.calibrate) {
        (Some(t), _) => t,
        (None, Some(pf)) => {
            let seed = a
                .seed
                .ok_or_else(|| Error::param("seed", "--calibrate needs --seed"))?;
            let t = calibrate_threshold(
                &detector,
                &NoiseModel { variance: 1.0 },
                shape,
                pf,
                a.calibration_trials,
                seed,
            )?;
            eprintln!(
                "calibrated threshold {} (pf {pf}, {} trials)",
                t.value, t.trials_used
            );
            t.value
        }
        (None, None) => return Err(Error::param("threshold", "give --threshold or --calibrate")),
    };
    let count = buffer.segment_count(a.n, a.ns);
    if count == 0 {
        return Err(Error::InsufficientSamples {
            needed: shape.samples(),
            available: buffer.len(),
        });
    }
    let mut out = io::stdout().lock();
    for i in 0..count {
        let stat = detector.statistic(buffer.segment(i, a.n, a.ns)?, a.n)?;
        let d = Decision::new(stat, threshold);
        match writeln!(out, "{i} {:.6} {}", d.statistic, d.hypothesis) {
            Ok(()) => {}
            // The reader went away (e.g. piped into `head`): stop quietly.
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let detector = match a.detector {
        DetectorArg::Ftm => {
            let path = a
                .feature
                .as_ref()
                .ok_or_else(|| Error::param("feature", "FTM calibration needs --feature"))?;
            Detector::Ftm {
                feature: load_feature_for(path, a.n)?,
            }
        }
        DetectorArg::Mme => Detector::Mme,
        DetectorArg::Ed => Detector::Energy {
            assumed_noise_variance: a.noise_variance,
        },
    };
    if a.trials < min_calibration_trials(a.pf.clamp(1e-12, 1.0)) {
        return Err(Error::InsufficientTrials {
            needed: min_calibration_trials(a.pf.clamp(1e-12, 1.0)),
            got: a.trials,
        });
    }
    let t = calibrate_threshold(
        &detector,
        &NoiseModel {
            variance: a.noise_variance,
        },
        SegmentShape::new(a.n, a.ns)?,
        a.pf,
        a.trials,
        a.seed,
    )?;
    println!(
        "detector={} threshold={} target_pf={} trials={}",
        t.detector_kind, t.value, t.target_pf, t.trials_used
    );
    Ok(())
}

fn summary_without_rows<T: Serialize>(report: &T) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(report).map_err(|e| Error::InvalidData(e.to_string()))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("rows");
    }
    Ok(v)
}

fn cmd_experiment(name: &str, args: &ExperimentArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    match name {
        "pdsnr" => {
            let r = run_pd_vs_snr(&cfg)?;
            emit(name, &cfg, &args.out, &r.rows, &summary_without_rows(&r)?)
        }
        "roc" => {
            let r = run_roc(&cfg)?;
            emit(name, &cfg, &args.out, &r.rows, &summary_without_rows(&r)?)
        }
        "stability" => {
            let r = run_stability(&cfg)?;
            emit(name, &cfg, &args.out, &r.rows, &summary_without_rows(&r)?)
        }
        "prop2" => {
            let r = run_property2_demo(&cfg)?;
            emit(name, &cfg, &args.out, &r.rows, &summary_without_rows(&r)?)
        }
        "robustness" => {
            let r = robustness_sweep(&cfg)?;
            emit(
                name,
                &cfg,
                &args.out,
                &r.rows,
                &serde_json::json!({ "points": r.rows.len() }),
            )
        }
        other => Err(Error::param("command", format!("unknown experiment `{other}`"))),
    }
}

/// Run one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let body = || match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Roc(a) => cmd_experiment("roc", a),
        Command::Pdsnr(a) => cmd_experiment("pdsnr", a),
        Command::Stability(a) => cmd_experiment("stability", a),
        Command::Prop2(a) => cmd_experiment("prop2", a),
        Command::Robustness(a) => cmd_experiment("robustness", a),
    };
    match cli.threads {
        Some(0) => Err(Error::param("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?
            .install(body),
        None => body(),
    }
}

/// Parse the process arguments, run, and return the exit status.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let pairs = parse_config_text("# comment\n\nseed = 5  # trailing\n trials=200\n").unwrap();
        assert_eq!(
            pairs,
            vec![("seed".into(), "5".into()), ("trials".into(), "200".into())]
        );
        assert!(matches!(
            parse_config_text("just words"),
            Err(Error::InvalidParameter { field: "config", .. })
        ));
    }

    #[test]
    fn flags_override_file_and_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "preset = full\nseed = 1\ntrials = 300\nte = 0.8\n").unwrap();
        let args = ExperimentArgs {
            config: Some(path),
            preset: None,
            seed: Some(9),
            trials: None,
            set: vec!["te=0.85".into()],
            out: dir.path().join("x.csv"),
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.dim, 64);
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.trials, 300);
        assert_eq!(cfg.te, 0.85);
    }

    #[test]
    fn manifest_sits_beside_csv() {
        assert_eq!(
            manifest_path(Path::new("a/pd.csv")),
            PathBuf::from("a/pd.manifest.json")
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Error::UnknownKey("x".into()).exit_code(), 2);
        assert_eq!(
            Error::NotLearned {
                similarity: 0.1,
                threshold: 0.9
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::TruncatedHeader.exit_code(), 4);
        assert_eq!(Error::ZeroPower.exit_code(), 1);
    }
}
