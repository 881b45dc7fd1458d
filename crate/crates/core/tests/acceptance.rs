//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use eigensense::detectors::{calibrate_threshold, Detector, DetectorKind, NoiseModel, SegmentShape};
use eigensense::experiments::{
    calibrate_all, learn_template, run_pd_vs_snr, run_property2_demo, run_roc, run_stability,
    ExperimentConfig,
};
use eigensense::feature::{effective_snrs, random_unit_vector, similarity_vectors, snr_gain};
use eigensense::linalg::{eig_sym, leading_eigenvector, CovMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use eigensense::seed;
use eigensense::signals::{generate_signal, mix_at_snr};
use eigensense::stats::{binomial_sd, exceedance};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_psd(rng: &mut seed::Rng, n: usize) -> CovMatrix {
    // B B^T with a random column scaling gives a spread of conditioning.
    let b: Vec<f64> = (0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let scales: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..1.0))).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k] * scales[k]).sum();
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    CovMatrix::from_row_major(n, a).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = seed::rng(101, &[]);
    let dims = [2, 4, 8, 16, 64];
    let mut compared_power = 0;
    let mut worst_recon = 0.0f64;
    for k in 0..1000 {
        let n = dims[k % dims.len()];
        let r = random_psd(&mut rng, n);
        let e = eig_sym(&r).map_err(|e| e.to_string())?;
        let scale = r.frobenius_norm();

        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|t| e.vectors[i][t] * e.vectors[j][t]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                check((d - want).abs() <= 1e-10, || {
                    format!("matrix {k} (N={n}): <phi_{i}, phi_{j}> = {d}")
                })?;
            }
        }
        let recon = e.reconstruct();
        let err = recon
            .iter()
            .zip(r.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_recon = worst_recon.max(err / scale);
        check(err <= 1e-10 * scale, || {
            format!("matrix {k} (N={n}): reconstruction error {err:e}")
        })?;
        check(e.values.windows(2).all(|w| w[0] >= w[1]), || {
            format!("matrix {k}: not descending")
        })?;

        // Independent oracle for the spectrum.
        let m = DMatrix::from_row_slice(n, n, r.as_slice());
        let mut oracle: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in e.values.iter().zip(&oracle) {
            check((a - b).abs() <= 1e-9 * scale, || {
                format!("matrix {k}: eigenvalue {a} vs oracle {b}")
            })?;
        }

        if e.values[0] > 1.01 * e.values[1] {
            let (_, phi) =
                leading_eigenvector(&r, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
            let ip: f64 = phi.iter().zip(&e.vectors[0]).map(|(a, b)| a * b).sum();
            check(ip.abs() >= 1.0 - 1e-8, || {
                format!("matrix {k} (N={n}): |<power, jacobi>| = {ip}")
            })?;
            compared_power += 1;
        }
    }
    Ok(format!(
        "1000 matrices, worst relative reconstruction {worst_recon:.1e}, {compared_power} power-iteration comparisons"
    ))
}

fn band_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.seed = Some(seed);
    cfg
}

fn criterion_2() -> Outcome {
    let cfg = band_config(202);
    let learned = learn_template(&cfg).map_err(|e| e.to_string())?;
    let spec = cfg.signal_spec().unwrap();
    let ftm = Detector::Ftm {
        feature: learned.feature.clone(),
    };
    let shape = SegmentShape::new(cfg.dim, cfg.windows).unwrap();
    let mut rng = seed::rng(202, &[1]);
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let snr = rng.random_range(-25.0..5.0);
        let clean = generate_signal(&spec, shape.samples(), cfg.rate, seed::derive(202, &[2, t])).unwrap();
        let x = mix_at_snr(&clean, seed::derive(202, &[3, t]), snr).unwrap();
        for det in [&ftm, &Detector::Mme] {
            let base = det.statistic(x.samples(), cfg.dim).map_err(|e| e.to_string())?;
            for c in [1e-3, 1.0, 1e3] {
                let scaled: Vec<f64> = x.samples().iter().map(|v| c * v).collect();
                let s = det.statistic(&scaled, cfg.dim).map_err(|e| e.to_string())?;
                let rel = (s - base).abs() / base.abs();
                worst = worst.max(rel);
                check(rel <= 1e-9, || {
                    format!("{} segment {t}, c={c}: relative change {rel:e}", det.kind())
                })?;
            }
        }
    }
    let t1 = calibrate_threshold(&ftm, &NoiseModel { variance: 1.0 }, shape, 0.1, 1000, 77)
        .map_err(|e| e.to_string())?;
    let t100 = calibrate_threshold(&ftm, &NoiseModel { variance: 100.0 }, shape, 0.1, 1000, 77)
        .map_err(|e| e.to_string())?;
    let dt = (t1.value - t100.value).abs();
    check(dt < 1e-6, || {
        format!("T_f {} at unit noise vs {} at variance 100", t1.value, t100.value)
    })?;
    Ok(format!(
        "worst relative statistic change {worst:.1e}; T_f {:.6} vs {:.6} (diff {dt:.1e})",
        t1.value, t100.value
    ))
}

/// Independent similarity oracle: explicit zero-padded arrays, every lag.
fn oracle_similarity(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as i64;
    let mut best = 0.0f64;
    for l in -(n - 1)..n {
        let mut s = 0.0;
        for k in 0..n {
            let j = k + l;
            if (0..n).contains(&j) {
                s += a[k as usize] * b[j as usize];
            }
        }
        best = best.max(s.abs());
    }
    best
}

fn criterion_3() -> Outcome {
    let mut rng = seed::rng(303, &[]);
    let n = 32;
    let f = random_unit_vector(&mut rng, n);
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    let self_sim = similarity_vectors(&f, &f, n - 1).unwrap();
    let neg_sim = similarity_vectors(&f, &neg, n - 1).unwrap();
    check((self_sim - 1.0).abs() <= 1e-12, || {
        format!("rho(f, f) = {self_sim}")
    })?;
    check((neg_sim - 1.0).abs() <= 1e-12, || {
        format!("rho(f, -f) = {neg_sim}")
    })?;

    // A compactly supported vector survives a zero-padded shift intact.
    let mut g = vec![0.0; n];
    let core = random_unit_vector(&mut rng, 16);
    g[8..24].copy_from_slice(&core);
    for shift in [-7i64, -3, 1, 5, 8] {
        let mut h = vec![0.0; n];
        for (k, v) in g.iter().enumerate() {
            let j = k as i64 + shift;
            if (0..n as i64).contains(&j) {
                h[j as usize] = *v;
            }
        }
        let s = similarity_vectors(&g, &h, n - 1).unwrap();
        check((s - 1.0).abs() <= 1e-12, || {
            format!("rho(f, shift {shift}) = {s}")
        })?;
    }

    let mut worst_oracle = 0.0f64;
    for k in 0..1000 {
        let a = random_unit_vector(&mut rng, n);
        let b = random_unit_vector(&mut rng, n);
        let ab = similarity_vectors(&a, &b, n - 1).unwrap();
        let ba = similarity_vectors(&b, &a, n - 1).unwrap();
        check(ab == ba, || {
            format!("pair {k}: rho(a,b) = {ab} but rho(b,a) = {ba}")
        })?;
        check((0.0..=1.0).contains(&ab), || {
            format!("pair {k}: rho = {ab} outside [0, 1]")
        })?;
        let o = oracle_similarity(&a, &b);
        worst_oracle = worst_oracle.max((o - ab).abs());
        check((o - ab).abs() <= 1e-12, || {
            format!("pair {k}: {ab} vs oracle {o}")
        })?;
    }
    Ok(format!(
        "identities exact; 1000 pairs symmetric, bounded, oracle gap {worst_oracle:.1e}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = seed::rng(404, &[]);
    for n in [1usize, 2, 8, 64] {
        let g = snr_gain(&vec![2.5; n]).unwrap();
        check((g - 1.0).abs() <= 1e-12, || {
            format!("equal spectrum N={n}: G = {g}")
        })?;
        let mut rank1 = vec![0.0; n];
        rank1[0] = 3.0;
        let g = snr_gain(&rank1).unwrap();
        check((g - n as f64).abs() <= 1e-12 * n as f64, || {
            format!("rank-1 N={n}: G = {g}")
        })?;
    }
    let mut min_g = f64::INFINITY;
    for k in 0..1000 {
        let n = rng.random_range(1..=64usize);
        let eigs: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
        if eigs.iter().sum::<f64>() == 0.0 {
            continue;
        }
        let g = snr_gain(&eigs).unwrap();
        min_g = min_g.min(g);
        check(g >= 1.0 - 1e-12, || format!("spectrum {k}: G = {g} < 1"))?;
        let sigma2 = 10f64.powf(rng.random_range(-3.0..3.0));
        let (snr_x, snr_xhat) = effective_snrs(&eigs, sigma2).unwrap();
        let ratio = snr_xhat / snr_x;
        check((ratio - g).abs() <= 1e-12 * g, || {
            format!("spectrum {k}: ratio {ratio} vs G {g}")
        })?;
    }
    Ok(format!("anchors exact; 1000 spectra, minimum G {min_g:.4}"))
}

fn criterion_5() -> Outcome {
    let mut cfg = ExperimentConfig::desk();
    cfg.seed = Some(505);
    cfg.prop2_snr_grid_db = vec![0.0];
    cfg.prop2_samples = 1000;
    let r = run_property2_demo(&cfg).map_err(|e| e.to_string())?;
    let row = r.sine_row(0.0).ok_or("no 0 dB row")?;
    check(row.mean_angle_deg < 5.0, || {
        format!("mean angle at 0 dB {:.3} deg", row.mean_angle_deg)
    })?;
    check(r.noise_std_angle_deg > 30.0, || {
        format!("noise angle std {:.2} deg", r.noise_std_angle_deg)
    })?;
    Ok(format!(
        "0 dB mean error {:.3} deg (std {:.3}) over {} phases; noise direction std {:.1} deg",
        row.mean_angle_deg, row.std_angle_deg, row.repetitions, r.noise_std_angle_deg
    ))
}

fn criterion_6() -> Outcome {
    let mut cfg = band_config(606);
    cfg.segments = 50;
    cfg.stability_snr_db = 0.0;
    let r = run_stability(&cfg).map_err(|e| e.to_string())?;
    check(r.signal_fraction_above_te >= 0.95, || {
        format!(
            "signal pairs above T_e: {:.1}%",
            100.0 * r.signal_fraction_above_te
        )
    })?;
    check(r.noise_fraction_above_te <= 0.10, || {
        format!("noise pairs above T_e: {:.1}%", 100.0 * r.noise_fraction_above_te)
    })?;
    Ok(format!(
        "signal {:.1}% / noise {:.1}% of consecutive pairs above T_e = {}",
        100.0 * r.signal_fraction_above_te,
        100.0 * r.noise_fraction_above_te,
        cfg.te
    ))
}

fn criterion_7() -> Outcome {
    let cfg = band_config(707);
    let pd = run_pd_vs_snr(&cfg).map_err(|e| e.to_string())?;
    let (ftm, mme) = (pd.min_snr_ftm_db, pd.min_snr_mme_db);
    let gap = pd
        .ftm_gain_over_mme_db
        .ok_or_else(|| format!("Pd 0.9 not reached: FTM {ftm:?}, MME {mme:?}"))?;
    check(gap >= 1.0, || {
        format!("FTM {ftm:?} dB vs MME {mme:?} dB: gap {gap:.2} dB")
    })?;
    let roc = run_roc(&cfg).map_err(|e| e.to_string())?;
    let (a_f, a_m) = (roc.auc(DetectorKind::Ftm), roc.auc(DetectorKind::Mme));
    check(a_f > a_m, || {
        format!("AUC at {} dB: FTM {a_f:.4} vs MME {a_m:.4}", roc.snr_db)
    })?;
    Ok(format!(
        "Pd>=0.9 at FTM {:.2} dB vs MME {:.2} dB (gap {gap:.2} dB); AUC at {} dB FTM {a_f:.4} vs MME {a_m:.4}",
        ftm.unwrap(),
        mme.unwrap(),
        roc.snr_db
    ))
}

fn criterion_8() -> Outcome {
    let mut cfg = band_config(808);
    cfg.calibration_trials = 10_000;
    let learned = learn_template(&cfg).map_err(|e| e.to_string())?;
    let calib = calibrate_all(&cfg, &learned).map_err(|e| e.to_string())?;
    let mut fresh_cfg = cfg.clone();
    fresh_cfg.seed = Some(809);
    let fresh = calibrate_all(&fresh_cfg, &learned).map_err(|e| e.to_string())?;
    let sd = binomial_sd(cfg.target_pf, fresh.len());
    let mut parts = Vec::new();
    for kind in DetectorKind::ALL {
        let c: Vec<f64> = calib.iter().map(|s| s.get(kind)).collect();
        let f: Vec<f64> = fresh.iter().map(|s| s.get(kind)).collect();
        let t = eigensense::detectors::threshold_from_statistics(&c, cfg.target_pf, kind)
            .map_err(|e| e.to_string())?
            .value;
        let pf = exceedance(&f, t);
        let z = (pf - cfg.target_pf) / sd;
        check(z.abs() <= 3.0, || {
            format!("{kind}: empirical Pf {pf:.4} is {z:.2} sigma from target")
        })?;
        parts.push(format!("{kind} {pf:.4} ({z:+.2} sd)"));
    }
    Ok(format!("fresh 10^4-trial Pf: {}", parts.join(", ")))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_eigensense"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scale = [
        "--set",
        "ns=2000",
        "--set",
        "n=16",
        "--set",
        "calibration_trials=300",
    ];
    let commands: [(&str, &[&str]); 5] = [
        ("pdsnr", &["--trials", "150", "--set", "snr_grid=-24:-8:4"]),
        ("roc", &["--trials", "150"]),
        ("stability", &["--set", "segments=20"]),
        ("prop2", &["--set", "prop2_repetitions=100"]),
        ("robustness", &["--trials", "100", "--set", "snr_grid=-20,-10,0"]),
    ];
    let mut compared = 0;
    for (cmd, extra) in commands {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "1", "3"] {
            let path = dir.path().join(format!("{cmd}_{threads}_{}.csv", outputs.len()));
            let p = path.to_str().unwrap();
            let mut args = vec!["--threads", threads, cmd, "--seed", "909", "--out", p];
            args.extend_from_slice(&scale);
            args.extend_from_slice(extra);
            run_cli(&args)?;
            outputs.push(read(&path)?);
        }
        for (k, o) in outputs.iter().enumerate().skip(1) {
            check(o == &outputs[0], || format!("{cmd}: run {k} differs from run 0"))?;
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} reruns across 1, 3 and 4 threads byte-identical for 5 experiment commands"
    ))
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("eigen correctness", criterion_1),
        ("scale invariance", criterion_2),
        ("similarity measure", criterion_3),
        ("SNR-gain identities", criterion_4),
        ("Property-2 demo", criterion_5),
        ("feature stability", criterion_6),
        ("detection advantage", criterion_7),
        ("calibration accuracy", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS ({name}, {secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL ({name}, {secs:.1}s): {why}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
