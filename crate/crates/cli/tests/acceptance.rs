//! One PASS/FAIL line per acceptance criterion. Set `ACCEPTANCE_STRICT=1`
//! to exit non-zero when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ssm_cli::commands::{cmd_filter, cmd_forecast};
use ssm_cli::{ForecastArgs, PipelineConfig};
use ssm_core::filters::{detect_peak, CohortMember};
use ssm_core::regression::{fit_ols, fit_peak_models, predict};
use ssm_core::sarimax::{
    build_state_space, constrain_stationary, fit, forecast, kalman_loglik, ArmaParams, SarimaxFit,
    SarimaxSpec,
};
use ssm_core::ssm::{calibrate, compute_bias, synthesize, BiasMode, SsmCalibration};

const SEED: u64 = 42;

fn snapshot() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/snapshot_2020-07-21.csv")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_time(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn cohorts() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::default();
    let sizes_and_names: Vec<(usize, Vec<String>)> = ["1", "2", "3"]
        .iter()
        .map(|id| {
            let c = cmd_filter(&snapshot(), id, None, &config, &mut io::sink()).unwrap();
            (c.len(), c.names().iter().map(|s| s.to_string()).collect())
        })
        .collect();
    let elapsed = start.elapsed();
    let targets = [12.0, 20.0, 41.0];
    let sizes_ok = sizes_and_names
        .iter()
        .zip(targets)
        .all(|((n, _), t)| (*n as f64 - t).abs() <= 0.25 * t);
    let nested = sizes_and_names
        .windows(2)
        .all(|w| w[0].1.iter().all(|n| w[1].1.contains(n)));
    let sizes: Vec<usize> = sizes_and_names.iter().map(|(n, _)| *n).collect();
    outcome(
        sizes_ok && nested && within_time(elapsed, 5.0),
        format!("sizes {sizes:?} vs 12/20/41 ±25%, nested {nested}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn r2_ordering() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::default();
    let r2: Vec<f64> = ["1", "2", "3"]
        .iter()
        .map(|id| {
            let c = cmd_filter(&snapshot(), id, None, &config, &mut io::sink()).unwrap();
            fit_peak_models(&c).unwrap().model_peak_value.r_squared
        })
        .collect();
    let elapsed = start.elapsed();
    let ordered = r2.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        ordered && r2[0] >= 0.9 && within_time(elapsed, 5.0),
        format!(
            "peak-value R² {:.4}/{:.4}/{:.4}, non-increasing {ordered}, F1 ≥ 0.9 {}, {:.2}s",
            r2[0],
            r2[1],
            r2[2],
            r2[0] >= 0.9,
            elapsed.as_secs_f64()
        ),
    )
}

fn india_envelope() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let args = ForecastArgs {
        snapshot: snapshot(),
        target: "India".into(),
        out: dir.path().join("india.csv"),
        ..Default::default()
    };
    let start = Instant::now();
    let run = cmd_forecast(&args, &PipelineConfig::default(), &mut io::sink()).unwrap();
    let elapsed = start.elapsed();
    let peaks: Vec<(f64, usize)> = run
        .per_filter
        .iter()
        .map(|r| (r.forecast.peak_value, r.forecast.peak_day))
        .collect();
    let monotone = peaks.windows(2).all(|w| w[1].0 >= w[0].0);
    let values_ok = peaks.iter().all(|(v, _)| (0.7e5..=1.8e5).contains(v));
    let days_ok = peaks.iter().all(|(_, d)| (180..=280).contains(d));
    let listed: Vec<String> = peaks.iter().map(|(v, d)| format!("{v:.0}@{d}")).collect();
    outcome(
        monotone && values_ok && days_ok && within_time(elapsed, 60.0),
        format!(
            "peaks {} monotone {monotone}, values in [7e4,1.8e5] {values_ok}, days in [180,280] {days_ok}, {:.2}s",
            listed.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn ols_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_rel, mut worst_orth) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let k = rng.random_range(1..=3);
        let n = rng.random_range(k + 3..=12);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|j| rng.random_range(-5.0..5.0) * 10f64.powi(j as i32)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let model = fit_ols(&x, &y).unwrap();
        let oracle = ols_normal_equations(&x, &y);
        let fitted = std::iter::once(model.intercept).chain(model.coefficients.iter().copied());
        for (a, b) in fitted.zip(&oracle) {
            worst_rel = worst_rel.max((a - b).abs() / b.abs().max(1e-300));
        }
        let resid: Vec<f64> = x.iter().zip(&y).map(|(r, yi)| yi - predict(&model, r).unwrap()).collect();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ones = (n as f64).sqrt();
        worst_orth = worst_orth.max(resid.iter().sum::<f64>().abs() / (ones * y_norm));
        for j in 0..k {
            let col_norm = x.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            let dot: f64 = x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
            worst_orth = worst_orth.max(dot.abs() / (col_norm * y_norm));
        }
    }
    outcome(
        worst_rel <= 1e-8 && worst_orth <= 1e-10,
        format!("100 designs, worst relative coefficient error {worst_rel:.2e}, worst normalised Xᵀe {worst_orth:.2e}"),
    )
}

fn kalman_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let p = rng.random_range(1..=3);
        let raw: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let phi = constrain_stationary(&raw);
        let sigma2 = rng.random_range(0.2..3.0);
        let n = rng.random_range(1..=8);
        let y: Vec<f64> = (0..n).map(|_| 2.0 * normal.sample(&mut rng)).collect();
        let ss = build_state_space(&SarimaxSpec::arima(p, 0, 0), &ArmaParams::ar(&phi), sigma2).unwrap();
        let kalman = kalman_loglik(&ss, &y, None).unwrap();
        let oracle = toeplitz_log_density(&ar_autocovariance(&phi, sigma2, n), &y);
        worst = worst.max((kalman - oracle).abs());
    }
    outcome(worst < 1e-8, format!("50 AR draws (p ≤ 3, n ≤ 8), worst |Δ loglik| {worst:.2e}"))
}

fn ar1_recovery() -> Outcome {
    let y = simulate_ar1(0.7, 1000, SEED);
    let start = Instant::now();
    let fitted = fit(&SarimaxSpec::arima(1, 0, 0), &y, None).unwrap();
    let elapsed = start.elapsed();
    let phi = fitted.ar[0];
    let (_, cls) = ar1_conditional_least_squares(&y);
    outcome(
        (phi - 0.7).abs() <= 0.1 && (phi - cls).abs() <= 0.05 && within_time(elapsed, 10.0),
        format!("φ̂ {phi:.4} (true 0.7), CLS {cls:.4}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn forecast_identities() -> Outcome {
    let known = |spec: SarimaxSpec, params: ArmaParams, series: &[f64]| {
        SarimaxFit::from_parts(&spec, &params, 0.0, &[], 1.0, series, None).unwrap()
    };
    let walk = forecast(&known(SarimaxSpec::arima(0, 1, 0), ArmaParams::default(), &[3.0, 5.0, 8.0]), 30, None).unwrap();
    let flat = walk.mean.iter().all(|&v| v == 8.0);

    let ar = forecast(&known(SarimaxSpec::arima(1, 0, 0), ArmaParams::ar(&[0.5]), &[1.0, -2.0, 8.0]), 30, None).unwrap();
    let geometric = ar.mean.iter().enumerate().all(|(h, &v)| v == 8.0 * 0.5f64.powi(h as i32 + 1));

    let seasonal = forecast(
        &known(
            SarimaxSpec::seasonal((1, 1, 0), (0, 1, 0, 7)),
            ArmaParams::ar(&[0.6]),
            &(0..40).map(|t| (t % 7) as f64 + 0.1 * t as f64).collect::<Vec<_>>(),
        ),
        60,
        None,
    )
    .unwrap();
    let non_decreasing = [&walk.variance, &ar.variance, &seasonal.variance]
        .iter()
        .all(|v| v.windows(2).all(|w| w[1] >= w[0]));
    outcome(
        flat && geometric && non_decreasing,
        format!("random walk flat {flat}, AR(1) halves exactly {geometric}, variance non-decreasing {non_decreasing}"),
    )
}

fn calibration(mean_ratio: f64) -> SsmCalibration {
    SsmCalibration {
        filter_id: "a".into(),
        per_country_ratios: vec![],
        mean_ratio,
        n_countries: 1,
    }
}

fn member(name: &str, daily: &[u64]) -> CohortMember {
    let c = country(name, 1_000_000, 1.0, 0, daily);
    CohortMember {
        peak: detect_peak(&c, 7).unwrap(),
        country: c,
    }
}

fn synthesis_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut two = member("two", &hump(60, 20.0, 100.0, 5.0, 5.0));
    two.peak.rising_mean = 2.0;
    two.peak.falling_mean = 1.0;
    let mut four = two.clone();
    four.peak.rising_mean = 8.0;
    four.peak.falling_mean = 2.0;
    let hand = calibrate(std::slice::from_ref(&two), "h").unwrap().mean_ratio == 2.0
        && calibrate(&[two, four], "h").unwrap().mean_ratio == 3.0
        && compute_bias(100.0, &calibration(2.0)).unwrap() == 50.0
        && compute_bias(0.0, &calibration(2.0)).unwrap() == 0.0
        && compute_bias(42.0, &calibration(1.0)).unwrap() == 42.0;

    let mut worst_identity = 0.0_f64;
    let mut worst_scale = 0.0_f64;
    for _ in 0..100 {
        let curves: Vec<Vec<u64>> = (0..rng.random_range(1..6))
            .map(|_| {
                let p = rng.random_range(20.0..80.0);
                hump(
                    rng.random_range(p as usize + 20..200),
                    p,
                    rng.random_range(100.0..5e4),
                    rng.random_range(5.0..20.0),
                    rng.random_range(5.0..40.0),
                )
            })
            .collect();
        let members: Vec<CohortMember> = curves.iter().enumerate().map(|(i, c)| member(&i.to_string(), c)).collect();
        let cal = calibrate(&members, "r").unwrap();

        let k = rng.random_range(2..1000);
        let scaled: Vec<CohortMember> = curves
            .iter()
            .enumerate()
            .map(|(i, c)| member(&i.to_string(), &c.iter().map(|v| v * k).collect::<Vec<_>>()))
            .collect();
        let scaled_mean = calibrate(&scaled, "r").unwrap().mean_ratio;
        worst_scale = worst_scale.max((scaled_mean - cal.mean_ratio).abs() / cal.mean_ratio);

        let n_obs = rng.random_range(10..150);
        let observed: Vec<f64> = (0..n_obs).map(|t| 5.0 * t as f64 + rng.random_range(0.0..50.0)).collect();
        let peak = n_obs - 1 + rng.random_range(0..120);
        let curve = synthesize(&observed, peak, rng.random_range(500.0..2e3), &cal, 400, BiasMode::Multiplicative).unwrap();
        let expected = mean(&curve[..=peak]) / cal.mean_ratio;
        worst_identity = worst_identity.max((mean(&curve[peak + 1..]) - expected).abs() / expected);
    }
    // Smoothing is linear, so scaling only perturbs the last few bits.
    let scale_ok = worst_scale <= 16.0 * f64::EPSILON;
    outcome(
        hand && worst_identity <= 1e-6 && scale_ok,
        format!(
            "hand cases exact {hand}, worst identity error {worst_identity:.2e} over 100 cohorts, worst scale drift {worst_scale:.2e}"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let args = ForecastArgs {
            snapshot: snapshot(),
            target: "India".into(),
            out: dir.path().join(format!("{tag}.csv")),
            plot: Some(dir.path().join(format!("{tag}.svg"))),
            ..Default::default()
        };
        cmd_forecast(&args, &PipelineConfig::default(), &mut io::sink()).unwrap();
        let read = |ext: &str| std::fs::read(dir.path().join(format!("{tag}.{ext}"))).unwrap();
        (read("csv"), read("svg"))
    };
    let (a, b) = (run("a"), run("b"));
    outcome(
        a == b,
        format!("CSV identical {}, SVG identical {} ({} + {} bytes)", a.0 == b.0, a.1 == b.1, a.0.len(), a.1.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("filter cohort sizes and nesting", cohorts),
        ("R² ordering across filters", r2_ordering),
        ("India forecast envelope", india_envelope),
        ("OLS against normal equations", ols_oracle),
        ("Kalman likelihood against Yule–Walker density", kalman_oracle),
        ("AR(1) parameter recovery", ar1_recovery),
        ("forecast identities", forecast_identities),
        ("mean-ratio, bias and synthesis identities", synthesis_identities),
        ("deterministic forecast outputs", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
