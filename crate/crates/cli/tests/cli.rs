use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use tempfile::TempDir;

fn snapshot() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/snapshot_2020-07-21.csv")
}

fn ssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssm"))
        .args(args)
        .env_remove("SSM_CONFIG")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_summarises_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let once = dir.path().join("once.csv");
    let twice = dir.path().join("twice.csv");
    let o = ssm(&["ingest", "--input", s(&snapshot()), "--out", s(&once)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("207 countries"), "{}", stdout(&o));
    assert!(stdout(&o).contains("2020-07-21"));

    let o = ssm(&["ingest", "--input", s(&once), "--out", s(&twice)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&once).unwrap(), std::fs::read(&twice).unwrap());
}

#[test]
fn header_only_input_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "date,country,population,total_cases\n").unwrap();
    let o = ssm(&["ingest", "--input", s(&input), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no data rows"), "{}", stderr(&o));

    std::fs::write(&input, "date,country,total_cases\n2020-03-01,A,1\n").unwrap();
    let o = ssm(&["ingest", "--input", s(&input), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("population"), "{}", stderr(&o));
}

#[test]
fn filter_tables_are_nested() {
    let dir = TempDir::new().unwrap();
    let mut names = Vec::new();
    for id in ["1", "2", "3"] {
        let out = dir.path().join(format!("f{id}.csv"));
        let o = ssm(&["filter", "--snapshot", s(&snapshot()), "--filter", id, "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), std::fs::read_to_string(&out).unwrap());
        let rows: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
        assert!(!rows.is_empty());
        names.push(rows);
    }
    for pair in names.windows(2) {
        assert!(pair[0].iter().all(|n| pair[1].contains(n)), "{:?} not within {:?}", pair[0], pair[1]);
    }
}

#[test]
fn impossible_filter_is_an_empty_cohort() {
    let dir = TempDir::new().unwrap();
    let filter = dir.path().join("none.json");
    std::fs::write(
        &filter,
        r#"{"id":"none","min_population":1e12,"max_peak_day":140,"min_cases_per_million":0}"#,
    )
    .unwrap();
    let o = ssm(&["filter", "--snapshot", s(&snapshot()), "--filter", s(&filter)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_target_suggests_near_misses() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f.csv");
    let o = ssm(&["forecast", "--snapshot", s(&snapshot()), "--target", "Indai", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("India"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn forecast_writes_one_block_per_filter_plus_average() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f.csv");
    let plot = dir.path().join("p.svg");
    let summary = dir.path().join("s.json");
    let dump = dir.path().join("d.json");
    let o = ssm(&[
        "forecast", "--snapshot", s(&snapshot()), "--target", "India", "--filters", "1,3",
        "--out", s(&out), "--plot", s(&plot), "--summary", s(&summary), "--dump-fit", s(&dump),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("day_index,date,filter_id,predicted_new_cases"));
    let mut counts = std::collections::BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert!(fields[3].parse::<f64>().unwrap() >= 0.0);
        *counts.entry(fields[2].to_string()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 3);
    assert!(counts.values().all(|&n| n == 400), "{counts:?}");

    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 3);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(summary["target"], "India");
    let dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(dump["fits"].as_array().unwrap().len(), 2);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn converged_target_echoes_its_observations() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f.csv");
    let o = ssm(&["forecast", "--snapshot", s(&snapshot()), "--target", "turkey", "--filters", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("already_converged"));
    let rows = std::fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert!(rows < 2 * 400, "{rows}");
}

#[test]
fn bad_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"smoothing_window": 4}"#).unwrap();
    let o = ssm(&["filter", "--snapshot", s(&snapshot()), "--filter", "1", "--config", s(&config)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("smoothing_window"), "{}", stderr(&o));
}

/// Four converged countries and one rising target, as CSV text.
fn exact_fit_snapshot() -> String {
    let countries = [
        ("Alpha", 30_000_000u64, 80.0, 50.0, 3000.0),
        ("Beta", 60_000_000, 200.0, 70.0, 6000.0),
        ("Gamma", 25_000_000, 40.0, 45.0, 1500.0),
        ("Delta", 45_000_000, 120.0, 80.0, 5000.0),
        ("Rising", 90_000_000, 150.0, 250.0, 30000.0),
    ];
    let start = NaiveDate::from_ymd_opt(2020, 1, 22).unwrap();
    let mut text = String::from("date,country,continent,population,population_density,total_cases\n");
    for (name, pop, dens, peak, height) in countries {
        let mut total = 0u64;
        for t in 0..160 {
            let x: f64 = (t as f64 - peak) / 20.0;
            total += (1.0 + height * (-0.5 * x * x).exp()).round() as u64;
            let _ = writeln!(text, "{},{name},Test,{pop},{dens},{total}", start + Duration::days(t));
        }
    }
    text
}

#[test]
fn report_on_an_exactly_determined_cohort() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("snap.csv");
    std::fs::write(&snap, exact_fit_snapshot()).unwrap();
    let filter = dir.path().join("all.json");
    std::fs::write(
        &filter,
        r#"{"id":"all","min_population":1e6,"max_peak_day":140,"min_cases_per_million":1}"#,
    )
    .unwrap();
    let o = ssm(&["report", "--snapshot", s(&snap), "--filters", s(&filter), "--target", "Rising"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "all");
    assert_eq!(row[2], "4");
    for r2 in &row[3..6] {
        assert!((r2.parse::<f64>().unwrap() - 1.0).abs() < 1e-6, "{out}");
    }
}
