use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{Context, Result};
use log::warn;
use serde::Serialize;
use ssm_core::filters::{apply_filter, builtin_filter, Cohort, FilterSpec};
use ssm_core::ingest::{parse_snapshot, write_snapshot, CountrySeries, Snapshot};
use ssm_core::regression::{fit_peak_models, predict_targets, PeakRegression};
use ssm_core::ssm::{
    average_forecasts, format_sig6, run_ssm_traced, write_forecast_csv, Forecast, ForecastStatus,
    ForecastSummary, SsmTrace,
};

use crate::config::PipelineConfig;
use crate::plot::render_svg;

/// Common alternative spellings of snapshot country names.
const ALIASES: [(&str, &str); 6] = [
    ("us", "United States"),
    ("usa", "United States"),
    ("u.s.", "United States"),
    ("uk", "United Kingdom"),
    ("u.k.", "United Kingdom"),
    ("uae", "United Arab Emirates"),
];

#[derive(Debug)]
pub struct UnknownTarget {
    pub name: String,
    pub suggestions: Vec<String>,
}

impl fmt::Display for UnknownTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown target country `{}`", self.name)?;
        if !self.suggestions.is_empty() {
            write!(f, "; did you mean: {}?", self.suggestions.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for UnknownTarget {}

/// Exit status for an error: 2 schema, 3 empty cohort, 4 unknown target,
/// 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UnknownTarget>().is_some() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<ssm_core::Error>() {
            return match e.root() {
                ssm_core::Error::MissingColumn(_)
                | ssm_core::Error::Row { .. }
                | ssm_core::Error::EmptyInput
                | ssm_core::Error::Csv(_) => 2,
                ssm_core::Error::EmptyCohort(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_snapshot(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// Exact name, then case-insensitive name, then a known alias.
pub fn resolve_target<'a>(snapshot: &'a Snapshot, name: &str) -> Result<&'a CountrySeries, UnknownTarget> {
    if let Some(c) = snapshot.get(name) {
        return Ok(c);
    }
    let lower = name.trim().to_lowercase();
    if let Some(c) = snapshot.iter().find(|c| c.name.to_lowercase() == lower) {
        return Ok(c);
    }
    if let Some((_, full)) = ALIASES.iter().find(|(alias, _)| *alias == lower) {
        if let Some(c) = snapshot.get(full) {
            return Ok(c);
        }
    }
    let mut scored: Vec<(f64, &str)> = snapshot
        .names()
        .map(|n| (strsim::jaro_winkler(&lower, &n.to_lowercase()), n))
        .filter(|(s, _)| *s >= 0.75)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    Err(UnknownTarget {
        name: name.to_string(),
        suggestions: scored.iter().take(3).map(|(_, n)| n.to_string()).collect(),
    })
}

/// A built-in id ("1", "2", "3") or a path to a filter JSON file.
pub fn resolve_filter(entry: &str) -> Result<FilterSpec> {
    if let Some(spec) = builtin_filter(entry) {
        return Ok(spec);
    }
    let path = Path::new(entry);
    if path.exists() {
        return FilterSpec::from_json_file(path).with_context(|| format!("filter file {entry}"));
    }
    anyhow::bail!("`{entry}` is neither a built-in filter id (1, 2, 3) nor an existing filter file")
}

pub fn resolve_filters(entries: &[String]) -> Result<Vec<FilterSpec>> {
    if entries.is_empty() {
        anyhow::bail!("no filters given");
    }
    entries.iter().map(|e| resolve_filter(e)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

pub fn cmd_ingest(input: &Path, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let snapshot = load_snapshot(input)?;
    let mut writer = create(out)?;
    write_snapshot(&snapshot, &mut writer)?;
    writer.flush()?;
    writeln!(
        stdout,
        "{} rows, {} countries, {} to {}",
        snapshot.row_count(),
        snapshot.len(),
        snapshot.iter().map(|c| c.start_date).min().expect("snapshot is nonempty"),
        snapshot.as_of_date
    )?;
    Ok(())
}

fn cohort_table(cohort: &Cohort, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "country,population,cases_per_million,peak_day,peak_value,ratio")?;
    for m in &cohort.members {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&m.country.name),
            m.country.population,
            format_sig6(m.country.cases_per_million()),
            m.peak.peak_day,
            format_sig6(m.peak.peak_value),
            m.peak.ratio.map(format_sig6).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cmd_filter(
    snapshot: &Path,
    filter: &str,
    out: Option<&Path>,
    config: &PipelineConfig,
    stdout: &mut dyn Write,
) -> Result<Cohort> {
    let snapshot = load_snapshot(snapshot)?;
    let spec = resolve_filter(filter)?;
    let cohort = apply_filter(&snapshot, &spec, config.smoothing_window)?;
    cohort_table(&cohort, stdout)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        cohort_table(&cohort, &mut w)?;
        w.flush()?;
    }
    Ok(cohort)
}

pub struct FilterRun {
    pub cohort: Cohort,
    pub models: PeakRegression,
    pub forecast: Forecast,
    pub trace: Option<SsmTrace>,
}

pub struct ForecastRun {
    pub target: String,
    pub per_filter: Vec<FilterRun>,
    pub average: Forecast,
}

impl ForecastRun {
    /// Per-filter forecasts followed by the average.
    pub fn blocks(&self) -> Vec<Forecast> {
        self.per_filter
            .iter()
            .map(|r| r.forecast.clone())
            .chain(std::iter::once(self.average.clone()))
            .collect()
    }

    pub fn summary(&self) -> ForecastSummary {
        let forecasts: Vec<Forecast> = self.per_filter.iter().map(|r| r.forecast.clone()).collect();
        ForecastSummary::new(&forecasts, &self.average)
    }
}

fn run_filter(snapshot: &Snapshot, target: &CountrySeries, spec: &FilterSpec, config: &PipelineConfig) -> Result<FilterRun> {
    let cohort = apply_filter(snapshot, spec, config.smoothing_window)?;
    let models = fit_peak_models(&cohort)?;
    let (forecast, trace) = run_ssm_traced(target, &cohort, &models, &config.ssm_options())?;
    Ok(FilterRun {
        cohort,
        models,
        forecast,
        trace,
    })
}

/// Runs every filter concurrently; results keep the order of `filters`.
pub fn run_forecasts(
    snapshot: &Snapshot,
    target: &str,
    filters: &[FilterSpec],
    config: &PipelineConfig,
) -> Result<ForecastRun> {
    let target = resolve_target(snapshot, target)?;
    let results: Vec<Result<FilterRun>> = thread::scope(|scope| {
        let handles: Vec<_> = filters
            .iter()
            .map(|spec| {
                scope.spawn(move || {
                    run_filter(snapshot, target, spec, config).with_context(|| format!("filter {}", spec.id))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("filter thread panicked"))
            .collect()
    });
    let per_filter = results.into_iter().collect::<Result<Vec<_>>>()?;
    if per_filter.iter().any(|r| r.forecast.status == ForecastStatus::AlreadyConverged) {
        warn!("`{}` has already converged; forecasts echo the observed curve", target.name);
    }
    let forecasts: Vec<Forecast> = per_filter.iter().map(|r| r.forecast.clone()).collect();
    let average = average_forecasts(&forecasts)?;
    Ok(ForecastRun {
        target: target.name.clone(),
        per_filter,
        average,
    })
}

fn summary_table(run: &ForecastRun, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "target,filter_id,status,peak_day,peak_date,peak_value,total_cases,r_squared")?;
    for f in run.per_filter.iter().map(|r| &r.forecast).chain(std::iter::once(&run.average)) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&run.target),
            f.filter_id,
            match f.status {
                ForecastStatus::Forecast => "forecast",
                ForecastStatus::AlreadyConverged => "already_converged",
            },
            f.peak_day,
            f.date_of(f.peak_day),
            format_sig6(f.peak_value),
            format_sig6(f.total_cases),
            f.r_squared.map(format_sig6).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitDump<'a> {
    target: &'a str,
    fits: Vec<FilterFitDump<'a>>,
}

#[derive(Serialize)]
struct FilterFitDump<'a> {
    filter_id: &'a str,
    cohort: Vec<&'a str>,
    regression: &'a PeakRegression,
    trace: Option<&'a SsmTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct ForecastArgs {
    pub snapshot: PathBuf,
    pub target: String,
    pub filters: Option<Vec<String>>,
    pub out: PathBuf,
    pub plot: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub dump_fit: Option<PathBuf>,
}

pub fn cmd_forecast(args: &ForecastArgs, config: &PipelineConfig, stdout: &mut dyn Write) -> Result<ForecastRun> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let filters = resolve_filters(args.filters.as_ref().unwrap_or(&config.filters))?;
    let run = run_forecasts(&snapshot, &args.target, &filters, config)?;

    let mut w = create(&args.out)?;
    write_forecast_csv(&run.blocks(), &mut w)?;
    w.flush()?;
    if let Some(path) = &args.plot {
        let title = format!("{}: predicted daily new cases", run.target);
        std::fs::write(path, render_svg(&title, &run.blocks()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.summary {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &run.summary())?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(path) = &args.dump_fit {
        let dump = FitDump {
            target: &run.target,
            fits: run
                .per_filter
                .iter()
                .map(|r| FilterFitDump {
                    filter_id: &r.cohort.filter.id,
                    cohort: r.cohort.names(),
                    regression: &r.models,
                    trace: r.trace.as_ref(),
                })
                .collect(),
        };
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &dump)?;
        writeln!(w)?;
        w.flush()?;
    }
    summary_table(&run, stdout)?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub filter_id: String,
    pub cohort_size: usize,
    pub r2_peak_value: f64,
    pub r2_peak_day: f64,
    pub r2_total_cases: f64,
    pub regression_peak_value: f64,
    pub regression_peak_day: usize,
    pub regression_total_cases: f64,
    pub forecast_peak_value: f64,
    pub forecast_peak_day: usize,
    pub forecast_total_cases: f64,
}

pub fn cmd_report(
    snapshot: &Path,
    filters: Option<&[String]>,
    target: &str,
    config: &PipelineConfig,
    stdout: &mut dyn Write,
) -> Result<Vec<ReportRow>> {
    let snapshot = load_snapshot(snapshot)?;
    let filters = resolve_filters(filters.unwrap_or(&config.filters))?;
    let run = run_forecasts(&snapshot, target, &filters, config)?;
    let country = resolve_target(&snapshot, target)?;
    let mut rows = Vec::with_capacity(run.per_filter.len());
    for r in &run.per_filter {
        let p = predict_targets(&r.models, country)?;
        rows.push(ReportRow {
            filter_id: r.cohort.filter.id.clone(),
            cohort_size: r.cohort.len(),
            r2_peak_value: r.models.model_peak_value.r_squared,
            r2_peak_day: r.models.model_peak_day.r_squared,
            r2_total_cases: r.models.model_total_cases.r_squared,
            regression_peak_value: p.peak_value,
            regression_peak_day: p.peak_day,
            regression_total_cases: p.total_cases,
            forecast_peak_value: r.forecast.peak_value,
            forecast_peak_day: r.forecast.peak_day,
            forecast_total_cases: r.forecast.total_cases,
        });
    }
    writeln!(
        stdout,
        "target,filter_id,cohort_size,r2_peak_value,r2_peak_day,r2_total_cases,\
         regression_peak_value,regression_peak_day,regression_total_cases,\
         forecast_peak_value,forecast_peak_day,forecast_total_cases"
    )?;
    for row in &rows {
        writeln!(
            stdout,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&run.target),
            row.filter_id,
            row.cohort_size,
            format_sig6(row.r2_peak_value),
            format_sig6(row.r2_peak_day),
            format_sig6(row.r2_total_cases),
            format_sig6(row.regression_peak_value),
            row.regression_peak_day,
            format_sig6(row.regression_total_cases),
            format_sig6(row.forecast_peak_value),
            row.forecast_peak_day,
            format_sig6(row.forecast_total_cases)
        )?;
    }
    Ok(rows)
}
