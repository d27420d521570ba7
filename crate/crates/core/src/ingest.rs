//! Country-level daily case snapshots.
//!
//! Input is a long-format CSV with one row per (country, date). Columns may
//! appear in any order; `date`, `country`, `population` and `total_cases`
//! are required. Each country's cumulative series is expanded to the full
//! calendar span ending on the snapshot date, gaps are forward-filled and
//! reporting corrections are clamped so the series never decreases.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};

/// Smoothing window used for peak detection unless configured otherwise.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 7;

/// Countries with fewer observed days than this (counted from the first
/// reported case) are kept but cannot take part in peak detection.
pub const MIN_OBSERVED_DAYS: usize = 14;

/// Column order written by [`write_snapshot`].
pub const CANONICAL_COLUMNS: [&str; 9] = [
    "date",
    "country",
    "continent",
    "population",
    "population_density",
    "total_cases",
    "total_deaths",
    "recovered",
    "active_cases",
];

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountrySeries {
    pub name: String,
    pub continent: String,
    pub population: u64,
    /// Persons per km².
    pub population_density: f64,
    pub start_date: NaiveDate,
    pub cumulative_cases: Vec<u64>,
    pub daily_new_cases: Vec<u64>,
    pub cumulative_deaths: Option<Vec<u64>>,
    pub recovered: Option<Vec<u64>>,
}

impl CountrySeries {
    /// Builds a series from an already repaired cumulative count, deriving
    /// the daily new cases.
    pub fn from_cumulative(
        name: impl Into<String>,
        continent: impl Into<String>,
        population: u64,
        population_density: f64,
        start_date: NaiveDate,
        cumulative_cases: Vec<u64>,
    ) -> Result<Self> {
        let name = name.into();
        if cumulative_cases.is_empty() {
            return Err(Error::InsufficientData(format!("`{name}` has no days")));
        }
        if population == 0 {
            return Err(Error::Parameter(format!("`{name}` has zero population")));
        }
        if !(population_density >= 0.0) {
            return Err(Error::Parameter(format!(
                "`{name}` has invalid population density {population_density}"
            )));
        }
        if cumulative_cases.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter(format!(
                "`{name}` cumulative cases decrease; impute first"
            )));
        }
        let daily_new_cases = daily_from_cumulative(&cumulative_cases);
        Ok(Self {
            name,
            continent: continent.into(),
            population,
            population_density,
            start_date,
            cumulative_cases,
            daily_new_cases,
            cumulative_deaths: None,
            recovered: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cumulative_cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative_cases.is_empty()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.len() as i64 - 1)
    }

    /// Index of the first day with at least one cumulative case.
    pub fn first_case_index(&self) -> Option<usize> {
        self.cumulative_cases.iter().position(|&c| c > 0)
    }

    pub fn first_case_date(&self) -> Option<NaiveDate> {
        self.first_case_index()
            .map(|i| self.start_date + Duration::days(i as i64))
    }

    /// Daily new cases from the first reported case onward.
    pub fn daily_since_first_case(&self) -> &[u64] {
        match self.first_case_index() {
            Some(i) => &self.daily_new_cases[i..],
            None => &[],
        }
    }

    /// Days from the first reported case to the end of the series, inclusive.
    pub fn observed_days(&self) -> usize {
        self.daily_since_first_case().len()
    }

    pub fn usable_for_peaks(&self) -> bool {
        self.observed_days() >= MIN_OBSERVED_DAYS
    }

    pub fn total_cases(&self) -> u64 {
        self.cumulative_cases.last().copied().unwrap_or(0)
    }

    pub fn cases_per_million(&self) -> f64 {
        self.total_cases() as f64 * 1e6 / self.population as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub countries: BTreeMap<String, CountrySeries>,
    pub as_of_date: NaiveDate,
}

impl Snapshot {
    pub fn get(&self, name: &str) -> Option<&CountrySeries> {
        self.countries.get(name)
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountrySeries> {
        self.countries.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.countries.keys().map(String::as_str)
    }

    /// Total number of (country, day) rows in canonical form.
    pub fn row_count(&self) -> usize {
        self.iter().map(CountrySeries::len).sum()
    }
}

/// `daily[0] = cumulative[0]`, then clamped first differences.
pub fn daily_from_cumulative(cumulative: &[u64]) -> Vec<u64> {
    let mut prev = 0;
    cumulative
        .iter()
        .map(|&c| {
            let d = c.saturating_sub(prev);
            prev = c;
            d
        })
        .collect()
}

/// Repairs a cumulative series: missing days carry the previous value
/// forward (a missing first day becomes 0) and any value below its
/// predecessor is raised to it.
pub fn impute(raw: &[Option<u64>]) -> Vec<u64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut prev = 0u64;
    for value in raw {
        let v = match value {
            Some(v) => (*v).max(prev),
            None => prev,
        };
        out.push(v);
        prev = v;
    }
    out
}

/// Centered moving average. Near the ends the window shrinks to the points
/// that exist, so the output has the same length as the input.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > series.len() {
        return Err(Error::Parameter(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let half = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

struct ColumnMap {
    date: usize,
    country: usize,
    population: usize,
    total_cases: usize,
    continent: Option<usize>,
    population_density: Option<usize>,
    total_deaths: Option<usize>,
    recovered: Option<usize>,
}

impl ColumnMap {
    fn from_headers(headers: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let require =
            |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        Ok(Self {
            date: require("date")?,
            country: require("country")?,
            population: require("population")?,
            total_cases: require("total_cases")?,
            continent: find("continent"),
            population_density: find("population_density"),
            total_deaths: find("total_deaths"),
            recovered: find("recovered"),
        })
    }
}

struct RawRow {
    date: NaiveDate,
    continent: String,
    population: u64,
    density: f64,
    cases: Option<u64>,
    deaths: Option<u64>,
    recovered: Option<u64>,
    line: u64,
}

fn cell(record: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| record.get(i)).map(str::trim).unwrap_or("")
}

fn parse_count(text: &str, column: &str, line: u64) -> Result<Option<u64>> {
    if text.is_empty() {
        return Ok(None);
    }
    if let Ok(v) = text.parse::<u64>() {
        return Ok(Some(v));
    }
    let row_err = |message: String| Error::Row { line, message };
    match text.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(row_err(format!("negative {column} `{text}`"))),
        Ok(v) if v.is_finite() && v.fract() == 0.0 => Ok(Some(v as u64)),
        _ => Err(row_err(format!("invalid {column} `{text}`"))),
    }
}

fn parse_row(record: &csv::StringRecord, cols: &ColumnMap, line: u64) -> Result<(String, RawRow)> {
    let row_err = |message: String| Error::Row { line, message };

    let date_text = cell(record, Some(cols.date));
    let date = NaiveDate::parse_from_str(date_text, DATE_FORMAT)
        .map_err(|_| row_err(format!("unparseable date `{date_text}`")))?;

    let country = cell(record, Some(cols.country));
    if country.is_empty() {
        return Err(row_err("empty country".into()));
    }

    let pop_text = cell(record, Some(cols.population));
    let population = match parse_count(pop_text, "population", line)? {
        Some(0) => return Err(row_err("population must be positive".into())),
        Some(p) => p,
        None => return Err(row_err("missing population".into())),
    };

    let density_text = cell(record, cols.population_density);
    let density = if density_text.is_empty() {
        0.0
    } else {
        match density_text.parse::<f64>() {
            Ok(d) if d.is_finite() && d >= 0.0 => d,
            _ => return Err(row_err(format!("invalid population_density `{density_text}`"))),
        }
    };

    Ok((
        country.to_string(),
        RawRow {
            date,
            continent: cell(record, cols.continent).to_string(),
            population,
            density,
            cases: parse_count(cell(record, Some(cols.total_cases)), "total_cases", line)?,
            deaths: parse_count(cell(record, cols.total_deaths), "total_deaths", line)?,
            recovered: parse_count(cell(record, cols.recovered), "recovered", line)?,
            line,
        },
    ))
}

/// Parses a snapshot CSV into one repaired series per country.
pub fn parse_snapshot<R: Read>(input: R) -> Result<Snapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    let cols = ColumnMap::from_headers(&headers)?;

    let mut grouped: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let (country, row) = parse_row(&record, &cols, line)?;
        grouped.entry(country).or_default().push(row);
    }

    let as_of_date = grouped
        .values()
        .flat_map(|rows| rows.iter().map(|r| r.date))
        .max()
        .ok_or(Error::EmptyInput)?;

    let mut countries = BTreeMap::new();
    for (name, mut rows) in grouped {
        rows.sort_by_key(|r| r.date);
        if let Some(w) = rows.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::Row {
                line: w[1].line,
                message: format!("duplicate row for `{name}` on {}", w[1].date),
            });
        }
        let series = assemble_country(name.clone(), &rows, as_of_date);
        countries.insert(name, series);
    }

    Ok(Snapshot {
        countries,
        as_of_date,
    })
}

fn assemble_country(name: String, rows: &[RawRow], as_of: NaiveDate) -> CountrySeries {
    let start = rows[0].date;
    let span = (as_of - start).num_days() as usize + 1;
    let mut cases = vec![None; span];
    let mut deaths = vec![None; span];
    let mut recovered = vec![None; span];
    for r in rows {
        let i = (r.date - start).num_days() as usize;
        cases[i] = r.cases;
        deaths[i] = r.deaths;
        recovered[i] = r.recovered;
    }
    let optional = |raw: Vec<Option<u64>>| raw.iter().any(Option::is_some).then(|| impute(&raw));

    let latest = rows.last().expect("non-empty group");
    let cumulative_cases = impute(&cases);
    CountrySeries {
        name,
        continent: latest.continent.clone(),
        population: latest.population,
        population_density: latest.density,
        start_date: start,
        daily_new_cases: daily_from_cumulative(&cumulative_cases),
        cumulative_cases,
        cumulative_deaths: optional(deaths),
        recovered: optional(recovered),
    }
}

/// Writes the canonical CSV form: canonical column order, countries by
/// name, days ascending, every day of every series present.
pub fn write_snapshot<W: Write>(snapshot: &Snapshot, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_COLUMNS)?;
    for c in snapshot.iter() {
        for i in 0..c.len() {
            let date = (c.start_date + Duration::days(i as i64))
                .format(DATE_FORMAT)
                .to_string();
            let total = c.cumulative_cases[i];
            let deaths = c.cumulative_deaths.as_ref().map(|d| d[i]);
            let recovered = c.recovered.as_ref().map(|r| r[i]);
            let active = match (deaths, recovered) {
                (Some(d), Some(r)) => Some(total.saturating_sub(d).saturating_sub(r)),
                _ => None,
            };
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                date,
                c.name.clone(),
                c.continent.clone(),
                c.population.to_string(),
                c.population_density.to_string(),
                total.to_string(),
                opt(deaths),
                opt(recovered),
                opt(active),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
