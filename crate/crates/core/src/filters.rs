//! Peak detection, convergence, and cohort selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{smooth, CountrySeries, Snapshot, MIN_OBSERVED_DAYS};

/// The peak must sit at least this many days before the end of the series
/// for a country to count as converged.
pub const CONVERGENCE_MARGIN_DAYS: usize = 15;
/// Trailing window (days) compared against the peak.
pub const CONVERGENCE_TRAILING_DAYS: usize = 7;
/// Trailing mean must fall below this fraction of the peak.
pub const CONVERGENCE_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub id: String,
    pub min_population: f64,
    pub max_peak_day: f64,
    pub min_cases_per_million: f64,
}

impl FilterSpec {
    pub fn new(
        id: impl Into<String>,
        min_population: f64,
        max_peak_day: f64,
        min_cases_per_million: f64,
    ) -> Result<Self> {
        let spec = Self {
            id: id.into(),
            min_population,
            max_peak_day,
            min_cases_per_million,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.min_population) && ok(self.max_peak_day) && ok(self.min_cases_per_million) {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "filter `{}` thresholds must be finite and non-negative",
                self.id
            )))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FilterSpec = serde_json::from_str(text)
            .map_err(|e| Error::Parameter(format!("filter document: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Strict comparisons throughout.
    pub fn accepts(&self, country: &CountrySeries, peak: &PeakSummary) -> bool {
        country.population as f64 > self.min_population
            && peak.converged
            && (peak.peak_day as f64) < self.max_peak_day
            && country.cases_per_million() > self.min_cases_per_million
    }
}

/// The three cohort definitions, tightest first.
pub fn builtin_filters() -> [FilterSpec; 3] {
    [
        FilterSpec {
            id: "1".into(),
            min_population: 20_000_000.0,
            max_peak_day: 140.0,
            min_cases_per_million: 500.0,
        },
        FilterSpec {
            id: "2".into(),
            min_population: 10_000_000.0,
            max_peak_day: 140.0,
            min_cases_per_million: 400.0,
        },
        FilterSpec {
            id: "3".into(),
            min_population: 5_500_000.0,
            max_peak_day: 150.0,
            min_cases_per_million: 100.0,
        },
    ]
}

pub fn builtin_filter(id: &str) -> Option<FilterSpec> {
    builtin_filters().into_iter().find(|f| f.id == id)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSummary {
    /// Days since the first reported case.
    pub peak_day: usize,
    /// Smoothed cases/day at the peak.
    pub peak_value: f64,
    /// Mean raw daily cases over `[0, peak_day)`.
    pub rising_mean: f64,
    /// Mean raw daily cases over `[peak_day, n)`.
    pub falling_mean: f64,
    /// `rising_mean / falling_mean`, when the falling mean is positive.
    pub ratio: Option<f64>,
    pub converged: bool,
    /// Number of days in the analysed series.
    pub n_days: usize,
}

/// Peak statistics of a daily series that starts on the first reported case.
///
/// The peak is the earliest argmax of the smoothed series; the rising and
/// falling means use the raw values.
pub fn summarize_peak(daily: &[f64], window: usize) -> Result<PeakSummary> {
    let smoothed = smooth(daily, window)?;
    let n = daily.len();
    let (peak_day, peak_value) = smoothed
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if peak_day == 0 {
        return Err(Error::DegeneratePeak(String::new()));
    }
    let rising_mean = daily[..peak_day].iter().sum::<f64>() / peak_day as f64;
    let falling_mean = daily[peak_day..].iter().sum::<f64>() / (n - peak_day) as f64;
    let trailing = CONVERGENCE_TRAILING_DAYS.min(n);
    let trailing_mean = smoothed[n - trailing..].iter().sum::<f64>() / trailing as f64;
    let converged = peak_day + CONVERGENCE_MARGIN_DAYS <= n
        && trailing_mean < CONVERGENCE_FRACTION * peak_value;
    Ok(PeakSummary {
        peak_day,
        peak_value,
        rising_mean,
        falling_mean,
        ratio: (falling_mean > 0.0).then(|| rising_mean / falling_mean),
        converged,
        n_days: n,
    })
}

/// Peak statistics for a country, counted from its first reported case.
pub fn detect_peak(country: &CountrySeries, window: usize) -> Result<PeakSummary> {
    let daily: Vec<f64> = country
        .daily_since_first_case()
        .iter()
        .map(|&d| d as f64)
        .collect();
    if daily.len() < MIN_OBSERVED_DAYS {
        return Err(Error::InsufficientData(format!(
            "`{}` has {} observed days, need {MIN_OBSERVED_DAYS}",
            country.name,
            daily.len()
        )));
    }
    summarize_peak(&daily, window).map_err(|e| match e {
        Error::DegeneratePeak(_) => Error::DegeneratePeak(country.name.clone()),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortMember {
    pub country: CountrySeries,
    pub peak: PeakSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cohort {
    pub filter: FilterSpec,
    pub members: Vec<CohortMember>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.country.name.as_str()).collect()
    }
}

/// Selects the converged countries that pass `spec`, largest population
/// first (name breaks ties). Countries whose peak cannot be determined are
/// skipped.
pub fn apply_filter(snapshot: &Snapshot, spec: &FilterSpec, window: usize) -> Result<Cohort> {
    if snapshot.is_empty() {
        return Err(Error::EmptyInput);
    }
    spec.validate()?;
    let mut members: Vec<CohortMember> = snapshot
        .iter()
        .filter(|c| c.usable_for_peaks())
        .filter_map(|c| {
            let peak = detect_peak(c, window).ok()?;
            spec.accepts(c, &peak).then(|| CohortMember {
                country: c.clone(),
                peak,
            })
        })
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyCohort(spec.id.clone()));
    }
    members.sort_by(|a, b| {
        b.country
            .population
            .cmp(&a.country.population)
            .then_with(|| a.country.name.cmp(&b.country.name))
    });
    Ok(Cohort {
        filter: spec.clone(),
        members,
    })
}

/// Pointwise mean of the cohort's per-million daily curves, each aligned so
/// day 0 is its first reported case. Index `t` averages over the countries
/// that have data at `t`.
pub fn average_curve(members: &[CohortMember]) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::Parameter("average_curve needs a non-empty cohort".into()));
    }
    let curves: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            let scale = 1e6 / m.country.population as f64;
            m.country
                .daily_since_first_case()
                .iter()
                .map(|&d| d as f64 * scale)
                .collect()
        })
        .collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..len)
        .map(|t| {
            let (sum, count) = curves
                .iter()
                .filter_map(|c| c.get(t))
                .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
            sum / count as f64
        })
        .collect())
}
