//! The mean-ratio forecast. A cohort of converged countries gives the
//! average ratio of rising-edge to falling-edge mean ("Mean"); the target's
//! own rising-edge mean divided by it gives the implied falling-edge mean
//! ("Bias"). A synthetic curve is built from the observed days, a ramp to
//! the regressed peak and a rescaled mirror image, and a SARIMAX fit over
//! that curve supplies the final one-step-ahead smoothed forecast.

use std::io::Write;

use chrono::{Duration, NaiveDate};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{detect_peak, Cohort, CohortMember};
use crate::ingest::{smooth, CountrySeries, DEFAULT_SMOOTHING_WINDOW};
use crate::regression::{predict_targets, PeakPrediction, PeakRegression};
use crate::sarimax::{fit, select_order, SarimaxFit, SarimaxSpec};

pub const DEFAULT_HORIZON: usize = 400;
pub const AVERAGE_ID: &str = "average";

/// Bounds on the day-over-day ratio used to extend an exhausted mirror.
const TAIL_RATIO_MIN: f64 = 0.5;
const TAIL_RATIO_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    /// Rescale the mirrored falling edge so its mean equals Bias.
    #[default]
    Multiplicative,
    /// Add Bias to every day of the mirrored falling edge.
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmCalibration {
    pub filter_id: String,
    /// `(country, R_i / F_i)` in cohort order.
    pub per_country_ratios: Vec<(String, f64)>,
    pub mean_ratio: f64,
    pub n_countries: usize,
}

/// Mean of the per-country rising/falling mean ratios.
pub fn calibrate(members: &[CohortMember], filter_id: &str) -> Result<SsmCalibration> {
    if members.is_empty() {
        return Err(Error::EmptyCohort(filter_id.to_string()));
    }
    let mut ratios = Vec::with_capacity(members.len());
    for m in members {
        let (r, f) = (m.peak.rising_mean, m.peak.falling_mean);
        if !(f > 0.0) {
            return Err(Error::DegenerateCohort(m.country.name.clone()));
        }
        ratios.push((m.country.name.clone(), r / f));
    }
    let mean_ratio = ratios.iter().map(|(_, r)| r).sum::<f64>() / ratios.len() as f64;
    Ok(SsmCalibration {
        filter_id: filter_id.to_string(),
        n_countries: ratios.len(),
        per_country_ratios: ratios,
        mean_ratio,
    })
}

/// The target's implied falling-edge mean.
pub fn compute_bias(target_rising_mean: f64, calibration: &SsmCalibration) -> Result<f64> {
    if !(calibration.mean_ratio > 0.0 && calibration.mean_ratio.is_finite()) {
        return Err(Error::Calibration(format!(
            "mean ratio must be positive, got {}",
            calibration.mean_ratio
        )));
    }
    if !(target_rising_mean >= 0.0) {
        return Err(Error::Parameter(format!(
            "rising mean must be non-negative, got {target_rising_mean}"
        )));
    }
    Ok(target_rising_mean / calibration.mean_ratio)
}

/// Day of the synthetic peak: the predicted day, or the last observed day
/// when the prediction lies inside the observations.
pub fn effective_peak_day(n_obs: usize, predicted_peak_day: usize) -> usize {
    predicted_peak_day.max(n_obs.saturating_sub(1))
}

/// Builds the synthetic curve from an already smoothed observed series.
///
/// Days `[0, n_obs)` are the observations, days up to the peak a linear
/// ramp to `peak_value`, and days after the peak the rising edge mirrored
/// about the peak, extended by geometric decay once the mirror runs out
/// and adjusted according to `mode`. The rising edge includes the peak.
pub fn synthesize(
    observed: &[f64],
    peak_day: usize,
    peak_value: f64,
    calibration: &SsmCalibration,
    horizon: usize,
    mode: BiasMode,
) -> Result<Vec<f64>> {
    let n = observed.len();
    if n == 0 {
        return Err(Error::InsufficientData("no observed days".into()));
    }
    let peak = effective_peak_day(n, peak_day);
    if horizon <= peak {
        return Err(Error::Parameter(format!(
            "horizon {horizon} does not extend past the peak on day {peak}"
        )));
    }

    let mut curve = Vec::with_capacity(horizon);
    curve.extend_from_slice(observed);
    let last = observed[n - 1];
    let span = (peak + 1 - n) as f64;
    for k in 1..=peak + 1 - n {
        curve.push(last + (peak_value - last) * k as f64 / span);
    }
    let rising_mean = curve.iter().sum::<f64>() / curve.len() as f64;
    let bias = compute_bias(rising_mean, calibration)?;

    let falling_len = horizon - peak - 1;
    let mut mirror: Vec<f64> = curve[..peak].iter().rev().take(falling_len).copied().collect();
    if mirror.len() < falling_len {
        let ratio = match (curve.first(), curve.get(1)) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            _ => TAIL_RATIO_MIN,
        }
        .clamp(TAIL_RATIO_MIN, TAIL_RATIO_MAX);
        let mut value = mirror.last().copied().unwrap_or(curve[peak]);
        while mirror.len() < falling_len {
            value *= ratio;
            mirror.push(value);
        }
    }

    match mode {
        BiasMode::Multiplicative => {
            if falling_len > 0 {
                let mirror_mean = mirror.iter().sum::<f64>() / falling_len as f64;
                if !(mirror_mean > 0.0) {
                    if bias > 0.0 {
                        return Err(Error::Calibration(
                            "mirrored falling edge is all zero and cannot be rescaled".into(),
                        ));
                    }
                } else {
                    let scale = bias / mirror_mean;
                    mirror.iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
        BiasMode::Additive => mirror.iter_mut().for_each(|v| *v += bias),
    }
    curve.extend(mirror);
    curve.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(curve)
}

/// Smooths the target's daily series since its first case and synthesizes
/// a `horizon`-day curve around the regressed peak.
pub fn synthesize_curve(
    target: &CountrySeries,
    prediction: &PeakPrediction,
    calibration: &SsmCalibration,
    horizon: usize,
    window: usize,
    mode: BiasMode,
) -> Result<Vec<f64>> {
    let daily: Vec<f64> = target.daily_since_first_case().iter().map(|&d| d as f64).collect();
    let observed = smooth(&daily, window)?;
    synthesize(&observed, prediction.peak_day, prediction.peak_value, calibration, horizon, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastStatus {
    Forecast,
    /// The target had already converged; the curve is the observed one.
    AlreadyConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub filter_id: String,
    pub target_country: String,
    /// Date of day 0 (the target's first reported case).
    pub start_date: NaiveDate,
    pub daily_predicted: Vec<f64>,
    pub peak_day: usize,
    pub peak_value: f64,
    pub total_cases: f64,
    pub bias: f64,
    /// R² of the cohort's peak-value regression.
    pub r_squared: Option<f64>,
    pub status: ForecastStatus,
}

impl Forecast {
    fn from_curve(
        filter_id: &str,
        target: &str,
        start_date: NaiveDate,
        daily_predicted: Vec<f64>,
        bias: f64,
        r_squared: Option<f64>,
        status: ForecastStatus,
    ) -> Self {
        let (peak_day, peak_value) = daily_predicted
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        Self {
            filter_id: filter_id.to_string(),
            target_country: target.to_string(),
            start_date,
            total_cases: daily_predicted.iter().sum(),
            peak_value: if daily_predicted.is_empty() { 0.0 } else { peak_value },
            peak_day,
            daily_predicted,
            bias,
            r_squared,
            status,
        }
    }

    pub fn horizon(&self) -> usize {
        self.daily_predicted.len()
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmOptions {
    pub spec: SarimaxSpec,
    /// When nonempty, the order is chosen per curve by AIC from these
    /// candidates and `spec` is ignored.
    pub order_grid: Vec<SarimaxSpec>,
    pub horizon: usize,
    pub smoothing_window: usize,
    pub bias_mode: BiasMode,
}

impl Default for SsmOptions {
    fn default() -> Self {
        Self {
            spec: SarimaxSpec::pipeline_default(),
            order_grid: Vec::new(),
            horizon: DEFAULT_HORIZON,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            bias_mode: BiasMode::default(),
        }
    }
}

/// Intermediate quantities of one [`run_ssm`] call, for inspection.
#[derive(Debug, Clone, Serialize)]
pub struct SsmTrace {
    pub calibration: SsmCalibration,
    pub prediction: PeakPrediction,
    pub synthetic: Vec<f64>,
    pub fit: SarimaxFit,
}

/// Full pipeline for one filter: calibrate, predict the peak, synthesize,
/// fit SARIMAX to the synthetic curve and keep its one-step predictions.
pub fn run_ssm(
    target: &CountrySeries,
    cohort: &Cohort,
    models: &PeakRegression,
    options: &SsmOptions,
) -> Result<Forecast> {
    run_ssm_traced(target, cohort, models, options).map(|(f, _)| f)
}

pub fn run_ssm_traced(
    target: &CountrySeries,
    cohort: &Cohort,
    models: &PeakRegression,
    options: &SsmOptions,
) -> Result<(Forecast, Option<SsmTrace>)> {
    let filter_id = cohort.filter.id.as_str();
    let start_date = target
        .first_case_date()
        .ok_or_else(|| Error::InsufficientData(format!("`{}` has no reported cases", target.name)))?;
    let peak = detect_peak(target, options.smoothing_window).map_err(Error::at_stage("peak detection"))?;
    if peak.converged {
        warn!(
            "`{}` has already converged (peak on day {}); returning the observed curve",
            target.name, peak.peak_day
        );
        let daily: Vec<f64> = target.daily_since_first_case().iter().map(|&d| d as f64).collect();
        let observed = smooth(&daily, options.smoothing_window)?;
        let forecast = Forecast::from_curve(
            filter_id,
            &target.name,
            start_date,
            observed,
            peak.falling_mean,
            Some(models.model_peak_value.r_squared),
            ForecastStatus::AlreadyConverged,
        );
        return Ok((forecast, None));
    }

    let calibration = calibrate(&cohort.members, filter_id).map_err(Error::at_stage("calibration"))?;
    let prediction = predict_targets(models, target).map_err(Error::at_stage("peak prediction"))?;
    let synthetic = synthesize_curve(
        target,
        &prediction,
        &calibration,
        options.horizon,
        options.smoothing_window,
        options.bias_mode,
    )
    .map_err(Error::at_stage("curve synthesis"))?;
    let observed_days = target.observed_days();
    let peak_day = effective_peak_day(observed_days, prediction.peak_day);
    let rising_mean = synthetic[..=peak_day].iter().sum::<f64>() / (peak_day + 1) as f64;
    let bias = compute_bias(rising_mean, &calibration).map_err(Error::at_stage("calibration"))?;

    let spec = if options.order_grid.is_empty() {
        options.spec
    } else {
        select_order(&synthetic, &options.order_grid).map_err(Error::at_stage("order selection"))?
    };
    let fitted = fit(&spec, &synthetic, None).map_err(Error::at_stage("sarimax fit"))?;
    info!(
        "{} filter {filter_id}: {spec} loglik {:.3} after {} iterations",
        target.name, fitted.log_likelihood, fitted.iterations
    );
    let mut smoothed = fitted.in_sample_predictions().map_err(Error::at_stage("sarimax fit"))?;
    smoothed.iter_mut().for_each(|v| *v = v.max(0.0));

    let forecast = Forecast::from_curve(
        filter_id,
        &target.name,
        start_date,
        smoothed,
        bias,
        Some(models.model_peak_value.r_squared),
        ForecastStatus::Forecast,
    );
    let trace = SsmTrace {
        calibration,
        prediction,
        synthetic,
        fit: fitted,
    };
    Ok((forecast, Some(trace)))
}

/// Pointwise mean of per-filter forecasts for one target.
pub fn average_forecasts(forecasts: &[Forecast]) -> Result<Forecast> {
    let first = forecasts
        .first()
        .ok_or_else(|| Error::Parameter("nothing to average".into()))?;
    for f in forecasts {
        if f.target_country != first.target_country {
            return Err(Error::Parameter(format!(
                "cannot average forecasts for `{}` and `{}`",
                first.target_country, f.target_country
            )));
        }
        if f.horizon() != first.horizon() || f.start_date != first.start_date {
            return Err(Error::Parameter(format!(
                "forecasts for `{}` disagree on their day range",
                first.target_country
            )));
        }
    }
    let k = forecasts.len() as f64;
    let curve: Vec<f64> = (0..first.horizon())
        .map(|t| forecasts.iter().map(|f| f.daily_predicted[t]).sum::<f64>() / k)
        .collect();
    let bias = forecasts.iter().map(|f| f.bias).sum::<f64>() / k;
    let status = if forecasts.iter().all(|f| f.status == ForecastStatus::AlreadyConverged) {
        ForecastStatus::AlreadyConverged
    } else {
        ForecastStatus::Forecast
    };
    Ok(Forecast::from_curve(
        AVERAGE_ID,
        &first.target_country,
        first.start_date,
        curve,
        bias,
        None,
        status,
    ))
}

/// `x` rounded to six significant digits, printed without an exponent.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("float formatting round-trips");
    rounded.to_string()
}

/// Writes `day_index,date,filter_id,predicted_new_cases`, one block per
/// forecast in the given order.
pub fn write_forecast_csv<W: Write>(forecasts: &[Forecast], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["day_index", "date", "filter_id", "predicted_new_cases"])?;
    for f in forecasts {
        for (day, value) in f.daily_predicted.iter().enumerate() {
            writer.write_record([
                day.to_string(),
                f.date_of(day).format("%Y-%m-%d").to_string(),
                f.filter_id.clone(),
                format_sig6(*value),
            ])?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRow {
    pub filter_id: String,
    pub peak_day: usize,
    pub peak_date: NaiveDate,
    pub peak_value: f64,
    pub total_cases: f64,
    pub r_squared: Option<f64>,
    pub status: ForecastStatus,
}

impl From<&Forecast> for ForecastRow {
    fn from(f: &Forecast) -> Self {
        Self {
            filter_id: f.filter_id.clone(),
            peak_day: f.peak_day,
            peak_date: f.date_of(f.peak_day),
            peak_value: f.peak_value,
            total_cases: f.total_cases,
            r_squared: f.r_squared,
            status: f.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastSummary {
    pub target: String,
    pub per_filter: Vec<ForecastRow>,
    pub average: ForecastRow,
}

impl ForecastSummary {
    pub fn new(per_filter: &[Forecast], average: &Forecast) -> Self {
        Self {
            target: average.target_country.clone(),
            per_filter: per_filter.iter().map(ForecastRow::from).collect(),
            average: ForecastRow::from(average),
        }
    }
}
