use log::debug;
use serde::{Deserialize, Serialize};

use super::difference::difference;
use super::kalman::{concentrated_loglik, filter};
use super::optimize::NelderMead;
use super::polynomial::constrain_stationary;
use super::state_space::{build_state_space, ArmaParams, StateSpace};
use super::SarimaxSpec;
use crate::error::{Error, Result};

/// Observations required per optimized coefficient.
const OBS_PER_PARAM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub optimizer: NelderMead,
    /// Extra searches from fixed perturbations of the origin.
    pub restarts: usize,
    /// Estimate a constant in the differenced equation (a drift when `d > 0`).
    pub include_constant: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: NelderMead::default(),
            restarts: 3,
            include_constant: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaxFit {
    pub spec: SarimaxSpec,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub exog_beta: Vec<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub trend_const: f64,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub(crate) endog: Vec<f64>,
    #[serde(skip)]
    pub(crate) exog: Option<Vec<Vec<f64>>>,
}

/// Differenced response and regressor columns.
struct Prepared {
    w: Vec<f64>,
    /// Constant column first when requested, then differenced exogenous columns.
    regressors: Vec<Vec<f64>>,
}

pub(crate) fn difference_columns(spec: &SarimaxSpec, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    (0..spec.n_exog)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            difference(&column, spec.d, spec.seasonal_d, spec.period).map(|(c, _)| c)
        })
        .collect()
}

fn check_exog(spec: &SarimaxSpec, n: usize, exog: Option<&[Vec<f64>]>) -> Result<()> {
    match exog {
        None if spec.n_exog == 0 => Ok(()),
        None => Err(Error::Parameter(format!("{spec} needs {} exogenous columns", spec.n_exog))),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != spec.n_exog) {
                return Err(Error::Parameter(format!(
                    "exogenous matrix must be {n} x {}",
                    spec.n_exog
                )));
            }
            Ok(())
        }
    }
}

fn prepare(spec: &SarimaxSpec, series: &[f64], exog: Option<&[Vec<f64>]>, constant: bool) -> Result<Prepared> {
    let (w, _) = difference(series, spec.d, spec.seasonal_d, spec.period)?;
    let mut regressors = Vec::new();
    if constant {
        regressors.push(vec![1.0; w.len()]);
    }
    if let Some(rows) = exog {
        regressors.extend(difference_columns(spec, rows)?);
    }
    Ok(Prepared { w, regressors })
}

fn params_from(spec: &SarimaxSpec, x: &[f64]) -> ArmaParams {
    let (ar, rest) = x.split_at(spec.p);
    let (ma, rest) = rest.split_at(spec.q);
    let (sar, sma) = rest.split_at(spec.seasonal_p);
    let invertible = |v: &[f64]| constrain_stationary(v).into_iter().map(|c| -c).collect();
    ArmaParams {
        ar: constrain_stationary(ar),
        ma: invertible(ma),
        seasonal_ar: constrain_stationary(sar),
        seasonal_ma: invertible(sma),
    }
}

/// Deterministic starting points: the origin, then `restarts` points at
/// distance `0.1·k` per coordinate with alternating signs.
fn starting_points(k: usize, restarts: usize) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; k]];
    for r in 1..=restarts {
        starts.push(
            (0..k)
                .map(|j| {
                    let sign = if (j + r) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * 0.1 * r as f64
                })
                .collect(),
        );
    }
    starts
}

/// Maximum-likelihood fit with default options.
pub fn fit(spec: &SarimaxSpec, series: &[f64], exog: Option<&[Vec<f64>]>) -> Result<SarimaxFit> {
    SarimaxFit::estimate(spec, series, exog, &FitOptions::default())
}

impl SarimaxFit {
    pub fn estimate(
        spec: &SarimaxSpec,
        series: &[f64],
        exog: Option<&[Vec<f64>]>,
        options: &FitOptions,
    ) -> Result<SarimaxFit> {
        let n = series.len();
        spec.validate_for(n)?;
        check_exog(spec, n, exog)?;
        let k = spec.n_arma_params();
        let needed = (OBS_PER_PARAM * k).max(spec.differencing_order() + 1);
        if n < needed {
            return Err(Error::InsufficientData(format!(
                "{spec} needs at least {needed} observations, got {n}"
            )));
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("series contains non-finite values".into()));
        }
        let prepared = prepare(spec, series, exog, options.include_constant)?;
        if k > 0 && prepared.w.iter().all(|&v| v == prepared.w[0]) {
            return Err(Error::FitFailure(format!(
                "{spec}: series is constant after differencing"
            )));
        }

        let objective = |x: &[f64]| -> f64 {
            let params = params_from(spec, x);
            match build_state_space(spec, &params, 1.0)
                .and_then(|ss| concentrated_loglik(&ss, &prepared.w, &prepared.regressors))
            {
                Ok(c) => -c.log_likelihood,
                Err(_) => f64::INFINITY,
            }
        };

        let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
        for start in starting_points(k, options.restarts) {
            let min = options.optimizer.minimize(objective, &start);
            debug!(
                "{spec}: start {start:?} -> -loglik {} after {} iterations",
                min.value, min.iterations
            );
            if !min.value.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|b| min.value < b.1) {
                best = Some((min.x, min.value, min.iterations, min.converged));
            }
        }
        let (x, _, iterations, converged) = best.ok_or_else(|| {
            Error::FitFailure(format!("{spec}: likelihood is non-finite at every start"))
        })?;

        let params = params_from(spec, &x);
        let ss = build_state_space(spec, &params, 1.0)?;
        let c = concentrated_loglik(&ss, &prepared.w, &prepared.regressors)?;
        let (trend_const, exog_beta) = if options.include_constant {
            (c.beta[0], c.beta[1..].to_vec())
        } else {
            (0.0, c.beta.clone())
        };
        let n_estimated = k + usize::from(options.include_constant) + spec.n_exog + 1;
        Ok(SarimaxFit {
            spec: *spec,
            ar: params.ar,
            ma: params.ma,
            seasonal_ar: params.seasonal_ar,
            seasonal_ma: params.seasonal_ma,
            exog_beta,
            sigma2: c.sigma2,
            log_likelihood: c.log_likelihood,
            aic: 2.0 * n_estimated as f64 - 2.0 * c.log_likelihood,
            trend_const,
            n_obs: n,
            iterations,
            converged,
            endog: series.to_vec(),
            exog: exog.map(<[Vec<f64>]>::to_vec),
        })
    }

    /// A fit with given parameters, for evaluating or forecasting a known
    /// model. The likelihood and AIC are evaluated on `series`.
    pub fn from_parts(
        spec: &SarimaxSpec,
        params: &ArmaParams,
        trend_const: f64,
        exog_beta: &[f64],
        sigma2: f64,
        series: &[f64],
        exog: Option<&[Vec<f64>]>,
    ) -> Result<SarimaxFit> {
        spec.validate_for(series.len())?;
        check_exog(spec, series.len(), exog)?;
        if exog_beta.len() != spec.n_exog {
            return Err(Error::Parameter(format!(
                "{} exogenous coefficients for {spec}",
                exog_beta.len()
            )));
        }
        let mut ss = build_state_space(spec, params, sigma2)?;
        ss.intercept = trend_const;
        ss.exog_beta = exog_beta.to_vec();
        let prepared = prepare(spec, series, exog, false)?;
        let rows: Option<Vec<Vec<f64>>> = (spec.n_exog > 0).then(|| {
            (0..prepared.w.len())
                .map(|t| prepared.regressors.iter().map(|c| c[t]).collect())
                .collect()
        });
        let log_likelihood = super::kalman_loglik(&ss, &prepared.w, rows.as_deref())?;
        let n_estimated = spec.n_params();
        Ok(SarimaxFit {
            spec: *spec,
            ar: params.ar.clone(),
            ma: params.ma.clone(),
            seasonal_ar: params.seasonal_ar.clone(),
            seasonal_ma: params.seasonal_ma.clone(),
            exog_beta: exog_beta.to_vec(),
            sigma2,
            log_likelihood,
            aic: 2.0 * n_estimated as f64 - 2.0 * log_likelihood,
            trend_const,
            n_obs: series.len(),
            iterations: 0,
            converged: true,
            endog: series.to_vec(),
            exog: exog.map(<[Vec<f64>]>::to_vec),
        })
    }

    pub fn params(&self) -> ArmaParams {
        ArmaParams {
            ar: self.ar.clone(),
            ma: self.ma.clone(),
            seasonal_ar: self.seasonal_ar.clone(),
            seasonal_ma: self.seasonal_ma.clone(),
        }
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        let mut ss = build_state_space(&self.spec, &self.params(), self.sigma2)?;
        ss.intercept = self.trend_const;
        ss.exog_beta = self.exog_beta.clone();
        Ok(ss)
    }

    /// The series the model was fitted on (empty after deserialization).
    pub fn endog(&self) -> &[f64] {
        &self.endog
    }

    /// The differenced series with the fitted constant and regression
    /// terms removed: what the ARMA part models.
    pub(crate) fn arma_component(&self) -> Result<Vec<f64>> {
        if self.endog.is_empty() {
            return Err(Error::Parameter("fit carries no series".into()));
        }
        let prepared = prepare(&self.spec, &self.endog, self.exog.as_deref(), false)?;
        Ok((0..prepared.w.len())
            .map(|t| {
                let x: f64 = prepared.regressors.iter().zip(&self.exog_beta).map(|(c, b)| c[t] * b).sum();
                prepared.w[t] - self.trend_const - x
            })
            .collect())
    }

    pub(crate) fn unit_state_space(&self) -> Result<StateSpace> {
        Ok(build_state_space(&self.spec, &self.params(), 1.0)?.unit())
    }

    /// One-step-ahead predictions of the original series. The first
    /// `d + D·s` values, which differencing consumes, are returned as
    /// observed.
    pub fn in_sample_predictions(&self) -> Result<Vec<f64>> {
        let u = self.arma_component()?;
        let errors = filter(&self.unit_state_space()?, &[&u])?;
        let skip = self.spec.differencing_order();
        // Integration is linear in past observations, so the one-step error
        // of `y_t` is that of the differenced value.
        let mut out = self.endog[..skip].to_vec();
        out.extend(self.endog[skip..].iter().zip(&errors.errors[0]).map(|(y, e)| y - e));
        Ok(out)
    }
}
