use serde::{Deserialize, Serialize};

use super::difference::integration_coefficients;
use super::fit::{difference_columns, SarimaxFit};
use super::kalman::filter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaxForecast {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Mean of the differenced series over the forecast horizon.
fn future_means(fit: &SarimaxFit, horizon: usize, future_exog: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
    let k = fit.spec.n_exog;
    let rows = match (k, future_exog) {
        (0, None) => return Ok(vec![fit.trend_const; horizon]),
        (0, Some(_)) => return Err(Error::Parameter("model has no exogenous regressors".into())),
        (_, None) => return Err(Error::Parameter(format!("{k} future exogenous columns required"))),
        (_, Some(rows)) => rows,
    };
    if rows.len() != horizon || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Parameter(format!("future exogenous matrix must be {horizon} x {k}")));
    }
    let past = fit
        .exog
        .as_ref()
        .ok_or_else(|| Error::Parameter("fit carries no exogenous history".into()))?;
    let all: Vec<Vec<f64>> = past.iter().chain(rows).cloned().collect();
    let columns = difference_columns(&fit.spec, &all)?;
    let start = columns[0].len() - horizon;
    Ok((start..columns[0].len())
        .map(|t| {
            fit.trend_const + columns.iter().zip(&fit.exog_beta).map(|(c, b)| c[t] * b).sum::<f64>()
        })
        .collect())
}

/// Multi-step forecasts with zero future innovations, re-integrated to the
/// original scale. Variances come from the state covariance of an augmented
/// system that carries the lagged observations the integration needs.
pub fn forecast(fit: &SarimaxFit, horizon: usize, future_exog: Option<&[Vec<f64>]>) -> Result<SarimaxForecast> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let means = future_means(fit, horizon, future_exog)?;
    let ss = fit.unit_state_space()?;
    let u = fit.arma_component()?;
    let filtered = filter(&ss, &[&u])?;

    let m = ss.dim;
    let delta = integration_coefficients(fit.spec.d, fit.spec.seasonal_d, fit.spec.period);
    let r = delta.len();
    let dim = m + r;

    let mut transition = vec![vec![0.0; dim]; dim];
    for i in 0..m {
        transition[i][0] = ss.transition_column[i];
        if i + 1 < m {
            transition[i][i + 1] = 1.0;
        }
    }
    if r > 0 {
        transition[m][0] = 1.0;
        for (i, d) in delta.iter().enumerate() {
            transition[m][m + i] = *d;
        }
        for i in 1..r {
            transition[m + i][m + i - 1] = 1.0;
        }
    }
    let mut selection = ss.selection.clone();
    selection.resize(dim, 0.0);

    let mut state = filtered.next_states[0].clone();
    let y = fit.endog();
    state.extend((0..r).map(|i| y[y.len() - 1 - i]));
    let mut cov = vec![vec![0.0; dim]; dim];
    for (i, row) in filtered.next_covariance.iter().enumerate() {
        cov[i][..m].copy_from_slice(row);
    }

    // Observation loading: y_t = mean_t + α_t[0] + Σ δ_i y_{t-i}.
    let mut design = vec![0.0; dim];
    design[0] = 1.0;
    design[m..].copy_from_slice(&delta);

    let mut mean = Vec::with_capacity(horizon);
    let mut variance = Vec::with_capacity(horizon);
    for &mu in &means {
        let value = mu + design.iter().zip(&state).map(|(z, a)| z * a).sum::<f64>();
        let var: f64 = (0..dim)
            .map(|i| design[i] * (0..dim).map(|j| cov[i][j] * design[j]).sum::<f64>())
            .sum();
        mean.push(value);
        variance.push(fit.sigma2 * var);

        let mut next: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| transition[i][j] * state[j]).sum())
            .collect();
        if r > 0 {
            // The lag slot receives the full forecast, mean included.
            next[m] += mu;
        }
        state = next;
        let tc: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| (0..dim).map(|k| transition[i][k] * cov[k][j]).sum()).collect())
            .collect();
        cov = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        (0..dim).map(|k| tc[i][k] * transition[j][k]).sum::<f64>()
                            + selection[i] * selection[j]
                    })
                    .collect()
            })
            .collect();
    }
    Ok(SarimaxForecast { mean, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sarimax::{ArmaParams, SarimaxSpec};

    #[test]
    fn random_walk_is_flat() {
        let spec = SarimaxSpec::arima(0, 1, 0);
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 0.0, &[], 1.0, &[3.0, 5.0, 8.0], None).unwrap();
        let f = forecast(&fit, 5, None).unwrap();
        assert!(f.mean.iter().all(|&v| v == 8.0), "{:?}", f.mean);
        assert_eq!(f.variance, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn ar1_halves() {
        let spec = SarimaxSpec::arima(1, 0, 0);
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::ar(&[0.5]), 0.0, &[], 1.0, &[1.0, -2.0, 8.0], None).unwrap();
        let f = forecast(&fit, 4, None).unwrap();
        assert_eq!(f.mean, vec![4.0, 2.0, 1.0, 0.5]);
        assert_eq!(f.variance[0], 1.0);
        assert!((f.variance[1] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn white_noise_is_flat_zero() {
        let spec = SarimaxSpec::arima(0, 0, 0);
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 0.0, &[], 2.5, &[1.0, -1.0], None).unwrap();
        let f = forecast(&fit, 3, None).unwrap();
        assert_eq!(f.mean, vec![0.0; 3]);
        assert_eq!(f.variance, vec![2.5; 3]);
    }

    #[test]
    fn drift_accumulates() {
        let spec = SarimaxSpec::arima(0, 1, 0);
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 2.0, &[], 1.0, &[1.0, 3.0], None).unwrap();
        assert_eq!(forecast(&fit, 3, None).unwrap().mean, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn seasonal_difference_repeats_the_last_cycle() {
        let spec = SarimaxSpec::seasonal((0, 0, 0), (0, 1, 0, 3));
        let y = [1.0, 5.0, 2.0, 1.0, 5.0, 2.0];
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 0.0, &[], 1.0, &y, None).unwrap();
        let f = forecast(&fit, 6, None).unwrap();
        assert_eq!(f.mean, vec![1.0, 5.0, 2.0, 1.0, 5.0, 2.0]);
        assert_eq!(f.variance, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn exog_is_required_and_checked() {
        let spec = SarimaxSpec::arima(0, 0, 0).with_exog(1);
        let x = vec![vec![1.0], vec![2.0]];
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 0.0, &[3.0], 1.0, &[3.0, 6.0], Some(&x)).unwrap();
        assert!(matches!(forecast(&fit, 2, None), Err(Error::Parameter(_))));
        assert!(matches!(forecast(&fit, 2, Some(&[vec![1.0]])), Err(Error::Parameter(_))));
        let f = forecast(&fit, 2, Some(&[vec![1.0], vec![-1.0]])).unwrap();
        assert_eq!(f.mean, vec![3.0, -3.0]);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let spec = SarimaxSpec::arima(0, 0, 0);
        let fit = SarimaxFit::from_parts(&spec, &ArmaParams::default(), 0.0, &[], 1.0, &[1.0], None).unwrap();
        assert!(forecast(&fit, 0, None).is_err());
    }
}
