//! Harvey's companion form of an ARMA process:
//!
//! ```text
//! y_t     = Z α_t + μ_t              Z = [1, 0, …, 0]
//! α_{t+1} = T α_t + R ε_t            ε_t ~ N(0, σ²)
//! ```
//!
//! `T` carries the expanded AR coefficients in its first column and ones on
//! the superdiagonal; `R = [1, θ₁, …, θ_{m-1}]`.

use serde::{Deserialize, Serialize};

use super::polynomial::{is_stationary, multiply_ar, multiply_ma};
use super::SarimaxSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
}

impl ArmaParams {
    pub fn zeros(spec: &SarimaxSpec) -> Self {
        Self {
            ar: vec![0.0; spec.p],
            ma: vec![0.0; spec.q],
            seasonal_ar: vec![0.0; spec.seasonal_p],
            seasonal_ma: vec![0.0; spec.seasonal_q],
        }
    }

    pub fn ar(ar: &[f64]) -> Self {
        Self {
            ar: ar.to_vec(),
            ..Self::default()
        }
    }

    pub fn arma(ar: &[f64], ma: &[f64]) -> Self {
        Self {
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            ..Self::default()
        }
    }

    fn check_shape(&self, spec: &SarimaxSpec) -> Result<()> {
        let dims = [
            (self.ar.len(), spec.p, "ar"),
            (self.ma.len(), spec.q, "ma"),
            (self.seasonal_ar.len(), spec.seasonal_p, "seasonal_ar"),
            (self.seasonal_ma.len(), spec.seasonal_q, "seasonal_ma"),
        ];
        for (got, want, name) in dims {
            if got != want {
                return Err(Error::Parameter(format!(
                    "{spec}: {name} has {got} coefficients, expected {want}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    /// First column of `T` (expanded AR coefficients padded to `dim`).
    pub transition_column: Vec<f64>,
    /// `R`, length `dim`.
    pub selection: Vec<f64>,
    pub dim: usize,
    pub sigma2: f64,
    /// Observation intercept (the regression constant).
    pub intercept: f64,
    pub exog_beta: Vec<f64>,
}

impl StateSpace {
    /// Dense `T`.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.dim;
        (0..m)
            .map(|i| {
                let mut row = vec![0.0; m];
                row[0] = self.transition_column[i];
                if i + 1 < m {
                    row[i + 1] += 1.0;
                }
                row
            })
            .collect()
    }

    /// `Z`.
    pub fn design(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        z[0] = 1.0;
        z
    }

    /// The same dynamics with unit innovation variance and no mean terms.
    pub(crate) fn unit(&self) -> StateSpace {
        StateSpace {
            sigma2: 1.0,
            intercept: 0.0,
            exog_beta: Vec::new(),
            ..self.clone()
        }
    }
}

/// Builds the state space for `spec` at `params`. Non-stationary AR or
/// non-invertible MA polynomials are rejected with [`Error::Rejected`],
/// which the optimizer treats as an infinite penalty.
pub fn build_state_space(spec: &SarimaxSpec, params: &ArmaParams, sigma2: f64) -> Result<StateSpace> {
    spec.validate()?;
    params.check_shape(spec)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !is_stationary(&params.ar) || !is_stationary(&params.seasonal_ar) {
        return Err(Error::Rejected(format!("{spec}: AR polynomial is not stationary")));
    }
    let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
    if !is_stationary(&neg(&params.ma)) || !is_stationary(&neg(&params.seasonal_ma)) {
        return Err(Error::Rejected(format!("{spec}: MA polynomial is not invertible")));
    }

    let phi = multiply_ar(&params.ar, &params.seasonal_ar, spec.period);
    let theta = multiply_ma(&params.ma, &params.seasonal_ma, spec.period);
    let dim = spec.state_dim();
    let mut transition_column = vec![0.0; dim];
    transition_column[..phi.len()].copy_from_slice(&phi);
    let mut selection = vec![0.0; dim];
    selection[0] = 1.0;
    selection[1..=theta.len()].copy_from_slice(&theta);

    Ok(StateSpace {
        transition_column,
        selection,
        dim,
        sigma2,
        intercept: 0.0,
        exog_beta: vec![0.0; spec.n_exog],
    })
}
