//! Seasonal ARIMA with exogenous regressors, estimated by exact Gaussian
//! maximum likelihood.
//!
//! The series is differenced up front; the remaining stationary ARMA part
//! is cast in Harvey's companion state-space form and its likelihood is
//! evaluated with a Kalman filter started from the stationary state
//! covariance. The regression constant and exogenous coefficients are
//! concentrated out by GLS and the innovation variance analytically, so
//! the simplex search runs over the ARMA coefficients alone, each block
//! mapped through a partial-autocorrelation transform that keeps it
//! stationary (AR) or invertible (MA).

mod difference;
mod fit;
mod forecast;
mod kalman;
pub mod optimize;
mod polynomial;
mod select;
mod state_space;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use difference::{difference, integration_coefficients, undifference, Restoration};
pub use fit::{fit, FitOptions, SarimaxFit};
pub use forecast::{forecast, SarimaxForecast};
pub use kalman::{kalman_loglik, stationary_covariance};
pub use polynomial::{
    constrain_stationary, is_stationary, multiply_ar, multiply_ma, unconstrain_stationary,
};
pub use select::select_order;
pub use state_space::{build_state_space, ArmaParams, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SarimaxSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    /// Seasonal period in days; 0 disables the seasonal part.
    pub period: usize,
    #[serde(default)]
    pub n_exog: usize,
}

impl SarimaxSpec {
    pub const fn arima(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 0,
            n_exog: 0,
        }
    }

    pub const fn seasonal(
        (p, d, q): (usize, usize, usize),
        (seasonal_p, seasonal_d, seasonal_q, period): (usize, usize, usize, usize),
    ) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            period,
            n_exog: 0,
        }
    }

    pub const fn with_exog(mut self, n_exog: usize) -> Self {
        self.n_exog = n_exog;
        self
    }

    /// Pipeline default: (2,1,2)(1,0,1,7).
    pub const fn pipeline_default() -> Self {
        Self::seasonal((2, 1, 2), (1, 0, 1, 7))
    }

    /// Observations consumed by differencing.
    pub fn differencing_order(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }

    pub fn ar_order(&self) -> usize {
        self.p + self.seasonal_p * self.period
    }

    pub fn ma_order(&self) -> usize {
        self.q + self.seasonal_q * self.period
    }

    pub fn state_dim(&self) -> usize {
        self.ar_order().max(self.ma_order() + 1)
    }

    pub fn n_arma_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Everything estimated: ARMA terms, constant, exogenous betas, variance.
    pub fn n_params(&self) -> usize {
        self.n_arma_params() + 1 + self.n_exog + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 && (self.seasonal_p | self.seasonal_d | self.seasonal_q) != 0 {
            return Err(Error::Parameter(format!(
                "{self}: seasonal orders need a period"
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.differencing_order() >= n {
            return Err(Error::InsufficientData(format!(
                "{self}: differencing consumes {} of {n} observations",
                self.differencing_order()
            )));
        }
        Ok(())
    }
}

impl Default for SarimaxSpec {
    fn default() -> Self {
        Self::pipeline_default()
    }
}

impl fmt::Display for SarimaxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.period > 0 {
            write!(
                f,
                "({},{},{},{})",
                self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period
            )?;
        }
        if self.n_exog > 0 {
            write!(f, "+{} exog", self.n_exog)?;
        }
        Ok(())
    }
}
