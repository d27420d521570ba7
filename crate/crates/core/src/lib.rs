//! Forecasting pipeline for daily epidemic case counts: snapshot ingestion,
//! converged-country cohorts, peak regressions, a from-scratch SARIMAX
//! estimator, and the rising/falling mean-ratio forecast built on top.

pub mod error;
pub mod filters;
pub mod ingest;
pub mod regression;
pub mod sarimax;
pub mod ssm;

pub use error::{Error, Result};
