use std::thread;

use log::debug;

use super::fit::fit;
use super::SarimaxSpec;
use crate::error::{Error, Result};

/// Fits every candidate (concurrently) and returns the one with the lowest
/// AIC. Ties go to the candidate with fewer parameters, then to the earlier
/// grid entry. Candidates that fail to fit are skipped.
pub fn select_order(series: &[f64], grid: &[SarimaxSpec]) -> Result<SarimaxSpec> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty order grid".into()));
    }
    let results: Vec<Result<f64>> = thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|spec| scope.spawn(move || fit(spec, series, None).map(|f| f.aic)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fit thread panicked"))
            .collect()
    });

    let mut best: Option<(usize, f64)> = None;
    let mut failures = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(aic) => {
                debug!("{}: aic {aic}", grid[i]);
                let better = best.is_none_or(|(b, best_aic)| {
                    aic < best_aic || (aic == best_aic && grid[i].n_params() < grid[b].n_params())
                });
                if better {
                    best = Some((i, aic));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", grid[i])),
        }
    }
    best.map(|(i, _)| grid[i]).ok_or_else(|| {
        Error::FitFailure(format!("every candidate failed: {}", failures.join("; ")))
    })
}
