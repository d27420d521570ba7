use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Stage {
    /// First value of the series entering a `(1 - B)` step.
    Regular(f64),
    /// First `s` values entering a `(1 - B^s)` step.
    Seasonal(Vec<f64>),
}

/// Values dropped by [`difference`], in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restoration {
    stages: Vec<Stage>,
}

impl Restoration {
    pub fn dropped(&self) -> usize {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::Regular(_) => 1,
                Stage::Seasonal(v) => v.len(),
            })
            .sum()
    }
}

/// Applies `(1 - B)^d (1 - B^s)^D`.
pub fn difference(
    series: &[f64],
    d: usize,
    seasonal_d: usize,
    period: usize,
) -> Result<(Vec<f64>, Restoration)> {
    if seasonal_d > 0 && period == 0 {
        return Err(Error::Parameter("seasonal differencing needs a period".into()));
    }
    let consumed = d + seasonal_d * period;
    if series.len() <= consumed {
        return Err(Error::InsufficientData(format!(
            "differencing consumes {consumed} of {} observations",
            series.len()
        )));
    }
    let mut current = series.to_vec();
    let mut stages = Vec::with_capacity(d + seasonal_d);
    for _ in 0..d {
        stages.push(Stage::Regular(current[0]));
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..seasonal_d {
        stages.push(Stage::Seasonal(current[..period].to_vec()));
        current = (period..current.len())
            .map(|t| current[t] - current[t - period])
            .collect();
    }
    Ok((current, Restoration { stages }))
}

/// Inverse of [`difference`].
pub fn undifference(diffed: &[f64], restoration: &Restoration) -> Vec<f64> {
    let mut current = diffed.to_vec();
    for stage in restoration.stages.iter().rev() {
        current = match stage {
            Stage::Regular(first) => {
                let mut out = Vec::with_capacity(current.len() + 1);
                out.push(*first);
                for v in &current {
                    let prev = *out.last().expect("seeded");
                    out.push(prev + v);
                }
                out
            }
            Stage::Seasonal(head) => {
                let mut out = head.clone();
                out.reserve(current.len());
                for (i, v) in current.iter().enumerate() {
                    let prev = out[i];
                    out.push(prev + v);
                }
                out
            }
        };
    }
    current
}

/// Coefficients `δ` with `y_t = w_t + Σ_i δ_i y_{t-i}`, where `w` is the
/// differenced series. `δ[0]` is lag 1.
pub fn integration_coefficients(d: usize, seasonal_d: usize, period: usize) -> Vec<f64> {
    // Expand (1 - B)^d (1 - B^s)^D, then negate everything past lag 0.
    let mut poly = vec![1.0];
    let mut mul = |factor: &[f64]| {
        let mut out = vec![0.0; poly.len() + factor.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        poly = out;
    };
    for _ in 0..d {
        mul(&[1.0, -1.0]);
    }
    if period > 0 {
        let mut seasonal = vec![0.0; period + 1];
        seasonal[0] = 1.0;
        seasonal[period] = -1.0;
        for _ in 0..seasonal_d {
            mul(&seasonal);
        }
    }
    poly[1..].iter().map(|c| -c).collect()
}
