use std::f64::consts::PI;

use super::state_space::StateSpace;
use crate::error::{Error, Result};
use crate::regression::solve_pivoted_cholesky;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_DOUBLINGS: usize = 64;

/// Square matrix stored row-major.
#[derive(Clone)]
struct Mat {
    m: usize,
    data: Vec<f64>,
}

impl Mat {
    fn zeros(m: usize) -> Self {
        Self { m, data: vec![0.0; m * m] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] = v;
    }

    fn mul(&self, other: &Mat) -> Mat {
        let m = self.m;
        let mut out = Mat::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out.data[i * m + j] += a * other.data[k * m + j];
                }
            }
        }
        out
    }

    fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                out.set(j, i, self.at(i, j));
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.m).map(<[f64]>::to_vec).collect()
    }
}

/// Solves `P = T P Tᵀ + R Rᵀ` by doubling, with unit innovation variance.
fn unit_stationary_covariance(ss: &StateSpace) -> Result<Mat> {
    let m = ss.dim;
    let mut a = Mat::zeros(m);
    for i in 0..m {
        a.set(i, 0, ss.transition_column[i]);
        if i + 1 < m {
            a.set(i, i + 1, 1.0);
        }
    }
    let mut p = Mat::zeros(m);
    for i in 0..m {
        for j in 0..m {
            p.set(i, j, ss.selection[i] * ss.selection[j]);
        }
    }
    for _ in 0..MAX_DOUBLINGS {
        let increment = a.mul(&p).mul(&a.transpose());
        for (x, d) in p.data.iter_mut().zip(&increment.data) {
            *x += d;
        }
        if !p.max_abs().is_finite() {
            break;
        }
        if increment.max_abs() <= 1e-15 * p.max_abs() {
            // Symmetrize away rounding drift.
            for i in 0..m {
                for j in 0..i {
                    let v = 0.5 * (p.at(i, j) + p.at(j, i));
                    p.set(i, j, v);
                    p.set(j, i, v);
                }
            }
            return Ok(p);
        }
        a = a.mul(&a);
    }
    Err(Error::NonFiniteLikelihood(
        "stationary covariance did not converge".into(),
    ))
}

/// Unconditional state covariance `σ² P` of the stationary process.
pub fn stationary_covariance(ss: &StateSpace) -> Result<Vec<Vec<f64>>> {
    let mut p = unit_stationary_covariance(ss)?;
    p.data.iter_mut().for_each(|x| *x *= ss.sigma2);
    Ok(p.to_rows())
}

/// One-step prediction errors of several series pushed through the same
/// unit-variance filter. Gains and variances do not depend on the data, so
/// all columns share `variances`.
pub(crate) struct Innovations {
    pub errors: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    /// Predicted state `a_{n+1|n}` of each column after the last step.
    pub next_states: Vec<Vec<f64>>,
    /// Unit-variance `P_{n+1|n}`.
    pub next_covariance: Vec<Vec<f64>>,
}

pub(crate) fn filter(ss: &StateSpace, columns: &[&[f64]]) -> Result<Innovations> {
    let m = ss.dim;
    let n = columns.first().map_or(0, |c| c.len());
    let phi = &ss.transition_column;
    let r = &ss.selection;
    let mut p = unit_stationary_covariance(ss)?;
    let mut tp = Mat::zeros(m);
    let mut gain = vec![0.0; m];
    let mut states = vec![vec![0.0; m]; columns.len()];
    let mut errors = vec![Vec::with_capacity(n); columns.len()];
    let mut variances = Vec::with_capacity(n);

    for t in 0..n {
        let f = p.at(0, 0);
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::NonFiniteLikelihood(format!(
                "prediction variance {f} at step {t}"
            )));
        }
        variances.push(f);
        for i in 0..m {
            gain[i] = p.at(i, 0) / f;
        }

        for (c, column) in columns.iter().enumerate() {
            let a = &mut states[c];
            let v = column[t] - a[0];
            errors[c].push(v);
            for i in 0..m {
                a[i] += gain[i] * v;
            }
            let head = a[0];
            for i in 0..m {
                a[i] = phi[i] * head + if i + 1 < m { a[i + 1] } else { 0.0 };
            }
        }

        for i in 0..m {
            let pi0 = p.at(i, 0);
            for j in 0..m {
                p.data[i * m + j] -= pi0 * gain[j];
            }
        }
        for i in 0..m {
            for j in 0..m {
                let below = if i + 1 < m { p.at(i + 1, j) } else { 0.0 };
                tp.set(i, j, phi[i] * p.at(0, j) + below);
            }
        }
        for i in 0..m {
            for j in 0..m {
                let right = if j + 1 < m { tp.at(i, j + 1) } else { 0.0 };
                p.set(i, j, phi[j] * tp.at(i, 0) + right + r[i] * r[j]);
            }
        }
    }
    Ok(Innovations {
        errors,
        variances,
        next_states: states,
        next_covariance: p.to_rows(),
    })
}

fn check_exog(ss: &StateSpace, n: usize, exog: Option<&[Vec<f64>]>) -> Result<()> {
    let k = ss.exog_beta.len();
    match exog {
        None if k == 0 => Ok(()),
        None => Err(Error::Parameter(format!("{k} exogenous coefficients but no regressors"))),
        Some(rows) => {
            if rows.len() != n {
                return Err(Error::Parameter(format!(
                    "exogenous matrix has {} rows for {n} observations",
                    rows.len()
                )));
            }
            if let Some(row) = rows.iter().find(|r| r.len() != k) {
                return Err(Error::Parameter(format!(
                    "exogenous row has {} columns, expected {k}",
                    row.len()
                )));
            }
            Ok(())
        }
    }
}

/// Exact Gaussian log-likelihood by prediction-error decomposition, with
/// the state started from its stationary distribution. `exog` holds one row
/// of regressors per observation.
pub fn kalman_loglik(ss: &StateSpace, observations: &[f64], exog: Option<&[Vec<f64>]>) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    check_exog(ss, observations.len(), exog)?;
    let y: Vec<f64> = observations
        .iter()
        .enumerate()
        .map(|(t, &obs)| {
            let x = exog.map_or(0.0, |rows| {
                rows[t].iter().zip(&ss.exog_beta).map(|(a, b)| a * b).sum()
            });
            obs - ss.intercept - x
        })
        .collect();
    let out = filter(&ss.unit(), &[&y])?;
    let ll = out.errors[0]
        .iter()
        .zip(&out.variances)
        .map(|(v, f)| {
            let f = ss.sigma2 * f;
            -0.5 * LN_2PI - 0.5 * f.ln() - v * v / (2.0 * f)
        })
        .sum::<f64>();
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::NonFiniteLikelihood(format!("log-likelihood {ll}")))
    }
}

/// Likelihood with regression coefficients and innovation variance
/// profiled out.
#[derive(Debug, Clone)]
pub(crate) struct Concentrated {
    pub log_likelihood: f64,
    pub sigma2: f64,
    /// One coefficient per regressor column.
    pub beta: Vec<f64>,
}

/// `regressors` are columns aligned with `w`. Collinear columns get a zero
/// coefficient.
pub(crate) fn concentrated_loglik(ss: &StateSpace, w: &[f64], regressors: &[Vec<f64>]) -> Result<Concentrated> {
    let n = w.len();
    if n == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let mut columns: Vec<&[f64]> = vec![w];
    columns.extend(regressors.iter().map(Vec::as_slice));
    let out = filter(&ss.unit(), &columns)?;
    let f = &out.variances;
    let vw = &out.errors[0];
    let vx = &out.errors[1..];

    let weighted = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(f).map(|((x, y), f)| x * y / f).sum()
    };
    let k = regressors.len();
    let mut active: Vec<usize> = (0..k).collect();
    let mut beta = vec![0.0; k];
    while !active.is_empty() {
        let gram: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| active.iter().map(|&j| weighted(&vx[i], &vx[j])).collect())
            .collect();
        let rhs: Vec<f64> = active.iter().map(|&i| weighted(&vx[i], vw)).collect();
        let scale = gram.iter().enumerate().fold(0.0_f64, |acc, (i, row)| acc.max(row[i]));
        match solve_pivoted_cholesky(gram, &rhs, 1e-10 * scale.max(f64::MIN_POSITIVE)) {
            Ok(solution) => {
                for (&i, b) in active.iter().zip(solution) {
                    beta[i] = b;
                }
                break;
            }
            Err(dropped) => {
                active.remove(dropped);
            }
        }
    }

    let residuals: Vec<f64> = (0..n)
        .map(|t| vw[t] - (0..k).map(|i| beta[i] * vx[i][t]).sum::<f64>())
        .collect();
    let ssr = weighted(&residuals, &residuals);
    let mean_sq = w.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let sigma2 = (ssr / n as f64).max(1e-10 * (1.0 + mean_sq));
    let log_det: f64 = f.iter().map(|f| f.ln()).sum();
    let ll = -0.5 * n as f64 * ((2.0 * PI).ln() + sigma2.ln()) - 0.5 * log_det - ssr / (2.0 * sigma2);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood(format!("log-likelihood {ll}")));
    }
    Ok(Concentrated {
        log_likelihood: ll,
        sigma2,
        beta,
    })
}
