//! Lag polynomials and the partial-autocorrelation reparameterization.
//!
//! AR coefficients follow `1 - φ₁B - … - φₚBᵖ`, MA coefficients
//! `1 + θ₁B + … + θ_qB^q`. Coefficient vectors start at lag 1.

use crate::error::{Error, Result};

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn seasonal_poly(coeffs: &[f64], period: usize, sign: f64) -> Vec<f64> {
    let mut poly = vec![0.0; coeffs.len() * period + 1];
    poly[0] = 1.0;
    for (k, c) in coeffs.iter().enumerate() {
        poly[(k + 1) * period] = sign * c;
    }
    poly
}

/// Expanded AR coefficients of `φ(B) Φ(B^s)`.
pub fn multiply_ar(ar: &[f64], seasonal_ar: &[f64], period: usize) -> Vec<f64> {
    let short = seasonal_poly(ar, 1, -1.0);
    let long = seasonal_poly(seasonal_ar, period.max(1), -1.0);
    multiply(&short, &long)[1..].iter().map(|c| -c).collect()
}

/// Expanded MA coefficients of `θ(B) Θ(B^s)`.
pub fn multiply_ma(ma: &[f64], seasonal_ma: &[f64], period: usize) -> Vec<f64> {
    let short = seasonal_poly(ma, 1, 1.0);
    let long = seasonal_poly(seasonal_ma, period.max(1), 1.0);
    multiply(&short, &long)[1..].to_vec()
}

/// Step-down recursion: AR coefficients back to partial autocorrelations.
/// `None` once a partial autocorrelation reaches the unit circle.
fn partial_autocorrelations(phi: &[f64]) -> Option<Vec<f64>> {
    let mut a = phi.to_vec();
    let mut pacf = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let r = a[k];
        if !r.is_finite() || r.abs() >= 1.0 {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (0..k).map(|j| (a[j] + r * a[k - 1 - j]) / denom).collect();
        a = prev;
    }
    Some(pacf)
}

/// True when every root of `1 - φ₁z - … - φₚzᵖ` lies outside the unit circle.
pub fn is_stationary(phi: &[f64]) -> bool {
    partial_autocorrelations(phi).is_some()
}

/// Maps unconstrained reals to a stationary AR coefficient vector: each
/// input becomes a partial autocorrelation `x / sqrt(1 + x²)`, then
/// Durbin–Levinson builds the coefficients.
pub fn constrain_stationary(unconstrained: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(unconstrained.len());
    for (k, x) in unconstrained.iter().enumerate() {
        let r = x / (1.0 + x * x).sqrt();
        let mut next: Vec<f64> = (0..k).map(|j| phi[j] - r * phi[k - 1 - j]).collect();
        next.push(r);
        phi = next;
    }
    phi
}

/// Inverse of [`constrain_stationary`].
pub fn unconstrain_stationary(phi: &[f64]) -> Result<Vec<f64>> {
    let pacf = partial_autocorrelations(phi)
        .ok_or_else(|| Error::Rejected(format!("{phi:?} is not stationary")))?;
    Ok(pacf.iter().map(|r| r / (1.0 - r * r).sqrt()).collect())
}
