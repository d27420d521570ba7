//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `[intercept, slopes...]` from the normal equations with an intercept column.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let k = rows[0].len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            xty[i] += r[i] * yi;
            for j in 0..k {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Autocovariances `γ_0..γ_{lags-1}` of a stationary AR process, from the
/// Yule–Walker equations.
pub fn ar_autocovariance(phi: &[f64], sigma2: f64, lags: usize) -> Vec<f64> {
    let p = phi.len();
    // Unknowns γ_0..γ_p: γ_k − Σ_j φ_j γ_|k−j| = σ² [k = 0].
    let mut a = vec![vec![0.0; p + 1]; p + 1];
    let mut b = vec![0.0; p + 1];
    for k in 0..=p {
        a[k][k] += 1.0;
        for (j, &f) in phi.iter().enumerate() {
            let lag = (k as isize - (j as isize + 1)).unsigned_abs();
            a[k][lag] -= f;
        }
    }
    b[0] = sigma2;
    let mut gamma = gauss_solve(a, b);
    while gamma.len() < lags {
        let k = gamma.len();
        let next = phi.iter().enumerate().map(|(j, f)| f * gamma[k - j - 1]).sum();
        gamma.push(next);
    }
    gamma.truncate(lags);
    gamma
}

/// Log density of `y ~ N(0, Σ)` with Toeplitz `Σ_ij = γ_|i−j|`, via Cholesky.
pub fn toeplitz_log_density(gamma: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            let a = gamma[i.abs_diff(j)];
            if i == j {
                l[i][i] = (a - s).sqrt();
            } else {
                l[i][j] = (a - s) / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (y[i] - s) / l[i][i];
    }
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

/// Conditional least squares for AR(1) with a constant: `(c, φ)`.
pub fn ar1_conditional_least_squares(y: &[f64]) -> (f64, f64) {
    let x: Vec<Vec<f64>> = y[..y.len() - 1].iter().map(|&v| vec![v]).collect();
    let beta = ols_normal_equations(&x, &y[1..]);
    (beta[0], beta[1])
}

/// AR(1) path with unit-variance innovations after a 200-step burn-in.
pub fn simulate_ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut y = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + 200 {
        y = phi * y + normal.sample(&mut rng);
        if t >= 200 {
            out.push(y);
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Bell-shaped daily counts peaking at `peak_day`, observed for `n` days.
pub fn hump(n: usize, peak_day: f64, height: f64, rise: f64, fall: f64) -> Vec<u64> {
    (0..n)
        .map(|t| {
            let t = t as f64;
            let width = if t <= peak_day { rise } else { fall };
            (1.0 + height * (-0.5 * ((t - peak_day) / width).powi(2)).exp()).round() as u64
        })
        .collect()
}

pub fn country(
    name: &str,
    population: u64,
    density: f64,
    lead_in: usize,
    daily: &[u64],
) -> ssm_core::ingest::CountrySeries {
    let mut cumulative = vec![0; lead_in];
    let mut total = 0;
    for &d in daily {
        total += d;
        cumulative.push(total);
    }
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 22).unwrap();
    ssm_core::ingest::CountrySeries::from_cumulative(name, "", population, density, start, cumulative).unwrap()
}
