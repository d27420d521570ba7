//! Ordinary least squares with an intercept, and the three peak models
//! trained on a converged cohort.
//!
//! Features are z-scored before solving so that population (~1e8) and
//! density (~1e2) sit on the same scale. The normal equations of the
//! standardized problem are solved with a diagonally pivoted Cholesky
//! factorization; a pivot that collapses identifies the dependent column.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{Cohort, CohortMember};
use crate::ingest::CountrySeries;

pub const FEATURE_NAMES: [&str; 3] = ["population", "cases_per_million", "population_density"];

/// Relative pivot threshold, scaled by the observation count.
const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsModel {
    /// Intercept in target units.
    pub intercept: f64,
    /// Per-feature slopes in target units per feature unit.
    pub coefficients: Vec<f64>,
    /// Slopes per standard deviation of each feature.
    pub standardized_coefficients: Vec<f64>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    /// In-sample `1 - SS_res / SS_tot`.
    pub r_squared: f64,
    pub n_obs: usize,
}

impl OlsModel {
    /// A model that ignores its inputs.
    pub fn constant(value: f64, n_features: usize) -> Self {
        Self {
            intercept: value,
            coefficients: vec![0.0; n_features],
            standardized_coefficients: vec![0.0; n_features],
            feature_means: vec![0.0; n_features],
            feature_scales: vec![1.0; n_features],
            r_squared: 0.0,
            n_obs: 0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }
}

pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsModel> {
    let k = x.first().map_or(0, Vec::len);
    let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    fit_ols_named(x, y, &names)
}

/// Like [`fit_ols`], naming design columns in errors.
pub fn fit_ols_named<S: AsRef<str>>(x: &[Vec<f64>], y: &[f64], names: &[S]) -> Result<OlsModel> {
    let n = x.len();
    let k = names.len();
    if y.len() != n {
        return Err(Error::Parameter(format!("{n} design rows but {} targets", y.len())));
    }
    if let Some(row) = x.iter().position(|r| r.len() != k) {
        return Err(Error::Parameter(format!(
            "design row {row} has {} columns, expected {k}",
            x[row].len()
        )));
    }
    if n < k + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} features plus intercept"
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("design or target contains non-finite values".into()));
    }

    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateTarget("y".into()));
    }

    let mut means = vec![0.0; k];
    let mut scales = vec![0.0; k];
    for j in 0..k {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / nf;
        let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / nf;
        means[j] = m;
        scales[j] = var.sqrt();
        if !(scales[j] > 0.0) {
            return Err(Error::SingularDesign(names[j].as_ref().to_string()));
        }
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..k).map(|j| (r[j] - means[j]) / scales[j]).collect())
        .collect();

    // Centered columns decouple the intercept: it is the target mean.
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (zi, yi) in z.iter().zip(y) {
        for a in 0..k {
            rhs[a] += zi[a] * (yi - y_mean);
            for b in 0..=a {
                gram[a][b] += zi[a] * zi[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[b][a] = gram[a][b];
        }
    }

    let beta = solve_pivoted_cholesky(gram, &rhs, PIVOT_TOLERANCE * nf)
        .map_err(|col| Error::SingularDesign(names[col].as_ref().to_string()))?;

    let coefficients: Vec<f64> = beta.iter().zip(&scales).map(|(b, s)| b / s).collect();
    let intercept = y_mean - coefficients.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();

    let ss_res: f64 = z
        .iter()
        .zip(y)
        .map(|(zi, yi)| {
            let fit = y_mean + zi.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            (yi - fit).powi(2)
        })
        .sum();

    Ok(OlsModel {
        intercept,
        coefficients,
        standardized_coefficients: beta,
        feature_means: means,
        feature_scales: scales,
        r_squared: 1.0 - ss_res / ss_tot,
        n_obs: n,
    })
}

/// Solves `A x = b` for symmetric positive semi-definite `A`. On a
/// collapsed pivot returns the lowest original index among the columns not
/// yet factored.
pub(crate) fn solve_pivoted_cholesky(
    mut a: Vec<Vec<f64>>,
    b: &[f64],
    tolerance: f64,
) -> std::result::Result<Vec<f64>, usize> {
    let k = b.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = vec![vec![0.0; k]; k];
    for j in 0..k {
        let p = (j..k)
            .max_by(|&u, &v| a[u][u].total_cmp(&a[v][v]).then(v.cmp(&u)))
            .expect("non-empty range");
        if a[p][p] <= tolerance {
            return Err(*perm[j..].iter().min().expect("non-empty"));
        }
        if p != j {
            a.swap(p, j);
            for row in a.iter_mut() {
                row.swap(p, j);
            }
            l.swap(p, j);
            perm.swap(p, j);
        }
        let d = a[j][j].sqrt();
        l[j][j] = d;
        for i in j + 1..k {
            l[i][j] = a[i][j] / d;
        }
        for i in j + 1..k {
            for m in j + 1..=i {
                let v = a[i][m] - l[i][j] * l[m][j];
                a[i][m] = v;
                a[m][i] = v;
            }
        }
    }
    // L Lᵀ c = Pᵀ b, then x = P c.
    let mut w: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    for i in 0..k {
        let s: f64 = (0..i).map(|m| l[i][m] * w[m]).sum();
        w[i] = (w[i] - s) / l[i][i];
    }
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| l[m][i] * w[m]).sum();
        w[i] = (w[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; k];
    for (pos, &orig) in perm.iter().enumerate() {
        x[orig] = w[pos];
    }
    Ok(x)
}

pub fn predict(model: &OlsModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features() {
        return Err(Error::Parameter(format!(
            "feature vector has {} entries, model expects {}",
            x.len(),
            model.n_features()
        )));
    }
    Ok(model.intercept + model.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
}

/// Population, current cases per million, population density.
pub fn features_of(country: &CountrySeries) -> Vec<f64> {
    vec![
        country.population as f64,
        country.cases_per_million(),
        country.population_density,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakRegression {
    pub filter_id: String,
    pub cohort_size: usize,
    /// Cases/day at the peak.
    pub model_peak_value: OlsModel,
    /// Days from first case to peak.
    pub model_peak_day: OlsModel,
    /// Cumulative cases at the snapshot date.
    pub model_total_cases: OlsModel,
}

pub const MIN_COHORT_FOR_REGRESSION: usize = 4;

pub fn fit_peak_models(cohort: &Cohort) -> Result<PeakRegression> {
    fit_peak_models_from(&cohort.filter.id, &cohort.members)
}

pub fn fit_peak_models_from(filter_id: &str, members: &[CohortMember]) -> Result<PeakRegression> {
    if members.len() < MIN_COHORT_FOR_REGRESSION {
        return Err(Error::InsufficientData(format!(
            "cohort `{filter_id}` has {} countries, regression needs {MIN_COHORT_FOR_REGRESSION}",
            members.len()
        )));
    }
    let x: Vec<Vec<f64>> = members.iter().map(|m| features_of(&m.country)).collect();
    let fit = |target: &str, y: Vec<f64>| {
        fit_ols_named(&x, &y, &FEATURE_NAMES).map_err(|e| Error::Target {
            target: target.to_string(),
            source: Box::new(e),
        })
    };
    Ok(PeakRegression {
        filter_id: filter_id.to_string(),
        cohort_size: members.len(),
        model_peak_value: fit("peak_value", members.iter().map(|m| m.peak.peak_value).collect())?,
        model_peak_day: fit("peak_day", members.iter().map(|m| m.peak.peak_day as f64).collect())?,
        model_total_cases: fit(
            "total_cases",
            members.iter().map(|m| m.country.total_cases() as f64).collect(),
        )?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakPrediction {
    /// Cases/day.
    pub peak_value: f64,
    /// Days since the first reported case.
    pub peak_day: usize,
    pub total_cases: f64,
}

pub fn predict_targets(models: &PeakRegression, target: &CountrySeries) -> Result<PeakPrediction> {
    if target.population == 0 {
        return Err(Error::Parameter(format!("`{}` has zero population", target.name)));
    }
    let x = features_of(target);
    let peak_day = predict(&models.model_peak_day, &x)?.round().max(0.0);
    Ok(PeakPrediction {
        peak_value: predict(&models.model_peak_value, &x)?.max(0.0),
        peak_day: peak_day as usize,
        total_cases: predict(&models.model_total_cases, &x)?.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn exact_line() {
        let m = fit_ols(&col(&[1.0, 2.0, 3.0]), &[2.0, 4.0, 6.0]).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.r_squared - 1.0).abs() < 1e-12);
        assert!((predict(&m, &[5.0]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exact_plane() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        let m = fit_ols(&x, &[1.0, 2.0, 3.0, 0.0]).unwrap();
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((m.r_squared - 1.0).abs() < 1e-12);
        assert!((predict(&m, &[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_at_feature_means_is_target_mean() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 3.0], vec![4.0, 4.0], vec![7.0, 1.0], vec![3.0, 9.0]];
        let y = [3.0, 1.0, 4.0, 1.0, 5.0];
        let m = fit_ols(&x, &y).unwrap();
        let at_mean = predict(&m, &m.feature_means).unwrap();
        assert!((at_mean - 2.8).abs() < 1e-12);
    }

    #[test]
    fn constant_model_ignores_inputs() {
        let m = OlsModel::constant(7.0, 3);
        assert_eq!(predict(&m, &[1e9, 5.0, -3.0]).unwrap(), 7.0);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let err = fit_ols(&col(&[1.0, 2.0, 3.0]), &[4.0, 4.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget(_)));
    }

    #[test]
    fn dependent_column_is_reported() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| {
            let a = i as f64;
            vec![a, (a * 1.7).sin(), 2.0 * a - 1.0]
        }).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 + 1.0 + (i % 2) as f64).collect();
        match fit_ols_named(&x, &y, &["a", "b", "c"]).unwrap_err() {
            Error::SingularDesign(col) => assert_eq!(col, "c"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn constant_feature_is_singular() {
        let x = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 5.0]];
        match fit_ols_named(&x, &[1.0, 2.0, 4.0], &["flat", "slope"]).unwrap_err() {
            Error::SingularDesign(col) => assert_eq!(col, "flat"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(fit_ols(&x, &[1.0, 2.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn predict_checks_length() {
        let m = OlsModel::constant(1.0, 2);
        assert!(matches!(predict(&m, &[1.0]), Err(Error::Parameter(_))));
    }
}
