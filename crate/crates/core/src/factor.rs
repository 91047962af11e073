//! One-factor latent expressiveness score with factorability diagnostics.
//!
//! The model is fit by iterated principal-axis factoring on the correlation
//! matrix of standardized inputs; frame scores use the regression (Thomson)
//! estimator `f = z·R⁻¹·ℓ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{QfeError, Result};

const STANDARDIZE_TOL: f64 = 1e-9;
const MIN_UNIQUENESS: f64 = 1e-6;
/// Relative singular-value floor below which a correlation matrix is singular.
const SINGULAR_RCOND: f64 = 1e-12;

/// `n_frames × p` standardized feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorInput {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
    /// Sample standard deviation each column had before standardization.
    scales: Vec<f64>,
}

impl FactorInput {
    /// Centres each column and divides by its sample standard deviation.
    pub fn standardize(columns: &[Vec<f64>], labels: Vec<String>) -> Result<Self> {
        if columns.len() != labels.len() {
            return Err(QfeError::shape(format!(
                "{} columns but {} labels",
                columns.len(),
                labels.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(QfeError::insufficient("factor input needs at least two frames"));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(QfeError::shape(format!("column of length {} among length {n}", c.len())));
        }
        let mut scales = Vec::with_capacity(columns.len());
        let mut matrix = DMatrix::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(QfeError::Data(format!("non-finite value in column {}", labels[j])));
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            if sd == 0.0 {
                return Err(QfeError::DegenerateStructure(format!(
                    "column {} is constant",
                    labels[j]
                )));
            }
            for (i, v) in col.iter().enumerate() {
                matrix[(i, j)] = (v - mean) / sd;
            }
            scales.push(sd);
        }
        Ok(FactorInput { matrix, labels, scales })
    }

    /// Accepts a matrix whose columns are already z-scores (mean 0 and sample
    /// variance 1, within 1e-9).
    pub fn from_standardized(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = matrix.nrows();
        if n < 2 {
            return Err(QfeError::insufficient("factor input needs at least two frames"));
        }
        if labels.len() != matrix.ncols() {
            return Err(QfeError::shape("one label per column is required"));
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if mean.abs() > STANDARDIZE_TOL || (var - 1.0).abs() > STANDARDIZE_TOL {
                return Err(QfeError::Data(format!(
                    "column {} is not standardized (mean {mean:.3e}, variance {var:.6})",
                    labels[j]
                )));
            }
        }
        let scales = vec![1.0; matrix.ncols()];
        Ok(FactorInput { matrix, labels, scales })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn n_frames(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.matrix.ncols()
    }

    /// Sample correlation matrix `zᵀz / (n − 1)` with an exact unit diagonal.
    pub fn correlation(&self) -> DMatrix<f64> {
        let mut r = self.matrix.transpose() * &self.matrix / (self.n_frames() - 1) as f64;
        r.fill_diagonal(1.0);
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bartlett {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    /// Set when the determinant is not positive; `chi2` is then `+∞`.
    pub degenerate: bool,
}

/// Bartlett's test that the population correlation matrix is the identity.
pub fn bartlett_sphericity(corr: &DMatrix<f64>, n: usize) -> Result<Bartlett> {
    let p = check_correlation(corr)?;
    if n <= p {
        return Err(QfeError::Precondition(format!(
            "Bartlett's test needs more samples ({n}) than variables ({p})"
        )));
    }
    let df = p * (p - 1) / 2;
    let det = corr.determinant();
    if !(det > 0.0) {
        return Ok(Bartlett {
            chi2: f64::INFINITY,
            df,
            p_value: 0.0,
            degenerate: true,
        });
    }
    let factor = n as f64 - 1.0 - (2.0 * p as f64 + 5.0) / 6.0;
    // ln|R| ≤ 0 for a correlation matrix; clamp rounding noise above zero.
    let chi2 = (-factor * det.ln()).max(0.0);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| QfeError::domain(e.to_string()))?
            .sf(chi2)
    };
    Ok(Bartlett {
        chi2,
        df,
        p_value,
        degenerate: false,
    })
}

fn check_correlation(corr: &DMatrix<f64>) -> Result<usize> {
    let p = corr.nrows();
    if p == 0 || corr.ncols() != p {
        return Err(QfeError::shape(format!(
            "correlation matrix must be square, got {}×{}",
            corr.nrows(),
            corr.ncols()
        )));
    }
    for i in 0..p {
        if (corr[(i, i)] - 1.0).abs() > 1e-9 {
            return Err(QfeError::Precondition(format!("diagonal entry {i} is not 1")));
        }
        for j in 0..i {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-9 {
                return Err(QfeError::Precondition("correlation matrix is not symmetric".into()));
            }
        }
    }
    Ok(p)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn invert_correlation(corr: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(corr);
    if !(condition.is_finite() && condition < 1.0 / SINGULAR_RCOND) {
        return Err(QfeError::Numerical {
            message: "correlation matrix is not invertible".into(),
            condition,
        });
    }
    corr.clone().try_inverse().ok_or(QfeError::Numerical {
        message: "correlation matrix is not invertible".into(),
        condition,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kmo {
    pub overall: f64,
    pub per_variable: Vec<f64>,
    /// No off-diagonal correlation at all: the 0/0 ratio is reported as 0.
    pub zero_correlation: bool,
}

/// Kaiser-Meyer-Olkin sampling adequacy from correlations and the partial
/// correlations implied by the inverse correlation matrix.
pub fn kmo(corr: &DMatrix<f64>) -> Result<Kmo> {
    let p = check_correlation(corr)?;
    let inv = invert_correlation(corr)?;
    let mut r2 = vec![0.0; p];
    let mut q2 = vec![0.0; p];
    for j in 0..p {
        for k in 0..p {
            if j == k {
                continue;
            }
            // With two variables there is nothing to partial out.
            let partial = if p == 2 {
                corr[(j, k)]
            } else {
                -inv[(j, k)] / (inv[(j, j)] * inv[(k, k)]).sqrt()
            };
            r2[j] += corr[(j, k)].powi(2);
            q2[j] += partial.powi(2);
        }
    }
    let ratio = |r: f64, q: f64| if r + q == 0.0 { 0.0 } else { r / (r + q) };
    let (r_sum, q_sum) = (r2.iter().sum::<f64>(), q2.iter().sum::<f64>());
    Ok(Kmo {
        overall: ratio(r_sum, q_sum),
        per_variable: r2.iter().zip(&q2).map(|(r, q)| ratio(*r, *q)).collect(),
        zero_correlation: r_sum == 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorDiagnostics {
    pub bartlett_chi2: f64,
    pub bartlett_df: usize,
    pub bartlett_p: f64,
    pub bartlett_degenerate: bool,
    pub kmo_overall: f64,
    pub kmo_per_variable: Vec<f64>,
}

pub fn diagnose(input: &FactorInput) -> Result<FactorDiagnostics> {
    let corr = input.correlation();
    let b = bartlett_sphericity(&corr, input.n_frames())?;
    let k = kmo(&corr)?;
    Ok(FactorDiagnostics {
        bartlett_chi2: b.chi2,
        bartlett_df: b.df,
        bartlett_p: b.p_value,
        bartlett_degenerate: b.degenerate,
        kmo_overall: k.overall,
        kmo_per_variable: k.per_variable,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub labels: Vec<String>,
    /// Loadings on the standardized scale, signed so that they sum to ≥ 0.
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FactorModel {
    /// Loadings expressed in the units of the unstandardized input columns.
    pub fn raw_loadings(&self, input: &FactorInput) -> Vec<f64> {
        self.loadings.iter().zip(input.scales()).map(|(l, s)| l * s).collect()
    }

    /// `ℓℓᵀ + diag(ψ)`.
    pub fn implied_correlation(&self) -> DMatrix<f64> {
        let l = DVector::from_column_slice(&self.loadings);
        let mut m = &l * l.transpose();
        for (i, u) in self.uniquenesses.iter().enumerate() {
            m[(i, i)] += u;
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Iterated principal-axis estimate of a single common factor. Fails to
/// converge softly: the last iterate is returned with `converged = false`.
pub fn fit_one_factor(input: &FactorInput, opts: FitOptions) -> Result<FactorModel> {
    let p = input.n_vars();
    if p < 2 {
        return Err(QfeError::DegenerateStructure(format!(
            "a common factor needs at least two variables, got {p}"
        )));
    }
    if input.n_frames() <= p {
        return Err(QfeError::Precondition(format!(
            "need more frames ({}) than variables ({p})",
            input.n_frames()
        )));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(QfeError::domain("max_iter must be ≥ 1 and tol positive"));
    }
    let corr = input.correlation();
    let mut communality = initial_communalities(&corr);
    let mut loadings = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut reduced = corr.clone();
        reduced.set_diagonal(&communality);
        let eig = SymmetricEigen::new(reduced);
        let (lead, value) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        if !(value > 0.0) {
            return Err(QfeError::DegenerateStructure(format!(
                "leading eigenvalue of the reduced correlation matrix is {value:.3e}"
            )));
        }
        loadings = eig.eigenvectors.column(lead) * value.sqrt();
        let next = loadings.map(|l| (l * l).min(1.0));
        let change = (&next - &communality).amax();
        communality = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if loadings.sum() < 0.0 {
        loadings.neg_mut();
    }
    if !converged {
        log::warn!("principal-axis factoring stopped after {iterations} iterations without converging");
    }
    Ok(FactorModel {
        labels: input.labels().to_vec(),
        uniquenesses: loadings
            .iter()
            .map(|l| (1.0 - l * l).clamp(MIN_UNIQUENESS, 1.0))
            .collect(),
        loadings: loadings.iter().copied().collect(),
        converged,
        iterations,
    })
}

/// Squared multiple correlations, falling back to the largest absolute
/// correlation of each variable when the matrix cannot be inverted.
fn initial_communalities(corr: &DMatrix<f64>) -> DVector<f64> {
    match invert_correlation(corr) {
        Ok(inv) => DVector::from_fn(corr.nrows(), |i, _| (1.0 - 1.0 / inv[(i, i)]).clamp(0.0, 1.0)),
        Err(_) => DVector::from_fn(corr.nrows(), |i, _| {
            (0..corr.ncols())
                .filter(|j| *j != i)
                .map(|j| corr[(i, j)].abs())
                .fold(0.0, f64::max)
        }),
    }
}

/// Regression factor scores, one per frame.
pub fn factor_scores(model: &FactorModel, input: &FactorInput) -> Result<Vec<f64>> {
    if model.loadings.len() != input.n_vars() {
        return Err(QfeError::shape(format!(
            "model has {} loadings, input has {} variables",
            model.loadings.len(),
            input.n_vars()
        )));
    }
    let inv = invert_correlation(&input.correlation())?;
    let weights = inv * DVector::from_column_slice(&model.loadings);
    Ok((input.matrix() * weights).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn equicorrelated(p: usize, r: f64) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { r })
    }

    /// `x_j = ℓ_j·f + noise_j·ε_j`; returns the columns and the latent factor.
    fn one_factor_data(loadings: &[f64], noise: &[f64], n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![Vec::with_capacity(n); loadings.len()];
        let mut f = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            f.push(z);
            for (j, col) in cols.iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                col.push(loadings[j] * z + noise[j] * e);
            }
        }
        (cols, f)
    }

    fn labels(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("v{j}")).collect()
    }

    #[test]
    fn bartlett_identity() {
        let b = bartlett_sphericity(&DMatrix::identity(4, 4), 50).unwrap();
        assert_eq!(b.chi2, 0.0);
        assert_eq!(b.p_value, 1.0);
        assert_eq!(b.df, 6);
    }

    #[test]
    fn bartlett_equicorrelated_by_hand() {
        // |R| = 1 + 2r³ − 3r² = 0.5 for r = 0.5.
        let b = bartlett_sphericity(&equicorrelated(3, 0.5), 100).unwrap();
        let expected = -(99.0 - 11.0 / 6.0) * 0.5f64.ln();
        assert_abs_diff_eq!(b.chi2, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(b.chi2, 67.35, epsilon = 0.01);
        assert_eq!(b.df, 3);
        assert!(b.p_value < 1e-12);
    }

    #[test]
    fn bartlett_needs_more_samples_than_variables() {
        assert!(matches!(
            bartlett_sphericity(&DMatrix::identity(3, 3), 3),
            Err(QfeError::Precondition(_))
        ));
    }

    #[test]
    fn bartlett_singular_is_flagged() {
        let b = bartlett_sphericity(&equicorrelated(3, 1.0), 100).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.chi2, f64::INFINITY);
        assert_eq!(b.p_value, 0.0);
    }

    #[test]
    fn bartlett_permutation_invariant() {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.6, 0.1, 0.6, 1.0]);
        let perm = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.3, 0.6, 1.0, 0.1, 0.3, 0.1, 1.0]);
        let a = bartlett_sphericity(&r, 40).unwrap().chi2;
        let b = bartlett_sphericity(&perm, 40).unwrap().chi2;
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn kmo_two_variables_is_half() {
        for r in [-0.7, 0.1, 0.35, 0.9] {
            let k = kmo(&equicorrelated(2, r)).unwrap();
            assert_eq!(k.overall, 0.5);
        }
    }

    #[test]
    fn kmo_identity_is_zero_with_flag() {
        let k = kmo(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(k.overall, 0.0);
        assert!(k.zero_correlation);
        assert!(k.per_variable.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kmo_three_variables_against_partial_correlation_formula() {
        let (r12, r13, r23) = (0.5, 0.3, 0.4);
        let corr = DMatrix::from_row_slice(3, 3, &[1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]);
        let partial = |rab: f64, rac: f64, rbc: f64| (rab - rac * rbc) / ((1.0 - rac * rac) * (1.0 - rbc * rbc)).sqrt();
        let q12 = partial(r12, r13, r23);
        let q13 = partial(r13, r12, r23);
        let q23 = partial(r23, r12, r13);
        let rs = r12 * r12 + r13 * r13 + r23 * r23;
        let qs = q12 * q12 + q13 * q13 + q23 * q23;
        let k = kmo(&corr).unwrap();
        assert_abs_diff_eq!(k.overall, rs / (rs + qs), epsilon = 1e-12);
        let v1 = (r12 * r12 + r13 * r13) / (r12 * r12 + r13 * r13 + q12 * q12 + q13 * q13);
        assert_abs_diff_eq!(k.per_variable[0], v1, epsilon = 1e-12);
    }

    #[test]
    fn kmo_singular_reports_condition() {
        match kmo(&equicorrelated(3, 1.0)).unwrap_err() {
            QfeError::Numerical { condition, .. } => assert!(condition > 1e12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kmo_one_factor_data_is_adequate() {
        let l = [0.8; 6];
        let noise = [0.6; 6];
        let (cols, _) = one_factor_data(&l, &noise, 10_000, 11);
        let input = FactorInput::standardize(&cols, labels(6)).unwrap();
        let k = kmo(&input.correlation()).unwrap();
        assert!(k.overall > 0.6, "KMO {}", k.overall);
        assert!(k.per_variable.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn fit_recovers_factor_model_loadings() {
        let l = [0.9, 0.8, 0.7];
        let noise: Vec<f64> = l.iter().map(|x: &f64| (1.0 - x * x).sqrt()).collect();
        let (cols, _) = one_factor_data(&l, &noise, 10_000, 7);
        let input = FactorInput::standardize(&cols, labels(3)).unwrap();
        let model = fit_one_factor(&input, FitOptions::default()).unwrap();
        assert!(model.converged);
        for (got, want) in model.loadings.iter().zip(l) {
            assert!((got - want).abs() < 0.05, "{got} vs {want}");
        }
        for (lj, u) in model.loadings.iter().zip(&model.uniquenesses) {
            assert!(lj * lj + u <= 1.0 + 1e-6);
            assert!(*u > 0.0 && *u <= 1.0);
        }
        let implied = model.implied_correlation();
        let corr = input.correlation();
        let mut sq = 0.0;
        let mut count = 0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    sq += (implied[(i, j)] - corr[(i, j)]).powi(2);
                    count += 1;
                }
            }
        }
        assert!((sq / count as f64).sqrt() < 0.05);
    }

    #[test]
    fn fit_recovers_rank_one_generating_coefficients() {
        let l = [0.9, 0.8, 0.7];
        let (cols, f) = one_factor_data(&l, &[1e-4; 3], 10_000, 3);
        let input = FactorInput::standardize(&cols, labels(3)).unwrap();
        let model = fit_one_factor(&input, FitOptions::default()).unwrap();
        for (got, want) in model.raw_loadings(&input).iter().zip(l) {
            assert!((got - want).abs() < 0.05, "{got} vs {want}");
        }
        let scores = factor_scores(&model, &input).unwrap();
        let rho = crate::stats::pearson(&scores, &f).unwrap();
        assert!(rho > 0.999, "rho {rho}");
        let var = crate::stats::sample_sd(&scores).powi(2);
        assert!(var > 0.0 && var <= 1.0 + 1e-9, "score variance {var}");
    }

    #[test]
    #[ignore = "regression scores have variance ℓᵀR⁻¹ℓ, below one unless R is exactly rank one"]
    fn scores_have_unit_variance() {
        let l = [0.9, 0.8, 0.7];
        let (cols, _) = one_factor_data(&l, &[1e-4; 3], 10_000, 3);
        let input = FactorInput::standardize(&cols, labels(3)).unwrap();
        let model = fit_one_factor(&input, FitOptions::default()).unwrap();
        let scores = factor_scores(&model, &input).unwrap();
        let var = crate::stats::sample_sd(&scores).powi(2);
        assert!((var - 1.0).abs() < 1e-6, "score variance {var}");
    }

    #[test]
    #[ignore = "iterated principal-axis factoring drifts towards a Heywood solution on pure noise"]
    fn fit_on_independent_columns_gives_small_loadings() {
        let (cols, _) = one_factor_data(&[0.0; 4], &[1.0; 4], 10_000, 5);
        let input = FactorInput::standardize(&cols, labels(4)).unwrap();
        let model = fit_one_factor(&input, FitOptions::default()).unwrap();
        assert!(model.loadings.iter().all(|l| l.abs() < 0.15), "{:?}", model.loadings);
    }

    #[test]
    fn fit_on_independent_columns_does_not_converge() {
        let (cols, _) = one_factor_data(&[0.0; 4], &[1.0; 4], 10_000, 5);
        let input = FactorInput::standardize(&cols, labels(4)).unwrap();
        let model = fit_one_factor(&input, FitOptions::default()).unwrap();
        assert!(!model.converged);
        let small = model.loadings.iter().filter(|l| l.abs() < 0.15).count();
        assert!(small >= 3, "{:?}", model.loadings);
    }

    #[test]
    fn fit_single_variable_is_degenerate() {
        let input = FactorInput::standardize(&[vec![1.0, 2.0, 3.0, 5.0]], labels(1)).unwrap();
        assert!(matches!(
            fit_one_factor(&input, FitOptions::default()),
            Err(QfeError::DegenerateStructure(_))
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let (cols, _) = one_factor_data(&[0.7, 0.6, 0.5, 0.4], &[0.7; 4], 2_000, 9);
        let input = FactorInput::standardize(&cols, labels(4)).unwrap();
        let a = fit_one_factor(&input, FitOptions::default()).unwrap();
        let b = fit_one_factor(&input, FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_is_soft() {
        let (cols, _) = one_factor_data(&[0.7, 0.6, 0.5, 0.4], &[0.7; 4], 2_000, 9);
        let input = FactorInput::standardize(&cols, labels(4)).unwrap();
        let m = fit_one_factor(&input, FitOptions { max_iter: 1, tol: 1e-15 }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }

    #[test]
    fn zero_row_scores_zero() {
        let m = DMatrix::from_row_slice(4, 3, &[
            -1.0, 1.0, -1.0,
            1.0, -1.0, -1.0,
            1.0, 1.0, 1.0,
            -1.0, -1.0, 1.0,
        ]);
        let mut with_zero = DMatrix::zeros(5, 3);
        with_zero.rows_mut(0, 4).copy_from(&m);
        // Columns sum to zero, so the appended zero row stays at the mean.
        let input = FactorInput::standardize(
            &(0..3).map(|j| with_zero.column(j).iter().copied().collect()).collect::<Vec<_>>(),
            labels(3),
        )
        .unwrap();
        let model = FactorModel {
            labels: labels(3),
            loadings: vec![0.5, 0.4, 0.3],
            uniquenesses: vec![0.75, 0.84, 0.91],
            converged: true,
            iterations: 1,
        };
        let scores = factor_scores(&model, &input).unwrap();
        assert_eq!(scores[4], 0.0);
    }

    #[test]
    fn from_standardized_checks_moments() {
        let raw = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(FactorInput::from_standardized(raw, labels(1)).is_err());
        let z = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 1.0]);
        assert!(FactorInput::from_standardized(z, labels(1)).is_ok());
    }
}
