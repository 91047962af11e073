//! Stationarity checks and pairwise Granger-causality tests between a context
//! signal and an expressiveness series.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{QfeError, Result};

const ADF_MIN_LEN: usize = 20;
/// |R_ii| below this fraction of the column norm marks a rank-deficient design.
const RANK_TOL: f64 = 1e-10;

/// Applies the first difference `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(QfeError::insufficient(format!(
            "differencing {d} times needs more than {d} values, got {}",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

struct Ols {
    beta: DVector<f64>,
    ssr: f64,
    /// `(XᵀX)⁻¹`
    cov_unscaled: DMatrix<f64>,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Ols> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(QfeError::insufficient(format!("{n} observations for {k} regressors")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for i in 0..k {
        let norm = x.column(i).norm();
        if norm == 0.0 || r[(i, i)].abs() <= RANK_TOL * norm {
            return Err(QfeError::SingularDesign(format!(
                "regressor {i} is collinear with the preceding ones"
            )));
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| QfeError::SingularDesign("triangular solve failed".into()))?;
    let resid = y - x * &beta;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| QfeError::SingularDesign("triangular solve failed".into()))?;
    Ok(Ols {
        beta,
        ssr: resid.norm_squared(),
        cov_unscaled: &r_inv * r_inv.transpose(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one_pct: f64,
    pub five_pct: f64,
    pub ten_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub used_lags: usize,
    pub n_obs: usize,
    pub p_value: f64,
    pub stationary: bool,
    pub critical_values: CriticalValues,
}

/// MacKinnon (1994) response-surface p-value for the constant-only
/// Dickey-Fuller regression with a single series.
pub fn mackinnon_p(stat: f64) -> f64 {
    const MAX: f64 = 2.74;
    const MIN: f64 = -18.83;
    const STAR: f64 = -1.61;
    const SMALL: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
    const LARGE: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if stat > MAX {
        return 1.0;
    }
    if stat < MIN {
        return 0.0;
    }
    let coef: &[f64] = if stat <= STAR { &SMALL } else { &LARGE };
    let z = coef.iter().rev().fold(0.0, |acc, c| acc * stat + c);
    Normal::standard().cdf(z)
}

/// MacKinnon (2010) finite-sample critical values, constant-only case.
pub fn mackinnon_crit(n_obs: usize) -> CriticalValues {
    const C: [[f64; 4]; 3] = [
        [-3.43035, -6.5393, -16.786, -79.433],
        [-2.86154, -2.8903, -4.234, -40.040],
        [-2.56677, -1.5384, -2.809, 0.0],
    ];
    let inv = 1.0 / n_obs as f64;
    let eval = |c: &[f64; 4]| c.iter().rev().fold(0.0, |acc, v| acc * inv + v);
    CriticalValues {
        one_pct: eval(&C[0]),
        five_pct: eval(&C[1]),
        ten_pct: eval(&C[2]),
    }
}

/// Design for `Δy_t = a + γ·y_{t−1} + Σ_{i≤k} b_i·Δy_{t−i}` keeping the last
/// `n_obs` rows. Columns: constant, level, lagged differences.
fn adf_design(y: &[f64], dy: &[f64], k: usize, n_obs: usize) -> (DMatrix<f64>, DVector<f64>) {
    let first = dy.len() - n_obs;
    let x = DMatrix::from_fn(n_obs, k + 2, |r, c| {
        let t = first + r;
        match c {
            0 => 1.0,
            1 => y[t],
            _ => dy[t - (c - 1)],
        }
    });
    (x, DVector::from_column_slice(&dy[first..]))
}

/// Augmented Dickey-Fuller test with a constant. Without `max_lag` the lag
/// order is searched up to `⌊12·(T/100)^{1/4}⌋` by AIC on a common sample and
/// the chosen model is refit on all available rows.
pub fn adf_test(series: &[f64], alpha: f64, max_lag: Option<usize>) -> Result<AdfResult> {
    let t = series.len();
    if t < ADF_MIN_LEN {
        return Err(QfeError::insufficient(format!(
            "ADF needs at least {ADF_MIN_LEN} values, got {t}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(QfeError::Data("non-finite value in series".into()));
    }
    if series.iter().all(|v| *v == series[0]) {
        return Err(QfeError::DegenerateSeries("series is constant".into()));
    }
    let cap = t / 2 - 2;
    let max_lag = max_lag
        .unwrap_or_else(|| (12.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize)
        .min(cap);
    let dy = difference(series, 1)?;

    let common = dy.len() - max_lag;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..=max_lag {
        let (x, yv) = adf_design(series, &dy, k, common);
        let fit = ols(&x, &yv)?;
        let aic = common as f64 * (fit.ssr / common as f64).ln() + 2.0 * (k + 2) as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, k));
        }
    }
    let used_lags = best.map(|b| b.1).unwrap_or(0);

    let n_obs = dy.len() - used_lags;
    let (x, yv) = adf_design(series, &dy, used_lags, n_obs);
    let fit = ols(&x, &yv)?;
    let dof = (n_obs - x.ncols()) as f64;
    let se = (fit.ssr / dof * fit.cov_unscaled[(1, 1)]).sqrt();
    let statistic = if se > 0.0 {
        fit.beta[1] / se
    } else {
        f64::NEG_INFINITY
    };
    let p_value = mackinnon_p(statistic);
    Ok(AdfResult {
        statistic,
        used_lags,
        n_obs,
        p_value,
        stationary: p_value < alpha,
        critical_values: mackinnon_crit(n_obs),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcStatistic {
    pub statistic: f64,
    pub df_num: usize,
    /// Present for F statistics only.
    pub df_denom: Option<usize>,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcTestResult {
    pub lag: usize,
    pub ssr_f: GcStatistic,
    pub ssr_chi2: GcStatistic,
    pub lr_chi2: GcStatistic,
    pub params_f: GcStatistic,
    pub all_pass: bool,
}

fn f_stat(stat: f64, d1: usize, d2: usize, alpha: f64) -> Result<GcStatistic> {
    let p_value = if stat.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(d1 as f64, d2 as f64)
            .map_err(|e| QfeError::domain(e.to_string()))?
            .sf(stat.max(0.0))
    };
    Ok(GcStatistic {
        statistic: stat,
        df_num: d1,
        df_denom: Some(d2),
        p_value,
        pass: p_value < alpha,
    })
}

fn chi2_stat(stat: f64, df: usize, alpha: f64) -> Result<GcStatistic> {
    let p_value = if stat.is_infinite() {
        0.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| QfeError::domain(e.to_string()))?
            .sf(stat.max(0.0))
    };
    Ok(GcStatistic {
        statistic: stat,
        df_num: df,
        df_denom: None,
        p_value,
        pass: p_value < alpha,
    })
}

/// Tests whether lags `1..=max_lag` of `cause` improve an autoregression of
/// `effect` on its own lags `1..=max_lag` (both with a constant).
pub fn granger_tests(cause: &[f64], effect: &[f64], max_lag: usize, alpha: f64) -> Result<GcTestResult> {
    let t = effect.len();
    if cause.len() != t {
        return Err(QfeError::shape(format!(
            "cause has {} values, effect has {t}",
            cause.len()
        )));
    }
    if max_lag == 0 {
        return Err(QfeError::domain("lag must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QfeError::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if t <= 3 * max_lag + 1 {
        return Err(QfeError::insufficient(format!(
            "lag {max_lag} needs more than {} values, got {t}",
            3 * max_lag + 1
        )));
    }
    if cause.iter().chain(effect).any(|v| !v.is_finite()) {
        return Err(QfeError::Data("non-finite value in series".into()));
    }
    let l = max_lag;
    let te = t - l;
    // Columns: effect lags 1..L, cause lags 1..L, constant.
    let unrestricted = DMatrix::from_fn(te, 2 * l + 1, |r, c| {
        let row = r + l;
        if c < l {
            effect[row - c - 1]
        } else if c < 2 * l {
            cause[row - (c - l) - 1]
        } else {
            1.0
        }
    });
    let restricted = DMatrix::from_fn(te, l + 1, |r, c| if c < l { unrestricted[(r, c)] } else { 1.0 });
    let y = DVector::from_column_slice(&effect[l..]);

    let fit_r = ols(&restricted, &y)?;
    let fit_u = ols(&unrestricted, &y)?;
    let df = te - 2 * l - 1;
    let (ssr_r, ssr_u) = (fit_r.ssr, fit_u.ssr);
    let gain = (ssr_r - ssr_u).max(0.0);

    let (ssr_f, ssr_chi2, lr, params_f) = if ssr_u == 0.0 {
        let inf = f64::INFINITY;
        (inf, inf, inf, inf)
    } else {
        let ssr_f = (gain / l as f64) / (ssr_u / df as f64);
        let ssr_chi2 = te as f64 * gain / ssr_u;
        let lr = te as f64 * (ssr_r / ssr_u).ln();
        // Wald: (Rβ)ᵀ [R (XᵀX)⁻¹ Rᵀ]⁻¹ (Rβ) / (L·s²), R selecting the cause lags.
        let restriction = DMatrix::from_fn(l, 2 * l + 1, |i, j| if j == l + i { 1.0 } else { 0.0 });
        let rb = &restriction * &fit_u.beta;
        let middle = &restriction * &fit_u.cov_unscaled * restriction.transpose();
        let middle_inv = middle
            .try_inverse()
            .ok_or_else(|| QfeError::SingularDesign("restricted covariance is singular".into()))?;
        let s2 = ssr_u / df as f64;
        let wald = (rb.transpose() * middle_inv * &rb)[(0, 0)] / (l as f64 * s2);
        (ssr_f, ssr_chi2, lr.max(0.0), wald)
    };

    let ssr_f = f_stat(ssr_f, l, df, alpha)?;
    let ssr_chi2 = chi2_stat(ssr_chi2, l, alpha)?;
    let lr_chi2 = chi2_stat(lr, l, alpha)?;
    let params_f = f_stat(params_f, l, df, alpha)?;
    Ok(GcTestResult {
        lag: l,
        all_pass: ssr_f.pass && ssr_chi2.pass && lr_chi2.pass && params_f.pass,
        ssr_f,
        ssr_chi2,
        lr_chi2,
        params_f,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSeries {
    pub values: Vec<f64>,
    pub fps: f64,
}

impl ContextSeries {
    pub fn new(values: Vec<f64>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(QfeError::domain(format!("fps must be positive, got {fps}")));
        }
        Ok(ContextSeries { values, fps })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcLagRow {
    pub lag_frames: usize,
    pub lag_seconds: f64,
    pub segments_tested: usize,
    pub segments_excluded: usize,
    pub pct_lr_chi2: f64,
    pub pct_params_f: f64,
    pub pct_ssr_chi2: f64,
    pub pct_ssr_f: f64,
    pub pct_all: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcSegmentReport {
    pub segment_length: usize,
    pub fps: f64,
    pub alpha: f64,
    pub n_segments: usize,
    /// Segments whose differenced context failed (or could not run) ADF.
    pub adf_failures_context: usize,
    pub adf_failures_response: usize,
    pub rows: Vec<GcLagRow>,
}

impl GcSegmentReport {
    /// Table with columns lag (s), lag (frames), the four pass percentages and ALL.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag_seconds,lag_frames,lr_chi2,params_f,ssr_chi2,ssr_f,all\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.1},{:.1},{:.1},{:.1},{:.1}\n",
                r.lag_seconds, r.lag_frames, r.pct_lr_chi2, r.pct_params_f, r.pct_ssr_chi2, r.pct_ssr_f, r.pct_all
            ));
        }
        out
    }
}

struct SegmentOutcome {
    adf_context_ok: bool,
    adf_response_ok: bool,
    per_lag: Vec<Option<GcTestResult>>,
}

fn adf_ok(series: &[f64], alpha: f64) -> bool {
    matches!(adf_test(series, alpha, None), Ok(r) if r.stationary)
}

fn run_segment(context: &[f64], response: &[f64], lags: &[usize], alpha: f64) -> Result<SegmentOutcome> {
    let c = difference(context, 1)?;
    let r = difference(response, 1)?;
    let adf_context_ok = adf_ok(&c, alpha);
    let adf_response_ok = adf_ok(&r, alpha);
    let per_lag = lags
        .iter()
        .map(|&l| match granger_tests(&c, &r, l, alpha) {
            Ok(res) => Some(res),
            Err(e) => {
                log::debug!("segment excluded at lag {l}: {e}");
                None
            }
        })
        .collect();
    Ok(SegmentOutcome {
        adf_context_ok,
        adf_response_ok,
        per_lag,
    })
}

/// Splits both series into non-overlapping segments (a trailing partial
/// segment is dropped), differences each once and runs the Granger tests
/// at every lag, reporting the percentage of segments passing each test.
pub fn segment_and_test(
    context: &ContextSeries,
    response: &[f64],
    segment_length: usize,
    lags: &[usize],
    alpha: f64,
) -> Result<GcSegmentReport> {
    if context.values.len() != response.len() {
        return Err(QfeError::shape(format!(
            "context has {} values, response has {}",
            context.values.len(),
            response.len()
        )));
    }
    if lags.is_empty() || lags.contains(&0) {
        return Err(QfeError::domain("lags must be a nonempty list of positive frame counts"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QfeError::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    let n_segments = response.len().checked_div(segment_length).unwrap_or(0);
    if n_segments == 0 {
        return Err(QfeError::insufficient(format!(
            "series of {} frames does not cover one segment of {segment_length}",
            response.len()
        )));
    }
    // Each differenced segment has segment_length − 1 values.
    let usable = segment_length - 1;
    if let Some(&too_big) = lags.iter().find(|&&l| usable <= 3 * l + 1) {
        return Err(QfeError::insufficient(format!(
            "lag {too_big} frames needs segments longer than {} frames, got {segment_length}",
            3 * too_big + 2
        )));
    }

    let outcomes: Vec<SegmentOutcome> = (0..n_segments)
        .into_par_iter()
        .map(|s| {
            let range = s * segment_length..(s + 1) * segment_length;
            run_segment(&context.values[range.clone()], &response[range], lags, alpha)
        })
        .collect::<Result<_>>()?;

    let adf_failures_context = outcomes.iter().filter(|o| !o.adf_context_ok).count();
    let adf_failures_response = outcomes.iter().filter(|o| !o.adf_response_ok).count();
    if adf_failures_context + adf_failures_response > 0 {
        log::warn!(
            "differenced series not stationary by ADF in {adf_failures_context} context and \
             {adf_failures_response} response segments; they are still tested"
        );
    }

    let mut rows = Vec::with_capacity(lags.len());
    for (i, &lag) in lags.iter().enumerate() {
        let tested: Vec<&GcTestResult> = outcomes.iter().filter_map(|o| o.per_lag[i].as_ref()).collect();
        if tested.is_empty() {
            return Err(QfeError::EmptyReport(format!("no usable segment at lag {lag}")));
        }
        let pct = |f: &dyn Fn(&GcTestResult) -> bool| {
            100.0 * tested.iter().filter(|r| f(r)).count() as f64 / tested.len() as f64
        };
        rows.push(GcLagRow {
            lag_frames: lag,
            lag_seconds: lag as f64 / context.fps,
            segments_tested: tested.len(),
            segments_excluded: n_segments - tested.len(),
            pct_lr_chi2: pct(&|r| r.lr_chi2.pass),
            pct_params_f: pct(&|r| r.params_f.pass),
            pct_ssr_chi2: pct(&|r| r.ssr_chi2.pass),
            pct_ssr_f: pct(&|r| r.ssr_f.pass),
            pct_all: pct(&|r| r.all_pass),
        });
    }
    Ok(GcSegmentReport {
        segment_length,
        fps: context.fps,
        alpha,
        n_segments,
        adf_failures_context,
        adf_failures_response,
        rows,
    })
}
