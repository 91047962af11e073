//! Cross-subject comparison of expressiveness series.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{QfeError, Result};
use crate::ingest::{FeatureSequence, Modality};
use crate::score::{modality_delta_grid, TemporalParams};
use crate::stats::{self, average_ranks, pearson, quantile_sorted};
use crate::ingest::{minmax_scale, ModalityMatrix};

fn same_length(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(QfeError::shape(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marpe {
    /// Percentage.
    pub value: f64,
    /// Frames skipped because the reference was zero.
    pub excluded: usize,
}

/// Mean absolute relative percentage error of `y` against the reference `x`.
pub fn marpe(x: &[f64], y: &[f64]) -> Result<Marpe> {
    same_length(x, y)?;
    let (mut sum, mut used) = (0.0, 0usize);
    for (a, b) in x.iter().zip(y) {
        if *a != 0.0 {
            sum += ((a - b) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(QfeError::UndefinedReference);
    }
    Ok(Marpe {
        value: 100.0 * sum / used as f64,
        excluded: x.len() - used,
    })
}

/// Unconstrained dynamic time warping with absolute-difference cost.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(QfeError::domain("DTW needs two nonempty series"));
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for a in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (a - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided, from the t approximation; absent for n < 4.
    pub p_value: Option<f64>,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    same_length(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(QfeError::domain("Spearman correlation needs at least two values"));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| QfeError::UndefinedCorrelation("a series is constant".into()))?;
    let p_value = (n >= 4).then(|| {
        if rho.abs() >= 1.0 {
            return 0.0;
        }
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    });
    Ok(Spearman { rho, p_value })
}

/// Lin's concordance correlation coefficient (population moments).
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    same_length(x, y)?;
    if x.len() < 2 {
        return Err(QfeError::domain("CCC needs at least two values"));
    }
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (vx, vy) = (stats::variance_pop(x), stats::variance_pop(y));
    if vx == 0.0 && vy == 0.0 {
        return Err(QfeError::UndefinedCorrelation("both series are constant".into()));
    }
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    Ok((2.0 * cov / (vx + vy + (mx - my).powi(2))).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Marpe,
    Dtw,
    Srcc,
    Ccc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Marpe, Metric::Dtw, Metric::Srcc, Metric::Ccc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Marpe => "marpe",
            Metric::Dtw => "dtw",
            Metric::Srcc => "srcc",
            Metric::Ccc => "ccc",
        }
    }

    fn diagonal(self) -> f64 {
        match self {
            Metric::Marpe | Metric::Dtw => 0.0,
            Metric::Srcc | Metric::Ccc => 1.0,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = QfeError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| QfeError::domain(format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub metric: Metric,
    pub subjects: Vec<String>,
    /// Length every series was truncated to.
    pub common_length: usize,
    /// Row subject is the reference (matters for MARPE). `None` where undefined.
    pub values: Vec<Vec<Option<f64>>>,
    /// SRCC only.
    pub p_values: Option<Vec<Vec<Option<f64>>>>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub undefined_pairs: usize,
}

impl PairwiseReport {
    /// Matrix as CSV with a `subject` header column; undefined entries are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject");
        for s in &self.subjects {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (s, row) in self.subjects.iter().zip(&self.values) {
            out.push_str(s);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn evaluate(metric: Metric, x: &[f64], y: &[f64]) -> Result<(f64, Option<f64>)> {
    match metric {
        Metric::Marpe => marpe(x, y).map(|m| (m.value, None)),
        Metric::Dtw => dtw_distance(x, y).map(|d| (d, None)),
        Metric::Srcc => spearman(x, y).map(|s| (s.rho, s.p_value)),
        Metric::Ccc => ccc(x, y).map(|c| (c, None)),
    }
}

/// Evaluates `metric` on every ordered pair of subjects after truncating all
/// series to the shortest one.
pub fn pairwise_matrix(series: &BTreeMap<String, Vec<f64>>, metric: Metric) -> Result<PairwiseReport> {
    if series.len() < 2 {
        return Err(QfeError::domain(format!(
            "pairwise comparison needs at least two subjects, got {}",
            series.len()
        )));
    }
    let subjects: Vec<String> = series.keys().cloned().collect();
    let common_length = series.values().map(Vec::len).min().unwrap_or(0);
    if common_length == 0 {
        return Err(QfeError::domain("a subject has an empty series"));
    }
    let data: Vec<&[f64]> = series.values().map(|v| &v[..common_length]).collect();
    let k = data.len();

    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let results: Vec<Option<(f64, Option<f64>)>> = pairs
        .par_iter()
        .map(|&(i, j)| match evaluate(metric, data[i], data[j]) {
            Ok(v) => Ok(Some(v)),
            Err(QfeError::UndefinedReference | QfeError::UndefinedCorrelation(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut values = vec![vec![Some(metric.diagonal()); k]; k];
    let mut p_values = vec![vec![None; k]; k];
    for (&(i, j), r) in pairs.iter().zip(&results) {
        values[i][j] = r.map(|v| v.0);
        p_values[i][j] = r.and_then(|v| v.1);
    }
    let defined: Vec<f64> = results.iter().flatten().map(|v| v.0).collect();
    let undefined_pairs = results.len() - defined.len();
    if undefined_pairs > 0 {
        log::warn!("{metric}: {undefined_pairs} subject pairs are undefined and left out of the summary");
    }
    let summary = (!defined.is_empty()).then(|| stats::MeanSd::of(&defined));
    Ok(PairwiseReport {
        metric,
        subjects,
        common_length,
        values,
        p_values: (metric == Metric::Srcc).then_some(p_values),
        mean: summary.map(|s| s.mean),
        sd: summary.map(|s| s.sd),
        undefined_pairs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Grid spacing is kept at or below half a bandwidth, up to this many points.
const KDE_MAX_POINTS: usize = 1 << 16;

/// Gaussian kernel density estimate with Silverman's robust bandwidth. The
/// grid spans three bandwidths beyond the data on either side and is refined
/// beyond `grid_points` when the requested spacing would exceed `h/2`.
pub fn kde(values: &[f64], grid_points: usize) -> Result<KdeCurve> {
    let n = values.len();
    if n < 2 {
        return Err(QfeError::domain("KDE needs at least two values"));
    }
    if grid_points < 2 {
        return Err(QfeError::domain("KDE grid needs at least two points"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QfeError::Data("non-finite value in KDE sample".into()));
    }
    let sd = stats::sample_sd(values);
    if sd == 0.0 {
        return Err(QfeError::ZeroSpread("sample is constant".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);

    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let needed = ((hi - lo) / (0.5 * h)).ceil() as usize + 1;
    let points = grid_points.max(needed.min(KDE_MAX_POINTS));
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .par_iter()
        .map(|g| norm * sorted.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationMatrix {
    pub stride: usize,
    pub features: Vec<Modality>,
    /// Spearman ρ between per-pair δ series; `None` where a series is constant.
    pub rho: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub matrices: Vec<AblationMatrix>,
    /// Modalities missing from the sequence.
    pub omitted: Vec<Modality>,
}

/// Symmetric Spearman matrix with unit diagonal over equally long series.
pub fn srcc_matrix(series: &[Vec<f64>]) -> Result<Vec<Vec<Option<f64>>>> {
    let k = series.len();
    let mut m = vec![vec![Some(1.0); k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let rho = match spearman(&series[i], &series[j]) {
                Ok(s) => Some(s.rho),
                Err(QfeError::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            };
            m[i][j] = rho;
            m[j][i] = rho;
        }
    }
    Ok(m)
}

/// δ of every temporal modality at each stride, compared pairwise by SRCC.
/// δ is taken on the stride grid (one value per frame pair), not per frame.
pub fn ablate_modalities(seq: &FeatureSequence, strides: &[usize], base: &TemporalParams) -> Result<AblationReport> {
    if strides.is_empty() {
        return Err(QfeError::domain("no strides given"));
    }
    let mut present = Vec::new();
    let mut omitted = Vec::new();
    for m in Modality::TEMPORAL {
        if seq.frames().iter().all(|f| f.modality_values(m).is_some()) {
            present.push((m, minmax_scale(&ModalityMatrix::from_sequence(seq, m)?)?));
        } else {
            log::warn!("{m} is not available in every frame; omitted from the ablation");
            omitted.push(m);
        }
    }
    if present.len() < 2 {
        return Err(QfeError::MissingFeature("ablation needs at least two temporal modalities".into()));
    }
    let matrices = strides
        .par_iter()
        .map(|&stride| {
            let p = TemporalParams {
                stride,
                ..base.clone()
            };
            let series: Vec<Vec<f64>> = present
                .iter()
                .map(|(_, matrix)| modality_delta_grid(matrix, &p))
                .collect::<Result<_>>()?;
            Ok(AblationMatrix {
                stride,
                features: present.iter().map(|(m, _)| *m).collect(),
                rho: srcc_matrix(&series)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AblationReport { matrices, omitted })
}
