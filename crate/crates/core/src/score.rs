//! Spatial (AU-intensity) and temporal (feature-velocity) expressiveness and
//! their combination into a per-frame score.
//!
//! * σ: exponentially weighted mean of AU intensities, bounded in `[0, λ]`.
//! * δ: mean of `e^{Δv} − 1` over a modality's features, normalised to `[0, 1]`,
//!   with `Δv` the per-frame absolute change across a stride of frames.
//! * τ: σ gated by the weighted mean of the δ's (domain-weighted), or a plain
//!   weighted sum of σ and the δ's.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QfeError, Result};
use crate::ingest::{
    minmax_scale, select_au_subset, AUCategoryMap, FeatureSequence, Modality, ModalityMatrix,
    AU_MAX_INTENSITY,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub lambda: f64,
    pub x_max: f64,
    pub au_category: String,
}

impl Default for SpatialParams {
    fn default() -> Self {
        SpatialParams {
            lambda: 100.0,
            x_max: AU_MAX_INTENSITY,
            au_category: "overall".to_string(),
        }
    }
}

impl SpatialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(QfeError::domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(QfeError::domain(format!("x_max must be positive, got {}", self.x_max)));
        }
        Ok(())
    }
}

/// Spatial score without range checks. Values above `x_max`
/// produce scores above `lambda`; the robustness experiment relies on that.
pub(crate) fn spatial_unchecked(au: &[f64], lambda: f64, x_max: f64) -> f64 {
    let mean = au.iter().map(|x| (x / x_max).exp_m1()).sum::<f64>() / au.len() as f64;
    lambda * (mean / 1f64.exp_m1())
}

/// Spatial expressiveness of one frame's AU intensities.
pub fn spatial_score(au: &[f64], p: &SpatialParams) -> Result<f64> {
    p.validate()?;
    if au.is_empty() {
        return Err(QfeError::domain("spatial score needs at least one AU"));
    }
    if let Some(x) = au.iter().find(|x| !(0.0..=p.x_max).contains(*x)) {
        return Err(QfeError::domain(format!(
            "AU intensity {x} outside [0, {}]; clamp before scoring",
            p.x_max
        )));
    }
    // In-range inputs can only overshoot λ through rounding.
    Ok(spatial_unchecked(au, p.lambda, p.x_max).min(p.lambda))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalParams {
    /// Frames between the two samples of each velocity pair.
    pub stride: usize,
    /// Number of Taylor terms of `e^{Δv} − 1`.
    pub taylor_order: u32,
    pub delta_max: f64,
    /// Use `exp_m1` instead of the truncated series.
    pub closed_form: bool,
}

impl Default for TemporalParams {
    fn default() -> Self {
        TemporalParams {
            stride: 5,
            taylor_order: 20,
            delta_max: 1.0,
            closed_form: false,
        }
    }
}

impl TemporalParams {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(QfeError::domain("stride must be at least 1"));
        }
        if self.taylor_order == 0 {
            return Err(QfeError::domain("taylor_order must be at least 1"));
        }
        if !(self.delta_max.is_finite() && self.delta_max > 0.0) {
            return Err(QfeError::domain(format!(
                "delta_max must be positive, got {}",
                self.delta_max
            )));
        }
        Ok(())
    }
}

/// `|x_{t+stride} − x_t| / stride` for the sample pairs `(k·stride, (k+1)·stride)`.
/// Rows are pairs, columns features.
pub fn velocity(matrix: &ModalityMatrix, stride: usize) -> Result<DMatrix<f64>> {
    if !matrix.is_scaled() {
        return Err(QfeError::Precondition("velocity expects a min-max scaled matrix".into()));
    }
    if stride == 0 {
        return Err(QfeError::domain("stride must be at least 1"));
    }
    let n = matrix.n_frames();
    if n <= stride {
        return Err(QfeError::insufficient(format!(
            "{} has {n} frame(s), need more than the stride {stride}",
            matrix.modality()
        )));
    }
    let n_pairs = (n - 1) / stride;
    let v = matrix.values();
    let s = stride as f64;
    Ok(DMatrix::from_fn(n_pairs, matrix.n_features(), |k, j| {
        (v[((k + 1) * stride, j)] - v[(k * stride, j)]).abs() / s
    }))
}

/// `Σ_{m=1..order} x^m / m!`, evaluated in nested (Horner) form.
pub fn taylor_exp_m1(x: f64, order: u32) -> f64 {
    let mut acc = 1.0;
    for m in (2..=order).rev() {
        acc = 1.0 + acc * x / f64::from(m);
    }
    x * acc
}

/// Raw temporal expressiveness of one velocity row.
pub fn temporal_raw(dv_row: &[f64], order: u32) -> Result<f64> {
    if order == 0 {
        return Err(QfeError::domain("taylor order must be at least 1"));
    }
    check_velocities(dv_row)?;
    Ok(dv_row.iter().map(|dv| taylor_exp_m1(*dv, order)).sum())
}

fn check_velocities(dv_row: &[f64]) -> Result<()> {
    match dv_row.iter().find(|dv| !(**dv >= 0.0)) {
        Some(dv) => Err(QfeError::domain(format!("velocity {dv} is negative or NaN"))),
        None => Ok(()),
    }
}

/// Normalises a raw temporal value by its maximum `n·(e^{Δ_max} − 1)`.
pub fn temporal_score(t_exp: f64, n: usize, delta_max: f64) -> Result<f64> {
    if n == 0 {
        return Err(QfeError::domain("temporal score needs at least one feature"));
    }
    if !(t_exp >= 0.0) {
        return Err(QfeError::domain(format!("t_exp must be nonnegative, got {t_exp}")));
    }
    if !(delta_max > 0.0) {
        return Err(QfeError::domain(format!("delta_max must be positive, got {delta_max}")));
    }
    Ok(t_exp / (n as f64 * delta_max.exp_m1()))
}

/// δ for each stride pair of a scaled modality matrix.
pub fn modality_delta_grid(matrix: &ModalityMatrix, p: &TemporalParams) -> Result<Vec<f64>> {
    p.validate()?;
    let dv = velocity(matrix, p.stride)?;
    let n = dv.ncols();
    dv.row_iter()
        .map(|row| {
            let row: Vec<f64> = row.iter().copied().collect();
            let t_exp = if p.closed_form {
                check_velocities(&row)?;
                row.iter().map(|v| v.exp_m1()).sum()
            } else {
                temporal_raw(&row, p.taylor_order)?
            };
            temporal_score(t_exp, n, p.delta_max)
        })
        .collect()
}

/// Per-frame δ: each frame carries the δ of the most recent completed pair;
/// frames before the first pair completes carry 0.
pub fn modality_delta_series(matrix: &ModalityMatrix, p: &TemporalParams) -> Result<Vec<f64>> {
    let grid = modality_delta_grid(matrix, p)?;
    Ok((0..matrix.n_frames())
        .map(|t| match t / p.stride {
            0 => 0.0,
            k => grid[(k - 1).min(grid.len() - 1)],
        })
        .collect())
}

fn check_lengths(sigma: &[f64], deltas: &[&[f64]]) -> Result<()> {
    match deltas.iter().find(|d| d.len() != sigma.len()) {
        Some(d) => Err(QfeError::shape(format!(
            "delta series has {} frames, sigma has {}",
            d.len(),
            sigma.len()
        ))),
        None => Ok(()),
    }
}

/// `τ_t = σ_t · (1 + mean_k λ_k·δ_{k,t})`.
pub fn combine_approach1(sigma: &[f64], deltas: &[&[f64]], lambda_k: &[f64]) -> Result<Vec<f64>> {
    if deltas.is_empty() {
        return Err(QfeError::shape("at least one temporal modality is required"));
    }
    if deltas.len() != lambda_k.len() {
        return Err(QfeError::shape(format!(
            "{} modality multipliers for {} modalities",
            lambda_k.len(),
            deltas.len()
        )));
    }
    if let Some(l) = lambda_k.iter().find(|l| !(**l >= 0.0)) {
        return Err(QfeError::domain(format!("modality multiplier {l} is negative")));
    }
    check_lengths(sigma, deltas)?;
    let n_mod = deltas.len() as f64;
    Ok(sigma
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let weighted: f64 = deltas.iter().zip(lambda_k).map(|(d, l)| l * d[t]).sum();
            s * (1.0 + weighted / n_mod)
        })
        .collect())
}

/// `τ_wc,t = w_0·σ_t + Σ_k w_k·δ_{k,t} + ε`; `weights[0]` belongs to σ.
pub fn combine_approach2(
    sigma: &[f64],
    deltas: &[&[f64]],
    weights: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if weights.len() != deltas.len() + 1 {
        return Err(QfeError::shape(format!(
            "{} weights for sigma plus {} modalities",
            weights.len(),
            deltas.len()
        )));
    }
    check_lengths(sigma, deltas)?;
    Ok(sigma
        .iter()
        .enumerate()
        .map(|(t, s)| {
            weights[0] * s
                + deltas
                    .iter()
                    .zip(&weights[1..])
                    .map(|(d, w)| w * d[t])
                    .sum::<f64>()
                + epsilon
        })
        .collect())
}

/// Upper bound of the domain-weighted score: `λ·(1 + mean(λ_k))`.
pub fn approach1_upper_bound(lambda: f64, lambda_k: &[f64]) -> f64 {
    lambda * (1.0 + lambda_k.iter().sum::<f64>() / lambda_k.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    DomainWeighted,
    WeightedSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombineParams {
    pub approach: Approach,
    /// One multiplier per temporal modality (domain-weighted).
    pub lambda_k: Vec<f64>,
    /// Weight of σ followed by one weight per modality (weighted sum, σ at λ = 1).
    pub weights: Vec<f64>,
    pub epsilon: f64,
}

impl Default for CombineParams {
    fn default() -> Self {
        CombineParams {
            approach: Approach::DomainWeighted,
            lambda_k: vec![100.0, 100.0, 50.0],
            weights: vec![1.0; 4],
            epsilon: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfeConfig {
    pub spatial: SpatialParams,
    pub temporal: TemporalParams,
    pub combine: CombineParams,
    pub modalities: Vec<Modality>,
}

impl Default for QfeConfig {
    fn default() -> Self {
        QfeConfig {
            spatial: SpatialParams::default(),
            temporal: TemporalParams::default(),
            combine: CombineParams::default(),
            modalities: vec![Modality::Lm2d, Modality::HpOrient, Modality::GazeLoc],
        }
    }
}

impl QfeConfig {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        self.temporal.validate()?;
        if self.modalities.is_empty() {
            return Err(QfeError::shape("at least one temporal modality is required"));
        }
        if self.modalities.contains(&Modality::Au) {
            return Err(QfeError::domain("AU is the spatial channel, not a temporal modality"));
        }
        let n = self.modalities.len();
        match self.combine.approach {
            Approach::DomainWeighted if self.combine.lambda_k.len() != n => Err(QfeError::shape(
                format!("{} modality multipliers for {n} modalities", self.combine.lambda_k.len()),
            )),
            Approach::WeightedSum if self.combine.weights.len() != n + 1 => Err(QfeError::shape(
                format!("{} weights for sigma plus {n} modalities", self.combine.weights.len()),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame_index: u64,
    pub sigma: f64,
    /// Aligned with [`ExpressivenessSeries::modalities`].
    pub delta: Vec<f64>,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressivenessSeries {
    pub subject_id: String,
    pub config: QfeConfig,
    pub frames: Vec<FrameScore>,
}

impl ExpressivenessSeries {
    pub fn modalities(&self) -> &[Modality] {
        &self.config.modalities
    }

    pub fn frame_indices(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.frame_index).collect()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.sigma).collect()
    }

    pub fn tau(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.tau).collect()
    }

    pub fn delta(&self, modality: Modality) -> Option<Vec<f64>> {
        let k = self.modalities().iter().position(|m| *m == modality)?;
        Some(self.frames.iter().map(|f| f.delta[k]).collect())
    }

    /// `frame,sigma,delta_<modality>...,tau`, one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,sigma");
        for m in self.modalities() {
            out.push_str(",delta_");
            out.push_str(m.short_name());
        }
        out.push_str(",tau\n");
        for f in &self.frames {
            out.push_str(&format!("{},{}", f.frame_index, f.sigma));
            for d in &f.delta {
                out.push_str(&format!(",{d}"));
            }
            out.push_str(&format!(",{}\n", f.tau));
        }
        out
    }
}

/// σ for every frame of a sequence.
pub fn sigma_series(seq: &FeatureSequence, p: &SpatialParams, map: &AUCategoryMap) -> Result<Vec<f64>> {
    p.validate()?;
    seq.frames()
        .par_iter()
        .map(|frame| spatial_score(&select_au_subset(frame, &p.au_category, map)?, p))
        .collect()
}

/// Per-frame δ of one modality, scaling the raw features first.
pub fn delta_series(seq: &FeatureSequence, modality: Modality, p: &TemporalParams) -> Result<Vec<f64>> {
    let scaled = minmax_scale(&ModalityMatrix::from_sequence(seq, modality)?)?;
    modality_delta_series(&scaled, p)
}

/// Full scoring pipeline over a preprocessed sequence.
pub fn compute_qfe(
    seq: &FeatureSequence,
    config: &QfeConfig,
    map: &AUCategoryMap,
) -> Result<ExpressivenessSeries> {
    config.validate()?;
    let sigma = sigma_series(seq, &config.spatial, map)?;
    let deltas: Vec<Vec<f64>> = config
        .modalities
        .iter()
        .map(|m| delta_series(seq, *m, &config.temporal))
        .collect::<Result<_>>()?;
    let delta_refs: Vec<&[f64]> = deltas.iter().map(Vec::as_slice).collect();

    let tau = match config.combine.approach {
        Approach::DomainWeighted => combine_approach1(&sigma, &delta_refs, &config.combine.lambda_k)?,
        Approach::WeightedSum => {
            let unit = SpatialParams {
                lambda: 1.0,
                ..config.spatial.clone()
            };
            let sigma_unit = sigma_series(seq, &unit, map)?;
            combine_approach2(&sigma_unit, &delta_refs, &config.combine.weights, config.combine.epsilon)?
        }
    };

    let frames = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| FrameScore {
            frame_index: f.frame_index,
            sigma: sigma[t],
            delta: deltas.iter().map(|d| d[t]).collect(),
            tau: tau[t],
        })
        .collect();
    Ok(ExpressivenessSeries {
        subject_id: seq.subject_id.clone(),
        config: config.clone(),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> SpatialParams {
        SpatialParams::default()
    }

    #[test]
    fn sigma_extremes() {
        assert_eq!(spatial_score(&[0.0; 18], &params()).unwrap(), 0.0);
        assert_abs_diff_eq!(spatial_score(&[5.0; 18], &params()).unwrap(), 100.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_never_rounds_above_lambda() {
        for n in 1..=40 {
            for x in [5.0, 4.999999999999999] {
                assert!(spatial_score(&vec![x; n], &params()).unwrap() <= 100.0, "n = {n}");
            }
        }
    }

    #[test]
    fn sigma_single_active_au() {
        let mut au = [0.0; 18];
        au[3] = 5.0;
        assert_abs_diff_eq!(spatial_score(&au, &params()).unwrap(), 100.0 / 18.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_domain_errors() {
        assert!(spatial_score(&[], &params()).is_err());
        assert!(spatial_score(&[5.1], &params()).is_err());
        assert!(spatial_score(&[-0.1], &params()).is_err());
        let bad = SpatialParams { lambda: 0.0, ..params() };
        assert!(spatial_score(&[1.0], &bad).is_err());
    }

    fn scaled(rows: &[f64]) -> ModalityMatrix {
        ModalityMatrix::from_scaled(Modality::Lm2d, DMatrix::from_column_slice(rows.len(), 1, rows)).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let dv = velocity(&scaled(&[0.4; 6]), 5).unwrap();
        assert_eq!(dv.as_slice(), &[0.0]);

        let dv = velocity(&scaled(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]), 5).unwrap();
        assert_abs_diff_eq!(dv[(0, 0)], 0.1, epsilon = 1e-15);

        let dv = velocity(&scaled(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(dv[(0, 0)], 1.0);
    }

    #[test]
    fn velocity_needs_more_frames_than_stride() {
        assert!(matches!(velocity(&scaled(&[0.0; 5]), 5), Err(QfeError::InsufficientData(_))));
        let raw = ModalityMatrix::new(Modality::Lm2d, DMatrix::zeros(10, 1));
        assert!(matches!(velocity(&raw, 1), Err(QfeError::Precondition(_))));
    }

    #[test]
    fn taylor_examples() {
        assert_eq!(temporal_raw(&[0.0, 0.0], 20).unwrap(), 0.0);
        assert_abs_diff_eq!(temporal_raw(&[1.0], 20).unwrap(), E - 1.0, epsilon = 1e-12);
        assert_eq!(temporal_raw(&[1.0], 1).unwrap(), 1.0);
        assert!(temporal_raw(&[-0.1], 20).is_err());
        assert!(temporal_raw(&[0.1], 0).is_err());
    }

    #[test]
    fn taylor_low_orders_by_hand() {
        let x: f64 = 0.3;
        assert_abs_diff_eq!(taylor_exp_m1(x, 2), x + x * x / 2.0, epsilon = 1e-16);
        assert_abs_diff_eq!(taylor_exp_m1(x, 3), x + x * x / 2.0 + x.powi(3) / 6.0, epsilon = 1e-16);
    }

    #[test]
    fn temporal_score_examples() {
        assert_eq!(temporal_score(0.0, 10, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(temporal_score(10.0 * (E - 1.0), 10, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(temporal_score(68.0 * (E - 1.0), 136, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        assert!(temporal_score(1.0, 0, 1.0).is_err());
    }

    fn tp(stride: usize) -> TemporalParams {
        TemporalParams { stride, ..TemporalParams::default() }
    }

    #[test]
    fn delta_series_constant_is_zero() {
        let d = modality_delta_series(&scaled(&[0.5; 10]), &tp(5)).unwrap();
        assert_eq!(d, vec![0.0; 10]);
    }

    #[test]
    fn delta_series_holds_after_step() {
        let mut v = vec![0.0; 10];
        v[5..].fill(1.0);
        let d = modality_delta_series(&scaled(&v), &tp(5)).unwrap();
        assert!(d[..5].iter().all(|x| *x == 0.0));
        let expected = taylor_exp_m1(0.2, 20) / (E - 1.0);
        assert!(d[5..].iter().all(|x| (*x - expected).abs() < 1e-15 && *x > 0.0));
    }

    #[test]
    fn delta_series_dense_grid() {
        let v = [0.0, 0.5, 1.0, 0.5];
        let d = modality_delta_series(&scaled(&v), &tp(1)).unwrap();
        assert_eq!(d[0], 0.0);
        let expected = taylor_exp_m1(0.5, 20) / (E - 1.0);
        for x in &d[1..] {
            assert_abs_diff_eq!(*x, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta_series_trailing_frames_hold_last_pair() {
        let v: Vec<f64> = (0..13).map(|i| i as f64 / 12.0).collect();
        let d = modality_delta_series(&scaled(&v), &tp(5)).unwrap();
        assert_eq!(d.len(), 13);
        assert_eq!(d[12], d[10]);
        assert!(d[10] > 0.0);
    }

    #[test]
    fn closed_form_agrees_with_series() {
        let v: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let m = scaled(&v);
        let a = modality_delta_grid(&m, &tp(1)).unwrap();
        let b = modality_delta_grid(&m, &TemporalParams { closed_form: true, ..tp(1) }).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn approach1_examples() {
        let sigma = [0.0, 0.0];
        let d = [0.9, 0.4];
        let tau = combine_approach1(&sigma, &[&d, &d, &d], &[100.0, 100.0, 50.0]).unwrap();
        assert_eq!(tau, vec![0.0, 0.0]);

        let tau = combine_approach1(&[10.0], &[&[0.1], &[0.2], &[0.3]], &[100.0, 100.0, 50.0]).unwrap();
        assert_abs_diff_eq!(tau[0], 160.0, epsilon = 1e-12);

        let tau = combine_approach1(&[37.0], &[&[1.0], &[1.0], &[1.0]], &[1.0; 3]).unwrap();
        assert_eq!(tau[0], 74.0);
    }

    #[test]
    fn approach1_shape_errors() {
        assert!(combine_approach1(&[1.0, 2.0], &[&[0.1]], &[1.0]).is_err());
        assert!(combine_approach1(&[1.0], &[&[0.1]], &[1.0, 2.0]).is_err());
        assert!(combine_approach1(&[1.0], &[], &[]).is_err());
    }

    #[test]
    fn approach2_examples() {
        let tau = combine_approach2(&[0.2], &[&[0.1], &[0.1], &[0.1]], &[1.0; 4], 0.0).unwrap();
        assert_abs_diff_eq!(tau[0], 0.5, epsilon = 1e-15);

        let tau = combine_approach2(&[0.2, 0.9], &[&[0.1, 0.3]], &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(tau, vec![3.0, 3.0]);

        let sigma = [0.2, 0.7, 0.1];
        let d = [0.5, 0.5, 0.5];
        let tau = combine_approach2(&sigma, &[&d, &d], &[1.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(tau, sigma.to_vec());

        assert!(combine_approach2(&sigma, &[&d], &[1.0], 0.0).is_err());
    }

    #[test]
    fn upper_bound_helper() {
        assert_eq!(approach1_upper_bound(100.0, &[1.0, 1.0, 1.0]), 200.0);
        assert_abs_diff_eq!(approach1_upper_bound(100.0, &[100.0, 100.0, 50.0]), 100.0 * (1.0 + 250.0 / 3.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = QfeConfig::default();
        cfg.validate().unwrap();
        cfg.combine.lambda_k.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = QfeConfig::default();
        cfg.combine.approach = Approach::WeightedSum;
        cfg.combine.weights = vec![1.0; 3];
        assert!(cfg.validate().is_err());
        let mut cfg = QfeConfig::default();
        cfg.modalities.push(Modality::Au);
        cfg.combine.lambda_k.push(1.0);
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn sigma_bounded_and_monotone(
            au in proptest::collection::vec(0.0f64..=5.0, 1..25),
            idx in 0usize..25,
            bump in 0.0f64..1.0,
        ) {
            let s = spatial_score(&au, &params()).unwrap();
            prop_assert!((0.0..=100.0).contains(&s));
            let mut bigger = au.clone();
            let i = idx % au.len();
            bigger[i] = (bigger[i] + bump).min(5.0);
            prop_assert!(spatial_score(&bigger, &params()).unwrap() >= s);
        }

        #[test]
        fn sigma_is_order_invariant(au in proptest::collection::vec(0.0f64..=5.0, 1..25)) {
            let mut rev = au.clone();
            rev.reverse();
            let a = spatial_score(&au, &params()).unwrap();
            let b = spatial_score(&rev, &params()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn taylor_twenty_matches_exp_m1(dv in 0.0f64..=1.0) {
            prop_assert!((taylor_exp_m1(dv, 20) - dv.exp_m1()).abs() < 1e-12);
        }

        #[test]
        fn delta_bounded_and_zero_iff_constant(
            v in proptest::collection::vec(0.0f64..=1.0, 2..40),
            stride in 1usize..6,
        ) {
            prop_assume!(v.len() > stride);
            let m = scaled(&v);
            let grid = modality_delta_grid(&m, &tp(stride)).unwrap();
            for (k, d) in grid.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(d));
                let moved = v[(k + 1) * stride] != v[k * stride];
                prop_assert_eq!(*d == 0.0, !moved);
            }
        }

        #[test]
        fn approach1_bounds(
            sigma in 0.0f64..=100.0,
            d in proptest::collection::vec(0.0f64..=1.0, 3),
        ) {
            let tau = combine_approach1(&[sigma], &[&d[0..1], &d[1..2], &d[2..3]], &[1.0; 3]).unwrap()[0];
            prop_assert!(tau >= sigma);
            prop_assert!(tau <= 2.0 * sigma + 1e-12);
        }
    }
}
