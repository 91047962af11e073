//! Seeded noise and anomaly injection, and the clean/perturbed/mitigated
//! comparison of σ and δ.
//!
//! Randomness comes from `ChaCha8Rng` seeded with `seed_from_u64(seed)`;
//! noise draws use stream 0 and anomaly draws stream 1, so one kind of
//! perturbation never shifts the other's draws. Units are visited in
//! row-major order.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{QfeError, Result};
use crate::ingest::{preprocess, select_au_subset, AUCategoryMap, FeatureSequence, PreprocessPolicy};
use crate::score::{delta_series, spatial_unchecked, QfeConfig};
use crate::stats::{mean, MeanSd};

const NOISE_STREAM: u64 = 0;
const ANOMALY_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationUnit {
    /// One draw per frame, applied to all of its features.
    PerFrame,
    PerScalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// `ns ~ U[0, noise_scale]`
    Uniform,
    /// `ns = |N(0, noise_scale²)|`
    HalfNormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub seed: u64,
    pub noise_scale: f64,
    pub anomaly_fraction: f64,
    pub anomaly_gain_max: f64,
    pub unit: PerturbationUnit,
    pub noise_distribution: NoiseDistribution,
    /// Replaces the random anomaly gain when set.
    pub fixed_gain: Option<f64>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            seed: 0,
            noise_scale: 0.05,
            anomaly_fraction: 0.02,
            anomaly_gain_max: 2.0,
            unit: PerturbationUnit::PerFrame,
            noise_distribution: NoiseDistribution::Uniform,
            fixed_gain: None,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(QfeError::domain(format!("noise_scale must be ≥ 0, got {}", self.noise_scale)));
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return Err(QfeError::domain(format!(
                "anomaly_fraction must lie in [0, 1], got {}",
                self.anomaly_fraction
            )));
        }
        if !(self.anomaly_gain_max >= 0.0 && self.anomaly_gain_max.is_finite()) {
            return Err(QfeError::domain(format!(
                "anomaly_gain_max must be ≥ 0, got {}",
                self.anomaly_gain_max
            )));
        }
        if let Some(g) = self.fixed_gain {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(QfeError::domain(format!("fixed gain must be ≥ 0, got {g}")));
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn unit_count(&self, data: &DMatrix<f64>) -> usize {
        match self.unit {
            PerturbationUnit::PerFrame => data.nrows(),
            PerturbationUnit::PerScalar => data.len(),
        }
    }
}

/// Multiplies unit `u` (a row, or a single entry in row-major order) by `gain`.
fn scale_unit(data: &mut DMatrix<f64>, unit: PerturbationUnit, u: usize, gain: f64) {
    match unit {
        PerturbationUnit::PerFrame => data.row_mut(u).scale_mut(gain),
        PerturbationUnit::PerScalar => {
            let cols = data.ncols();
            data[(u / cols, u % cols)] *= gain;
        }
    }
}

/// `D·(1 + ns)` with one `ns` per unit.
pub fn inject_noise(data: &DMatrix<f64>, cfg: &PerturbationConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let mut out = data.clone();
    if cfg.noise_scale == 0.0 {
        return Ok(out);
    }
    let mut rng = cfg.rng(NOISE_STREAM);
    let units = cfg.unit_count(data);
    match cfg.noise_distribution {
        NoiseDistribution::Uniform => {
            let dist = Uniform::new_inclusive(0.0, cfg.noise_scale).map_err(|e| QfeError::domain(e.to_string()))?;
            for u in 0..units {
                scale_unit(&mut out, cfg.unit, u, 1.0 + dist.sample(&mut rng));
            }
        }
        NoiseDistribution::HalfNormal => {
            let dist = Normal::new(0.0, cfg.noise_scale).map_err(|e| QfeError::domain(e.to_string()))?;
            for u in 0..units {
                let ns: f64 = dist.sample(&mut rng);
                scale_unit(&mut out, cfg.unit, u, 1.0 + ns.abs());
            }
        }
    }
    Ok(out)
}

/// Picks exactly `round(fraction·units)` units without replacement and scales
/// each by its own gain `a ~ U(0, anomaly_gain_max)`. Returns the chosen unit
/// indices in ascending order.
pub fn inject_anomalies(data: &DMatrix<f64>, cfg: &PerturbationConfig) -> Result<(DMatrix<f64>, Vec<usize>)> {
    cfg.validate()?;
    let units = cfg.unit_count(data);
    let count = (cfg.anomaly_fraction * units as f64).round() as usize;
    let mut rng = cfg.rng(ANOMALY_STREAM);
    let mut chosen = index::sample(&mut rng, units, count).into_vec();
    chosen.sort_unstable();
    let mut out = data.clone();
    let gain_dist = if cfg.anomaly_gain_max > 0.0 {
        Some(Uniform::new(0.0, cfg.anomaly_gain_max).map_err(|e| QfeError::domain(e.to_string()))?)
    } else {
        None
    };
    for &u in &chosen {
        let gain = match (cfg.fixed_gain, &gain_dist) {
            (Some(g), _) => g,
            (None, Some(d)) => d.sample(&mut rng),
            (None, None) => 0.0,
        };
        scale_unit(&mut out, cfg.unit, u, gain);
    }
    Ok((out, chosen))
}

/// Every numeric feature of the sequence as a frames × features matrix.
fn feature_matrix(seq: &FeatureSequence) -> Result<DMatrix<f64>> {
    let mut frames = seq.frames().to_vec();
    let rows: Vec<Vec<f64>> = frames
        .iter_mut()
        .map(|f| f.feature_values_mut().into_iter().map(|v| *v).collect())
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(QfeError::EmptyInput);
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(QfeError::shape("frames carry different feature blocks"));
    }
    Ok(DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c]))
}

fn with_features(seq: &FeatureSequence, data: &DMatrix<f64>) -> FeatureSequence {
    seq.map_frames(|t, frame| {
        for (c, v) in frame.feature_values_mut().into_iter().enumerate() {
            *v = data[(t, c)];
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSeries {
    pub frame_indices: Vec<u64>,
    pub sigma: Vec<f64>,
    /// One δ series per configured modality, in configuration order.
    pub delta: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub sigma: MeanSd,
    /// Keyed by modality short name.
    pub delta: BTreeMap<String, MeanSd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub perturbed: SeriesSummary,
    pub mitigated: SeriesSummary,
    /// Mean |σ − σ_clean| over frames present in both series.
    pub mean_abs_sigma_change_perturbed: f64,
    pub mean_abs_sigma_change_mitigated: f64,
    /// Chosen units (frames or row-major scalars); empty for noise.
    pub perturbed_indices: Vec<usize>,
    #[serde(skip)]
    pub perturbed_series: Option<ConditionSeries>,
    #[serde(skip)]
    pub mitigated_series: Option<ConditionSeries>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub config: PerturbationConfig,
    pub policy: PreprocessPolicy,
    pub clean: SeriesSummary,
    pub noise: PerturbationOutcome,
    pub anomaly: PerturbationOutcome,
    #[serde(skip)]
    pub clean_series: Option<ConditionSeries>,
}

fn score_condition(seq: &FeatureSequence, config: &QfeConfig, map: &AUCategoryMap) -> Result<ConditionSeries> {
    let sp = &config.spatial;
    let sigma = seq
        .frames()
        .iter()
        .map(|f| {
            let au = select_au_subset(f, &sp.au_category, map)?;
            Ok(spatial_unchecked(&au, sp.lambda, sp.x_max))
        })
        .collect::<Result<_>>()?;
    let delta = config
        .modalities
        .iter()
        .map(|m| delta_series(seq, *m, &config.temporal))
        .collect::<Result<_>>()?;
    Ok(ConditionSeries {
        frame_indices: seq.frame_indices(),
        sigma,
        delta,
    })
}

fn summarize(s: &ConditionSeries, config: &QfeConfig) -> SeriesSummary {
    SeriesSummary {
        sigma: MeanSd::of(&s.sigma),
        delta: config
            .modalities
            .iter()
            .zip(&s.delta)
            .map(|(m, d)| (m.short_name().to_string(), MeanSd::of(d)))
            .collect(),
    }
}

fn mean_abs_sigma_change(clean: &ConditionSeries, other: &ConditionSeries) -> f64 {
    let by_frame: BTreeMap<u64, f64> = clean.frame_indices.iter().copied().zip(clean.sigma.iter().copied()).collect();
    let diffs: Vec<f64> = other
        .frame_indices
        .iter()
        .zip(&other.sigma)
        .filter_map(|(f, s)| by_frame.get(f).map(|c| (s - c).abs()))
        .collect();
    if diffs.is_empty() {
        f64::NAN
    } else {
        mean(&diffs)
    }
}

/// Noise applied to every numeric feature of the sequence.
pub fn apply_noise(seq: &FeatureSequence, cfg: &PerturbationConfig) -> Result<FeatureSequence> {
    Ok(with_features(seq, &inject_noise(&feature_matrix(seq)?, cfg)?))
}

/// Anomalies applied to every numeric feature of the sequence; indices as in
/// [`inject_anomalies`].
pub fn apply_anomalies(seq: &FeatureSequence, cfg: &PerturbationConfig) -> Result<(FeatureSequence, Vec<usize>)> {
    let (data, idx) = inject_anomalies(&feature_matrix(seq)?, cfg)?;
    Ok((with_features(seq, &data), idx))
}

fn outcome(
    perturbed_seq: FeatureSequence,
    indices: Vec<usize>,
    clean: &ConditionSeries,
    policy: &PreprocessPolicy,
    config: &QfeConfig,
    map: &AUCategoryMap,
) -> Result<PerturbationOutcome> {
    let p = score_condition(&perturbed_seq, config, map)?;
    let m = score_condition(&preprocess(&perturbed_seq, policy)?, config, map)?;
    Ok(PerturbationOutcome {
        perturbed: summarize(&p, config),
        mitigated: summarize(&m, config),
        mean_abs_sigma_change_perturbed: mean_abs_sigma_change(clean, &p),
        mean_abs_sigma_change_mitigated: mean_abs_sigma_change(clean, &m),
        perturbed_indices: indices,
        perturbed_series: Some(p),
        mitigated_series: Some(m),
    })
}

/// Scores the sequence as given (clean), after noise, after anomalies, and
/// after applying `policy` to each perturbed copy. Perturbations act on the
/// raw features, before min-max scaling.
pub fn run_robustness_experiment(
    seq: &FeatureSequence,
    cfg: &PerturbationConfig,
    policy: &PreprocessPolicy,
    config: &QfeConfig,
    map: &AUCategoryMap,
) -> Result<RobustnessReport> {
    cfg.validate()?;
    config.validate()?;
    let clean = score_condition(seq, config, map)?;
    let noise = outcome(apply_noise(seq, cfg)?, Vec::new(), &clean, policy, config, map)?;
    let (anomalous, indices) = apply_anomalies(seq, cfg)?;
    let anomaly = outcome(anomalous, indices, &clean, policy, config, map)?;
    Ok(RobustnessReport {
        config: *cfg,
        policy: *policy,
        clean: summarize(&clean, config),
        noise,
        anomaly,
        clean_series: Some(clean),
    })
}
