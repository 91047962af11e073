use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qfe::robustness::{NoiseDistribution, PerturbationUnit};
use qfe::score::{Approach, CombineParams, QfeConfig, SpatialParams, TemporalParams};
use qfe::{Modality, PreprocessPolicy};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "qfe",
    version,
    about = "Quantified facial expressiveness: scoring, causality, subjectivity and robustness analyses",
    args_override_self = true
)]
pub struct Cli {
    /// TOML file supplying any long flag as `name = value`; top-level keys
    /// apply to every command, `[command]` tables to one. Flags given on the
    /// command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-frame σ, δ and τ for one feature table.
    Score(ScoreArgs),
    /// Spearman association among temporal features across strides.
    Ablate(AblateArgs),
    /// Segment-level Granger causality from a context signal to a response.
    Granger(GrangerArgs),
    /// Pairwise MARPE, DTW, SRCC and CCC across subjects.
    Subjectivity(SubjectivityArgs),
    /// Noise and anomaly injection with optional mitigation.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Ablate(_) => "ablate",
            Command::Granger(_) => "granger",
            Command::Subjectivity(_) => "subjectivity",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Score(a) => &a.out,
            Command::Ablate(a) => &a.out,
            Command::Granger(a) => &a.out,
            Command::Subjectivity(a) => &a.out,
            Command::Simulate(a) => &a.out,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Feature table in OpenFace CSV layout.
    #[arg(long, short = 'i', value_name = "CSV")]
    pub input: PathBuf,
    /// Frame rate of the input table.
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Subject identifier (default: input file stem).
    #[arg(long)]
    pub subject: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PreprocessArgs {
    /// Frames below this tracker confidence are treated as invalid.
    #[arg(long, default_value_t = 0.8)]
    pub confidence_threshold: f64,
    /// Longest invalid run that is interpolated instead of dropped.
    #[arg(long, default_value_t = 10)]
    pub max_gap: usize,
    /// Keep AU intensities outside [0, 5].
    #[arg(long)]
    pub no_clamp: bool,
}

impl PreprocessArgs {
    pub fn policy(&self) -> CliResult<PreprocessPolicy> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(CliError::Usage(format!(
                "--confidence-threshold must lie in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        Ok(PreprocessPolicy {
            confidence_threshold: self.confidence_threshold,
            max_gap: self.max_gap,
            clamp: !self.no_clamp,
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproachArg {
    DomainWeighted,
    WeightedSum,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScoringArgs {
    /// Upper bound of σ.
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    /// Maximum AU intensity.
    #[arg(long, default_value_t = 5.0)]
    pub x_max: f64,
    /// AU category used for σ.
    #[arg(long, default_value = "overall")]
    pub au_category: String,
    /// JSON object mapping extra category names to AU numbers.
    #[arg(long, value_name = "JSON")]
    pub au_map: Option<PathBuf>,
    /// Frames between the two samples of a velocity pair.
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
    #[arg(long, default_value_t = 20)]
    pub taylor_order: u32,
    /// Use the exact exponential instead of the truncated series.
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long, value_enum, default_value_t = ApproachArg::DomainWeighted)]
    pub approach: ApproachArg,
    /// Per-modality multipliers of the domain-weighted combination.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, conflicts_with_all = ["weights", "epsilon"])]
    pub lambda_k: Option<Vec<f64>>,
    /// Weight of σ, then one per modality, for the weighted sum.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub weights: Option<Vec<f64>>,
    /// Offset of the weighted sum.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Temporal modalities, e.g. LM2D,HP_ORIENT,GAZE_LOC.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, value_parser = parse_modality)]
    pub modalities: Option<Vec<Modality>>,
}

fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse::<Modality>().map_err(|e| e.to_string())
}

impl ScoringArgs {
    pub fn qfe_config(&self) -> CliResult<QfeConfig> {
        let defaults = QfeConfig::default();
        let approach = match self.approach {
            ApproachArg::DomainWeighted => Approach::DomainWeighted,
            ApproachArg::WeightedSum => Approach::WeightedSum,
        };
        if approach == Approach::DomainWeighted && (self.weights.is_some() || self.epsilon.is_some()) {
            return Err(CliError::Usage(
                "--weights and --epsilon apply only to --approach weighted-sum".into(),
            ));
        }
        if approach == Approach::WeightedSum && self.lambda_k.is_some() {
            return Err(CliError::Usage(
                "--lambda-k applies only to --approach domain-weighted".into(),
            ));
        }
        let modalities = self.modalities.clone().unwrap_or(defaults.modalities);
        let n = modalities.len();
        let combine = CombineParams {
            approach,
            lambda_k: self.lambda_k.clone().unwrap_or_else(|| {
                if n == defaults.combine.lambda_k.len() {
                    defaults.combine.lambda_k.clone()
                } else {
                    vec![100.0; n]
                }
            }),
            weights: self.weights.clone().unwrap_or_else(|| vec![1.0; n + 1]),
            epsilon: self.epsilon.unwrap_or(0.0),
        };
        let config = QfeConfig {
            spatial: SpatialParams {
                lambda: self.lambda,
                x_max: self.x_max,
                au_category: self.au_category.clone(),
            },
            temporal: TemporalParams {
                stride: self.stride,
                taylor_order: self.taylor_order,
                closed_form: self.closed_form,
                ..TemporalParams::default()
            },
            combine,
            modalities,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorInputArg {
    Scores,
    Raw,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Also fit the one-factor latent score.
    #[arg(long)]
    pub factor: bool,
    /// Factor inputs: σ plus the δ series, or every raw AU and modality feature.
    #[arg(long, value_enum, default_value_t = FactorInputArg::Scores)]
    pub factor_input: FactorInputArg,
    /// Output directory.
    #[arg(long, short = 'o', value_name = "DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "5,10,20,40")]
    pub strides: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub taylor_order: u32,
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long, short = 'o', value_name = "DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GrangerArgs {
    /// CSV holding the context signal.
    #[arg(long, value_name = "CSV")]
    pub context: PathBuf,
    /// Column of the context file (default: its only column, or `context`).
    #[arg(long)]
    pub context_column: Option<String>,
    /// CSV holding the response, e.g. a score series.
    #[arg(long, value_name = "CSV")]
    pub response: PathBuf,
    /// Column of the response file (default: its only column, or `tau`).
    #[arg(long)]
    pub response_column: Option<String>,
    /// Sampling rate of both input series.
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Keep every k-th sample before testing.
    #[arg(long, default_value_t = 5)]
    pub downsample: usize,
    #[arg(long, default_value_t = 60.0, conflicts_with = "segment_frames")]
    pub segment_seconds: f64,
    /// Segment length in samples after downsampling.
    #[arg(long)]
    pub segment_frames: Option<usize>,
    /// Lags in seconds (each is tested jointly with all shorter lags).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "1,2,3,4,5,6,7,8,9,10", conflicts_with = "lags_frames")]
    pub lags_seconds: Vec<f64>,
    /// Lags in samples after downsampling.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub lags_frames: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, short = 'o', value_name = "DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SubjectivityArgs {
    /// Directory of per-subject series CSVs; the file stem is the subject id.
    #[arg(long, value_name = "DIR")]
    pub input_dir: PathBuf,
    /// Column read from every file.
    #[arg(long, default_value = "tau")]
    pub column: String,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "marpe,dtw,srcc,ccc", value_parser = parse_metric)]
    pub metrics: Vec<qfe::subjectivity::Metric>,
    /// Min-max scale each series to [0, 1] before DTW.
    #[arg(long)]
    pub dtw_normalize: bool,
    #[arg(long, default_value_t = 512)]
    pub kde_points: usize,
    #[arg(long, short = 'o', value_name = "DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_metric(s: &str) -> Result<qfe::subjectivity::Metric, String> {
    s.parse().map_err(|e: qfe::QfeError| e.to_string())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitArg {
    PerFrame,
    PerScalar,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Uniform,
    HalfNormal,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_scale: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Uniform)]
    pub noise_distribution: NoiseArg,
    #[arg(long, default_value_t = 0.02)]
    pub anomaly_fraction: f64,
    #[arg(long, default_value_t = 2.0)]
    pub anomaly_gain_max: f64,
    #[arg(long, value_enum, default_value_t = UnitArg::PerFrame)]
    pub unit: UnitArg,
    /// Apply the preprocessing policy (confidence filter and clamping) to
    /// the perturbed data; without it the mitigated condition equals the
    /// perturbed one.
    #[arg(long)]
    pub mitigate: bool,
    #[arg(long, short = 'o', value_name = "DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn perturbation(&self) -> CliResult<qfe::robustness::PerturbationConfig> {
        let cfg = qfe::robustness::PerturbationConfig {
            seed: self.seed,
            noise_scale: self.noise_scale,
            anomaly_fraction: self.anomaly_fraction,
            anomaly_gain_max: self.anomaly_gain_max,
            unit: match self.unit {
                UnitArg::PerFrame => PerturbationUnit::PerFrame,
                UnitArg::PerScalar => PerturbationUnit::PerScalar,
            },
            noise_distribution: match self.noise_distribution {
                NoiseArg::Uniform => NoiseDistribution::Uniform,
                NoiseArg::HalfNormal => NoiseDistribution::HalfNormal,
            },
            fixed_gain: None,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}
