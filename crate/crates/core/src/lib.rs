//! Quantified facial expressiveness.
//!
//! Per-frame, bounded expressiveness scores computed from facial action-unit
//! intensities and the motion of landmarks, head pose and gaze, plus the
//! analytics built on top of them: Granger causality between a context signal
//! and expressiveness, cross-subject comparison, a one-factor latent score and
//! noise/anomaly robustness experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod causality;
pub mod error;
pub mod factor;
pub mod ingest;
pub mod robustness;
pub mod score;
pub mod stats;
pub mod subjectivity;
pub mod synth;

pub use error::{QfeError, Result};
pub use ingest::{
    minmax_scale, parse_feature_csv, preprocess, select_au_subset, write_feature_csv,
    AUCategoryMap, FeatureFrame, FeatureSequence, HeadPose, Modality, ModalityMatrix,
    PreprocessPolicy,
};
pub use score::{
    compute_qfe, Approach, CombineParams, ExpressivenessSeries, QfeConfig, SpatialParams,
    TemporalParams,
};
