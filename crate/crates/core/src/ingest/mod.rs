//! Per-frame facial feature tables: parsing, quality preprocessing,
//! per-modality matrices and min-max scaling.

mod au;
mod openface;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QfeError, Result};

pub use au::{au_description, select_au_subset, AUCategoryMap, AU_DESCRIPTIONS};
pub use openface::{parse_feature_csv, write_feature_csv};

/// Upper end of the FACS intensity scale.
pub const AU_MAX_INTENSITY: f64 = 5.0;

pub const N_LANDMARKS: usize = 68;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    /// Tx, Ty, Tz in millimetres.
    pub translation: [f64; 3],
    /// Rx, Ry, Rz in radians.
    pub rotation: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub frame_index: u64,
    pub timestamp: f64,
    pub confidence: f64,
    pub success: bool,
    pub au_intensities: BTreeMap<u8, f64>,
    pub landmarks_2d: Option<Vec<[f64; 2]>>,
    pub landmarks_3d: Option<Vec<[f64; 3]>>,
    pub head_pose: Option<HeadPose>,
    /// Gaze direction vector per eye.
    pub gaze_location: Option<[[f64; 3]; 2]>,
    pub gaze_angle: Option<[f64; 2]>,
}

impl FeatureFrame {
    /// A successfully tracked frame with no features attached.
    pub fn empty(frame_index: u64, timestamp: f64) -> Self {
        FeatureFrame {
            frame_index,
            timestamp,
            confidence: 1.0,
            success: true,
            au_intensities: BTreeMap::new(),
            landmarks_2d: None,
            landmarks_3d: None,
            head_pose: None,
            gaze_location: None,
            gaze_angle: None,
        }
    }

    /// Features of one modality flattened in a fixed order, or `None` when the
    /// frame does not carry that block.
    pub fn modality_values(&self, modality: Modality) -> Option<Vec<f64>> {
        match modality {
            Modality::Lm2d => self
                .landmarks_2d
                .as_ref()
                .map(|pts| pts.iter().flatten().copied().collect()),
            Modality::Lm3d => self
                .landmarks_3d
                .as_ref()
                .map(|pts| pts.iter().flatten().copied().collect()),
            Modality::HpOrient => self.head_pose.map(|p| p.translation.to_vec()),
            Modality::HpRot => self.head_pose.map(|p| p.rotation.to_vec()),
            Modality::GazeLoc => self
                .gaze_location
                .map(|g| g.iter().flatten().copied().collect()),
            Modality::GazeAngle => self.gaze_angle.map(|g| g.to_vec()),
            Modality::Au => {
                if self.au_intensities.is_empty() {
                    None
                } else {
                    Some(self.au_intensities.values().copied().collect())
                }
            }
        }
    }

    /// Applies `f` to every numeric feature value (AU intensities, landmarks,
    /// pose, gaze), leaving bookkeeping fields untouched.
    pub fn map_features(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in self.au_intensities.values_mut() {
            *v = f(*v);
        }
        if let Some(pts) = &mut self.landmarks_2d {
            pts.iter_mut().flatten().for_each(|v| *v = f(*v));
        }
        if let Some(pts) = &mut self.landmarks_3d {
            pts.iter_mut().flatten().for_each(|v| *v = f(*v));
        }
        if let Some(p) = &mut self.head_pose {
            p.translation.iter_mut().chain(p.rotation.iter_mut()).for_each(|v| *v = f(*v));
        }
        if let Some(g) = &mut self.gaze_location {
            g.iter_mut().flatten().for_each(|v| *v = f(*v));
        }
        if let Some(g) = &mut self.gaze_angle {
            g.iter_mut().for_each(|v| *v = f(*v));
        }
    }

    /// Mutable references to every numeric feature in the same order as
    /// [`FeatureFrame::map_features`] visits them.
    pub fn feature_values_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = self.au_intensities.values_mut().collect();
        if let Some(pts) = &mut self.landmarks_2d {
            out.extend(pts.iter_mut().flatten());
        }
        if let Some(pts) = &mut self.landmarks_3d {
            out.extend(pts.iter_mut().flatten());
        }
        if let Some(p) = &mut self.head_pose {
            out.extend(p.translation.iter_mut().chain(p.rotation.iter_mut()));
        }
        if let Some(g) = &mut self.gaze_location {
            out.extend(g.iter_mut().flatten());
        }
        if let Some(g) = &mut self.gaze_angle {
            out.extend(g.iter_mut());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub subject_id: String,
    pub fps: f64,
    frames: Vec<FeatureFrame>,
}

impl FeatureSequence {
    /// Validates that fps is positive and that frame indices and timestamps
    /// are strictly increasing.
    pub fn new(subject_id: impl Into<String>, fps: f64, frames: Vec<FeatureFrame>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(QfeError::domain(format!("fps must be positive, got {fps}")));
        }
        for pair in frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(QfeError::Data(format!(
                    "frame indices not strictly increasing at frame {}",
                    pair[1].frame_index
                )));
            }
            if !(pair[1].timestamp > pair[0].timestamp) {
                return Err(QfeError::Data(format!(
                    "timestamps not strictly increasing at frame {}",
                    pair[1].frame_index
                )));
            }
        }
        Ok(FeatureSequence {
            subject_id: subject_id.into(),
            fps,
            frames,
        })
    }

    pub fn frames(&self) -> &[FeatureFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_indices(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.frame_index).collect()
    }

    /// Same sequence with every frame's features transformed in place.
    /// Frame ordering and timestamps are preserved, so invariants still hold.
    pub fn map_frames(&self, mut f: impl FnMut(usize, &mut FeatureFrame)) -> FeatureSequence {
        let mut out = self.clone();
        for (i, frame) in out.frames.iter_mut().enumerate() {
            f(i, frame);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPolicy {
    pub confidence_threshold: f64,
    /// Longest run of invalid frames (in frames) that is interpolated
    /// rather than dropped.
    pub max_gap: usize,
    pub clamp: bool,
}

impl Default for PreprocessPolicy {
    fn default() -> Self {
        PreprocessPolicy {
            confidence_threshold: 0.8,
            max_gap: 10,
            clamp: true,
        }
    }
}

/// Replaces low-confidence or untracked frames by linear interpolation from
/// the nearest valid neighbours (gaps up to `max_gap`), drops the rest, and
/// optionally clamps AU intensities to the FACS range.
///
/// Interpolated frames keep their own frame index, timestamp, confidence and
/// success flag; only feature values change.
pub fn preprocess(seq: &FeatureSequence, policy: &PreprocessPolicy) -> Result<FeatureSequence> {
    if !(0.0..=1.0).contains(&policy.confidence_threshold) {
        return Err(QfeError::Precondition(format!(
            "confidence_threshold must lie in [0, 1], got {}",
            policy.confidence_threshold
        )));
    }
    let frames = seq.frames();
    let valid: Vec<bool> = frames
        .iter()
        .map(|f| f.success && f.confidence >= policy.confidence_threshold)
        .collect();
    if !valid.iter().any(|v| *v) {
        return Err(QfeError::UnusableSequence(format!(
            "no frame of {:?} passes the quality filter",
            seq.subject_id
        )));
    }

    let mut out = Vec::with_capacity(frames.len());
    let mut i = 0;
    while i < frames.len() {
        if valid[i] {
            out.push(frames[i].clone());
            i += 1;
            continue;
        }
        let start = i;
        while i < frames.len() && !valid[i] {
            i += 1;
        }
        let run = i - start;
        if start == 0 || i == frames.len() || run > policy.max_gap {
            log::debug!("dropping {run} invalid frame(s) starting at index {start}");
            continue;
        }
        let (prev, next) = (&frames[start - 1], &frames[i]);
        for frame in &frames[start..i] {
            out.push(interpolate_frame(frame, prev, next));
        }
    }

    if policy.clamp {
        for frame in &mut out {
            for v in frame.au_intensities.values_mut() {
                *v = v.clamp(0.0, AU_MAX_INTENSITY);
            }
        }
    }
    FeatureSequence::new(seq.subject_id.clone(), seq.fps, out)
}

fn interpolate_frame(frame: &FeatureFrame, prev: &FeatureFrame, next: &FeatureFrame) -> FeatureFrame {
    let span = (next.frame_index - prev.frame_index) as f64;
    let w = (frame.frame_index - prev.frame_index) as f64 / span;
    let lerp = |a: f64, b: f64| a + (b - a) * w;

    let mut out = frame.clone();
    for (au, v) in out.au_intensities.iter_mut() {
        if let (Some(a), Some(b)) = (prev.au_intensities.get(au), next.au_intensities.get(au)) {
            *v = lerp(*a, *b);
        }
    }
    if let (Some(a), Some(b)) = (&prev.landmarks_2d, &next.landmarks_2d) {
        out.landmarks_2d = Some(
            a.iter()
                .zip(b)
                .map(|(p, q)| [lerp(p[0], q[0]), lerp(p[1], q[1])])
                .collect(),
        );
    }
    if let (Some(a), Some(b)) = (&prev.landmarks_3d, &next.landmarks_3d) {
        out.landmarks_3d = Some(
            a.iter()
                .zip(b)
                .map(|(p, q)| [lerp(p[0], q[0]), lerp(p[1], q[1]), lerp(p[2], q[2])])
                .collect(),
        );
    }
    if let (Some(a), Some(b)) = (prev.head_pose, next.head_pose) {
        out.head_pose = Some(HeadPose {
            translation: std::array::from_fn(|k| lerp(a.translation[k], b.translation[k])),
            rotation: std::array::from_fn(|k| lerp(a.rotation[k], b.rotation[k])),
        });
    }
    if let (Some(a), Some(b)) = (prev.gaze_location, next.gaze_location) {
        out.gaze_location = Some(std::array::from_fn(|e| {
            std::array::from_fn(|k| lerp(a[e][k], b[e][k]))
        }));
    }
    if let (Some(a), Some(b)) = (prev.gaze_angle, next.gaze_angle) {
        out.gaze_angle = Some(std::array::from_fn(|k| lerp(a[k], b[k])));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "LM2D")]
    Lm2d,
    #[serde(rename = "LM3D")]
    Lm3d,
    /// Head translation (Tx, Ty, Tz).
    #[serde(rename = "HP_ORIENT")]
    HpOrient,
    /// Head rotation (Rx, Ry, Rz).
    #[serde(rename = "HP_ROT")]
    HpRot,
    /// Per-eye gaze direction vectors.
    #[serde(rename = "GAZE_LOC")]
    GazeLoc,
    #[serde(rename = "GAZE_ANGLE")]
    GazeAngle,
    #[serde(rename = "AU")]
    Au,
}

impl Modality {
    pub const TEMPORAL: [Modality; 6] = [
        Modality::Lm2d,
        Modality::Lm3d,
        Modality::HpOrient,
        Modality::HpRot,
        Modality::GazeLoc,
        Modality::GazeAngle,
    ];

    /// Short column suffix used in series tables (`delta_<short>`).
    pub fn short_name(self) -> &'static str {
        match self {
            Modality::Lm2d => "lm",
            Modality::Lm3d => "lm3d",
            Modality::HpOrient => "hp",
            Modality::HpRot => "hp_rot",
            Modality::GazeLoc => "gaze",
            Modality::GazeAngle => "gaze_angle",
            Modality::Au => "au",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Modality::Lm2d => "LM2D",
            Modality::Lm3d => "LM3D",
            Modality::HpOrient => "HP_ORIENT",
            Modality::HpRot => "HP_ROT",
            Modality::GazeLoc => "GAZE_LOC",
            Modality::GazeAngle => "GAZE_ANGLE",
            Modality::Au => "AU",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Modality {
    type Err = QfeError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        [
            Modality::Lm2d,
            Modality::Lm3d,
            Modality::HpOrient,
            Modality::HpRot,
            Modality::GazeLoc,
            Modality::GazeAngle,
            Modality::Au,
        ]
        .into_iter()
        .find(|m| m.label() == norm || m.short_name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| QfeError::domain(format!("unknown modality {s:?}")))
    }
}

/// One modality's features over a sequence: `n_frames × n_features`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityMatrix {
    modality: Modality,
    values: DMatrix<f64>,
    scaled: bool,
}

impl ModalityMatrix {
    pub fn new(modality: Modality, values: DMatrix<f64>) -> Self {
        ModalityMatrix {
            modality,
            values,
            scaled: false,
        }
    }

    /// Wraps values that are already in `[0, 1]`.
    pub fn from_scaled(modality: Modality, values: DMatrix<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QfeError::Data(format!("scaled value {v} outside [0, 1]")));
        }
        Ok(ModalityMatrix {
            modality,
            values,
            scaled: true,
        })
    }

    /// Stacks the modality's features of every frame.
    pub fn from_sequence(seq: &FeatureSequence, modality: Modality) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(seq.len());
        for frame in seq.frames() {
            let row = frame.modality_values(modality).ok_or_else(|| {
                QfeError::MissingFeature(format!(
                    "{modality} absent at frame {}",
                    frame.frame_index
                ))
            })?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(QfeError::shape(format!(
                        "{modality} has {} features at frame {} but {} earlier",
                        row.len(),
                        frame.frame_index,
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        let n_cols = rows.first().map_or(0, Vec::len);
        let values = DMatrix::from_fn(rows.len(), n_cols, |r, c| rows[r][c]);
        Ok(ModalityMatrix::new(modality, values))
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// Column-wise min-max scaling to `[0, 1]`; constant columns map to zero.
///
/// Re-scaling an already scaled matrix is the identity, so this may be
/// applied unconditionally.
pub fn minmax_scale(matrix: &ModalityMatrix) -> Result<ModalityMatrix> {
    if matrix.n_frames() == 0 {
        return Err(QfeError::insufficient("min-max scaling needs at least one frame"));
    }
    if let Some(((r, c), v)) = matrix
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| ((i % matrix.n_frames(), i / matrix.n_frames()), v))
        .find(|(_, v)| !v.is_finite())
    {
        return Err(QfeError::Data(format!(
            "non-finite value {v} in {} at row {r}, feature {c}",
            matrix.modality
        )));
    }
    let mut values = matrix.values.clone();
    for mut col in values.column_iter_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let range = hi - lo;
        if range > 0.0 {
            col.iter_mut().for_each(|v| *v = (*v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    Ok(ModalityMatrix {
        modality: matrix.modality,
        values,
        scaled: true,
    })
}
