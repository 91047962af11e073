//! Deterministic synthetic feature sequences for tests, fixtures and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{FeatureFrame, FeatureSequence, HeadPose, AU_DESCRIPTIONS, AU_MAX_INTENSITY, N_LANDMARKS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub subject_id: String,
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    pub with_landmarks_3d: bool,
    /// Every k-th frame gets confidence 0.5 (still `success`).
    pub low_confidence_every: Option<usize>,
    /// Decimal places kept in every feature value.
    pub decimals: Option<i32>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            subject_id: "synthetic".into(),
            frames: 500,
            fps: 25.0,
            seed: 0,
            with_landmarks_3d: false,
            low_confidence_every: None,
            decimals: None,
        }
    }
}

struct Walk {
    state: Vec<f64>,
    step: f64,
}

impl Walk {
    fn new(len: usize, step: f64) -> Self {
        Walk { state: vec![0.0; len], step }
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        for v in &mut self.state {
            *v += self.step * (rng.random::<f64>() - 0.5);
        }
        &self.state
    }
}

/// AU intensities follow phase-shifted sinusoids with jitter, clamped to the
/// FACS range. Landmarks, head pose and gaze follow independent random walks,
/// each from its own RNG stream.
pub fn synthetic_sequence(opts: &SynthOptions) -> Result<FeatureSequence> {
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
        r.set_stream(s);
        r
    };
    let (mut au_rng, mut lm_rng, mut lm3_rng, mut hp_rng, mut gz_rng) = (stream(0), stream(1), stream(2), stream(3), stream(4));
    let round = |v: f64| match opts.decimals {
        Some(d) => {
            let k = 10f64.powi(d);
            (v * k).round() / k
        }
        None => v,
    };

    let phases: Vec<f64> = AU_DESCRIPTIONS.iter().map(|_| au_rng.random::<f64>() * std::f64::consts::TAU).collect();
    let periods: Vec<f64> = AU_DESCRIPTIONS.iter().map(|_| 40.0 + 160.0 * au_rng.random::<f64>()).collect();
    let base_lm: Vec<[f64; 2]> = (0..N_LANDMARKS)
        .map(|i| [300.0 + 8.0 * (i % 17) as f64, 200.0 + 12.0 * (i / 17) as f64])
        .collect();
    let mut lm = Walk::new(2 * N_LANDMARKS, 1.0);
    let mut lm3 = Walk::new(3 * N_LANDMARKS, 1.0);
    let mut translation = Walk::new(3, 2.0);
    let mut rotation = Walk::new(3, 0.02);
    let mut gaze = Walk::new(6, 0.02);
    let mut angle = Walk::new(2, 0.02);

    let mut frames = Vec::with_capacity(opts.frames);
    for t in 0..opts.frames {
        let mut f = FeatureFrame::empty(t as u64 + 1, round(t as f64 / opts.fps));
        f.confidence = match opts.low_confidence_every {
            Some(k) if k > 0 && t % k == k - 1 => 0.5,
            _ => 0.98,
        };
        for (i, (au, _)) in AU_DESCRIPTIONS.iter().enumerate() {
            let wave = 0.5 + 0.5 * (std::f64::consts::TAU * t as f64 / periods[i] + phases[i]).sin();
            let jitter = 0.6 * (au_rng.random::<f64>() - 0.5);
            f.au_intensities.insert(*au, round((AU_MAX_INTENSITY * wave + jitter).clamp(0.0, AU_MAX_INTENSITY)));
        }
        let offsets = lm.advance(&mut lm_rng);
        f.landmarks_2d = Some(
            base_lm
                .iter()
                .enumerate()
                .map(|(i, p)| [round(p[0] + offsets[2 * i]), round(p[1] + offsets[2 * i + 1])])
                .collect(),
        );
        if opts.with_landmarks_3d {
            let offsets = lm3.advance(&mut lm3_rng);
            f.landmarks_3d = Some(
                base_lm
                    .iter()
                    .enumerate()
                    .map(|(i, p)| [round(p[0] + offsets[3 * i]), round(p[1] + offsets[3 * i + 1]), round(500.0 + offsets[3 * i + 2])])
                    .collect(),
            );
        }
        let tr = translation.advance(&mut hp_rng);
        let tr = [round(tr[0]), round(tr[1]), round(600.0 + tr[2])];
        let rot = rotation.advance(&mut hp_rng);
        f.head_pose = Some(HeadPose {
            translation: tr,
            rotation: [round(rot[0]), round(rot[1]), round(rot[2])],
        });
        let g = gaze.advance(&mut gz_rng);
        f.gaze_location = Some([
            [round(g[0]), round(g[1]), round(-1.0 + g[2])],
            [round(g[3]), round(g[4]), round(-1.0 + g[5])],
        ]);
        let a = angle.advance(&mut gz_rng);
        f.gaze_angle = Some([round(a[0]), round(a[1])]);
        frames.push(f);
    }
    FeatureSequence::new(opts.subject_id.clone(), opts.fps, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_feature_csv, write_feature_csv, Modality};

    #[test]
    fn deterministic_and_complete() {
        let opts = SynthOptions { frames: 50, with_landmarks_3d: true, ..Default::default() };
        let a = synthetic_sequence(&opts).unwrap();
        assert_eq!(a, synthetic_sequence(&opts).unwrap());
        for m in Modality::TEMPORAL {
            assert!(a.frames().iter().all(|f| f.modality_values(m).is_some()), "{m}");
        }
        assert!(a.frames().iter().all(|f| f.au_intensities.values().all(|v| (0.0..=5.0).contains(v))));
    }

    #[test]
    fn rounded_sequence_round_trips_through_csv() {
        let opts = SynthOptions { frames: 20, decimals: Some(4), ..Default::default() };
        let seq = synthetic_sequence(&opts).unwrap();
        let text = write_feature_csv(&seq).unwrap();
        let back = parse_feature_csv(text.as_bytes(), 25.0).unwrap();
        assert_eq!(back.frames(), seq.frames());
    }
}
