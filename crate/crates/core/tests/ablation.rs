use qfe::score::TemporalParams;
use qfe::subjectivity::ablate_modalities;
use qfe::synth::{synthetic_sequence, SynthOptions};
use qfe::Modality;

#[test]
fn matrices_are_symmetric_with_unit_diagonal() {
    let seq = synthetic_sequence(&SynthOptions { frames: 600, with_landmarks_3d: true, ..Default::default() }).unwrap();
    let report = ablate_modalities(&seq, &[5, 10, 20, 40], &TemporalParams::default()).unwrap();
    assert!(report.omitted.is_empty());
    assert_eq!(report.matrices.len(), 4);
    for m in &report.matrices {
        assert_eq!(m.features.len(), 6);
        for i in 0..6 {
            assert_eq!(m.rho[i][i], Some(1.0));
            for j in 0..6 {
                assert_eq!(m.rho[i][j], m.rho[j][i]);
            }
        }
    }
}

#[test]
fn missing_3d_landmarks_are_omitted() {
    let seq = synthetic_sequence(&SynthOptions { frames: 200, ..Default::default() }).unwrap();
    let report = ablate_modalities(&seq, &[5], &TemporalParams::default()).unwrap();
    assert_eq!(report.omitted, vec![Modality::Lm3d]);
    assert!(!report.matrices[0].features.contains(&Modality::Lm3d));
}

#[test]
fn independent_random_walks_are_uncorrelated() {
    let seq = synthetic_sequence(&SynthOptions { frames: 2000, seed: 12, with_landmarks_3d: true, ..Default::default() }).unwrap();
    let report = ablate_modalities(&seq, &[5], &TemporalParams::default()).unwrap();
    let m = &report.matrices[0];
    // Head translation and rotation share a stream, as do gaze location and angle.
    let independent = [(Modality::Lm2d, Modality::Lm3d), (Modality::Lm2d, Modality::HpOrient), (Modality::Lm3d, Modality::GazeLoc), (Modality::HpOrient, Modality::GazeLoc), (Modality::HpRot, Modality::GazeAngle)];
    for (a, b) in independent {
        let i = m.features.iter().position(|f| *f == a).unwrap();
        let j = m.features.iter().position(|f| *f == b).unwrap();
        let rho = m.rho[i][j].unwrap();
        assert!(rho.abs() < 0.15, "{a} vs {b}: {rho}");
    }
}

#[test]
fn duplicated_modality_correlates_perfectly() {
    let seq = synthetic_sequence(&SynthOptions { frames: 300, ..Default::default() }).unwrap();
    // Copy the 2D landmarks into the 3D slot (z = 0).
    let dup = seq.map_frames(|_, f| {
        f.landmarks_3d = f.landmarks_2d.as_ref().map(|pts| pts.iter().map(|p| [p[0], p[1], 0.0]).collect());
    });
    let report = ablate_modalities(&dup, &[5], &TemporalParams::default()).unwrap();
    let m = &report.matrices[0];
    let i = m.features.iter().position(|f| *f == Modality::Lm2d).unwrap();
    let j = m.features.iter().position(|f| *f == Modality::Lm3d).unwrap();
    assert!((m.rho[i][j].unwrap() - 1.0).abs() < 1e-12);
}
