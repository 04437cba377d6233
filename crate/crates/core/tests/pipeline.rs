use std::f64::consts::PI;

use iris_he_core::matching::{match_with_shifts, MatchPolicy};
use iris_he_core::pipeline::{template_from_image, template_from_path, PipelineConfig};
use iris_he_core::segment::save_mask;
use iris_he_core::synth::{render_eye, EyeSpec};
use iris_he_core::image::save_pgm;
use iris_he_core::IrisTemplate;

fn eye(texture: u64, rotation: f64, noise: u64) -> IrisTemplate {
    let mut spec = EyeSpec::concentric(320, 240, 38.0, 100.0);
    spec.texture = texture;
    spec.rotation = rotation;
    template_from_image(&render_eye(&spec, noise), &PipelineConfig::default())
        .unwrap()
        .0
}

#[test]
fn rotated_capture_matches_at_compensating_shift() {
    let enrolled = eye(5, 0.0, 1);
    let policy = MatchPolicy::default();
    for k in [-9i32, 4, 12] {
        let query = eye(5, 2.0 * PI * k as f64 / 512.0, 2);
        let r = match_with_shifts(&query, &enrolled, &policy).unwrap();
        assert!(r.accept, "k={k}: {r:?}");
        assert!((r.best_shift + k).abs() <= 1, "k={k}: {r:?}");
        assert!(r.hd < 0.1, "k={k}: {r:?}");
    }
}

#[test]
fn different_textures_are_rejected() {
    let policy = MatchPolicy::default();
    let a = eye(1, 0.0, 1);
    for t in 2..5 {
        let r = match_with_shifts(&eye(t, 0.0, 1), &a, &policy).unwrap();
        assert!(!r.accept, "texture {t}: {r:?}");
        assert!(r.hd > 0.38, "texture {t}: {r:?}");
    }
}

#[test]
fn file_pipeline_with_and_without_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = EyeSpec::concentric(320, 240, 38.0, 100.0);
    spec.texture = 9;
    let img = render_eye(&spec, 4);
    let path = dir.path().join("eye.pgm");
    save_pgm(&img, &path).unwrap();
    let (t, seg) = template_from_path(&path, None, &PipelineConfig::default()).unwrap();
    let mask = dir.path().join("eye.mask");
    save_mask(&mask, &seg).unwrap();
    let (t2, seg2) = template_from_path(&path, Some(&mask), &PipelineConfig::default()).unwrap();
    assert_eq!(seg, seg2);
    assert_eq!(t, t2);
}
