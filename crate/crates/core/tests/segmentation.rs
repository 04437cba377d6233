use iris_he_core::pipeline::{preprocess, PipelineConfig};
use iris_he_core::segment::segment_iris;
use iris_he_core::synth::{render_eye, EyeSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn within(spec: &EyeSpec, seed: u64, clean: bool) -> Result<(), String> {
    let mut img = render_eye(spec, seed);
    if clean {
        img = preprocess(&img, &PipelineConfig::default());
    }
    let seg = segment_iris(&img).map_err(|e| e.to_string())?;
    for (found, truth) in [(seg.pupil(), spec.pupil), (seg.iris(), spec.iris)] {
        let ok = (found.x - truth.x).abs() <= 2.0
            && (found.y - truth.y).abs() <= 2.0
            && (found.r - truth.r).abs() <= 3.0;
        if !ok {
            return Err(format!("found {found:?}, truth {truth:?}"));
        }
    }
    Ok(())
}

#[test]
fn random_eyes_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    let mut misses = Vec::new();
    for i in 0..100 {
        let spec = EyeSpec::random(&mut rng);
        match within(&spec, i, false) {
            Ok(()) => hits += 1,
            Err(e) => misses.push(format!("eye {i}: {e}")),
        }
    }
    assert!(hits >= 95, "{hits}/100 recovered; misses:\n{}", misses.join("\n"));
}

#[test]
fn random_eyes_recovered_after_preprocessing() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let hits = (0..40)
        .filter(|&i| within(&EyeSpec::random(&mut rng), i, true).is_ok())
        .count();
    assert!(hits >= 38, "{hits}/40");
}
