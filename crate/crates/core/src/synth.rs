//! Synthetic eye images with known geometry, and synthetic template sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IrisError, Result};
use crate::id::{Eye, TemplateId};
use crate::image::EyeImage;
use crate::segment::Circle;
use crate::template::{IrisTemplate, COLS, ROWS};

pub const PUPIL_LEVEL: f64 = 30.0;
pub const IRIS_LEVEL: f64 = 115.0;
pub const SCLERA_LEVEL: f64 = 220.0;
pub const SKIN_LEVEL: f64 = 190.0;
pub const HIGHLIGHT_LEVEL: f64 = 252.0;

/// Geometry of a rendered eye. Eyelids are horizontal edges: skin covers
/// everything above `upper_lid` and below `lower_lid`.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeSpec {
    pub width: usize,
    pub height: usize,
    pub pupil: Circle,
    pub iris: Circle,
    pub upper_lid: Option<f64>,
    pub lower_lid: Option<f64>,
    pub highlight: Option<Circle>,
    /// Selects the iris texture; equal values give the same iris.
    pub texture: u64,
    /// Rotation of the texture about the iris centre, radians.
    pub rotation: f64,
}

impl EyeSpec {
    /// Pupil and iris centred in the image, no occlusion.
    pub fn concentric(width: usize, height: usize, pupil_r: f64, iris_r: f64) -> Self {
        let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let (cx, cy) = (cx.round(), cy.round());
        Self {
            width,
            height,
            pupil: Circle::new(cx, cy, pupil_r),
            iris: Circle::new(cx, cy, iris_r),
            upper_lid: None,
            lower_lid: None,
            highlight: None,
            texture: 0,
            rotation: 0.0,
        }
    }

    /// Randomised 320x240 eye: off-centre pupil, varying radii, and
    /// occasional eyelids and a highlight.
    pub fn random(rng: &mut impl Rng) -> Self {
        let (w, h) = (320usize, 240usize);
        let iris_r = rng.gen_range(80.0..104.0);
        let pupil_r = rng.gen_range(24.0..(0.45f64 * iris_r).min(44.0));
        let ix = 160.0 + rng.gen_range(-12.0..12.0);
        let iy = 120.0 + rng.gen_range(-6.0..6.0);
        let reach = 0.08 * (iris_r - pupil_r);
        let px = ix + rng.gen_range(-reach..reach);
        let py = iy + rng.gen_range(-reach..reach);
        let pupil = Circle::new(px, py, pupil_r);
        let iris = Circle::new(ix, iy, iris_r);
        let upper_lid = rng
            .gen_bool(0.5)
            .then(|| iy - pupil_r - rng.gen_range(0.45..0.8) * (iris_r - pupil_r));
        let lower_lid = rng
            .gen_bool(0.3)
            .then(|| iy + pupil_r + rng.gen_range(0.55..0.85) * (iris_r - pupil_r));
        let highlight = rng.gen_bool(0.5).then(|| {
            let a = rng.gen_range(0.0..2.0 * PI);
            let d = 0.5 * pupil_r;
            Circle::new(px + d * a.cos(), py + d * a.sin(), rng.gen_range(3.0..6.0))
        });
        Self {
            width: w,
            height: h,
            pupil,
            iris,
            upper_lid,
            lower_lid,
            highlight,
            texture: rng.gen(),
            rotation: 0.0,
        }
    }
}

struct Wave {
    amp: f64,
    angular: f64,
    radial: f64,
    phase_a: f64,
    phase_r: f64,
}

fn texture(seed: u64) -> Vec<Wave> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_u64.rotate_left(32));
    (0..14)
        .map(|_| Wave {
            amp: rng.gen_range(4.0..10.0),
            angular: rng.gen_range(3..30) as f64,
            radial: rng.gen_range(0.3..2.5),
            phase_a: rng.gen_range(0.0..2.0 * PI),
            phase_r: rng.gen_range(0.0..2.0 * PI),
        })
        .collect()
}

fn shade(spec: &EyeSpec, waves: &[Wave], x: f64, y: f64) -> f64 {
    if spec.upper_lid.is_some_and(|l| y < l) || spec.lower_lid.is_some_and(|l| y > l) {
        return SKIN_LEVEL;
    }
    if spec.highlight.is_some_and(|c| c.contains(x, y)) {
        return HIGHLIGHT_LEVEL;
    }
    if spec.pupil.contains(x, y) {
        return PUPIL_LEVEL;
    }
    if !spec.iris.contains(x, y) {
        return SCLERA_LEVEL;
    }
    // Texture lives in (normalised radius, angle) so that it stretches with
    // the pupil like the real tissue does.
    let theta = (y - spec.iris.y).atan2(x - spec.iris.x) - spec.rotation;
    let (dx, dy) = (theta.cos(), theta.sin());
    let rp = ray_exit(&spec.pupil, spec.iris.x, spec.iris.y, dx, dy);
    let ri = spec.iris.r;
    let d = spec.iris.distance(x, y);
    let rho = ((d - rp) / (ri - rp).max(1.0)).clamp(0.0, 1.0);
    let v: f64 = waves
        .iter()
        .map(|w| {
            w.amp
                * (w.angular * theta + w.phase_a).cos()
                * (2.0 * PI * w.radial * rho + w.phase_r).cos()
        })
        .sum();
    (IRIS_LEVEL + v).clamp(60.0, 175.0)
}

/// Distance from `(ox, oy)` along `(dx, dy)` to the far side of circle `c`,
/// or 0 when the ray misses it.
fn ray_exit(c: &Circle, ox: f64, oy: f64, dx: f64, dy: f64) -> f64 {
    let (fx, fy) = (ox - c.x, oy - c.y);
    let b = fx * dx + fy * dy;
    let disc = b * b - (fx * fx + fy * fy - c.r * c.r);
    if disc < 0.0 {
        0.0
    } else {
        (-b + disc.sqrt()).max(0.0)
    }
}

/// Renders `spec` with 2x2 supersampling and +-2 levels of uniform noise
/// drawn from `seed`.
pub fn render_eye(spec: &EyeSpec, seed: u64) -> EyeImage {
    let waves = texture(spec.texture);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = EyeImage::filled(spec.width, spec.height, 0);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let mut acc = 0.0;
            for (ox, oy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                acc += shade(spec, &waves, x as f64 + ox, y as f64 + oy);
            }
            let v = acc / 4.0 + rng.gen_range(-2i32..=2) as f64;
            img.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    img
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub samples: usize,
    /// Expected fraction of code bits on which two samples of one subject
    /// disagree. Each sample flips prototype bits independently with the
    /// probability `p` solving `2p(1 - p) = flip_rate`.
    pub flip_rate: f64,
    /// Probability that a prototype mask bit is valid.
    pub mask_density: f64,
    /// Probability that a sample loses a prototype-valid bit.
    pub mask_dropout: f64,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 50,
            samples: 4,
            flip_rate: 0.15,
            mask_density: 0.9,
            mask_dropout: 0.05,
            seed: 1,
            rows: ROWS,
            cols: COLS,
        }
    }
}

impl SynthConfig {
    /// Per-sample flip probability.
    pub fn sample_flip_probability(&self) -> f64 {
        (1.0 - (1.0 - 2.0 * self.flip_rate).sqrt()) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.flip_rate) {
            return Err(IrisError::InvalidArgument(format!(
                "flip rate {} outside [0, 0.5)",
                self.flip_rate
            )));
        }
        for (name, p) in [("mask density", self.mask_density), ("mask dropout", self.mask_dropout)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(IrisError::InvalidArgument(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.subjects == 0 || self.samples == 0 {
            return Err(IrisError::InvalidArgument("need at least one subject and sample".into()));
        }
        if self.subjects > 99_999 || self.samples > 99 {
            return Err(IrisError::InvalidArgument("at most 99999 subjects and 99 samples".into()));
        }
        Ok(())
    }
}

/// Prototype per subject, then independent flips and mask dropout per
/// sample. Ids are `S00001/L/01` and so on; deterministic in the seed.
pub fn synth_templates(cfg: &SynthConfig) -> Result<Vec<(TemplateId, IrisTemplate)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.rows * cfg.cols;
    let p = cfg.sample_flip_probability();
    let mut out = Vec::with_capacity(cfg.subjects * cfg.samples);
    for s in 0..cfg.subjects {
        let code: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let mask: Vec<u8> = (0..n).map(|_| rng.gen_bool(cfg.mask_density) as u8).collect();
        for k in 0..cfg.samples {
            let sc: Vec<u8> = code.iter().map(|&b| b ^ rng.gen_bool(p) as u8).collect();
            let sm: Vec<u8> = mask
                .iter()
                .map(|&m| m & !rng.gen_bool(cfg.mask_dropout) as u8)
                .collect();
            let id = TemplateId::new(format!("S{:05}", s + 1), Eye::Left, format!("{:02}", k + 1))?;
            out.push((id, IrisTemplate::from_bits(cfg.rows, cfg.cols, &sc, &sm)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::hd_counts;

    #[test]
    fn concentric_levels() {
        let spec = EyeSpec::concentric(320, 240, 40.0, 100.0);
        let img = render_eye(&spec, 1);
        let at = |x: usize, y: usize| img.get(x, y) as f64;
        assert!((at(160, 120) - PUPIL_LEVEL).abs() <= 2.0);
        assert!((at(5, 5) - SCLERA_LEVEL).abs() <= 2.0);
        let v = at(160 + 70, 120);
        assert!((60.0..=177.0).contains(&v));
    }

    #[test]
    fn lids_and_highlight() {
        let mut spec = EyeSpec::concentric(200, 200, 20.0, 70.0);
        spec.upper_lid = Some(50.0);
        spec.highlight = Some(Circle::new(100.0, 100.0, 4.0));
        let img = render_eye(&spec, 2);
        assert!((img.get(100, 30) as f64 - SKIN_LEVEL).abs() <= 2.0);
        assert!(img.get(100, 100) >= 250);
    }

    #[test]
    fn rotation_moves_texture() {
        let mut spec = EyeSpec::concentric(240, 240, 30.0, 100.0);
        spec.texture = 11;
        let waves = texture(spec.texture);
        let (a, r, c) = (PI / 5.0, 70.0, spec.iris.x);
        let before = shade(&spec, &waves, c + r, c);
        spec.rotation = a;
        let after = shade(&spec, &waves, c + r * a.cos(), c + r * a.sin());
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn synth_is_deterministic_and_validated() {
        let cfg = SynthConfig {
            subjects: 3,
            samples: 2,
            rows: 4,
            cols: 64,
            ..SynthConfig::default()
        };
        assert_eq!(synth_templates(&cfg).unwrap(), synth_templates(&cfg).unwrap());
        assert!(synth_templates(&SynthConfig { flip_rate: 0.5, ..cfg.clone() }).is_err());
        let ids: Vec<String> = synth_templates(&cfg).unwrap().iter().map(|(i, _)| i.to_string()).collect();
        assert_eq!(ids[0], "S00001/L/01");
        assert_eq!(ids[5], "S00003/L/02");
    }

    #[test]
    fn zero_rate_genuines_are_identical() {
        let cfg = SynthConfig {
            subjects: 2,
            samples: 3,
            flip_rate: 0.0,
            mask_dropout: 0.0,
            rows: 4,
            cols: 64,
            ..SynthConfig::default()
        };
        let t = synth_templates(&cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(hd_counts(&t[i].1, &t[j].1).unwrap().0, 0);
            }
        }
    }

    #[test]
    fn flip_rate_sets_genuine_distance() {
        // Binomial oracle: 16384 bits, sd about 0.003.
        let cfg = SynthConfig {
            subjects: 2,
            samples: 2,
            mask_density: 1.0,
            mask_dropout: 0.0,
            ..SynthConfig::default()
        };
        let t = synth_templates(&cfg).unwrap();
        let (d, n) = hd_counts(&t[0].1, &t[1].1).unwrap();
        let hd = d as f64 / n as f64;
        assert!((hd - 0.15).abs() < 0.015, "{hd}");
        let (d, n) = hd_counts(&t[0].1, &t[2].1).unwrap();
        assert!((d as f64 / n as f64 - 0.5).abs() < 0.015);
    }
}
