//! Iris localisation with a circular integro-differential search, eyelid
//! line fits and an occlusion mask.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{io_err, IrisError, Result};
use crate::image::EyeImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(x: f64, y: f64, r: f64) -> Self {
        Self { x, y, r }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        (x - self.x).hypot(y - self.y)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.distance(x, y) < self.r
    }
}

/// Half-width, in pixels, of the band around each boundary that still
/// counts as annulus. Boundary samples of the rubber sheet land on pixels
/// whose centres can sit just inside the pupil or just outside the iris.
pub const ANNULUS_PAD: f64 = 1.0;

/// Whether pixel centre `(x, y)` belongs to the (padded) iris annulus.
pub fn in_annulus(pupil: &Circle, iris: &Circle, x: f64, y: f64) -> bool {
    pupil.distance(x, y) >= pupil.r - ANNULUS_PAD && iris.distance(x, y) <= iris.r + ANNULUS_PAD
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationResult {
    pupil: Circle,
    iris: Circle,
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl SegmentationResult {
    /// Validates the boundary geometry and that the mask only marks
    /// annulus pixels.
    pub fn new(pupil: Circle, iris: Circle, width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        if !(pupil.r > 0.0 && pupil.r < iris.r) {
            return Err(IrisError::InvalidSegmentation(format!(
                "pupil radius {} must be positive and below iris radius {}",
                pupil.r, iris.r
            )));
        }
        if !iris.contains(pupil.x, pupil.y) {
            return Err(IrisError::InvalidSegmentation(
                "pupil centre lies outside the iris circle".into(),
            ));
        }
        if mask.len() != width * height {
            return Err(IrisError::InvalidSegmentation(format!(
                "mask has {} entries for {width}x{height}",
                mask.len()
            )));
        }
        for (i, &m) in mask.iter().enumerate() {
            match m {
                0 => {}
                1 => {
                    let (x, y) = ((i % width) as f64, (i / width) as f64);
                    if !in_annulus(&pupil, &iris, x, y) {
                        return Err(IrisError::InvalidSegmentation(format!(
                            "mask marks ({x}, {y}) outside the iris annulus"
                        )));
                    }
                }
                v => {
                    return Err(IrisError::InvalidSegmentation(format!("mask value {v}")));
                }
            }
        }
        Ok(Self {
            pupil,
            iris,
            width,
            height,
            mask,
        })
    }

    /// Segmentation whose mask is the whole annulus.
    pub fn from_circles(pupil: Circle, iris: Circle, width: usize, height: usize) -> Result<Self> {
        Self::new(pupil, iris, width, height, annulus_mask(&pupil, &iris, width, height))
    }

    pub fn pupil(&self) -> Circle {
        self.pupil
    }

    pub fn iris(&self) -> Circle {
        self.iris
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    /// Mask value at integer pixel coordinates; 0 outside the image.
    pub fn mask_at(&self, x: i64, y: i64) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return 0;
        }
        self.mask[y as usize * self.width + x as usize]
    }
}

pub fn annulus_mask(pupil: &Circle, iris: &Circle, width: usize, height: usize) -> Vec<u8> {
    let mut mask = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            mask[y * width + x] = in_annulus(pupil, iris, x as f64, y as f64) as u8;
        }
    }
    mask
}

#[derive(Clone, Debug)]
pub struct SegmentConfig {
    /// Pupil radius search range in pixels; derived from the image size when
    /// absent.
    pub pupil_radius: Option<(f64, f64)>,
    pub iris_radius: Option<(f64, f64)>,
    /// Minimum blurred radial derivative (gray levels per pixel) accepted as
    /// a boundary.
    pub gradient_floor: f64,
    /// Minimum vertical step (gray levels over two pixels) for an eyelid
    /// edge point.
    pub eyelid_edge: f64,
    /// Fraction of scanned columns that must show an edge before a line is
    /// fitted.
    pub eyelid_support: f64,
    /// Residual bright pixels above `max(mean + 3 sd, bright_floor)` are
    /// masked.
    pub bright_floor: f64,
    /// Longest side of the coarse search image.
    pub coarse_size: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            pupil_radius: None,
            iris_radius: None,
            gradient_floor: 3.0,
            eyelid_edge: 40.0,
            eyelid_support: 0.5,
            bright_floor: 200.0,
            coarse_size: 160,
        }
    }
}

struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn from_image(img: &EyeImage) -> Self {
        Self {
            w: img.width(),
            h: img.height(),
            v: img.pixels().iter().map(|&p| p as f64).collect(),
        }
    }

    fn downsample(&self, f: usize) -> Self {
        if f == 1 {
            return Self {
                w: self.w,
                h: self.h,
                v: self.v.clone(),
            };
        }
        let (w, h) = (self.w / f, self.h / f);
        let mut v = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for dy in 0..f {
                    let row = (y * f + dy) * self.w;
                    for dx in 0..f {
                        s += self.v[row + x * f + dx];
                    }
                }
                v[y * w + x] = s / (f * f) as f64;
            }
        }
        Self { w, h, v }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.v[y * self.w + x]
    }

    /// Bilinear sample; `None` outside the pixel-centre hull.
    #[inline]
    fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.w - 1) as f64 && y <= (self.h - 1) as f64) {
            return None;
        }
        let x0 = (x as usize).min(self.w.saturating_sub(2));
        let y0 = (y as usize).min(self.h.saturating_sub(2));
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

/// Directions sampled along a contour.
fn directions(count: usize, arcs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let total: f64 = arcs.iter().map(|(a, b)| b - a).sum();
    let mut out = Vec::with_capacity(count);
    for &(a, b) in arcs {
        let k = ((b - a) / total * count as f64).round().max(1.0) as usize;
        for i in 0..k {
            let t = a + (b - a) * (i as f64 + 0.5) / k as f64;
            out.push((t.cos(), t.sin()));
        }
    }
    out
}

fn contour_mean(p: &Plane, cx: f64, cy: f64, r: f64, dirs: &[(f64, f64)]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(c, s) in dirs {
        if let Some(v) = p.sample(cx + r * c, cy + r * s) {
            sum += v;
            n += 1;
        }
    }
    (n * 4 >= dirs.len() * 3).then(|| sum / n as f64)
}

const BLUR: [f64; 5] = [0.054, 0.244, 0.403, 0.244, 0.054];

/// Best boundary radius for one centre: the peak of the Gaussian-blurred
/// derivative of contour means with respect to radius.
fn radial_peak(p: &Plane, cx: f64, cy: f64, radii: &[f64], dirs: &[(f64, f64)]) -> Option<(f64, f64)> {
    let means: Vec<Option<f64>> = radii.iter().map(|&r| contour_mean(p, cx, cy, r, dirs)).collect();
    let deriv: Vec<Option<f64>> = means
        .windows(2)
        .zip(radii.windows(2))
        .map(|(m, r)| Some((m[1]? - m[0]?) / (r[1] - r[0])))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..deriv.len() {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (k, &w) in BLUR.iter().enumerate() {
            let j = i as isize + k as isize - 2;
            if j < 0 || j as usize >= deriv.len() {
                continue;
            }
            if let Some(d) = deriv[j as usize] {
                acc += w * d;
                wsum += w;
            }
        }
        if deriv[i].is_none() || wsum < 0.5 {
            continue;
        }
        let score = acc / wsum;
        let r = 0.5 * (radii[i] + radii[i + 1]);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, r));
        }
    }
    best
}

struct Search<'a> {
    plane: &'a Plane,
    dirs: Vec<(f64, f64)>,
}

impl Search<'_> {
    /// Exhaustive search over integer-spaced centres and radii. Returns
    /// (score, circle).
    fn run(&self, centres: &[(f64, f64)], r_lo: f64, r_hi: f64, step: f64) -> Option<(f64, Circle)> {
        let mut radii = Vec::new();
        let mut r = r_lo.max(1.0);
        while r <= r_hi {
            radii.push(r);
            r += step;
        }
        if radii.len() < 3 {
            return None;
        }
        let mut best: Option<(f64, Circle)> = None;
        for &(cx, cy) in centres {
            if let Some((score, r)) = radial_peak(self.plane, cx, cy, &radii, &self.dirs) {
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, Circle::new(cx, cy, r)));
                }
            }
        }
        best
    }
}

fn grid(cx: f64, cy: f64, half: i64, step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            out.push((cx + dx as f64 * step, cy + dy as f64 * step));
        }
    }
    out
}

const LATERAL: [(f64, f64); 2] = [(-PI / 4.0, PI / 4.0), (3.0 * PI / 4.0, 5.0 * PI / 4.0)];
const FULL: [(f64, f64); 1] = [(0.0, 2.0 * PI)];

pub fn segment_iris(img: &EyeImage) -> Result<SegmentationResult> {
    segment_iris_with(img, &SegmentConfig::default())
}

pub fn segment_iris_with(img: &EyeImage, cfg: &SegmentConfig) -> Result<SegmentationResult> {
    let (w, h) = (img.width(), img.height());
    let side = w.min(h) as f64;
    if side < 16.0 {
        return Err(IrisError::Segmentation {
            reason: format!("image {w}x{h} too small"),
            best: None,
        });
    }
    let (p_lo, p_hi) = cfg.pupil_radius.unwrap_or((0.04 * side, 0.25 * side));
    let (i_lo, i_hi) = cfg.iris_radius.unwrap_or((0.12 * side, 0.5 * side));
    let full = Plane::from_image(img);
    let f = w.max(h).div_ceil(cfg.coarse_size).max(1);
    let coarse = full.downsample(f);
    let ff = f as f64;

    // Pupil, coarse: only centres that are locally dark.
    let mut sorted = coarse.v.clone();
    sorted.sort_by(f64::total_cmp);
    let dark = sorted[(sorted.len() - 1) / 4];
    let margin = (p_lo / ff).max(1.0) as usize;
    let mut centres = Vec::new();
    for y in margin..coarse.h.saturating_sub(margin) {
        for x in margin..coarse.w.saturating_sub(margin) {
            if coarse.at(x, y) <= dark {
                centres.push((x as f64, y as f64));
            }
        }
    }
    let coarse_full = Search {
        plane: &coarse,
        dirs: directions(48, &FULL),
    };
    let pupil_c = coarse_full.run(&centres, p_lo / ff, p_hi / ff, 1.0);
    let fine_full = Search {
        plane: &full,
        dirs: directions(128, &FULL),
    };
    let pupil = pupil_c.and_then(|(_, c)| {
        let cx = c.x * ff + (ff - 1.0) / 2.0;
        let cy = c.y * ff + (ff - 1.0) / 2.0;
        let reach = ff + 1.0;
        fine_full.run(
            &grid(cx, cy, reach as i64, 1.0),
            (c.r * ff - reach).max(p_lo),
            (c.r * ff + reach).min(p_hi),
            1.0,
        )
    });
    let Some((p_score, pupil)) = pupil else {
        return Err(IrisError::Segmentation {
            reason: "no pupil candidate".into(),
            best: None,
        });
    };

    // Iris: lateral arcs only, centre near the pupil's.
    let coarse_lat = Search {
        plane: &coarse,
        dirs: directions(48, &LATERAL),
    };
    let pc = ((pupil.x - (ff - 1.0) / 2.0) / ff, (pupil.y - (ff - 1.0) / 2.0) / ff);
    let spread = ((0.1 * i_hi / ff).ceil() as i64).max(1);
    let r_start = (pupil.r * 1.25).max(i_lo);
    let iris_c = coarse_lat.run(&grid(pc.0, pc.1, spread, 1.0), r_start / ff, i_hi / ff, 1.0);
    let fine_lat = Search {
        plane: &full,
        dirs: directions(128, &LATERAL),
    };
    let iris = iris_c.and_then(|(_, c)| {
        let cx = c.x * ff + (ff - 1.0) / 2.0;
        let cy = c.y * ff + (ff - 1.0) / 2.0;
        let reach = ff + 1.0;
        fine_lat.run(
            &grid(cx, cy, reach as i64, 1.0),
            (c.r * ff - reach).max(r_start),
            (c.r * ff + reach).min(i_hi),
            1.0,
        )
    });
    let Some((i_score, iris)) = iris else {
        return Err(IrisError::Segmentation {
            reason: "no iris candidate".into(),
            best: None,
        });
    };
    let best = Some((pupil, iris));
    if p_score < cfg.gradient_floor || i_score < cfg.gradient_floor {
        return Err(IrisError::Segmentation {
            reason: format!(
                "boundary gradients {p_score:.2} / {i_score:.2} below floor {}",
                cfg.gradient_floor
            ),
            best,
        });
    }
    if pupil.r >= iris.r || !iris.contains(pupil.x, pupil.y) {
        return Err(IrisError::Segmentation {
            reason: "pupil and iris boundaries are inconsistent".into(),
            best,
        });
    }

    let mut mask = annulus_mask(&pupil, &iris, w, h);
    if let Some(line) = fit_eyelid(&full, &pupil, &iris, cfg, true) {
        occlude_line(&mut mask, w, h, line, true);
    }
    if let Some(line) = fit_eyelid(&full, &pupil, &iris, cfg, false) {
        occlude_line(&mut mask, w, h, line, false);
    }
    mask_bright(&full, &pupil, &iris, cfg, &mut mask);
    SegmentationResult::new(pupil, iris, w, h, mask)
}

/// `y = a + b x`.
#[derive(Clone, Copy, Debug)]
struct Line {
    a: f64,
    b: f64,
}

fn fit_line(points: &[(f64, f64)]) -> Option<Line> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some(Line { a: my - b * mx, b })
}

/// Fits an eyelid edge as a line through the strongest vertical step in
/// each column of the upper (or lower) half of the iris.
fn fit_eyelid(p: &Plane, pupil: &Circle, iris: &Circle, cfg: &SegmentConfig, upper: bool) -> Option<Line> {
    let x_lo = (iris.x - 0.7 * iris.r).ceil().max(1.0) as usize;
    let x_hi = ((iris.x + 0.7 * iris.r).floor() as usize).min(p.w - 2);
    let (y_lo, y_hi) = if upper {
        (iris.y - iris.r, pupil.y - pupil.r)
    } else {
        (pupil.y + pupil.r, iris.y + iris.r)
    };
    let y_lo = y_lo.ceil().max(1.0) as usize;
    let y_hi = (y_hi.floor().max(0.0) as usize).min(p.h - 2);
    if x_lo >= x_hi || y_lo >= y_hi {
        return None;
    }
    let mut points = Vec::new();
    let mut columns = 0usize;
    for x in x_lo..=x_hi {
        let mut best: Option<(f64, usize)> = None;
        let mut any = false;
        for y in y_lo..=y_hi {
            let (fx, fy) = (x as f64, y as f64);
            // Stay clear of both boundaries so their own edges do not count.
            if pupil.distance(fx, fy) <= pupil.r + 3.0 || iris.distance(fx, fy) >= iris.r - 3.0 {
                continue;
            }
            any = true;
            let g = (p.at(x, y + 1) - p.at(x, y - 1)).abs();
            if best.is_none_or(|(s, _)| g > s) {
                best = Some((g, y));
            }
        }
        if any {
            columns += 1;
        }
        if let Some((g, y)) = best {
            if g >= cfg.eyelid_edge {
                points.push((x as f64, y as f64));
            }
        }
    }
    if columns == 0 || (points.len() as f64) < cfg.eyelid_support * columns as f64 {
        return None;
    }
    let line = fit_line(&points)?;
    let kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| (y - (line.a + line.b * x)).abs() <= 3.0)
        .collect();
    if (kept.len() as f64) < cfg.eyelid_support * columns as f64 {
        return None;
    }
    fit_line(&kept)
}

fn occlude_line(mask: &mut [u8], w: usize, h: usize, line: Line, upper: bool) {
    for y in 0..h {
        for x in 0..w {
            let edge = line.a + line.b * x as f64;
            let beyond = if upper {
                (y as f64) <= edge + 1.0
            } else {
                (y as f64) >= edge - 1.0
            };
            if beyond {
                mask[y * w + x] = 0;
            }
        }
    }
}

fn mask_bright(p: &Plane, pupil: &Circle, iris: &Circle, cfg: &SegmentConfig, mask: &mut [u8]) {
    let inner = |x: usize, y: usize| {
        let (fx, fy) = (x as f64, y as f64);
        pupil.distance(fx, fy) > pupil.r + 2.0 && iris.distance(fx, fy) < iris.r - 2.0
    };
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut n = 0.0;
    for y in 0..p.h {
        for x in 0..p.w {
            if mask[y * p.w + x] == 1 && inner(x, y) {
                let v = p.at(x, y);
                sum += v;
                sq += v * v;
                n += 1.0;
            }
        }
    }
    if n == 0.0 {
        return;
    }
    let mean = sum / n;
    let sd = (sq / n - mean * mean).max(0.0).sqrt();
    let limit = (mean + 3.0 * sd).max(cfg.bright_floor);
    for y in 0..p.h {
        for x in 0..p.w {
            if inner(x, y) && p.at(x, y) > limit {
                mask[y * p.w + x] = 0;
            }
        }
    }
}

const MASK_MAGIC: &str = "IRISMASK v1";

/// Parses an `IRISMASK v1` sidecar and validates it against `img`.
pub fn parse_mask(bytes: &[u8], img: &EyeImage) -> Result<SegmentationResult> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| IrisError::Mask("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| IrisError::Mask("header is not UTF-8".into()))?;
    let rest = header
        .strip_prefix(MASK_MAGIC)
        .ok_or_else(|| IrisError::Mask(format!("expected '{MASK_MAGIC}' header")))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(IrisError::Mask(format!("expected 8 header fields, found {}", fields.len())));
    }
    let w: usize = fields[0]
        .parse()
        .map_err(|_| IrisError::Mask(format!("bad width '{}'", fields[0])))?;
    let h: usize = fields[1]
        .parse()
        .map_err(|_| IrisError::Mask(format!("bad height '{}'", fields[1])))?;
    let mut nums = [0.0f64; 6];
    for (slot, f) in nums.iter_mut().zip(&fields[2..]) {
        *slot = f
            .parse()
            .map_err(|_| IrisError::Mask(format!("bad circle value '{f}'")))?;
    }
    if (w, h) != (img.width(), img.height()) {
        return Err(IrisError::Mask(format!(
            "mask is {w}x{h} but image is {}x{}",
            img.width(),
            img.height()
        )));
    }
    let body = &bytes[nl + 1..];
    if body.len() != w * h {
        return Err(IrisError::Mask(format!(
            "expected {} mask bytes, found {}",
            w * h,
            body.len()
        )));
    }
    let pupil = Circle::new(nums[0], nums[1], nums[2]);
    let iris = Circle::new(nums[3], nums[4], nums[5]);
    SegmentationResult::new(pupil, iris, w, h, body.to_vec())
}

pub fn load_external_mask(path: &Path, img: &EyeImage) -> Result<SegmentationResult> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    parse_mask(&bytes, img)
}

pub fn mask_to_bytes(seg: &SegmentationResult) -> Vec<u8> {
    let (p, i) = (seg.pupil, seg.iris);
    let mut out = format!(
        "{MASK_MAGIC} {} {} {} {} {} {} {} {}\n",
        seg.width, seg.height, p.x, p.y, p.r, i.x, i.y, i.r
    )
    .into_bytes();
    out.extend_from_slice(&seg.mask);
    out
}

pub fn save_mask(path: &Path, seg: &SegmentationResult) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&mask_to_bytes(seg)).map_err(io_err(path))
}
