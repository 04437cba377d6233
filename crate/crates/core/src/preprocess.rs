//! Specular highlight removal and contrast stretching.

use crate::image::EyeImage;

/// Default percentile for highlight detection.
pub const DEFAULT_HIGHLIGHT_PERCENTILE: f64 = 0.995;

const INPAINT_TOLERANCE: f64 = 1e-3;
const INPAINT_MAX_SWEEPS: usize = 20_000;

/// Nearest-rank percentile of the pixel values: the value at sorted index
/// `round(p * (len - 1))`.
pub fn percentile(img: &EyeImage, p: f64) -> u8 {
    let mut hist = [0usize; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let rank = (p.clamp(0.0, 1.0) * (img.pixels().len() - 1) as f64).round() as usize;
    let mut seen = 0;
    for (v, &count) in hist.iter().enumerate() {
        seen += count;
        if seen > rank {
            return v as u8;
        }
    }
    255
}

/// Replaces pixels brighter than the `percentile` intensity by a smooth fill
/// from their surroundings.
pub fn remove_specular_highlights(img: &EyeImage, percentile_p: f64) -> EyeImage {
    remove_highlights_above(img, percentile(img, percentile_p))
}

/// Inpaints every pixel strictly above `threshold`. Each such pixel ends up
/// at the mean of its 8-neighbourhood (a discrete harmonic fill), so the
/// output never exceeds the largest value among untouched pixels.
pub fn remove_highlights_above(img: &EyeImage, threshold: u8) -> EyeImage {
    let (w, h) = (img.width(), img.height());
    let holes: Vec<usize> = img
        .pixels()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    if holes.is_empty() {
        return img.clone();
    }
    let mut is_hole = vec![false; w * h];
    for &i in &holes {
        is_hole[i] = true;
    }
    let known: Vec<f64> = img
        .pixels()
        .iter()
        .zip(&is_hole)
        .filter(|(_, &hole)| !hole)
        .map(|(&v, _)| v as f64)
        .collect();
    let start = known.iter().sum::<f64>() / known.len() as f64;

    let mut values: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    let neighbours: Vec<Vec<usize>> = holes
        .iter()
        .map(|&i| neighbourhood(i % w, i / w, w, h).collect())
        .collect();
    for &i in &holes {
        values[i] = start;
    }
    // Gauss-Seidel sweeps until the largest update is negligible.
    for _ in 0..INPAINT_MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for (&i, nb) in holes.iter().zip(&neighbours) {
            let mean = nb.iter().map(|&j| values[j]).sum::<f64>() / nb.len() as f64;
            delta = delta.max((mean - values[i]).abs());
            values[i] = mean;
        }
        if delta < INPAINT_TOLERANCE {
            break;
        }
    }
    let mut out = img.clone();
    for &i in &holes {
        out.pixels_mut()[i] = values[i].round().clamp(0.0, 255.0) as u8;
    }
    out
}

pub(crate) fn neighbourhood(
    x: usize,
    y: usize,
    w: usize,
    h: usize,
) -> impl Iterator<Item = usize> {
    let (x, y) = (x as isize, y as isize);
    (-1isize..=1)
        .flat_map(move |dy| (-1isize..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
                .then(|| ny as usize * w + nx as usize)
        })
}

/// Linear stretch mapping the 1st percentile to 0 and the 99th to 255.
/// An image without dynamic range becomes mid-gray.
pub fn normalize_contrast(img: &EyeImage) -> EyeImage {
    let lo = percentile(img, 0.01);
    let hi = percentile(img, 0.99);
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let v = v as u8;
        *slot = if hi == lo {
            match v.cmp(&lo) {
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => 128,
                std::cmp::Ordering::Greater => 255,
            }
        } else {
            let scaled = (v as f64 - lo as f64) * 255.0 / (hi as f64 - lo as f64);
            scaled.round().clamp(0.0, 255.0) as u8
        };
    }
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = lut[*p as usize];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient_with_spot() -> (EyeImage, Vec<(usize, usize)>) {
        let mut img = EyeImage::filled(100, 100, 0);
        for y in 0..100 {
            for x in 0..100 {
                img.set(x, y, 50 + y as u8);
            }
        }
        let spot = vec![
            (40, 40),
            (41, 40),
            (42, 40),
            (40, 41),
            (41, 41),
            (42, 41),
            (43, 41),
            (41, 42),
            (42, 42),
            (41, 43),
        ];
        for &(x, y) in &spot {
            img.set(x, y, 255);
        }
        (img, spot)
    }

    /// Solves the neighbourhood-mean equations for the spot directly by
    /// Gaussian elimination.
    fn direct_fill(img: &EyeImage, spot: &[(usize, usize)]) -> Vec<f64> {
        let w = img.width();
        let idx = |x: usize, y: usize| spot.iter().position(|&p| p == (x, y));
        let k = spot.len();
        let mut a = vec![vec![0.0f64; k + 1]; k];
        for (row, &(x, y)) in spot.iter().enumerate() {
            let nb: Vec<usize> = neighbourhood(x, y, w, img.height()).collect();
            a[row][row] = nb.len() as f64;
            for j in nb {
                let (nx, ny) = (j % w, j / w);
                match idx(nx, ny) {
                    Some(col) => a[row][col] -= 1.0,
                    None => a[row][k] += img.get(nx, ny) as f64,
                }
            }
        }
        for c in 0..k {
            let piv = (c..k)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, piv);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for cc in c..=k {
                        a[r][cc] -= f * a[c][cc];
                    }
                }
            }
        }
        (0..k).map(|r| a[r][k] / a[r][r]).collect()
    }

    #[test]
    fn spot_matches_direct_solution() {
        let (img, spot) = gradient_with_spot();
        let out = remove_specular_highlights(&img, 0.99);
        let oracle = direct_fill(&img, &spot);
        for (&(x, y), &expect) in spot.iter().zip(&oracle) {
            let got = out.get(x, y) as f64;
            assert!((got - expect).abs() <= 0.5 + 1e-3, "({x},{y}) {got} vs {expect}");
        }
        for y in 0..100 {
            for x in 0..100 {
                if !spot.contains(&(x, y)) {
                    assert_eq!(out.get(x, y), img.get(x, y));
                }
            }
        }
    }

    #[test]
    fn constant_image_untouched() {
        let img = EyeImage::filled(17, 9, 128);
        assert_eq!(remove_specular_highlights(&img, 0.995), img);
    }

    #[test]
    fn lone_bright_pixel_filled_from_zeros() {
        let mut img = EyeImage::filled(5, 5, 0);
        img.set(2, 2, 255);
        let out = remove_specular_highlights(&img, 0.5);
        assert_eq!(out, EyeImage::filled(5, 5, 0));
    }

    #[test]
    fn stretch_endpoints() {
        let px: Vec<u8> = (0..51u8).map(|v| 50 + v).collect();
        let img = EyeImage::new(51, 1, px).unwrap();
        let out = normalize_contrast(&img);
        let lo = percentile(&img, 0.01) as f64;
        let hi = percentile(&img, 0.99) as f64;
        for (&v, &o) in img.pixels().iter().zip(out.pixels()) {
            let expect = ((v as f64 - lo) * 255.0 / (hi - lo)).round().clamp(0.0, 255.0);
            assert_eq!(o as f64, expect);
        }
        assert_eq!(*out.pixels().iter().min().unwrap(), 0);
        assert_eq!(*out.pixels().iter().max().unwrap(), 255);
    }

    #[test]
    fn full_range_is_identity() {
        let mut px = vec![0u8; 100];
        px.extend(vec![255u8; 100]);
        px.extend((0..=255u8).collect::<Vec<_>>());
        let img = EyeImage::new(px.len(), 1, px).unwrap();
        assert_eq!(percentile(&img, 0.01), 0);
        assert_eq!(percentile(&img, 0.99), 255);
        assert_eq!(normalize_contrast(&img), img);
    }

    #[test]
    fn constant_maps_to_mid_gray() {
        let out = normalize_contrast(&EyeImage::filled(4, 4, 77));
        assert_eq!(out, EyeImage::filled(4, 4, 128));
    }

    fn arb_image() -> impl Strategy<Value = EyeImage> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |px| EyeImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn contrast_is_monotone(img in arb_image()) {
            let out = normalize_contrast(&img);
            let mut pairs: Vec<(u8, u8)> = img.pixels().iter().copied().zip(out.pixels().iter().copied()).collect();
            pairs.sort();
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }

        #[test]
        fn second_pass_at_first_threshold_is_noop(img in arb_image(), p in 0.5f64..0.999) {
            let t = percentile(&img, p);
            let once = remove_highlights_above(&img, t);
            prop_assert!(once.pixels().iter().all(|&v| v <= t));
            prop_assert_eq!(remove_highlights_above(&once, t), once.clone());
            prop_assert_eq!(remove_specular_highlights(&img, p), once);
        }

        #[test]
        fn fill_bounded_by_untouched_max(img in arb_image(), p in 0.3f64..0.999) {
            let t = percentile(&img, p);
            let out = remove_specular_highlights(&img, p);
            let max_kept = img.pixels().iter().copied().filter(|&v| v <= t).max().unwrap();
            prop_assert!(out.pixels().iter().all(|&v| v <= max_kept));
            prop_assert_eq!((out.width(), out.height()), (img.width(), img.height()));
        }
    }
}
