//! Rubber-sheet unwrapping of the iris annulus.

use std::f64::consts::PI;

use crate::image::EyeImage;
use crate::segment::SegmentationResult;

pub const RADIAL: usize = 64;
pub const ANGULAR: usize = 512;

/// `RADIAL x ANGULAR` samples; row 0 lies on the pupil boundary, row 63 on
/// the iris boundary, column `j` at angle `2*pi*j/512`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedIris {
    intensities: Vec<f64>,
    validity: Vec<u8>,
}

impl NormalizedIris {
    pub fn new(intensities: Vec<f64>, validity: Vec<u8>) -> Self {
        assert_eq!(intensities.len(), RADIAL * ANGULAR);
        assert_eq!(validity.len(), RADIAL * ANGULAR);
        assert!(validity.iter().all(|&v| v <= 1));
        Self {
            intensities,
            validity,
        }
    }

    #[inline]
    pub fn intensity(&self, row: usize, col: usize) -> f64 {
        self.intensities[row * ANGULAR + col]
    }

    #[inline]
    pub fn valid(&self, row: usize, col: usize) -> bool {
        self.validity[row * ANGULAR + col] != 0
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn validity(&self) -> &[u8] {
        &self.validity
    }

    /// Columns shifted circularly so column `c` takes column `c - k`.
    pub fn rotate_columns(&self, k: i64) -> Self {
        let mut out = self.clone();
        for r in 0..RADIAL {
            for c in 0..ANGULAR {
                let src = (c as i64 - k).rem_euclid(ANGULAR as i64) as usize;
                out.intensities[r * ANGULAR + c] = self.intensities[r * ANGULAR + src];
                out.validity[r * ANGULAR + c] = self.validity[r * ANGULAR + src];
            }
        }
        out
    }
}

/// Angle of column `j`. Angles follow image axes: `x = cx + r cos`,
/// `y = cy + r sin` with `y` pointing down.
pub fn column_angle(j: usize) -> f64 {
    2.0 * PI * j as f64 / ANGULAR as f64
}

pub fn rubber_sheet_normalize(img: &EyeImage, seg: &SegmentationResult) -> NormalizedIris {
    let (p, i) = (seg.pupil(), seg.iris());
    let mut intensities = vec![0.0; RADIAL * ANGULAR];
    let mut validity = vec![0u8; RADIAL * ANGULAR];
    let (w, h) = (img.width() as f64, img.height() as f64);
    for j in 0..ANGULAR {
        let (s, c) = column_angle(j).sin_cos();
        let (x0, y0) = (p.x + p.r * c, p.y + p.r * s);
        let (x1, y1) = (i.x + i.r * c, i.y + i.r * s);
        for row in 0..RADIAL {
            let f = row as f64 / (RADIAL - 1) as f64;
            let x = x0 + (x1 - x0) * f;
            let y = y0 + (y1 - y0) * f;
            let k = row * ANGULAR + j;
            intensities[k] = img.sample(x, y);
            let inside = x > -0.5 && y > -0.5 && x < w - 0.5 && y < h - 0.5;
            validity[k] = if inside {
                seg.mask_at(x.round() as i64, y.round() as i64)
            } else {
                0
            };
        }
    }
    NormalizedIris::new(intensities, validity)
}
