//! Two-scale 1D Gabor phase quantisation along the angular axis.

use std::f64::consts::PI;

use crate::normalize::{NormalizedIris, ANGULAR, RADIAL};
use crate::template::{IrisTemplate, COLS, ROWS};

pub const BANDS: usize = 8;
pub const ROWS_PER_BAND: usize = RADIAL / BANDS;
pub const WAVELENGTHS: [f64; 2] = [16.0, 32.0];
/// Relative magnitude floor: responses weaker than this fraction of the
/// band's RMS contrast are masked.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;

/// Complex taps `w(u) (exp(-i w u) - kappa)` for `u = -h..=h`, with the
/// Gaussian weights summing to one and `kappa` removing the DC response of
/// the even part.
#[derive(Clone, Debug)]
pub struct GaborKernel {
    pub wavelength: f64,
    pub half_width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl GaborKernel {
    pub fn new(wavelength: f64) -> Self {
        let sigma = 0.5 * wavelength;
        let h = (3.0 * sigma).ceil() as usize;
        let omega = 2.0 * PI / wavelength;
        let us: Vec<f64> = (-(h as i64)..=h as i64).map(|u| u as f64).collect();
        let w: Vec<f64> = us.iter().map(|u| (-u * u / (2.0 * sigma * sigma)).exp()).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let kappa = us
            .iter()
            .zip(&w)
            .map(|(u, wu)| wu * (omega * u).cos())
            .sum::<f64>();
        let re = us
            .iter()
            .zip(&w)
            .map(|(u, wu)| wu * ((omega * u).cos() - kappa))
            .collect();
        let im = us.iter().zip(&w).map(|(u, wu)| -wu * (omega * u).sin()).collect();
        Self {
            wavelength,
            half_width: h,
            re,
            im,
        }
    }

    /// Circular response at column `j`.
    pub fn respond(&self, signal: &[f64], j: usize) -> (f64, f64) {
        let n = signal.len();
        let h = self.half_width;
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, (kr, ki)) in self.re.iter().zip(&self.im).enumerate() {
            let s = signal[(j + n + t - h) % n];
            re += s * kr;
            im += s * ki;
        }
        (re, im)
    }
}

/// Radial band `b`: mean of its rows per column, plus whether every row is
/// valid there.
pub fn band(norm: &NormalizedIris, b: usize) -> (Vec<f64>, Vec<bool>) {
    let mut signal = vec![0.0; ANGULAR];
    let mut valid = vec![true; ANGULAR];
    for r in b * ROWS_PER_BAND..(b + 1) * ROWS_PER_BAND {
        for c in 0..ANGULAR {
            signal[c] += norm.intensity(r, c) / ROWS_PER_BAND as f64;
            valid[c] &= norm.valid(r, c);
        }
    }
    (signal, valid)
}

/// Row of the template holding band `b`, scale index `s`, and the real
/// (`imag = false`) or imaginary bit.
pub fn template_row(b: usize, s: usize, imag: bool) -> usize {
    s * 2 * BANDS + imag as usize * BANDS + b
}

pub fn gabor_encode(norm: &NormalizedIris) -> IrisTemplate {
    let kernels: Vec<GaborKernel> = WAVELENGTHS.iter().map(|&l| GaborKernel::new(l)).collect();
    let mut t = IrisTemplate::zeros(ROWS, COLS).expect("fixed layout");
    for b in 0..BANDS {
        let (signal, valid) = band(norm, b);
        let floor = MAGNITUDE_FLOOR * band_rms(&signal, &valid);
        for (s, k) in kernels.iter().enumerate() {
            let support_ok = support_validity(&valid, k.half_width);
            for c in 0..COLS {
                let (re, im) = k.respond(&signal, c);
                let strong = re.hypot(im) >= floor && re.hypot(im) > 0.0;
                let m = support_ok[c] && strong;
                t.set(template_row(b, s, false), c, re >= 0.0, m);
                t.set(template_row(b, s, true), c, im >= 0.0, m);
            }
        }
    }
    t
}

/// RMS deviation from the mean over valid columns (all columns when none
/// are valid).
fn band_rms(signal: &[f64], valid: &[bool]) -> f64 {
    let pick: Vec<f64> = if valid.iter().any(|&v| v) {
        signal.iter().zip(valid).filter(|(_, &v)| v).map(|(&s, _)| s).collect()
    } else {
        signal.to_vec()
    };
    let mean = pick.iter().sum::<f64>() / pick.len() as f64;
    (pick.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / pick.len() as f64).sqrt()
}

/// Column `c` is usable when every column within `h` of it (circularly) is.
fn support_validity(valid: &[bool], h: usize) -> Vec<bool> {
    let n = valid.len();
    (0..n)
        .map(|c| (0..=2 * h).all(|t| valid[(c + n + t - h) % n]))
        .collect()
}
