//! 8-bit grayscale eye images.

use std::io::Write;
use std::path::Path;

use image::{ColorType, ImageReader};

use crate::error::{io_err, IrisError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EyeImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl EyeImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(IrisError::InvalidImage(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(IrisError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major pixels.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Bilinear sample at `(x, y)` with pixel `(i, j)` centred on integer
    /// coordinates. Coordinates outside the image are clamped to the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p = |xx, yy| self.get(xx, yy) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Loads a binary PGM or a PNG, accepting only single-channel 8-bit data.
pub fn load_eye_image(path: &Path) -> Result<EyeImage> {
    let reader = ImageReader::open(path)
        .map_err(io_err(path))?
        .with_guessed_format()
        .map_err(io_err(path))?;
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(source) => IrisError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => IrisError::Format(format!("{}: {other}", path.display())),
    })?;
    let color = img.color();
    if color != ColorType::L8 {
        let channels = color.channel_count();
        let bits = color.bits_per_pixel() / channels as u16;
        let what = if channels != 1 {
            format!("{channels} channels ({color:?}); expected 1")
        } else {
            format!("{bits}-bit samples; expected 8")
        };
        return Err(IrisError::Format(format!("{}: {what}", path.display())));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    EyeImage::new(w, h, img.into_luma8().into_raw())
}

/// Writes a binary PGM (P5).
pub fn save_pgm(img: &EyeImage, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    write!(f, "P5\n{} {}\n255\n", img.width, img.height).map_err(io_err(path))?;
    f.write_all(&img.pixels).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(EyeImage::new(0, 3, vec![]).is_err());
        assert!(EyeImage::new(2, 2, vec![0; 3]).is_err());
        assert!(EyeImage::new(1, 1, vec![0]).is_ok());
    }

    #[test]
    fn bilinear_sampling() {
        let img = EyeImage::new(2, 2, vec![0, 100, 50, 150]).unwrap();
        assert_eq!(img.sample(0.0, 0.0), 0.0);
        assert_eq!(img.sample(1.0, 1.0), 150.0);
        assert_eq!(img.sample(0.5, 0.0), 50.0);
        assert_eq!(img.sample(0.5, 0.5), 75.0);
        assert_eq!(img.sample(-3.0, 9.0), 50.0);
    }
}
