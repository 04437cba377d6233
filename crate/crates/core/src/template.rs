//! Bit-packed iris codes with validity masks.

use std::path::Path;

use crate::error::{io_err, IrisError, Result};

pub const ROWS: usize = 32;
pub const COLS: usize = 512;
pub const BITS: usize = ROWS * COLS;

pub const TEMPLATE_MAGIC: [u8; 8] = *b"IRISTPL\x01";

/// Code and mask planes of `rows x cols` bits. Each row is a run of u64
/// words, column `c` at bit `c % 64` of word `c / 64`; bits past `cols` are
/// kept zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IrisTemplate {
    rows: usize,
    cols: usize,
    code: Vec<u64>,
    mask: Vec<u64>,
}

impl IrisTemplate {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > u16::MAX as usize || cols > u16::MAX as usize {
            return Err(IrisError::Template(format!("unsupported layout {rows}x{cols}")));
        }
        let words = rows * cols.div_ceil(64);
        Ok(Self {
            rows,
            cols,
            code: vec![0; words],
            mask: vec![0; words],
        })
    }

    /// Builds a template from row-major bit slices (any non-zero is 1).
    pub fn from_bits(rows: usize, cols: usize, code: &[u8], mask: &[u8]) -> Result<Self> {
        if code.len() != rows * cols || mask.len() != rows * cols {
            return Err(IrisError::Template(format!(
                "expected {} bits per plane, got {} and {}",
                rows * cols,
                code.len(),
                mask.len()
            )));
        }
        let mut t = Self::zeros(rows, cols)?;
        for r in 0..rows {
            for c in 0..cols {
                t.set(r, c, code[r * cols + c] != 0, mask[r * cols + c] != 0);
            }
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn words_per_row(&self) -> usize {
        self.cols.div_ceil(64)
    }

    #[inline]
    fn locate(&self, r: usize, c: usize) -> (usize, u64) {
        debug_assert!(r < self.rows && c < self.cols);
        (r * self.words_per_row() + c / 64, 1u64 << (c % 64))
    }

    #[inline]
    pub fn code_bit(&self, r: usize, c: usize) -> bool {
        let (w, b) = self.locate(r, c);
        self.code[w] & b != 0
    }

    #[inline]
    pub fn mask_bit(&self, r: usize, c: usize) -> bool {
        let (w, b) = self.locate(r, c);
        self.mask[w] & b != 0
    }

    pub fn set(&mut self, r: usize, c: usize, code: bool, mask: bool) {
        let (w, b) = self.locate(r, c);
        if code {
            self.code[w] |= b;
        } else {
            self.code[w] &= !b;
        }
        if mask {
            self.mask[w] |= b;
        } else {
            self.mask[w] &= !b;
        }
    }

    pub fn set_code(&mut self, r: usize, c: usize, v: bool) {
        let m = self.mask_bit(r, c);
        self.set(r, c, v, m);
    }

    pub fn set_mask(&mut self, r: usize, c: usize, v: bool) {
        let k = self.code_bit(r, c);
        self.set(r, c, k, v);
    }

    /// Flat row-major index `i` to `(row, col)`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    pub fn code_words(&self) -> &[u64] {
        &self.code
    }

    pub fn mask_words(&self) -> &[u64] {
        &self.mask
    }

    /// Row-major code bits as 0/1.
    pub fn code_bits(&self) -> Vec<u8> {
        (0..self.len())
            .map(|i| {
                let (r, c) = self.position(i);
                self.code_bit(r, c) as u8
            })
            .collect()
    }

    pub fn mask_bits(&self) -> Vec<u8> {
        (0..self.len())
            .map(|i| {
                let (r, c) = self.position(i);
                self.mask_bit(r, c) as u8
            })
            .collect()
    }

    pub fn mask_popcount(&self) -> u32 {
        self.mask.iter().map(|w| w.count_ones()).sum()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Circular column shift: output column `c` takes input column
    /// `c - k (mod cols)`. Any `k` is accepted and reduced modulo `cols`.
    pub fn rotate(&self, k: i64) -> Self {
        let cols = self.cols as i64;
        let k = k.rem_euclid(cols) as usize;
        if k == 0 {
            return self.clone();
        }
        let mut out = self.clone();
        let wpr = self.words_per_row();
        if self.cols % 64 == 0 {
            for r in 0..self.rows {
                let span = r * wpr..(r + 1) * wpr;
                rotate_words(&self.code[span.clone()], &mut out.code[span.clone()], k);
                rotate_words(&self.mask[span.clone()], &mut out.mask[span], k);
            }
        } else {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    let src = (c + self.cols - k) % self.cols;
                    out.set(r, c, self.code_bit(r, src), self.mask_bit(r, src));
                }
            }
        }
        out
    }

    /// Serializes as `IRISTPL` v1: magic, u16 rows, u16 cols (little-endian),
    /// then code and mask planes with bit `(r, c)` at byte `(r*cols + c) / 8`,
    /// most significant bit first, each plane zero-padded to a whole byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let plane = self.len().div_ceil(8);
        let mut out = Vec::with_capacity(12 + 2 * plane);
        out.extend_from_slice(&TEMPLATE_MAGIC);
        out.extend_from_slice(&(self.rows as u16).to_le_bytes());
        out.extend_from_slice(&(self.cols as u16).to_le_bytes());
        for getter in [Self::code_bit, Self::mask_bit] {
            let mut bytes = vec![0u8; plane];
            for i in 0..self.len() {
                let (r, c) = self.position(i);
                if getter(self, r, c) {
                    bytes[i / 8] |= 0x80 >> (i % 8);
                }
            }
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || bytes[..8] != TEMPLATE_MAGIC {
            return Err(IrisError::Template("not an IRISTPL v1 file".into()));
        }
        let rows = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let cols = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
        let mut t = Self::zeros(rows, cols)?;
        let plane = t.len().div_ceil(8);
        if bytes.len() != 12 + 2 * plane {
            return Err(IrisError::Template(format!(
                "expected {} bytes for {rows}x{cols}, found {}",
                12 + 2 * plane,
                bytes.len()
            )));
        }
        let (code, mask) = bytes[12..].split_at(plane);
        for i in 0..t.len() {
            let (r, c) = t.position(i);
            let bit = |p: &[u8]| p[i / 8] & (0x80 >> (i % 8)) != 0;
            t.set(r, c, bit(code), bit(mask));
        }
        let tail = t.len() % 8;
        if tail != 0 {
            let pad = 0xffu8 >> tail;
            if code[plane - 1] & pad != 0 || mask[plane - 1] & pad != 0 {
                return Err(IrisError::Template("non-zero padding bits".into()));
            }
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            IrisError::Template(msg) => IrisError::Template(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Rotates a little-endian multiword integer left by `k` bits, wrapping.
fn rotate_words(src: &[u64], dst: &mut [u64], k: usize) {
    let n = src.len();
    let (ws, bs) = (k / 64, k % 64);
    for (i, d) in dst.iter_mut().enumerate() {
        let hi = src[(i + n - ws) % n];
        *d = if bs == 0 {
            hi
        } else {
            let lo = src[(i + 2 * n - ws - 1) % n];
            (hi << bs) | (lo >> (64 - bs))
        };
    }
}
