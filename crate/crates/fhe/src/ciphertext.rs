//! Ciphertext values and their wire format.
//!
//! Wire layout (little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `b"BFVCT\0\0\x01"` |
//! | 32    | SHA-256 of the parameter config |
//! | 1     | part count (2 or 3) |
//! | 1     | level (multiplicative depth consumed) |
//! | 8     | noise bound, `f64` |
//! | rest  | coefficients, part-major then residue-major, each packed into the bit width of its prime |

use std::sync::Arc;

use crate::context::Context;
use crate::error::{FheError, Result};

pub const CIPHERTEXT_MAGIC: [u8; 8] = *b"BFVCT\0\0\x01";
const HEADER_LEN: usize = 8 + 32 + 1 + 1 + 8;

#[derive(Clone)]
pub struct Ciphertext {
    ctx: Arc<Context>,
    parts: Vec<Vec<u64>>,
    level: u8,
    noise: f64,
}

impl std::fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ciphertext")
            .field("parts", &self.parts.len())
            .field("level", &self.level)
            .field("noise_budget_bits", &self.noise_budget_bits())
            .finish()
    }
}

impl PartialEq for Ciphertext {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.params_hash() == other.ctx.params_hash()
            && self.level == other.level
            && self.parts == other.parts
    }
}

impl Ciphertext {
    pub(crate) fn new(ctx: Arc<Context>, parts: Vec<Vec<u64>>, level: u8, noise: f64) -> Self {
        debug_assert!(parts.iter().all(|p| p.len() == ctx.q_len()));
        Self {
            ctx,
            parts,
            level,
            noise,
        }
    }

    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    pub fn params_hash(&self) -> &[u8; 32] {
        self.ctx.params_hash()
    }

    /// Coefficient-form parts over `Q`.
    pub fn parts(&self) -> &[Vec<u64>] {
        &self.parts
    }

    pub(crate) fn parts_mut(&mut self) -> &mut [Vec<u64>] {
        &mut self.parts
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// Tracked upper bound on the phase noise.
    pub fn noise_bound(&self) -> f64 {
        self.noise
    }

    pub(crate) fn set_noise(&mut self, noise: f64) {
        self.noise = noise;
    }

    /// Tracked lower-bound estimate of the remaining noise budget.
    pub fn noise_budget_bits(&self) -> f64 {
        self.ctx.noise().budget(self.noise)
    }

    /// Size of [`Ciphertext::to_bytes`] for a two-part ciphertext.
    pub fn serialized_len(ctx: &Context, parts: usize) -> usize {
        let bits_per_coeff: usize = ctx.q_moduli().iter().map(|m| m.bits() as usize).sum();
        HEADER_LEN + (parts * ctx.n() * bits_per_coeff).div_ceil(8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::serialized_len(&self.ctx, self.parts.len()));
        out.extend_from_slice(&CIPHERTEXT_MAGIC);
        out.extend_from_slice(self.ctx.params_hash());
        out.push(self.parts.len() as u8);
        out.push(self.level);
        out.extend_from_slice(&self.noise.to_le_bytes());
        let n = self.ctx.n();
        let mut writer = BitWriter::new(&mut out);
        for part in &self.parts {
            for (r, m) in self.ctx.q_moduli().iter().enumerate() {
                for &c in &part[r * n..(r + 1) * n] {
                    writer.push(c, m.bits());
                }
            }
        }
        writer.finish();
        out
    }

    pub fn from_bytes(ctx: &Arc<Context>, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(FheError::Malformed(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[..8] != CIPHERTEXT_MAGIC {
            return Err(FheError::Malformed("bad magic".into()));
        }
        if &bytes[8..40] != ctx.params_hash() {
            return Err(FheError::ParamsMismatch);
        }
        let parts = bytes[40] as usize;
        if !(2..=3).contains(&parts) {
            return Err(FheError::Malformed(format!("part count {parts}")));
        }
        let level = bytes[41];
        let noise = f64::from_le_bytes(bytes[42..50].try_into().expect("8 bytes"));
        let expected = Self::serialized_len(ctx, parts);
        if bytes.len() != expected {
            return Err(FheError::Malformed(format!(
                "expected {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let n = ctx.n();
        let mut reader = BitReader::new(&bytes[HEADER_LEN..]);
        let mut out = Vec::with_capacity(parts);
        for _ in 0..parts {
            let mut poly = vec![0u64; ctx.q_len()];
            for (r, m) in ctx.q_moduli().iter().enumerate() {
                for c in &mut poly[r * n..(r + 1) * n] {
                    let v = reader.pull(m.bits());
                    if v >= m.value() {
                        return Err(FheError::Malformed("coefficient out of range".into()));
                    }
                    *c = v;
                }
            }
            out.push(poly);
        }
        Ok(Self::new(ctx.clone(), out, level, noise))
    }
}

struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u128,
    filled: u32,
}

impl<'a> BitWriter<'a> {
    fn new(out: &'a mut Vec<u8>) -> Self {
        Self { out, acc: 0, filled: 0 }
    }

    fn push(&mut self, value: u64, bits: u32) {
        self.acc |= (value as u128) << self.filled;
        self.filled += bits;
        while self.filled >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.filled -= 8;
        }
    }

    fn finish(self) {
        if self.filled > 0 {
            self.out.push(self.acc as u8);
        }
    }
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u128,
    filled: u32,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0, acc: 0, filled: 0 }
    }

    fn pull(&mut self, bits: u32) -> u64 {
        while self.filled < bits {
            let byte = self.data.get(self.pos).copied().unwrap_or(0);
            self.pos += 1;
            self.acc |= (byte as u128) << self.filled;
            self.filled += 8;
        }
        let v = (self.acc & ((1u128 << bits) - 1)) as u64;
        self.acc >>= bits;
        self.filled -= bits;
        v
    }
}
