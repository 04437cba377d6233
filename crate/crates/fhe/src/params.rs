//! Scheme parameter sets, their text config form and identity hash.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::arith::{is_prime, ntt_primes};
use crate::error::{FheError, Result};

/// Largest bit count that must fit in a plaintext sum without wrapping.
pub const MAX_COUNT: u64 = 16_384;

/// Deepest multiplicative chain the scheme accepts.
pub const MAX_DEPTH: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeParams {
    /// Ring dimension, a power of two.
    pub n: usize,
    /// Ciphertext modulus as a product of NTT-friendly primes.
    pub q_primes: Vec<u64>,
    /// Plaintext modulus.
    pub t: u64,
    /// Standard deviation of the rounded Gaussian error.
    pub sigma: f64,
    /// Claimed classical security in bits; 0 marks a testing-only set.
    pub security_level: u32,
}

impl SchemeParams {
    /// n = 8192, q of about 2^218 over four word-sized primes, t = 65537.
    ///
    /// log2(q) stays within the 218-bit ceiling that the homomorphic
    /// encryption standard tables list for 128-bit security with ternary
    /// secrets at this ring dimension.
    pub fn default_128() -> Self {
        let step = 2 * 8192;
        let mut q = ntt_primes(55, 2, step, &[]);
        q.extend(ntt_primes(54, 2, step, &[]));
        Self {
            n: 8192,
            q_primes: q,
            t: 65_537,
            sigma: 3.2,
            security_level: 128,
        }
    }

    /// Reduced ring dimension (n = 2048) with a 120-bit modulus. Offers no
    /// meaningful security; exists so that full-template circuits run in
    /// test time.
    pub fn test_profile() -> Self {
        Self::insecure(2048)
    }

    /// Testing-only set of arbitrary dimension with two 60-bit primes.
    pub fn insecure(n: usize) -> Self {
        Self {
            n,
            q_primes: ntt_primes(60, 2, 2 * n as u64, &[]),
            t: 65_537,
            sigma: 3.2,
            security_level: 0,
        }
    }

    pub fn log2_q(&self) -> f64 {
        self.q_primes.iter().map(|&p| (p as f64).log2()).sum()
    }

    /// Structural checks. Noise feasibility is checked at key generation.
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(FheError::InvalidParams(s));
        if !self.n.is_power_of_two() || self.n < 4 || self.n > 32_768 {
            return bad(format!("n = {} must be a power of two in [4, 32768]", self.n));
        }
        if self.q_primes.is_empty() || self.q_primes.len() > 6 {
            return bad(format!("expected 1 to 6 q primes, got {}", self.q_primes.len()));
        }
        let step = 2 * self.n as u64;
        for (i, &q) in self.q_primes.iter().enumerate() {
            if q >= 1 << 62 || !is_prime(q) {
                return bad(format!("q prime {q} is not a prime below 2^62"));
            }
            if q % step != 1 {
                return bad(format!("q prime {q} is not 1 mod 2n = {step}"));
            }
            if self.q_primes[..i].contains(&q) {
                return bad(format!("q prime {q} repeated"));
            }
            if q <= self.t {
                return bad(format!("q prime {q} must exceed t = {}", self.t));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        if self.t < 2 {
            return bad(format!("t = {} must be at least 2", self.t));
        }
        Ok(())
    }

    /// Canonical text form; also the input of [`SchemeParams::hash`].
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n={}", self.n);
        let primes: Vec<String> = self.q_primes.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "q_primes={}", primes.join(","));
        let _ = writeln!(s, "t={}", self.t);
        let _ = writeln!(s, "sigma={}", self.sigma);
        let _ = writeln!(s, "security={}", self.security_level);
        s
    }

    /// Parses `key=value` lines. `#` starts a comment. `security` is optional.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut n = None;
        let mut q = None;
        let mut t = None;
        let mut sigma = None;
        let mut security = 0u32;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| FheError::Config {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|e| err(e.to_string()))?),
                "q_primes" => {
                    let primes = value
                        .split(',')
                        .map(|p| p.trim().parse::<u64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(e.to_string()))?;
                    q = Some(primes);
                }
                "t" => t = Some(value.parse::<u64>().map_err(|e| err(e.to_string()))?),
                "sigma" => sigma = Some(value.parse::<f64>().map_err(|e| err(e.to_string()))?),
                "security" => security = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| FheError::Config {
            line: 0,
            reason: format!("missing key {k:?}"),
        };
        let params = Self {
            n: n.ok_or_else(|| missing("n"))?,
            q_primes: q.ok_or_else(|| missing("q_primes"))?,
            t: t.ok_or_else(|| missing("t"))?,
            sigma: sigma.ok_or_else(|| missing("sigma"))?,
            security_level: security,
        };
        params.validate()?;
        Ok(params)
    }

    /// SHA-256 over the canonical config text.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_config().as_bytes()).into()
    }
}
