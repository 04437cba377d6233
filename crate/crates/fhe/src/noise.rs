//! Heuristic worst-case noise bounds, tracked per ciphertext.
//!
//! Noise is measured on `w = c0 + c1*s mod q` as the distance from `w` to the
//! nearest multiple of `q/t`, so a ciphertext decrypts correctly while that
//! distance stays below `q/(2t)`. All bounds are infinity-norm estimates with
//! a Gaussian tail factor of 8 standard deviations per coefficient.

use crate::params::{SchemeParams, MAX_COUNT};

/// Tail factor; `exp(-8^2/2)` keeps per-coefficient failure under 2^-46.
pub const TAIL: f64 = 8.0;

/// Absolute error of the floating-point fraction sum inside scale-and-round.
const SCALE_FLOAT_ERROR: f64 = 4096.0;

#[derive(Clone, Debug)]
pub struct NoiseModel {
    n: f64,
    t: f64,
    sigma: f64,
    relin_digits: f64,
    log2_q: f64,
}

impl NoiseModel {
    pub fn new(params: &SchemeParams, relin_digits: usize) -> Self {
        Self {
            n: params.n as f64,
            t: params.t as f64,
            sigma: params.sigma,
            relin_digits: relin_digits as f64,
            log2_q: params.log2_q(),
        }
    }

    /// log2(q / 2t): the budget of a noiseless ciphertext.
    pub fn max_budget(&self) -> f64 {
        self.log2_q - 1.0 - self.t.log2()
    }

    pub fn budget(&self, noise: f64) -> f64 {
        self.max_budget() - noise.max(1.0).log2()
    }

    /// `e0 - e*u + e1*s` with ternary `u`, `s` and Gaussian errors, plus the
    /// half unit of message-encoding rounding.
    pub fn fresh(&self) -> f64 {
        TAIL * self.sigma * (4.0 * self.n / 3.0 + 1.0).sqrt() + 0.5
    }

    /// Messages are encoded as `round(q*m/t)`, so a wrap of the message
    /// modulo `t` costs at most one unit, absorbed by the tail factor.
    pub fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    pub fn mul_plain(&self, a: f64, scalar_abs: u64) -> f64 {
        scalar_abs as f64 * (a + 1.0)
    }

    /// Noise of one tensor product: `t*(v1*k2 + v2*k1)` where `k` is the
    /// carry polynomial of `c0 + c1*s` (about `sqrt(n/18)` per coefficient),
    /// plus `m1*v2 + m2*v1` with messages below `t`.
    pub fn product_term(&self, a: f64, b: f64) -> f64 {
        self.t * (a + b) * (self.n / 2.0 + 1.0)
    }

    /// Rounding in scale-and-round plus key switching, paid once per
    /// relinearized result.
    pub fn rescale_and_relin(&self) -> f64 {
        let rounding = self.n * (1.0 + SCALE_FLOAT_ERROR);
        let relin = TAIL * self.sigma * 2f64.powi(32) * (self.n * self.relin_digits / 3.0).sqrt();
        rounding + relin
    }

    pub fn mul(&self, a: f64, b: f64) -> f64 {
        self.product_term(a, b) + self.rescale_and_relin()
    }

    /// Bound on the `D` output of the masked-XOR matching circuit summed over
    /// the largest template, which is the deepest circuit the scheme serves.
    pub fn matching_circuit(&self) -> f64 {
        let fresh = self.fresh();
        let level1 = self.mul(fresh, fresh);
        // x + y - 2xy
        let xor = self.add(self.add(fresh, fresh), self.mul_plain(level1, 2));
        let mask = level1;
        MAX_COUNT as f64 * self.product_term(xor, mask) + self.rescale_and_relin()
    }
}
