//! Homomorphic operations using public material only.

use std::sync::Arc;

use crate::ciphertext::Ciphertext;
use crate::context::Context;
use crate::error::{FheError, Result};
use crate::keys::RelinKey;
use crate::params::MAX_DEPTH;

/// Evaluation side of the scheme: holds the context and relinearization key,
/// never the secret key.
#[derive(Clone)]
pub struct Evaluator {
    ctx: Arc<Context>,
    // relinearization pairs with Shoup companions: (b, b', a, a')
    rk: Arc<Vec<[Vec<u64>; 4]>>,
}

/// A two-part ciphertext extended to `Q ∪ P` and transformed, ready to enter
/// tensor products. Lifting once lets one operand be reused across many
/// products.
#[derive(Clone)]
pub struct LiftedCiphertext {
    parts: [Vec<u64>; 2],
    level: u8,
    noise: f64,
}

impl LiftedCiphertext {
    pub fn level(&self) -> u8 {
        self.level
    }
}

impl Evaluator {
    pub fn new(rk: &RelinKey) -> Self {
        let ctx = rk.context().clone();
        let keys = rk
            .keys
            .iter()
            .map(|(b, a)| {
                [
                    b.clone(),
                    ctx.shoup_companions(b),
                    a.clone(),
                    ctx.shoup_companions(a),
                ]
            })
            .collect();
        Self {
            ctx,
            rk: Arc::new(keys),
        }
    }

    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.params_hash() != self.ctx.params_hash() {
            return Err(FheError::ParamsMismatch);
        }
        Ok(())
    }

    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a.parts().len() != b.parts().len() {
            return Err(FheError::Malformed(format!(
                "part counts differ: {} vs {}",
                a.parts().len(),
                b.parts().len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut out = a.clone();
        self.add_assign(&mut out, b)?;
        Ok(out)
    }

    pub fn add_assign(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        self.check_pair(a, b)?;
        for (x, y) in a.parts_mut().iter_mut().zip(b.parts()) {
            self.ctx.add_assign(x, y);
        }
        let noise = self.ctx.noise().add(a.noise_bound(), b.noise_bound());
        a.set_noise(noise);
        self.bump_level(a, b.level());
        Ok(())
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        let mut out = a.clone();
        for (x, y) in out.parts_mut().iter_mut().zip(b.parts()) {
            self.ctx.sub_assign(x, y);
        }
        out.set_noise(self.ctx.noise().add(a.noise_bound(), b.noise_bound()));
        self.bump_level(&mut out, b.level());
        Ok(out)
    }

    fn bump_level(&self, a: &mut Ciphertext, other: u8) {
        if other > a.level() {
            *a = Ciphertext::new(
                self.ctx.clone(),
                a.parts().to_vec(),
                other,
                a.noise_bound(),
            );
        }
    }

    fn centered_scalar(&self, k: i64) -> Result<i64> {
        let t = self.ctx.t() as i64;
        if k.unsigned_abs() >= t as u64 {
            return Err(FheError::PlaintextRange {
                value: k.unsigned_abs(),
                modulus: t as u64,
            });
        }
        let r = k.rem_euclid(t);
        Ok(if r > t / 2 { r - t } else { r })
    }

    /// Adds the plaintext `k` (|k| < t; negatives taken modulo t).
    pub fn add_plain(&self, a: &Ciphertext, k: i64) -> Result<Ciphertext> {
        self.check(a)?;
        let k = self.centered_scalar(k)?;
        let m = k.rem_euclid(self.ctx.t() as i64) as u64;
        let mut out = a.clone();
        let n = self.ctx.n();
        let encoded = self.ctx.encode_scaled(m);
        let c0 = &mut out.parts_mut()[0];
        for (r, (modulus, v)) in self.ctx.q_moduli().iter().zip(encoded).enumerate() {
            c0[r * n] = modulus.add(c0[r * n], v);
        }
        out.set_noise(a.noise_bound() + 1.0);
        Ok(out)
    }

    /// Multiplies by the plaintext `k` (|k| < t; negatives taken modulo t).
    pub fn mul_plain(&self, a: &Ciphertext, k: i64) -> Result<Ciphertext> {
        self.check(a)?;
        let k = self.centered_scalar(k)?;
        let mut out = a.clone();
        for part in out.parts_mut() {
            self.ctx.scalar_mul_assign(part, k);
        }
        out.set_noise(self.ctx.noise().mul_plain(a.noise_bound(), k.unsigned_abs()));
        Ok(out)
    }

    pub fn negate(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.check(a)?;
        let mut out = a.clone();
        for part in out.parts_mut() {
            self.ctx.neg_assign(part);
        }
        Ok(out)
    }

    /// Extends a two-part ciphertext to the multiplication basis.
    pub fn lift(&self, a: &Ciphertext) -> Result<LiftedCiphertext> {
        self.check(a)?;
        if a.parts().len() != 2 {
            return Err(FheError::Malformed(format!(
                "only two-part ciphertexts can be multiplied, got {}",
                a.parts().len()
            )));
        }
        let lift_one = |src: &[u64]| {
            let mut dst = vec![0u64; self.ctx.qp_len()];
            self.ctx.extend_to_qp(src, &mut dst);
            self.ctx.forward(&mut dst);
            dst
        };
        Ok(LiftedCiphertext {
            parts: [lift_one(&a.parts()[0]), lift_one(&a.parts()[1])],
            level: a.level(),
            noise: a.noise_bound(),
        })
    }

    /// Product with relinearization back to two parts.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        let level = a.level().max(b.level()) + 1;
        if level > MAX_DEPTH {
            return Err(FheError::DepthExceeded { max: MAX_DEPTH });
        }
        let model = self.ctx.noise();
        let projected = model.mul(a.noise_bound(), b.noise_bound());
        let budget = model.budget(projected);
        if budget <= 0.0 {
            return Err(FheError::NoiseBudgetExhausted { budget_bits: budget });
        }
        let mut acc = self.accumulator();
        acc.add_product(&self.lift(a)?, &self.lift(b)?)?;
        acc.finish()
    }

    pub fn mul_lifted(&self, a: &LiftedCiphertext, b: &LiftedCiphertext) -> Result<Ciphertext> {
        let mut acc = self.accumulator();
        acc.add_product(a, b)?;
        acc.finish()
    }

    /// Sum of products with a single scale-and-round and relinearization.
    pub fn accumulator(&self) -> ProductAccumulator<'_> {
        ProductAccumulator {
            eval: self,
            acc: None,
            noise: 0.0,
            level: 0,
        }
    }

    /// Key-switches `(d0, d1, d2)` (coefficient form over `Q`) to two parts.
    fn relinearize(&self, mut d0: Vec<u64>, mut d1: Vec<u64>, d2: &[u64]) -> (Vec<u64>, Vec<u64>) {
        let ctx = &self.ctx;
        let digits = ctx.decompose(d2);
        let mut acc0 = vec![0u64; ctx.q_len()];
        let mut acc1 = vec![0u64; ctx.q_len()];
        for (digit, [b, bs, a, as_]) in digits.iter().zip(self.rk.iter()) {
            ctx.pointwise_mul_shoup_acc(digit, b, bs, &mut acc0);
            ctx.pointwise_mul_shoup_acc(digit, a, as_, &mut acc1);
        }
        ctx.inverse(&mut acc0);
        ctx.inverse(&mut acc1);
        ctx.add_assign(&mut d0, &acc0);
        ctx.add_assign(&mut d1, &acc1);
        (d0, d1)
    }
}

/// Accumulates tensor products in the transformed `Q ∪ P` domain.
pub struct ProductAccumulator<'a> {
    eval: &'a Evaluator,
    acc: Option<[Vec<u64>; 3]>,
    noise: f64,
    level: u8,
}

impl ProductAccumulator<'_> {
    pub fn add_product(&mut self, a: &LiftedCiphertext, b: &LiftedCiphertext) -> Result<()> {
        let level = a.level.max(b.level) + 1;
        if level > MAX_DEPTH {
            return Err(FheError::DepthExceeded { max: MAX_DEPTH });
        }
        let ctx = &self.eval.ctx;
        let model = ctx.noise();
        let noise = self.noise + model.product_term(a.noise, b.noise);
        let budget = model.budget(noise + model.rescale_and_relin());
        if budget <= 0.0 {
            return Err(FheError::NoiseBudgetExhausted { budget_bits: budget });
        }
        let len = ctx.qp_len();
        let acc = self
            .acc
            .get_or_insert_with(|| [vec![0u64; len], vec![0u64; len], vec![0u64; len]]);
        let [a0, a1] = &a.parts;
        let [b0, b1] = &b.parts;
        ctx.pointwise_mul_acc(a0, b0, &mut acc[0]);
        ctx.pointwise_mul_acc(a0, b1, &mut acc[1]);
        ctx.pointwise_mul_acc(a1, b0, &mut acc[1]);
        ctx.pointwise_mul_acc(a1, b1, &mut acc[2]);
        self.noise = noise;
        self.level = self.level.max(level);
        Ok(())
    }

    /// Scales by `t/q`, relinearizes and returns the sum. An empty
    /// accumulator yields a transparent encryption of zero.
    pub fn finish(self) -> Result<Ciphertext> {
        let ctx = self.eval.ctx.clone();
        let Some(acc) = self.acc else {
            return Ok(Ciphertext::new(
                ctx.clone(),
                vec![vec![0; ctx.q_len()], vec![0; ctx.q_len()]],
                0,
                0.0,
            ));
        };
        let mut scaled = Vec::with_capacity(3);
        for mut poly in acc {
            ctx.inverse(&mut poly);
            let mut out = vec![0u64; ctx.q_len()];
            ctx.scale_round(&poly, &mut out);
            scaled.push(out);
        }
        let d2 = scaled.pop().expect("three parts");
        let d1 = scaled.pop().expect("three parts");
        let d0 = scaled.pop().expect("three parts");
        let (c0, c1) = self.eval.relinearize(d0, d1, &d2);
        let noise = self.noise + ctx.noise().rescale_and_relin();
        Ok(Ciphertext::new(ctx, vec![c0, c1], self.level, noise))
    }
}
