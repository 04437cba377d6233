//! Key generation, public-key encryption and decryption.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::ciphertext::Ciphertext;
use crate::context::Context;
use crate::error::{FheError, Result};
use crate::params::MAX_COUNT;

/// Ternary secret `s` (δ_d). Never handed to the evaluating side.
#[derive(Clone)]
pub struct SecretKey {
    ctx: Arc<Context>,
    s: Vec<i8>,
    s_ntt: Vec<u64>,
}

/// RLWE sample `(-(a*s + e), a)` (δ_ε), stored in NTT form over `Q`.
#[derive(Clone)]
pub struct PublicKey {
    ctx: Arc<Context>,
    pk0: Vec<u64>,
    pk1: Vec<u64>,
}

/// Key-switching material from `s^2` to `s`, one pair per gadget digit,
/// stored in NTT form over `Q`.
#[derive(Clone)]
pub struct RelinKey {
    ctx: Arc<Context>,
    pub(crate) keys: Vec<(Vec<u64>, Vec<u64>)>,
}

#[derive(Clone)]
pub struct KeyMaterial {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Deterministic key generation from a 64-bit seed.
pub fn keygen(ctx: &Arc<Context>, seed: u64) -> Result<KeyMaterial> {
    keygen_with_rng(ctx, &mut ChaCha20Rng::seed_from_u64(seed))
}

pub fn keygen_with_rng<R: RngCore + CryptoRng>(
    ctx: &Arc<Context>,
    rng: &mut R,
) -> Result<KeyMaterial> {
    check_feasible(ctx)?;
    let s = ctx.sample_ternary(rng);
    let mut s_ntt = ctx.embed_small(&s);
    ctx.forward(&mut s_ntt);

    let rlwe_zero = |rng: &mut R| {
        let a = ctx.sample_uniform(rng);
        let mut e = ctx.embed_small(&ctx.sample_error(rng));
        ctx.forward(&mut e);
        let mut b = vec![0u64; ctx.q_len()];
        ctx.pointwise_mul(&a, &s_ntt, &mut b);
        ctx.add_assign(&mut b, &e);
        ctx.neg_assign(&mut b);
        (b, a)
    };

    let (pk0, pk1) = rlwe_zero(rng);

    let mut s2 = vec![0u64; ctx.q_len()];
    ctx.pointwise_mul(&s_ntt, &s_ntt, &mut s2);
    let n = ctx.n();
    let mut keys = Vec::with_capacity(ctx.relin_digits());
    for i in 0..ctx.q_moduli().len() {
        for d in 0..ctx.digits_per_prime() {
            let (mut b, a) = rlwe_zero(rng);
            for (r, m) in ctx.q_moduli().iter().enumerate() {
                let g = ctx.gadget(i, d, r);
                if g == 0 {
                    continue;
                }
                for c in 0..n {
                    let idx = r * n + c;
                    b[idx] = m.add(b[idx], m.mul(s2[idx], g));
                }
            }
            keys.push((b, a));
        }
    }

    Ok(KeyMaterial {
        secret: SecretKey {
            ctx: ctx.clone(),
            s,
            s_ntt,
        },
        public: PublicKey {
            ctx: ctx.clone(),
            pk0,
            pk1,
        },
        relin: RelinKey {
            ctx: ctx.clone(),
            keys,
        },
    })
}

/// Rejects parameter sets that cannot hold a full-template count or cannot
/// run the depth-2 matching circuit within the noise budget.
pub fn check_feasible(ctx: &Context) -> Result<()> {
    let t = ctx.t();
    if t < 2 * MAX_COUNT + 1 {
        return Err(FheError::ParameterRejected(format!(
            "t = {t} cannot hold counts up to {MAX_COUNT}; need t >= {}",
            2 * MAX_COUNT + 1
        )));
    }
    let model = ctx.noise();
    let budget = model.budget(model.matching_circuit());
    if budget <= 0.0 {
        return Err(FheError::ParameterRejected(format!(
            "depth-2 matching circuit exceeds the noise budget by {:.1} bits; grow q by at least that much",
            -budget
        )));
    }
    Ok(())
}

impl PublicKey {
    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    /// Fresh two-part encryption of `m < t`.
    pub fn encrypt<R: RngCore + CryptoRng>(&self, m: u64, rng: &mut R) -> Result<Ciphertext> {
        let ctx = &self.ctx;
        if m >= ctx.t() {
            return Err(FheError::PlaintextRange {
                value: m,
                modulus: ctx.t(),
            });
        }
        let mut u = ctx.embed_small(&ctx.sample_ternary(rng));
        ctx.forward(&mut u);
        let mut c0 = vec![0u64; ctx.q_len()];
        let mut c1 = vec![0u64; ctx.q_len()];
        ctx.pointwise_mul(&self.pk0, &u, &mut c0);
        ctx.pointwise_mul(&self.pk1, &u, &mut c1);
        ctx.inverse(&mut c0);
        ctx.inverse(&mut c1);
        let e0 = ctx.embed_small(&ctx.sample_error(rng));
        let e1 = ctx.embed_small(&ctx.sample_error(rng));
        ctx.add_assign(&mut c0, &e0);
        ctx.add_assign(&mut c1, &e1);
        let n = ctx.n();
        for (r, (m_r, v)) in ctx.q_moduli().iter().zip(ctx.encode_scaled(m)).enumerate() {
            c0[r * n] = m_r.add(c0[r * n], v);
        }
        Ok(Ciphertext::new(
            ctx.clone(),
            vec![c0, c1],
            0,
            ctx.noise().fresh(),
        ))
    }

    pub(crate) fn parts(&self) -> (&[u64], &[u64]) {
        (&self.pk0, &self.pk1)
    }

    pub(crate) fn from_parts(ctx: Arc<Context>, pk0: Vec<u64>, pk1: Vec<u64>) -> Self {
        Self { ctx, pk0, pk1 }
    }
}

impl RelinKey {
    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    pub(crate) fn from_parts(ctx: Arc<Context>, keys: Vec<(Vec<u64>, Vec<u64>)>) -> Self {
        Self { ctx, keys }
    }
}

impl SecretKey {
    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    pub fn coefficients(&self) -> &[i8] {
        &self.s
    }

    pub(crate) fn from_coefficients(ctx: Arc<Context>, s: Vec<i8>) -> Self {
        let mut s_ntt = ctx.embed_small(&s);
        ctx.forward(&mut s_ntt);
        Self { ctx, s, s_ntt }
    }

    fn check(&self, ct: &Ciphertext) -> Result<()> {
        if ct.params_hash() != self.ctx.params_hash() {
            return Err(FheError::ParamsMismatch);
        }
        if ct.parts().len() != 2 {
            return Err(FheError::Malformed(format!(
                "expected 2 parts, got {}",
                ct.parts().len()
            )));
        }
        Ok(())
    }

    /// Constant coefficient of `c0 + c1*s`, per residue. `O(n)` since `s`
    /// is ternary.
    fn phase_constant(&self, ct: &Ciphertext) -> Vec<u64> {
        let n = self.ctx.n();
        let (c0, c1) = (&ct.parts()[0], &ct.parts()[1]);
        self.ctx
            .q_moduli()
            .iter()
            .enumerate()
            .map(|(r, m)| {
                let c0 = &c0[r * n..(r + 1) * n];
                let c1 = &c1[r * n..(r + 1) * n];
                // X^j * X^(n-j) = -1 in the negacyclic ring
                let mut plus = 0u64;
                let mut minus = 0u64;
                match self.s[0] {
                    1 => plus = m.add(plus, c1[0]),
                    -1 => minus = m.add(minus, c1[0]),
                    _ => {}
                }
                for j in 1..n {
                    match self.s[n - j] {
                        1 => minus = m.add(minus, c1[j]),
                        -1 => plus = m.add(plus, c1[j]),
                        _ => {}
                    }
                }
                m.sub(m.add(c0[0], plus), minus)
            })
            .collect()
    }

    /// Full phase polynomial `c0 + c1*s` in coefficient form.
    fn phase(&self, ct: &Ciphertext) -> Vec<u64> {
        let ctx = &self.ctx;
        let mut c1 = ct.parts()[1].clone();
        ctx.forward(&mut c1);
        let mut prod = vec![0u64; ctx.q_len()];
        ctx.pointwise_mul(&c1, &self.s_ntt, &mut prod);
        ctx.inverse(&mut prod);
        ctx.add_assign(&mut prod, &ct.parts()[0]);
        prod
    }

    /// Decrypts the constant slot. Refuses when the tracked estimate says the
    /// budget is gone or the measured noise on the slot is within one bit of
    /// the decryption limit.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<u64> {
        self.check(ct)?;
        let estimate = ct.noise_budget_bits();
        if estimate <= 0.0 {
            return Err(FheError::DecryptionUnreliable(format!(
                "estimated noise budget {estimate:.1} bits"
            )));
        }
        let w = self.ctx.crt_centered(&self.phase_constant(ct));
        let (m, e) = self.ctx.decode(&w);
        let measured = budget_from_error(&self.ctx, &e);
        if measured < 1.0 {
            return Err(FheError::DecryptionUnreliable(format!(
                "measured noise budget {measured:.1} bits"
            )));
        }
        Ok(m)
    }

    /// Measured budget in bits: `log2(q / 2|e|)` minimised over all
    /// coefficients, where `e = t*w - q*round(t*w/q)`.
    pub fn noise_budget(&self, ct: &Ciphertext) -> Result<f64> {
        self.check(ct)?;
        let phase = self.phase(ct);
        let n = self.ctx.n();
        let k = self.ctx.q_moduli().len();
        let mut worst = BigUint::from(0u8);
        let mut residues = vec![0u64; k];
        for c in 0..n {
            for r in 0..k {
                residues[r] = phase[r * n + c];
            }
            let (_, e) = self.ctx.decode(&self.ctx.crt_centered(&residues));
            if e > worst {
                worst = e;
            }
        }
        Ok(budget_from_error(&self.ctx, &worst))
    }
}

fn big_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(60);
    let top: BigUint = x >> shift;
    let top = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    top.log2() + shift as f64
}

fn budget_from_error(ctx: &Context, e: &BigUint) -> f64 {
    // |e| / t is the noise in phase units; budget = log2(q/(2t)) - log2(|e|/t)
    let q_bits = big_log2(ctx.q_big());
    let e_bits = big_log2(e).max(0.0);
    q_bits - 1.0 - e_bits
}
