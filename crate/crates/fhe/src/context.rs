//! Precomputed RNS machinery for one parameter set.
//!
//! Polynomials are flat `Vec<u64>` buffers laid out residue-major: residue `i`
//! occupies `[i*n, (i+1)*n)`. The ciphertext basis `Q` holds the `q` primes;
//! the auxiliary basis `P` exists only inside multiplication, where the exact
//! integer tensor product must be held before scaling by `t/q`.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};
use rand::{CryptoRng, Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::arith::{ntt_primes, Modulus};
use crate::error::{FheError, Result};
use crate::noise::NoiseModel;
use crate::ntt::NttTable;
use crate::params::SchemeParams;

/// Base of the key-switching digit decomposition.
pub const DIGIT_BITS: u32 = 32;

/// Bit size of the auxiliary primes.
const AUX_PRIME_BITS: u32 = 62;

pub struct Context {
    params: SchemeParams,
    hash: [u8; 32],
    n: usize,
    q: Vec<Modulus>,
    p: Vec<Modulus>,
    ntt: Vec<NttTable>,
    noise: NoiseModel,
    q_big: BigUint,
    qhat_big: Vec<BigUint>,

    // Q -> P extension
    qhat_inv: Vec<(u64, u64)>,
    qhat_mod_p: Vec<Vec<(u64, u64)>>,
    q_mod_p: Vec<(u64, u64)>,
    q_inv_f64: Vec<f64>,

    // QP -> Q scale-and-round by t/q
    mhat_inv: Vec<(u64, u64)>,
    m_inv_f64: Vec<f64>,
    scale_int: Vec<Vec<(u64, u64)>>,
    scale_frac: Vec<f64>,
    scale_p: Vec<Vec<(u64, u64)>>,
    tp_mod_q: Vec<(u64, u64)>,

    digits_per_prime: usize,
}

impl std::fmt::Debug for Context {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Context")
            .field("n", &self.n)
            .field("q", &self.params.q_primes)
            .field("p", &self.p.iter().map(|m| m.value()).collect::<Vec<_>>())
            .field("t", &self.params.t)
            .finish()
    }
}

fn big_mod(x: &BigUint, m: u64) -> u64 {
    (x % m).to_u64().expect("residue fits u64")
}

/// Residue of `x` modulo `m` with its Shoup companion.
fn big_mod_shoup(x: &BigUint, m: &Modulus) -> (u64, u64) {
    let r = big_mod(x, m.value());
    (r, m.shoup(r))
}

impl Context {
    pub fn new(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        let q: Vec<Modulus> = params.q_primes.iter().map(|&v| Modulus::new(v)).collect();
        let k = q.len();

        // P must hold |c| <= n*q^2/2 inside QP with wide margin so the
        // floating-point estimate of the CRT overflow is never ambiguous.
        let needed = params.log2_q() + (n as f64).log2() + 16.0;
        let mut p_primes = Vec::new();
        let mut p_bits = 0.0;
        while p_bits < needed {
            let next = ntt_primes(
                AUX_PRIME_BITS,
                p_primes.len() + 1,
                2 * n as u64,
                &params.q_primes,
            )
            .pop()
            .expect("prime");
            p_bits += (next as f64).log2();
            p_primes.push(next);
        }
        let p: Vec<Modulus> = p_primes.iter().map(|&v| Modulus::new(v)).collect();

        let mut ntt = Vec::with_capacity(k + p.len());
        for m in q.iter().chain(p.iter()) {
            ntt.push(NttTable::new(*m, n).ok_or_else(|| {
                FheError::InvalidParams(format!("{} is not NTT-friendly for n = {n}", m.value()))
            })?);
        }

        let q_big: BigUint = params.q_primes.iter().map(|&v| BigUint::from(v)).product();
        let p_big: BigUint = p_primes.iter().map(|&v| BigUint::from(v)).product();
        let qhat_big: Vec<BigUint> = params.q_primes.iter().map(|&v| &q_big / v).collect();

        let qhat_inv = q
            .iter()
            .zip(&qhat_big)
            .map(|(m, h)| {
                let inv = m.inv(big_mod(h, m.value()));
                (inv, m.shoup(inv))
            })
            .collect();
        let qhat_mod_p = p
            .iter()
            .map(|pj| qhat_big.iter().map(|h| big_mod_shoup(h, pj)).collect())
            .collect();
        let q_mod_p = p.iter().map(|pj| big_mod_shoup(&q_big, pj)).collect();
        let q_inv_f64 = q.iter().map(|m| 1.0 / m.value() as f64).collect();

        let m_big = &q_big * &p_big;
        let all: Vec<Modulus> = q.iter().chain(p.iter()).copied().collect();
        let mhat_inv = all
            .iter()
            .map(|m| {
                let h = &m_big / m.value();
                let inv = m.inv(big_mod(&h, m.value()));
                (inv, m.shoup(inv))
            })
            .collect();
        let m_inv_f64 = all.iter().map(|m| 1.0 / m.value() as f64).collect();

        let t = params.t;
        let tp = &p_big * t;
        let mut scale_frac = Vec::with_capacity(k);
        let mut int_parts = Vec::with_capacity(k);
        for qi in &q {
            let int = &tp / qi.value();
            let rem = big_mod(&tp, qi.value());
            scale_frac.push(rem as f64 / qi.value() as f64);
            int_parts.push(int);
        }
        let scale_int = q
            .iter()
            .map(|qk| int_parts.iter().map(|x| big_mod_shoup(x, qk)).collect())
            .collect();
        let scale_p = q
            .iter()
            .map(|qk| {
                p_primes
                    .iter()
                    .map(|&pj| big_mod_shoup(&(&p_big / pj * t), qk))
                    .collect()
            })
            .collect();
        let tp_mod_q = q.iter().map(|qk| big_mod_shoup(&tp, qk)).collect();

        let max_bits = q.iter().map(|m| m.bits()).max().unwrap_or(1);
        let digits_per_prime = max_bits.div_ceil(DIGIT_BITS) as usize;
        let noise = NoiseModel::new(&params, digits_per_prime * k);

        Ok(Self {
            hash: params.hash(),
            params,
            n,
            q,
            p,
            ntt,
            noise,
            q_big,
            qhat_big,
            qhat_inv,
            qhat_mod_p,
            q_mod_p,
            q_inv_f64,
            mhat_inv,
            m_inv_f64,
            scale_int,
            scale_frac,
            scale_p,
            tp_mod_q,
            digits_per_prime,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn params_hash(&self) -> &[u8; 32] {
        &self.hash
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> u64 {
        self.params.t
    }

    pub fn q_moduli(&self) -> &[Modulus] {
        &self.q
    }

    pub fn aux_moduli(&self) -> &[Modulus] {
        &self.p
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn q_big(&self) -> &BigUint {
        &self.q_big
    }

    /// Number of key-switching digits per ciphertext prime.
    pub fn digits_per_prime(&self) -> usize {
        self.digits_per_prime
    }

    pub fn relin_digits(&self) -> usize {
        self.digits_per_prime * self.q.len()
    }

    /// Length of a polynomial buffer over `Q`.
    pub fn q_len(&self) -> usize {
        self.n * self.q.len()
    }

    /// Length of a polynomial buffer over `Q ∪ P`.
    pub fn qp_len(&self) -> usize {
        self.n * (self.q.len() + self.p.len())
    }


    /// Forward transform of every residue in `poly`, which may span `Q` or `Q ∪ P`.
    pub fn forward(&self, poly: &mut [u64]) {
        for (chunk, table) in poly.chunks_exact_mut(self.n).zip(&self.ntt) {
            table.forward(chunk);
        }
    }

    pub fn inverse(&self, poly: &mut [u64]) {
        for (chunk, table) in poly.chunks_exact_mut(self.n).zip(&self.ntt) {
            table.inverse(chunk);
        }
    }

    /// Moduli covering a buffer of `len` coefficients.
    pub(crate) fn moduli_for(&self, len: usize) -> impl Iterator<Item = &Modulus> {
        self.q.iter().chain(self.p.iter()).take(len / self.n)
    }

    /// Residues of `round(q * m / t)`.
    pub fn encode_scaled(&self, m: u64) -> Vec<u64> {
        let t = self.params.t;
        let scaled = (&self.q_big * m + t / 2) / t;
        self.q.iter().map(|qi| big_mod(&scaled, qi.value())).collect()
    }

    /// Writes the `Q ∪ P` representation of a `Q` polynomial (coefficient
    /// domain) into `dst`, choosing the centered lift of each coefficient.
    pub fn extend_to_qp(&self, src: &[u64], dst: &mut [u64]) {
        let n = self.n;
        let k = self.q.len();
        debug_assert_eq!(src.len(), k * n);
        debug_assert_eq!(dst.len(), self.qp_len());
        dst[..k * n].copy_from_slice(src);
        let mut y = [0u64; 8];
        for c in 0..n {
            let mut frac = 0.0;
            for i in 0..k {
                let (w, ws) = self.qhat_inv[i];
                y[i] = self.q[i].mul_shoup(src[i * n + c], w, ws);
                frac += y[i] as f64 * self.q_inv_f64[i];
            }
            let v = frac.round() as u64;
            for (j, pj) in self.p.iter().enumerate() {
                let row = &self.qhat_mod_p[j];
                let mut acc = 0u64;
                for i in 0..k {
                    // Shoup products accept any 64-bit multiplicand
                    let (w, ws) = row[i];
                    acc = pj.add(acc, pj.mul_shoup(y[i], w, ws));
                }
                let (w, ws) = self.q_mod_p[j];
                dst[(k + j) * n + c] = pj.sub(acc, pj.mul_shoup(v, w, ws));
            }
        }
    }

    /// `round(t * x / q)` for `x` given over `Q ∪ P` in coefficient form,
    /// written over `Q`.
    pub fn scale_round(&self, src: &[u64], dst: &mut [u64]) {
        let n = self.n;
        let k = self.q.len();
        let l = self.p.len();
        debug_assert_eq!(src.len(), self.qp_len());
        debug_assert_eq!(dst.len(), k * n);
        let mut y = [0u64; 16];
        for c in 0..n {
            let mut overflow = 0.0;
            let mut frac = 0.0;
            for (m, modulus) in self.q.iter().chain(self.p.iter()).enumerate() {
                let (w, ws) = self.mhat_inv[m];
                y[m] = modulus.mul_shoup(src[m * n + c], w, ws);
                overflow += y[m] as f64 * self.m_inv_f64[m];
                if m < k {
                    frac += y[m] as f64 * self.scale_frac[m];
                }
            }
            let alpha = overflow.round() as u64;
            let rounded = frac.round() as u128;
            for (o, qo) in self.q.iter().enumerate() {
                let mut acc = qo.reduce_u128(rounded);
                let ints = &self.scale_int[o];
                for i in 0..k {
                    let (w, ws) = ints[i];
                    acc = qo.add(acc, qo.mul_shoup(y[i], w, ws));
                }
                let ps = &self.scale_p[o];
                for j in 0..l {
                    let (w, ws) = ps[j];
                    acc = qo.add(acc, qo.mul_shoup(y[k + j], w, ws));
                }
                let (w, ws) = self.tp_mod_q[o];
                dst[o * n + c] = qo.sub(acc, qo.mul_shoup(alpha, w, ws));
            }
        }
    }

    /// Splits a `Q` polynomial (coefficient form) into `relin_digits()`
    /// polynomials with coefficients below `2^32`, such that
    /// `x = sum_i sum_d digit[i][d] * (q/q_i) * 2^(32 d) mod q`.
    /// Digit order is prime-major. Each digit is returned over `Q` in NTT form.
    pub fn decompose(&self, src: &[u64]) -> Vec<Vec<u64>> {
        let n = self.n;
        let k = self.q.len();
        let mut out = Vec::with_capacity(self.relin_digits());
        let mask = (1u64 << DIGIT_BITS) - 1;
        let mut raw = vec![0u64; n];
        for i in 0..k {
            let (w, ws) = self.qhat_inv[i];
            for c in 0..n {
                raw[c] = self.q[i].mul_shoup(src[i * n + c], w, ws);
            }
            for d in 0..self.digits_per_prime {
                let shift = DIGIT_BITS * d as u32;
                let mut digit = vec![0u64; k * n];
                for r in 0..k {
                    let dst = &mut digit[r * n..(r + 1) * n];
                    for c in 0..n {
                        dst[c] = (raw[c] >> shift) & mask;
                    }
                }
                self.forward(&mut digit);
                out.push(digit);
            }
        }
        out
    }

    /// `(q/q_i) * 2^(32 d) mod q_r` for the key-switching gadget.
    pub(crate) fn gadget(&self, i: usize, d: usize, r: usize) -> u64 {
        if r != i {
            return 0;
        }
        let qi = &self.q[i];
        let h = big_mod(&self.qhat_big[i], qi.value());
        qi.mul(h, qi.pow(2, DIGIT_BITS as u64 * d as u64))
    }

    /// Centered integer value of a `Q` residue vector.
    pub fn crt_centered(&self, residues: &[u64]) -> BigInt {
        let mut acc = BigUint::zero();
        for (i, r) in residues.iter().enumerate() {
            let (w, ws) = self.qhat_inv[i];
            let y = self.q[i].mul_shoup(*r, w, ws);
            acc += &self.qhat_big[i] * y;
        }
        acc %= &self.q_big;
        let half = &self.q_big >> 1;
        if acc > half {
            BigInt::from_biguint(Sign::Minus, &self.q_big - acc)
        } else {
            BigInt::from_biguint(Sign::Plus, acc)
        }
    }

    /// Decodes a centered value `w ≈ q*m/t + e` into `(m mod t, |t*w - q*round(t*w/q)|)`.
    pub fn decode(&self, w: &BigInt) -> (u64, BigUint) {
        let t = BigInt::from(self.params.t);
        let q = BigInt::from_biguint(Sign::Plus, self.q_big.clone());
        let tw = w * &t;
        // round(tw / q) with floor semantics on the shifted value
        let half: BigInt = &q >> 1usize;
        let shifted: BigInt = &tw + half;
        let mut m: BigInt = &shifted / &q;
        if shifted.sign() == Sign::Minus && !(&shifted % &q).is_zero() {
            m -= BigInt::one();
        }
        let e = tw - &m * &q;
        let m_mod = ((m % &t) + &t) % &t;
        (
            m_mod.to_u64().expect("mod t fits"),
            e.magnitude().clone(),
        )
    }

    pub(crate) fn sample_ternary<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Vec<i8> {
        (0..self.n).map(|_| rng.gen_range(-1i8..=1)).collect()
    }

    pub(crate) fn sample_error<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Vec<i64> {
        let normal = Normal::new(0.0, self.params.sigma).expect("sigma validated");
        let cut = 8.0 * self.params.sigma;
        (0..self.n)
            .map(|_| loop {
                let x: f64 = normal.sample(rng);
                if x.abs() <= cut {
                    break x.round() as i64;
                }
            })
            .collect()
    }

    /// Uniform polynomial over `Q`; uniform in either domain.
    pub(crate) fn sample_uniform<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.q_len());
        for m in &self.q {
            for _ in 0..self.n {
                out.push(rng.gen_range(0..m.value()));
            }
        }
        out
    }

    /// Small signed coefficients embedded over `Q`.
    pub(crate) fn embed_small<T: Copy + Into<i64>>(&self, coeffs: &[T]) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.q_len());
        for m in &self.q {
            out.extend(coeffs.iter().map(|&c| m.reduce_i64(c.into())));
        }
        out
    }

    pub(crate) fn pointwise_mul(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let range = r * n..(r + 1) * n;
            for ((o, x), y) in out[range.clone()].iter_mut().zip(&a[range.clone()]).zip(&b[range]) {
                *o = m.mul(*x, *y);
            }
        }
    }

    pub(crate) fn pointwise_mul_acc(&self, a: &[u64], b: &[u64], acc: &mut [u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let range = r * n..(r + 1) * n;
            for ((o, x), y) in acc[range.clone()].iter_mut().zip(&a[range.clone()]).zip(&b[range]) {
                *o = m.add(*o, m.mul(*x, *y));
            }
        }
    }

    /// `acc += a * w` with `w` a fixed operand given with its Shoup companions.
    pub(crate) fn pointwise_mul_shoup_acc(&self, a: &[u64], w: &[u64], ws: &[u64], acc: &mut [u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let range = r * n..(r + 1) * n;
            for (((o, x), w), ws) in acc[range.clone()]
                .iter_mut()
                .zip(&a[range.clone()])
                .zip(&w[range.clone()])
                .zip(&ws[range])
            {
                *o = m.add(*o, m.mul_shoup(*x, *w, *ws));
            }
        }
    }

    /// Shoup companions of a fixed polynomial.
    pub(crate) fn shoup_companions(&self, w: &[u64]) -> Vec<u64> {
        let n = self.n;
        let mut out = Vec::with_capacity(w.len());
        for (r, m) in self.moduli_for(w.len()).enumerate() {
            out.extend(w[r * n..(r + 1) * n].iter().map(|&x| m.shoup(x)));
        }
        out
    }

    pub(crate) fn add_assign(&self, a: &mut [u64], b: &[u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let range = r * n..(r + 1) * n;
            for (x, y) in a[range.clone()].iter_mut().zip(&b[range]) {
                *x = m.add(*x, *y);
            }
        }
    }

    pub(crate) fn sub_assign(&self, a: &mut [u64], b: &[u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let range = r * n..(r + 1) * n;
            for (x, y) in a[range.clone()].iter_mut().zip(&b[range]) {
                *x = m.sub(*x, *y);
            }
        }
    }

    pub(crate) fn neg_assign(&self, a: &mut [u64]) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            for x in a[r * n..(r + 1) * n].iter_mut() {
                *x = m.neg(*x);
            }
        }
    }

    /// Multiplies every coefficient by a signed scalar.
    pub(crate) fn scalar_mul_assign(&self, a: &mut [u64], scalar: i64) {
        let n = self.n;
        for (r, m) in self.moduli_for(a.len()).enumerate() {
            let s = m.reduce_i64(scalar);
            let ss = m.shoup(s);
            for x in a[r * n..(r + 1) * n].iter_mut() {
                *x = m.mul_shoup(*x, s, ss);
            }
        }
    }

}
