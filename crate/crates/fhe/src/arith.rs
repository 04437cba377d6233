//! Word-sized modular arithmetic and NTT-friendly prime search.

/// A prime modulus below 2^62 with precomputed Barrett constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    mu: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value >= 2, "modulus must be at least 2");
        assert!(value < (1u64 << 62), "modulus must be below 2^62");
        let bits = 64 - value.leading_zeros();
        let mu = ((1u128 << (2 * bits)) / value as u128) as u64;
        Self { value, bits, mu }
    }

    #[inline(always)]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline(always)]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces `x < value^2`.
    #[inline(always)]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = (((x >> (self.bits - 1)) * self.mu as u128) >> (self.bits + 1)) as u64;
        let r = (x as u64).wrapping_sub(q.wrapping_mul(self.value));
        let r = r.min(r.wrapping_sub(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    #[inline(always)]
    pub fn reduce(&self, x: u64) -> u64 {
        if self.bits >= 32 {
            self.reduce_u128(x as u128)
        } else {
            x % self.value
        }
    }

    /// Maps a signed integer into `[0, value)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = x.rem_euclid(self.value as i64);
        r as u64
    }

    /// Maps a signed 128-bit integer into `[0, value)`.
    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // min() of the two candidates compiles to a conditional move
        let s = a + b;
        s.min(s.wrapping_sub(self.value))
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; the modulus must be prime and `a` nonzero.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(self.reduce(a) != 0);
        self.pow(a, self.value - 2)
    }

    /// Shoup companion `floor(w * 2^64 / p)` for a fixed multiplicand `w < p`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline(always)]
    pub fn mul_shoup(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((x as u128 * w_shoup as u128) >> 64) as u64;
        let r = w.wrapping_mul(x).wrapping_sub(q.wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    /// Centered representative in `(-p/2, p/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u64(r, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes below `2^bits` congruent to 1 modulo `step`,
/// skipping anything in `exclude`. Returned in descending order.
pub fn ntt_primes(bits: u32, count: usize, step: u64, exclude: &[u64]) -> Vec<u64> {
    assert!((2..=62).contains(&bits));
    let mut out = Vec::with_capacity(count);
    let top = 1u64 << bits;
    let mut candidate = ((top - 1) / step) * step + 1;
    if candidate >= top {
        candidate -= step;
    }
    while out.len() < count {
        assert!(candidate > step, "ran out of NTT primes of {bits} bits");
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

/// A primitive `order`-th root of unity modulo prime `p`, where `order | p - 1`
/// and `order` is a power of two.
pub fn primitive_root_of_unity(p: &Modulus, order: u64) -> Option<u64> {
    let pv = p.value();
    if (pv - 1) % order != 0 {
        return None;
    }
    let cofactor = (pv - 1) / order;
    for g in 2..pv.min(10_000) {
        let w = p.pow(g, cofactor);
        if p.pow(w, order / 2) == pv - 1 {
            return Some(w);
        }
    }
    None
}
