//! Negacyclic number-theoretic transform over `Z_p[X]/(X^n + 1)`.

use crate::arith::{primitive_root_of_unity, Modulus};

/// Precomputed twiddles for one prime and one ring dimension.
#[derive(Clone, Debug)]
pub struct NttTable {
    n: usize,
    modulus: Modulus,
    // psi^bitrev(i) and its Shoup companion
    fwd: Vec<(u64, u64)>,
    // psi^-bitrev(i)
    inv: Vec<(u64, u64)>,
    n_inv: (u64, u64),
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    /// Returns `None` when `p` is not congruent to 1 modulo `2n`.
    pub fn new(modulus: Modulus, n: usize) -> Option<Self> {
        assert!(n.is_power_of_two() && n >= 2);
        let psi = primitive_root_of_unity(&modulus, 2 * n as u64)?;
        let psi_inv = modulus.inv(psi);
        let log_n = n.trailing_zeros();
        let mut fwd = Vec::with_capacity(n);
        let mut inv = Vec::with_capacity(n);
        for i in 0..n {
            let e = bit_reverse(i, log_n) as u64;
            let w = modulus.pow(psi, e);
            let wi = modulus.pow(psi_inv, e);
            fwd.push((w, modulus.shoup(w)));
            inv.push((wi, modulus.shoup(wi)));
        }
        let ni = modulus.inv(n as u64 % modulus.value());
        Some(Self {
            n,
            modulus,
            fwd,
            inv,
            n_inv: (ni, modulus.shoup(ni)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// In-place forward transform; input in standard order, output bit-reversed.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_ = &self.modulus;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let (w, ws) = self.fwd[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = m_.mul_shoup(*y, w, ws);
                    *x = m_.add(u, v);
                    *y = m_.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse transform; input bit-reversed, output in standard order.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_ = &self.modulus;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let (w, ws) = self.inv[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = m_.add(u, v);
                    *y = m_.mul_shoup(m_.sub(u, v), w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        let (ni, nis) = self.n_inv;
        for x in a.iter_mut() {
            *x = m_.mul_shoup(*x, ni, nis);
        }
    }

    /// Negacyclic product via forward transforms, pointwise product and inverse.
    pub fn multiply(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = self.modulus.mul(*x, *y);
        }
        self.inverse(&mut fa);
        fa
    }
}

/// Schoolbook negacyclic product, `O(n^2)`. Kept as the reference path.
pub fn schoolbook_negacyclic(a: &[u64], b: &[u64], modulus: &Modulus) -> Vec<u64> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut out = vec![0u64; n];
    for i in 0..n {
        if a[i] == 0 {
            continue;
        }
        for j in 0..n {
            let prod = modulus.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = modulus.add(out[k], prod);
            } else {
                out[k - n] = modulus.sub(out[k - n], prod);
            }
        }
    }
    out
}
