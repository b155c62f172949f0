//! Exact negacyclic multiplication through three NTT primes.
//!
//! The integer negacyclic convolution of two vectors with entries below
//! `2^62` is bounded by `d * 2^124 < 2^143` for `d <= 2^19`. The three primes
//! below have product close to `2^186`, so the convolution is recovered
//! exactly (sign included) by Garner reconstruction and then reduced modulo
//! the ring modulus. No assumption is made about the ring modulus itself.

use alloc::vec::Vec;

use crate::math::{add_mod, inv_mod, mul_mod, pow_mod, sub_mod};

/// `(prime, generator of the multiplicative group)`; each prime is `1 mod 2^20`.
const PRIMES: [(u64, u64); 3] = [
    (0x3fff_ffff_feb0_0001, 3),
    (0x3fff_ffff_fa00_0001, 3),
    (0x3fff_ffff_f9f0_0001, 5),
];

/// Largest degree supported by the transform route.
pub const MAX_NTT_DEGREE: usize = 1 << 19;

/// Precomputed twiddle factors for one prime and degree.
#[derive(Debug, Clone)]
struct PrimeTables {
    p: u64,
    /// `psi^bitrev(k)` and its Shoup companion.
    fwd: Vec<(u64, u64)>,
    /// `psi^-bitrev(k)` and its Shoup companion.
    inv: Vec<(u64, u64)>,
    /// `d^-1 mod p` with Shoup companion.
    d_inv: (u64, u64),
    /// `floor(2^124 / p)` for Barrett reduction.
    mu: u64,
}

#[inline]
fn shoup(w: u64, p: u64) -> (u64, u64) {
    (w, (((w as u128) << 64) / p as u128) as u64)
}

/// `x * w mod p` for `x < 2^64`, result in `[0, p)`.
#[inline]
fn mul_shoup(x: u64, (w, w_shoup): (u64, u64), p: u64) -> u64 {
    let q = ((x as u128 * w_shoup as u128) >> 64) as u64;
    let r = x.wrapping_mul(w).wrapping_sub(q.wrapping_mul(p));
    if r >= p {
        r - p
    } else {
        r
    }
}

/// `x * y mod p` for `x, y < p` and `2^60 < p < 2^62`, via Barrett reduction.
#[inline]
fn mul_barrett(x: u64, y: u64, p: u64, mu: u64) -> u64 {
    let z = x as u128 * y as u128;
    let q = (((z >> 60) as u64 as u128 * mu as u128) >> 64) as u64;
    let mut r = (z as u64).wrapping_sub(q.wrapping_mul(p));
    while r >= p {
        r -= p;
    }
    r
}

/// `x * w mod p` left in `[0, 2p)`, for any `x < 2^64`.
#[inline]
fn mul_shoup_lazy(x: u64, (w, w_shoup): (u64, u64), p: u64) -> u64 {
    let q = ((x as u128 * w_shoup as u128) >> 64) as u64;
    x.wrapping_mul(w).wrapping_sub(q.wrapping_mul(p))
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl PrimeTables {
    fn new(p: u64, g: u64, d: usize) -> Self {
        let bits = d.trailing_zeros();
        let psi = pow_mod(g, (p - 1) / (2 * d as u64), p);
        let psi_inv = inv_mod(psi, p).expect("prime modulus");
        let mut pow = Vec::with_capacity(d);
        let mut pow_inv = Vec::with_capacity(d);
        let (mut x, mut y) = (1u64, 1u64);
        for _ in 0..d {
            pow.push(x);
            pow_inv.push(y);
            x = mul_mod(x, psi, p);
            y = mul_mod(y, psi_inv, p);
        }
        let fwd = (0..d)
            .map(|k| shoup(pow[bit_reverse(k, bits)], p))
            .collect();
        let inv = (0..d)
            .map(|k| shoup(pow_inv[bit_reverse(k, bits)], p))
            .collect();
        let d_inv = shoup(inv_mod(d as u64 % p, p).expect("prime modulus"), p);
        let mu = ((1u128 << 124) / p as u128) as u64;
        PrimeTables {
            p,
            fwd,
            inv,
            d_inv,
            mu,
        }
    }

    /// In-place forward negacyclic transform (Cooley-Tukey, bit-reversed
    /// output). Values are kept lazily in `[0, 4p)` between stages (Harvey's
    /// butterfly, valid since `4p < 2^64`) and fully reduced at the end.
    fn forward(&self, a: &mut [u64]) {
        let p = self.p;
        let two_p = 2 * p;
        let n = a.len();
        let mut t = n;
        let mut m = 1;
        while m < n {
            t /= 2;
            for (block, &s) in a.chunks_exact_mut(2 * t).zip(&self.fwd[m..2 * m]) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_p {
                        u -= two_p;
                    }
                    let v = mul_shoup_lazy(*y, s, p);
                    *x = u + v;
                    *y = u + two_p - v;
                }
            }
            m *= 2;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_p {
                v -= two_p;
            }
            if v >= p {
                v -= p;
            }
            *x = v;
        }
    }

    /// In-place inverse transform (Gentleman-Sande), including the `1/d`
    /// factor. Inputs in `[0, p)`; intermediate values stay in `[0, 2p)`.
    fn inverse(&self, a: &mut [u64]) {
        let p = self.p;
        let two_p = 2 * p;
        let n = a.len();
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m / 2;
            for (block, &s) in a.chunks_exact_mut(2 * t).zip(&self.inv[h..m]) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*x, *y);
                    let mut sum = u + v;
                    if sum >= two_p {
                        sum -= two_p;
                    }
                    *x = sum;
                    *y = mul_shoup_lazy(u + two_p - v, s, p);
                }
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.d_inv, p);
        }
    }

    fn convolve(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let p = self.p;
        let mut fa: Vec<u64> = a.iter().map(|&x| x % p).collect();
        let mut fb: Vec<u64> = b.iter().map(|&x| x % p).collect();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for (x, &y) in fa.iter_mut().zip(&fb) {
            *x = mul_barrett(*x, y, p, self.mu);
        }
        self.inverse(&mut fa);
        fa
    }
}

/// Transform tables for one degree, reusable across moduli.
#[derive(Debug, Clone)]
pub struct NttPlan {
    degree: usize,
    tables: [PrimeTables; 3],
}

impl NttPlan {
    /// `None` when `degree` is not a power of two or exceeds [`MAX_NTT_DEGREE`].
    pub fn new(degree: usize) -> Option<Self> {
        if !degree.is_power_of_two() || degree > MAX_NTT_DEGREE {
            return None;
        }
        let tables = PRIMES.map(|(p, g)| PrimeTables::new(p, g, degree));
        Some(NttPlan { degree, tables })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Negacyclic product of two coefficient vectors with entries in `[0, m)`.
    pub(crate) fn negacyclic_mul(&self, a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
        let [t1, t2, t3] = &self.tables;
        let r1 = t1.convolve(a, b);
        let r2 = t2.convolve(a, b);
        let r3 = t3.convolve(a, b);
        let crt = Garner::new(m);
        r1.iter()
            .zip(&r2)
            .zip(&r3)
            .map(|((&x1, &x2), &x3)| crt.reconstruct(x1, x2, x3))
            .collect()
    }
}

/// Mixed-radix reconstruction from residues modulo the three primes.
///
/// Every multiplier is a per-modulus constant, so all products use Shoup
/// companions.
struct Garner {
    m: u64,
    p1_inv_mod_p2: (u64, u64),
    p1p2_inv_mod_p3: (u64, u64),
    p1_mod_p3: (u64, u64),
    p1_mod_m: (u64, u64),
    p1p2_mod_m: (u64, u64),
    full_mod_m: u64,
}

impl Garner {
    fn new(m: u64) -> Self {
        let [(p1, _), (p2, _), (p3, _)] = PRIMES;
        let p1p2_mod_p3 = mul_mod(p1 % p3, p2 % p3, p3);
        let p1p2_mod_m = mul_mod(p1 % m, p2 % m, m);
        Garner {
            m,
            p1_inv_mod_p2: shoup(inv_mod(p1 % p2, p2).unwrap(), p2),
            p1p2_inv_mod_p3: shoup(inv_mod(p1p2_mod_p3, p3).unwrap(), p3),
            p1_mod_p3: shoup(p1 % p3, p3),
            p1_mod_m: shoup(p1 % m, m),
            p1p2_mod_m: shoup(p1p2_mod_m, m),
            full_mod_m: mul_mod(p1p2_mod_m, p3 % m, m),
        }
    }

    #[inline]
    fn reconstruct(&self, r1: u64, r2: u64, r3: u64) -> u64 {
        let [_, (p2, _), (p3, _)] = PRIMES;
        let m = self.m;
        // value = x1 + x2*P1 + x3*P1*P2 with x_i < P_i
        let x1 = r1;
        let x2 = mul_shoup(sub_mod(r2, x1 % p2, p2), self.p1_inv_mod_p2, p2);
        let partial = add_mod(x1 % p3, mul_shoup(x2, self.p1_mod_p3, p3), p3);
        let x3 = mul_shoup(sub_mod(r3, partial, p3), self.p1p2_inv_mod_p3, p3);
        let value = add_mod(
            add_mod(x1 % m, mul_shoup(x2, self.p1_mod_m, m), m),
            mul_shoup(x3, self.p1p2_mod_m, m),
            m,
        );
        // |true value| < 2^143, far below P1*P2*P3 / 2, so a top digit in the
        // upper half of [0, P3) means the convolution was negative.
        if x3 > p3 / 2 {
            sub_mod(value, self.full_mod_m, m)
        } else {
            value
        }
    }
}
