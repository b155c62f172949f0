//! Exact arithmetic in negacyclic rings `Z_m[X]/(X^d + 1)`.
//!
//! `d` is always a power of two, so `X^d + 1` is the `2d`-th cyclotomic
//! polynomial. Coefficients are stored fully reduced in `[0, m)` with
//! `m < 2^62`, which keeps every intermediate product inside `u128`.
//!
//! Multiplication has two routes. [`RingElement::mul_schoolbook`] is the
//! direct negacyclic convolution and serves as the reference. For larger
//! degrees [`NttPlan`] multiplies through three word-sized NTT primes and
//! reconstructs the exact integer convolution before reducing mod `m`, so it
//! agrees with the schoolbook route bit for bit.

mod ntt;
mod sample;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{add_mod, center, mul_mod, reduce_signed, sub_mod};

pub use ntt::NttPlan;
pub(crate) use sample::standard_normal;
pub use sample::{sample, sample_gaussian, sample_ternary, sample_uniform, SamplerSpec};

/// Largest modulus accepted by [`RingParams`] (exclusive).
pub const MAX_MODULUS: u64 = 1 << 62;

/// Degrees at or below this use the schoolbook product when no plan is given.
pub const SCHOOLBOOK_MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingError {
    /// Degree is not a power of two, modulus is even, too large, or below 3.
    InvalidParams {
        degree: usize,
        modulus: u64,
    },
    /// Operands live in different rings.
    RingMismatch {
        left: RingParams,
        right: RingParams,
    },
    /// A coefficient vector has the wrong length.
    DimensionError {
        expected: usize,
        found: usize,
    },
    InvalidSamplerSpec(&'static str),
}

impl fmt::Display for RingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingError::InvalidParams { degree, modulus } => write!(
                f,
                "invalid ring parameters: degree {degree} must be a power of two and modulus {modulus} odd, >= 3 and < 2^62"
            ),
            RingError::RingMismatch { left, right } => write!(
                f,
                "ring mismatch: (d={}, m={}) vs (d={}, m={})",
                left.degree(),
                left.modulus(),
                right.degree(),
                right.modulus()
            ),
            RingError::DimensionError { expected, found } => {
                write!(f, "expected {expected} coefficients, found {found}")
            }
            RingError::InvalidSamplerSpec(why) => write!(f, "invalid sampler spec: {why}"),
        }
    }
}

impl core::error::Error for RingError {}

/// Degree and modulus of a negacyclic ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingParams {
    degree: usize,
    modulus: u64,
}

impl RingParams {
    pub fn new(degree: usize, modulus: u64) -> Result<Self, RingError> {
        let ok =
            degree.is_power_of_two() && modulus % 2 == 1 && (3..MAX_MODULUS).contains(&modulus);
        if !ok {
            return Err(RingError::InvalidParams { degree, modulus });
        }
        Ok(RingParams { degree, modulus })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Same degree, different modulus.
    pub fn with_modulus(&self, modulus: u64) -> Result<Self, RingError> {
        RingParams::new(self.degree, modulus)
    }
}

/// Which ring operation [`ring_arith`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// An element of `Z_m[X]/(X^d + 1)` in coefficient representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingElement {
    params: RingParams,
    coeffs: Vec<u64>,
}

impl RingElement {
    pub fn zero(params: RingParams) -> Self {
        RingElement {
            params,
            coeffs: vec![0; params.degree],
        }
    }

    pub fn one(params: RingParams) -> Self {
        let mut e = RingElement::zero(params);
        e.coeffs[0] = 1;
        e
    }

    /// The monomial `X^k`, with `k < d`.
    pub fn monomial(params: RingParams, k: usize) -> Self {
        let mut e = RingElement::zero(params);
        e.coeffs[k] = 1;
        e
    }

    /// Build from unsigned coefficients, reducing each mod `m`.
    pub fn from_coeffs(params: RingParams, coeffs: Vec<u64>) -> Result<Self, RingError> {
        if coeffs.len() != params.degree {
            return Err(RingError::DimensionError {
                expected: params.degree,
                found: coeffs.len(),
            });
        }
        let m = params.modulus;
        let coeffs = coeffs.into_iter().map(|c| c % m).collect();
        Ok(RingElement { params, coeffs })
    }

    /// The `Z^d -> R` map: signed integers reduced into `[0, m)`.
    pub fn from_signed(params: RingParams, coeffs: &[i64]) -> Result<Self, RingError> {
        if coeffs.len() != params.degree {
            return Err(RingError::DimensionError {
                expected: params.degree,
                found: coeffs.len(),
            });
        }
        let m = params.modulus;
        Ok(RingElement {
            params,
            coeffs: coeffs.iter().map(|&c| reduce_signed(c, m)).collect(),
        })
    }

    pub fn params(&self) -> RingParams {
        self.params
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    /// The `R -> Z^d` map with centered representatives in `(-m/2, m/2]`.
    pub fn to_centered(&self) -> Vec<i64> {
        let m = self.params.modulus;
        self.coeffs.iter().map(|&c| center(c, m)).collect()
    }

    /// Infinity norm of the centered representative.
    pub fn inf_norm(&self) -> u64 {
        self.to_centered()
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    fn check_same(&self, other: &RingElement) -> Result<(), RingError> {
        if self.params != other.params {
            return Err(RingError::RingMismatch {
                left: self.params,
                right: other.params,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElement) -> Result<RingElement, RingError> {
        self.check_same(other)?;
        let m = self.params.modulus;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| add_mod(a, b, m))
            .collect();
        Ok(RingElement {
            params: self.params,
            coeffs,
        })
    }

    pub fn sub(&self, other: &RingElement) -> Result<RingElement, RingError> {
        self.check_same(other)?;
        let m = self.params.modulus;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| sub_mod(a, b, m))
            .collect();
        Ok(RingElement {
            params: self.params,
            coeffs,
        })
    }

    pub fn neg(&self) -> RingElement {
        let m = self.params.modulus;
        RingElement {
            params: self.params,
            coeffs: self.coeffs.iter().map(|&a| sub_mod(0, a, m)).collect(),
        }
    }

    /// Multiply every coefficient by a scalar.
    pub fn scale(&self, k: u64) -> RingElement {
        let m = self.params.modulus;
        let k = k % m;
        RingElement {
            params: self.params,
            coeffs: self.coeffs.iter().map(|&a| mul_mod(a, k, m)).collect(),
        }
    }

    /// Ring product. Small degrees use the schoolbook route; larger ones
    /// build a transient [`NttPlan`]. Hot loops should hold a plan and call
    /// [`RingElement::mul_with`].
    pub fn mul(&self, other: &RingElement) -> Result<RingElement, RingError> {
        self.check_same(other)?;
        if self.params.degree <= SCHOOLBOOK_MAX_DEGREE {
            return self.mul_schoolbook(other);
        }
        match NttPlan::new(self.params.degree) {
            Some(plan) => self.mul_with(other, &plan),
            None => self.mul_schoolbook(other),
        }
    }

    /// Ring product through a precomputed transform plan.
    pub fn mul_with(&self, other: &RingElement, plan: &NttPlan) -> Result<RingElement, RingError> {
        self.check_same(other)?;
        if plan.degree() != self.params.degree {
            return Err(RingError::DimensionError {
                expected: self.params.degree,
                found: plan.degree(),
            });
        }
        let coeffs = plan.negacyclic_mul(&self.coeffs, &other.coeffs, self.params.modulus);
        Ok(RingElement {
            params: self.params,
            coeffs,
        })
    }

    /// Direct negacyclic convolution: `X^d = -1`, so every product term with
    /// `i + j >= d` wraps to index `i + j - d` with a minus sign.
    pub fn mul_schoolbook(&self, other: &RingElement) -> Result<RingElement, RingError> {
        self.check_same(other)?;
        let d = self.params.degree;
        let m = self.params.modulus;
        // Each reduced product is < 2^62; sums of up to d terms fit in u128.
        let mut pos = vec![0u128; d];
        let mut neg = vec![0u128; d];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let t = mul_mod(a, b, m) as u128;
                let k = i + j;
                if k < d {
                    pos[k] += t;
                } else {
                    neg[k - d] += t;
                }
            }
        }
        let m128 = m as u128;
        let coeffs = pos
            .iter()
            .zip(&neg)
            .map(|(&p, &n)| sub_mod((p % m128) as u64, (n % m128) as u64, m))
            .collect();
        Ok(RingElement {
            params: self.params,
            coeffs,
        })
    }
}

/// `add`, `sub` or `mul` of two elements of the same ring.
pub fn ring_arith(a: &RingElement, b: &RingElement, op: ArithOp) -> Result<RingElement, RingError> {
    match op {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
    }
}

/// Integer vector to ring element (`Z^d -> R_m`).
pub fn to_ring(x: &[i64], params: RingParams) -> Result<RingElement, RingError> {
    RingElement::from_signed(params, x)
}

/// Ring element to its coefficient vector in `[0, m)` (`R_m -> Z^d`).
pub fn to_vec(x: &RingElement) -> Vec<u64> {
    x.coeffs.clone()
}
