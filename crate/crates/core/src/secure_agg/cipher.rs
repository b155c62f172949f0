use alloc::vec::Vec;

use rand::Rng;

use super::{CryptoContext, CryptoError, EvaluatorSecret, PublicKey};
use crate::math::{center, reduce_signed};
use crate::polyring::{sample_gaussian, sample_ternary, RingElement};

/// BGV-style ciphertext `(c0, c1)` with `c0 - s c1 = m + q * small`.
///
/// `noise` is a tracked upper bound on `|c0 - s c1|` (centered), not a
/// measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalCiphertext {
    pub c0: RingElement,
    pub c1: RingElement,
    pub noise: f64,
}

impl InternalCiphertext {
    /// Componentwise sum; noise bounds add.
    pub fn add(&self, other: &InternalCiphertext) -> Result<InternalCiphertext, CryptoError> {
        Ok(InternalCiphertext {
            c0: self.c0.add(&other.c0)?,
            c1: self.c1.add(&other.c1)?,
            noise: self.noise + other.noise,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.c0.params().modulus()
    }
}

/// Encrypt a plaintext of exactly `d` centered residues mod `q`.
pub fn encrypt_internal<R: Rng + ?Sized>(
    m: &[i64],
    pk: &PublicKey,
    ctx: &CryptoContext,
    rng: &mut R,
) -> Result<InternalCiphertext, CryptoError> {
    let params = ctx.params();
    let d = params.degree();
    if m.len() != d {
        return Err(CryptoError::DimensionError {
            expected: d,
            found: m.len(),
        });
    }
    let ring = params.internal();
    let q = params.plaintext_modulus();
    let v = RingElement::from_signed(ring, &sample_ternary(d, rng))?;
    let e0 = RingElement::from_signed(ring, &sample_gaussian(d, params.sigma(), rng))?;
    let e1 = RingElement::from_signed(ring, &sample_gaussian(d, params.sigma(), rng))?;
    let reduced: Vec<i64> = m.iter().map(|&x| center(reduce_signed(x, q), q)).collect();
    let plain = RingElement::from_signed(ring, &reduced)?;
    let plan = ctx.internal_plan();
    let c0 = pk.b.mul_with(&v, plan)?.add(&e0.scale(q))?.add(&plain)?;
    let c1 = pk.a.mul_with(&v, plan)?.add(&e1.scale(q))?;
    Ok(InternalCiphertext {
        c0,
        c1,
        noise: params.fresh_noise_bound(),
    })
}

/// `c0 - s c1` as centered integers in the ciphertext's modulus.
fn phase(
    ct: &InternalCiphertext,
    sk: &EvaluatorSecret,
    ctx: &CryptoContext,
) -> Result<Vec<i64>, CryptoError> {
    let s = sk.lifted(ct.c0.params())?;
    Ok(ct
        .c0
        .sub(&s.mul_with(&ct.c1, ctx.internal_plan())?)?
        .to_centered())
}

/// Largest centered coefficient of `c0 - s c1`.
pub fn measured_noise(
    ct: &InternalCiphertext,
    sk: &EvaluatorSecret,
    ctx: &CryptoContext,
) -> Result<f64, CryptoError> {
    Ok(phase(ct, sk, ctx)?
        .iter()
        .map(|x| x.unsigned_abs())
        .max()
        .unwrap_or(0) as f64)
}

/// Switch a ciphertext from `p1` down to `p0`.
///
/// Each centered coefficient `c` becomes `t + delta` with `t = round(c / p)`
/// and `delta` the centered residue of `c - t` mod `q`, so the result stays
/// congruent to `c` mod `q` while shrinking by a factor `p`.
pub fn modulus_switch(
    ct: &InternalCiphertext,
    ctx: &CryptoContext,
) -> Result<InternalCiphertext, CryptoError> {
    let params = ctx.params();
    let p1 = params.p1();
    if ct.modulus() != p1 {
        return Err(CryptoError::ParamError(
            "ciphertext is not in the p1 ring".into(),
        ));
    }
    if ct.noise >= p1 as f64 / 2.0 {
        return Err(CryptoError::NoiseOverflow {
            noise: ct.noise,
            limit: p1 as f64 / 2.0,
        });
    }
    let noise = params.switched_noise_bound(ct.noise);
    let limit = params.p0() as f64 / 2.0;
    if noise >= limit {
        return Err(CryptoError::NoiseOverflow { noise, limit });
    }
    let p = params.p() as i128;
    let q = params.plaintext_modulus();
    let p0 = params.p0();
    let switch = |x: &RingElement| -> Result<RingElement, CryptoError> {
        let coeffs: Vec<u64> = x
            .to_centered()
            .into_iter()
            .map(|c| {
                let c = c as i128;
                let t = (2 * c + p).div_euclid(2 * p);
                let delta = center(((c - t).rem_euclid(q as i128)) as u64, q) as i128;
                reduce_signed((t + delta) as i64, p0)
            })
            .collect();
        Ok(RingElement::from_coeffs(params.switched(), coeffs)?)
    };
    Ok(InternalCiphertext {
        c0: switch(&ct.c0)?,
        c1: switch(&ct.c1)?,
        noise,
    })
}

/// Decrypt to centered residues mod `q`.
///
/// Fails with `NoiseOverflow` when the tracked bound reaches half the modulus
/// or when the measured phase exceeds the tracked bound, which means the
/// ciphertext was not produced by the honest pipeline.
pub fn decrypt_sum(
    ct: &InternalCiphertext,
    sk: &EvaluatorSecret,
    ctx: &CryptoContext,
) -> Result<Vec<i64>, CryptoError> {
    let limit = ct.modulus() as f64 / 2.0;
    if ct.noise >= limit {
        return Err(CryptoError::NoiseOverflow {
            noise: ct.noise,
            limit,
        });
    }
    let x = phase(ct, sk, ctx)?;
    let measured = x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64;
    if measured > ct.noise {
        return Err(CryptoError::NoiseOverflow {
            noise: measured,
            limit: ct.noise,
        });
    }
    let q = ctx.params().plaintext_modulus();
    Ok(x.into_iter()
        .map(|v| center(reduce_signed(v, q), q))
        .collect())
}
