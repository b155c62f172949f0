//! The three sampling subroutines used by key generation and encryption.
//!
//! * ternary: entries in `{-1, 0, 1}` with probabilities `1/4, 1/2, 1/4`
//! * gaussian: rounded continuous Gaussian, mean 0, tails beyond `6 sigma` rejected
//! * uniform: entries uniform in `[0, modulus)`

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::RingError;
use crate::math;

/// Which distribution to draw from and how many values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerSpec {
    Ternary { n: usize },
    Gaussian { n: usize, sigma: f64 },
    Uniform { n: usize, modulus: u64 },
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<(), RingError> {
        match *self {
            SamplerSpec::Gaussian { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                RingError::InvalidSamplerSpec("sigma must be positive and finite"),
            ),
            SamplerSpec::Uniform { modulus, .. } if modulus < 2 => {
                Err(RingError::InvalidSamplerSpec("modulus must be at least 2"))
            }
            _ => Ok(()),
        }
    }
}

/// Draw according to `spec`. Results are signed; uniform draws are in `[0, modulus)`.
pub fn sample<R: Rng + ?Sized>(spec: SamplerSpec, rng: &mut R) -> Result<Vec<i64>, RingError> {
    spec.validate()?;
    Ok(match spec {
        SamplerSpec::Ternary { n } => sample_ternary(n, rng),
        SamplerSpec::Gaussian { n, sigma } => sample_gaussian(n, sigma, rng),
        SamplerSpec::Uniform { n, modulus } => sample_uniform(n, modulus, rng)
            .into_iter()
            .map(|x| x as i64)
            .collect(),
    })
}

/// Two fair bits per draw: `00 -> -1`, `11 -> 1`, otherwise `0`.
pub fn sample_ternary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    let mut out = Vec::with_capacity(n);
    let mut word = 0u64;
    let mut left = 0;
    for _ in 0..n {
        if left == 0 {
            word = rng.next_u64();
            left = 32;
        }
        out.push(match word & 3 {
            0 => -1,
            3 => 1,
            _ => 0,
        });
        word >>= 2;
        left -= 1;
    }
    out
}

fn gaussian_one<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> i64 {
    let bound = 6.0 * sigma;
    loop {
        // Box-Muller; 1 - u keeps the logarithm argument in (0, 1].
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let z = math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * PI * u2);
        let x = math::round(z * sigma);
        if x.abs() <= bound {
            return x as i64;
        }
    }
}

/// Rounded Gaussian draws; `|x| <= 6 sigma` always holds.
pub fn sample_gaussian<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| gaussian_one(sigma, rng)).collect()
}

pub fn sample_uniform<R: Rng + ?Sized>(n: usize, modulus: u64, rng: &mut R) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..modulus)).collect()
}

/// Standard normal draw, shared with the synthetic data generator.
pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * PI * u2)
}
