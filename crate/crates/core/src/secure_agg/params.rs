use alloc::format;
use sha2::{Digest, Sha256};

use super::CryptoError;
use crate::math::{gcd, is_prime, next_prime_congruent_one};
use crate::polyring::{NttPlan, RingParams, MAX_MODULUS};

/// Parameters of the two-ring aggregation scheme.
///
/// The internal ring `Z_p1[X]/(X^d + 1)` carries BGV-style ciphertexts of
/// plaintexts mod `q`. The external ring `Z_p1[X]/(X^d' + 1)` carries the
/// masked gadget digits of those ciphertexts. `p1 = p * p0`; ciphertexts are
/// switched down to `p0` before decryption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CryptoParams {
    internal: RingParams,
    external: RingParams,
    switched: RingParams,
    q: u64,
    p: u64,
    p0: u64,
    sigma: f64,
    gadget_base: u64,
    gadget_len: usize,
}

/// Inputs for [`CryptoParams::derive`], which searches for suitable primes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRequest {
    pub degree: usize,
    /// `None` sizes the external ring to the smallest power of two holding `2 d l` digits.
    pub external_degree: Option<usize>,
    pub plaintext_modulus: u64,
    pub sigma: f64,
    pub gadget_base: u64,
    /// Largest committee the parameters must support after modulus switching.
    pub max_parties: usize,
}

impl Default for ParamRequest {
    fn default() -> Self {
        ParamRequest {
            degree: 1024,
            external_degree: None,
            plaintext_modulus: 65537,
            sigma: 3.2,
            gadget_base: 2,
            max_parties: 15,
        }
    }
}

fn gadget_length(base: u64, modulus: u64) -> usize {
    let mut l = 0;
    let mut power: u128 = 1;
    while power < modulus as u128 {
        power *= base as u128;
        l += 1;
    }
    l
}

impl CryptoParams {
    /// Validate an explicit parameter set.
    ///
    /// Besides the structural constraints (`p1 = p p0 < 2^62`, `q < p0`,
    /// `gcd(q, p1) = 1`) this requires `p = 1 mod q`: modulus switching keeps
    /// every coefficient congruent mod `q`, which preserves the plaintext only
    /// when `p1 = p0 mod q`.
    pub fn new(
        degree: usize,
        external_degree: usize,
        plaintext_modulus: u64,
        p: u64,
        p0: u64,
        sigma: f64,
        gadget_base: u64,
    ) -> Result<Self, CryptoError> {
        let q = plaintext_modulus;
        if !is_prime(p) || !is_prime(p0) || p == p0 {
            return Err(CryptoError::ParamError(format!(
                "p = {p} and p0 = {p0} must be distinct primes"
            )));
        }
        let p1 = p
            .checked_mul(p0)
            .filter(|&v| v < MAX_MODULUS)
            .ok_or_else(|| {
                CryptoError::ParamError(format!("p * p0 must be below 2^62 (p = {p}, p0 = {p0})"))
            })?;
        if q < 2 || q >= p0 {
            return Err(CryptoError::ParamError(format!(
                "plaintext modulus {q} must lie in [2, p0)"
            )));
        }
        if gcd(q, p1) != 1 {
            return Err(CryptoError::ParamError(format!(
                "gcd(q, p1) must be 1 (q = {q})"
            )));
        }
        if p % q != 1 {
            return Err(CryptoError::ParamError(format!(
                "p = {p} must be 1 mod q = {q} for modulus switching to preserve plaintexts"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CryptoError::ParamError(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if gadget_base < 2 {
            return Err(CryptoError::ParamError(format!(
                "gadget base must be >= 2, got {gadget_base}"
            )));
        }
        let internal = RingParams::new(degree, p1)?;
        let external = RingParams::new(external_degree, p1)?;
        let switched = RingParams::new(degree, p0)?;
        Ok(CryptoParams {
            internal,
            external,
            switched,
            q,
            p,
            p0,
            sigma,
            gadget_base,
            gadget_len: gadget_length(gadget_base, p1),
        })
    }

    /// Choose primes for a request.
    ///
    /// `p0` is the smallest prime `= 1 mod 2d` above `2^30`; the floor doubles
    /// until a switched sum of `max_parties` fresh ciphertexts provably
    /// decrypts. `p` is the smallest prime above `2^20` that is `1` mod `q`.
    pub fn derive(req: &ParamRequest) -> Result<Self, CryptoError> {
        let d = req.degree as u64;
        let q = req.plaintext_modulus;
        if !req.degree.is_power_of_two() {
            return Err(CryptoError::ParamError(format!(
                "degree {d} must be a power of two"
            )));
        }
        let p = next_prime_congruent_one(1 << 20, q)
            .ok_or_else(|| CryptoError::ParamError("no prime p found".into()))?;
        let mut floor: u64 = 1 << 30;
        loop {
            let p0 = next_prime_congruent_one(floor, 2 * d)
                .ok_or_else(|| CryptoError::ParamError("no prime p0 found".into()))?;
            let p1 = p as u128 * p0 as u128;
            if p1 >= MAX_MODULUS as u128 {
                return Err(CryptoError::ParamError(format!(
                    "no p0 keeps p1 below 2^62 for degree {d} and {} parties",
                    req.max_parties
                )));
            }
            let l = gadget_length(req.gadget_base.max(2), p1 as u64);
            let external = req
                .external_degree
                .unwrap_or_else(|| (2 * req.degree * l).next_power_of_two());
            let params =
                CryptoParams::new(req.degree, external, q, p, p0, req.sigma, req.gadget_base)?;
            let parties = req.max_parties.max(1) as f64;
            let switched = params.switched_noise_bound(parties * params.fresh_noise_bound());
            if switched < p0 as f64 / 2.0 && parties * params.fresh_noise_bound() < p1 as f64 / 2.0
            {
                return Ok(params);
            }
            floor *= 2;
        }
    }

    pub fn internal(&self) -> RingParams {
        self.internal
    }

    pub fn external(&self) -> RingParams {
        self.external
    }

    /// Internal degree with modulus `p0`.
    pub fn switched(&self) -> RingParams {
        self.switched
    }

    pub fn degree(&self) -> usize {
        self.internal.degree()
    }

    pub fn plaintext_modulus(&self) -> u64 {
        self.q
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn p0(&self) -> u64 {
        self.p0
    }

    pub fn p1(&self) -> u64 {
        self.internal.modulus()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gadget_base(&self) -> u64 {
        self.gadget_base
    }

    pub fn gadget_len(&self) -> usize {
        self.gadget_len
    }

    /// Number of gadget digits a wrapped ciphertext occupies (`2 d l`).
    pub fn digit_count(&self) -> usize {
        2 * self.degree() * self.gadget_len
    }

    /// Largest coefficient magnitude a Gaussian draw can have.
    pub fn gaussian_bound(&self) -> f64 {
        crate::math::floor(6.0 * self.sigma)
    }

    /// Upper bound on `|c0 - s c1|` for a fresh encryption:
    /// `q/2 + q (d B + B + d B^2)` with `B` the Gaussian tail cut.
    pub fn fresh_noise_bound(&self) -> f64 {
        let q = self.q as f64;
        let d = self.degree() as f64;
        let b = self.gaussian_bound();
        q / 2.0 + q * (d * b + b + d * b * b)
    }

    /// Noise bound after switching from `p1` to `p0`: the scaled noise plus
    /// the rounding term `(q + 1)/2 * (1 + d B)`.
    pub fn switched_noise_bound(&self, noise: f64) -> f64 {
        let q = self.q as f64;
        let d = self.degree() as f64;
        noise / self.p as f64 + (q + 1.0) / 2.0 * (1.0 + d * self.gaussian_bound())
    }

    /// SHA-256 over a canonical encoding of every parameter.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"fedchain-crypto-params-v1");
        for v in [
            self.degree() as u64,
            self.external.degree() as u64,
            self.q,
            self.p,
            self.p0,
            self.sigma.to_bits(),
            self.gadget_base,
        ] {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Parameters plus the transform plans every operation needs.
#[derive(Debug, Clone)]
pub struct CryptoContext {
    params: CryptoParams,
    internal_plan: NttPlan,
    external_plan: NttPlan,
}

impl CryptoContext {
    pub fn new(params: CryptoParams) -> Result<Self, CryptoError> {
        let plan = |d: usize| {
            NttPlan::new(d).ok_or_else(|| {
                CryptoError::ParamError(format!("degree {d} too large for the transform"))
            })
        };
        Ok(CryptoContext {
            internal_plan: plan(params.degree())?,
            external_plan: plan(params.external().degree())?,
            params,
        })
    }

    pub fn params(&self) -> &CryptoParams {
        &self.params
    }

    pub fn internal_plan(&self) -> &NttPlan {
        &self.internal_plan
    }

    pub fn external_plan(&self) -> &NttPlan {
        &self.external_plan
    }
}
