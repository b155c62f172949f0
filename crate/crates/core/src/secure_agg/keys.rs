use alloc::vec::Vec;

use rand::Rng;

use super::{CryptoContext, CryptoError};
use crate::math::center;
use crate::polyring::{sample_gaussian, sample_uniform, RingElement, RingParams};

/// Public key: the internal RLWE pair `(a, b = a s + q gamma)` and the
/// uniform element `a'` of the external ring used to mask party shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub a: RingElement,
    pub b: RingElement,
    pub external_a: RingElement,
}

/// Secret `s_i` of party `index` in the external ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartySecret {
    pub index: usize,
    pub s: RingElement,
}

/// `SK_C1 = -sum_i s_i`, held by the ledger; valid for exactly `parties` parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerSecret {
    pub parties: usize,
    pub s: RingElement,
}

/// `SK_C2`, the internal RLWE secret used to decrypt the aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluatorSecret {
    pub s: RingElement,
}

impl EvaluatorSecret {
    /// The same small secret lifted into another modulus of the same degree.
    pub fn lifted(&self, params: RingParams) -> Result<RingElement, CryptoError> {
        Ok(RingElement::from_signed(params, &self.s.to_centered())?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub public: PublicKey,
    pub parties: Vec<PartySecret>,
    pub ledger: LedgerSecret,
    pub evaluator: EvaluatorSecret,
}

fn gaussian_element<R: Rng + ?Sized>(
    params: RingParams,
    sigma: f64,
    rng: &mut R,
) -> Result<RingElement, CryptoError> {
    Ok(RingElement::from_signed(
        params,
        &sample_gaussian(params.degree(), sigma, rng),
    )?)
}

fn uniform_element<R: Rng + ?Sized>(
    params: RingParams,
    rng: &mut R,
) -> Result<RingElement, CryptoError> {
    Ok(RingElement::from_coeffs(
        params,
        sample_uniform(params.degree(), params.modulus(), rng),
    )?)
}

/// Generate keys for `parties` participants.
pub fn setup<R: Rng + ?Sized>(
    parties: usize,
    ctx: &CryptoContext,
    rng: &mut R,
) -> Result<KeyMaterial, CryptoError> {
    if parties == 0 {
        return Err(CryptoError::ParamError(
            "at least one party is required".into(),
        ));
    }
    let params = ctx.params();
    let (internal, external) = (params.internal(), params.external());
    let q = params.plaintext_modulus();

    let a = uniform_element(internal, rng)?;
    let s = gaussian_element(internal, params.sigma(), rng)?;
    let gamma = gaussian_element(internal, params.sigma(), rng)?;
    let b = a.mul_with(&s, ctx.internal_plan())?.add(&gamma.scale(q))?;

    let external_a = uniform_element(external, rng)?;
    let mut secrets = Vec::with_capacity(parties);
    let mut sum = RingElement::zero(external);
    for index in 0..parties {
        let s_i = gaussian_element(external, params.sigma(), rng)?;
        sum = sum.add(&s_i)?;
        secrets.push(PartySecret { index, s: s_i });
    }
    Ok(KeyMaterial {
        public: PublicKey { a, b, external_a },
        parties: secrets,
        ledger: LedgerSecret {
            parties,
            s: sum.neg(),
        },
        evaluator: EvaluatorSecret { s },
    })
}

impl KeyMaterial {
    /// Check the structural invariants: `b - a s` is `q` times a small
    /// polynomial and the ledger secret cancels every party secret.
    pub fn verify(&self, ctx: &CryptoContext) -> Result<(), CryptoError> {
        let params = ctx.params();
        let q = params.plaintext_modulus();
        let bound = params.gaussian_bound() as i64;
        let residue = self.public.b.sub(
            &self
                .public
                .a
                .mul_with(&self.evaluator.s, ctx.internal_plan())?,
        )?;
        for c in residue.to_centered() {
            if c % q as i64 != 0 || (c / q as i64).abs() > bound {
                return Err(CryptoError::ParamError(
                    "public key is not a valid RLWE sample".into(),
                ));
            }
        }
        if self.ledger.parties != self.parties.len() {
            return Err(CryptoError::PartySetMismatch {
                expected: self.ledger.parties,
                found: self.parties.len(),
            });
        }
        let mut total = self.ledger.s.clone();
        for party in &self.parties {
            total = total.add(&party.s)?;
        }
        if total != RingElement::zero(params.external()) {
            return Err(CryptoError::ParamError(
                "ledger secret does not cancel party secrets".into(),
            ));
        }
        Ok(())
    }
}

/// Recover `gamma` from `b - a s = q gamma` by exact division of centered
/// coefficients; `None` if some coefficient is not a multiple of `q`.
pub fn recover_gamma(public: &PublicKey, secret: &EvaluatorSecret, q: u64) -> Option<Vec<i64>> {
    let residue = public.b.sub(&public.a.mul(&secret.s).ok()?).ok()?;
    let m = residue.params().modulus();
    residue
        .coeffs()
        .iter()
        .map(|&c| {
            let c = center(c, m);
            (c % q as i64 == 0).then_some(c / q as i64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secure_agg::{CryptoParams, ParamRequest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> CryptoContext {
        CryptoContext::new(
            CryptoParams::derive(&ParamRequest {
                degree: 8,
                ..ParamRequest::default()
            })
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_party_ledger_secret_is_negation() {
        let ctx = toy();
        let keys = setup(1, &ctx, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(keys.ledger.s, keys.parties[0].s.neg());
        keys.verify(&ctx).unwrap();
    }

    #[test]
    fn ledger_secret_cancels_three_parties() {
        let ctx = toy();
        let keys = setup(3, &ctx, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        let mut sum = keys.ledger.s.clone();
        for p in &keys.parties {
            sum = sum.add(&p.s).unwrap();
        }
        assert!(sum.coeffs().iter().all(|&c| c == 0));
        keys.verify(&ctx).unwrap();
    }

    #[test]
    fn public_key_noise_is_small() {
        let ctx = toy();
        let q = ctx.params().plaintext_modulus();
        let bound = 6.0 * ctx.params().sigma();
        for seed in 0..20 {
            let keys = setup(2, &ctx, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let gamma = recover_gamma(&keys.public, &keys.evaluator, q).expect("divisible by q");
            assert!(gamma.iter().all(|&g| (g as f64).abs() <= bound));
        }
    }

    #[test]
    fn zero_parties_rejected_and_setup_deterministic() {
        let ctx = toy();
        assert!(setup(0, &ctx, &mut ChaCha20Rng::seed_from_u64(0)).is_err());
        let a = setup(2, &ctx, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = setup(2, &ctx, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_catches_tampering() {
        let ctx = toy();
        let mut keys = setup(2, &ctx, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        keys.parties.pop();
        assert!(keys.verify(&ctx).is_err());
        let mut keys = setup(2, &ctx, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        keys.public.b = keys
            .public
            .b
            .add(&RingElement::one(ctx.params().internal()))
            .unwrap();
        assert!(keys.verify(&ctx).is_err());
    }
}
