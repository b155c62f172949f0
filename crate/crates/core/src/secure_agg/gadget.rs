use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{CryptoContext, CryptoError, InternalCiphertext, LedgerSecret, PartySecret, PublicKey};
use crate::polyring::RingElement;

/// One party's masked contribution: `c = a' s_i + e_i` in the external ring,
/// where `e_i` holds the gadget digits of its internal ciphertext.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalShare {
    pub issuer: usize,
    pub c: RingElement,
    /// Noise bound of the wrapped internal ciphertext.
    pub noise: f64,
}

/// Randomized base-`b` digits of `v`: a random lift `v + k p1 < b^l` is
/// decomposed, so `G e = v mod p1` while the digits themselves vary.
fn decompose<R: Rng + ?Sized>(
    v: u64,
    p1: u64,
    base: u64,
    len: usize,
    rng: &mut R,
    out: &mut [u64],
) {
    let top = (base as u128).pow(len as u32);
    let lifts = (top - 1 - v as u128) / p1 as u128 + 1;
    let k = rng.gen_range(0..lifts);
    let mut x = v as u128 + k * p1 as u128;
    for digit in out.iter_mut().take(len) {
        *digit = (x % base as u128) as u64;
        x /= base as u128;
    }
}

/// `sum_t digits[t] b^t mod p1`.
fn recompose(digits: &[u64], p1: u64, base: u64) -> u64 {
    let mut acc: u128 = 0;
    for &d in digits.iter().rev() {
        acc = (acc * base as u128 + d as u128) % p1 as u128;
    }
    acc as u64
}

/// Expand `(c0 || c1)` into gadget digits and mask them with the party secret.
pub fn gadget_wrap<R: Rng + ?Sized>(
    ct: &InternalCiphertext,
    party: &PartySecret,
    pk: &PublicKey,
    ctx: &CryptoContext,
    rng: &mut R,
) -> Result<ExternalShare, CryptoError> {
    let params = ctx.params();
    let external = params.external();
    let (d, l, b, p1) = (
        params.degree(),
        params.gadget_len(),
        params.gadget_base(),
        params.p1(),
    );
    if params.digit_count() > external.degree() {
        return Err(CryptoError::ParamError(format!(
            "external degree {} cannot hold {} gadget digits",
            external.degree(),
            params.digit_count()
        )));
    }
    if ct.c0.params() != params.internal() || ct.c1.params() != params.internal() {
        return Err(CryptoError::ParamError(
            "ciphertext is not in the internal p1 ring".into(),
        ));
    }
    let mut e = vec![0u64; external.degree()];
    for (j, &v) in ct.c0.coeffs().iter().chain(ct.c1.coeffs()).enumerate() {
        decompose(v, p1, b, l, rng, &mut e[j * l..(j + 1) * l]);
    }
    debug_assert_eq!(2 * d * l, params.digit_count());
    let e = RingElement::from_coeffs(external, e)?;
    let c = pk
        .external_a
        .mul_with(&party.s, ctx.external_plan())?
        .add(&e)?;
    Ok(ExternalShare {
        issuer: party.index,
        c,
        noise: ct.noise,
    })
}

/// Sum every share, cancel the masks with `SK_C1` and recompose the digits
/// into the internal ciphertext of the plaintext sum.
///
/// Requires exactly one share from each of the `ledger.parties` parties.
/// A digit sum outside `[0, N (b - 1)]` or a nonzero padding coefficient
/// means the masks did not cancel and yields `NoiseOverflow`.
pub fn aggregate_and_unwrap(
    shares: &[ExternalShare],
    ledger: &LedgerSecret,
    pk: &PublicKey,
    ctx: &CryptoContext,
) -> Result<InternalCiphertext, CryptoError> {
    let n = ledger.parties;
    let issuers: BTreeSet<usize> = shares.iter().map(|s| s.issuer).collect();
    if shares.len() != n || issuers.len() != n || issuers.iter().any(|&i| i >= n) {
        return Err(CryptoError::PartySetMismatch {
            expected: n,
            found: issuers.iter().filter(|&&i| i < n).count(),
        });
    }
    let params = ctx.params();
    let (d, l, b, p1) = (
        params.degree(),
        params.gadget_len(),
        params.gadget_base(),
        params.p1(),
    );
    let mut sum = RingElement::zero(params.external());
    let mut noise = 0.0;
    for share in shares {
        sum = sum.add(&share.c)?;
        noise += share.noise;
    }
    let e = sum.add(&pk.external_a.mul_with(&ledger.s, ctx.external_plan())?)?;
    let digits = e.coeffs();
    let max_digit = n as u64 * (b - 1);
    let digit_area = params.digit_count();
    let worst = digits[..digit_area].iter().copied().max().unwrap_or(0);
    let padding_clean = digits[digit_area..].iter().all(|&x| x == 0);
    if worst > max_digit || !padding_clean {
        let residue = digits.iter().copied().max().unwrap_or(0);
        return Err(CryptoError::NoiseOverflow {
            noise: residue as f64,
            limit: max_digit as f64,
        });
    }
    let v: Vec<u64> = digits[..digit_area]
        .chunks(l)
        .map(|c| recompose(c, p1, b))
        .collect();
    let internal = params.internal();
    Ok(InternalCiphertext {
        c0: RingElement::from_coeffs(internal, v[..d].to_vec())?,
        c1: RingElement::from_coeffs(internal, v[d..].to_vec())?,
        noise,
    })
}
