//! Binary encoding of keys, ciphertexts and shares.
//!
//! Every object starts with a 42-byte header: the magic `FEDCHAIN`, a version
//! byte, a kind byte and the SHA-256 digest of the crypto parameters. Ring
//! elements follow as `u32` degree, `u64` modulus and `degree` little-endian
//! `u64` coefficients. Decoding checks every field against the expected
//! parameters and rejects trailing bytes.

use alloc::vec::Vec;
use core::fmt;

use super::{
    CryptoParams, EvaluatorSecret, ExternalShare, InternalCiphertext, LedgerSecret, PartySecret,
    PublicKey,
};
use crate::polyring::{RingElement, RingParams};

pub const MAGIC: [u8; 8] = *b"FEDCHAIN";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8 + 1 + 1 + 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjectKind {
    PublicKey = 1,
    PartySecret = 2,
    LedgerSecret = 3,
    EvaluatorSecret = 4,
    InternalCiphertext = 5,
    ExternalShare = 6,
}

impl ObjectKind {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => ObjectKind::PublicKey,
            2 => ObjectKind::PartySecret,
            3 => ObjectKind::LedgerSecret,
            4 => ObjectKind::EvaluatorSecret,
            5 => ObjectKind::InternalCiphertext,
            6 => ObjectKind::ExternalShare,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodecError {
    BadMagic,
    UnsupportedVersion(u8),
    UnknownKind(u8),
    WrongKind {
        expected: ObjectKind,
        found: ObjectKind,
    },
    /// The object was produced under different crypto parameters.
    ParamsMismatch,
    Truncated,
    TrailingBytes(usize),
    InvalidField(&'static str),
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::BadMagic => write!(f, "not a fedchain object (bad magic)"),
            CodecError::UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            CodecError::UnknownKind(k) => write!(f, "unknown object kind {k}"),
            CodecError::WrongKind { expected, found } => {
                write!(f, "expected a {expected:?}, found a {found:?}")
            }
            CodecError::ParamsMismatch => {
                write!(f, "object was encoded under different crypto parameters")
            }
            CodecError::Truncated => write!(f, "input is truncated"),
            CodecError::TrailingBytes(n) => write!(f, "{n} unexpected trailing bytes"),
            CodecError::InvalidField(what) => write!(f, "invalid field: {what}"),
        }
    }
}

impl core::error::Error for CodecError {}

/// Decoded header fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub kind: ObjectKind,
    pub params_digest: [u8; 32],
}

/// Read the header without decoding the body.
pub fn peek_header(bytes: &[u8]) -> Result<Header, CodecError> {
    Reader::new(bytes).header()
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: ObjectKind, params: &CryptoParams) -> Self {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(kind as u8);
        out.extend_from_slice(&params.digest());
        Writer(out)
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    fn index(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("index fits in u32"));
    }

    fn element(&mut self, e: &RingElement) {
        let p = e.params();
        self.index(p.degree());
        self.u64(p.modulus());
        for &c in e.coeffs() {
            self.u64(c);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CodecError> {
        let v = f64::from_bits(self.u64()?);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(CodecError::InvalidField(what))
        }
    }

    fn header(&mut self) -> Result<Header, CodecError> {
        if self.take(8).map_err(|_| CodecError::BadMagic)? != MAGIC {
            return Err(CodecError::BadMagic);
        }
        let version = self.u8()?;
        if version != VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        let k = self.u8()?;
        let kind = ObjectKind::from_byte(k).ok_or(CodecError::UnknownKind(k))?;
        let params_digest = self.take(32)?.try_into().unwrap();
        Ok(Header {
            kind,
            params_digest,
        })
    }

    fn expect_header(&mut self, kind: ObjectKind, params: &CryptoParams) -> Result<(), CodecError> {
        let h = self.header()?;
        if h.kind != kind {
            return Err(CodecError::WrongKind {
                expected: kind,
                found: h.kind,
            });
        }
        if h.params_digest != params.digest() {
            return Err(CodecError::ParamsMismatch);
        }
        Ok(())
    }

    fn element(&mut self, rings: &[RingParams]) -> Result<RingElement, CodecError> {
        let degree = self.u32()? as usize;
        let modulus = self.u64()?;
        let ring = *rings
            .iter()
            .find(|r| r.degree() == degree && r.modulus() == modulus)
            .ok_or(CodecError::InvalidField(
                "ring element has unexpected degree or modulus",
            ))?;
        let raw = self.take(degree.checked_mul(8).ok_or(CodecError::Truncated)?)?;
        let coeffs: Vec<u64> = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if coeffs.iter().any(|&c| c >= modulus) {
            return Err(CodecError::InvalidField("coefficient out of range"));
        }
        RingElement::from_coeffs(ring, coeffs)
            .map_err(|_| CodecError::InvalidField("coefficient out of range"))
    }

    fn finish(self) -> Result<(), CodecError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

pub fn encode_public_key(pk: &PublicKey, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::PublicKey, params);
    w.element(&pk.a);
    w.element(&pk.b);
    w.element(&pk.external_a);
    w.0
}

pub fn decode_public_key(bytes: &[u8], params: &CryptoParams) -> Result<PublicKey, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::PublicKey, params)?;
    let a = r.element(&[params.internal()])?;
    let b = r.element(&[params.internal()])?;
    let external_a = r.element(&[params.external()])?;
    r.finish()?;
    Ok(PublicKey { a, b, external_a })
}

pub fn encode_party_secret(sk: &PartySecret, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::PartySecret, params);
    w.index(sk.index);
    w.element(&sk.s);
    w.0
}

pub fn decode_party_secret(bytes: &[u8], params: &CryptoParams) -> Result<PartySecret, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::PartySecret, params)?;
    let index = r.u32()? as usize;
    let s = r.element(&[params.external()])?;
    r.finish()?;
    Ok(PartySecret { index, s })
}

pub fn encode_ledger_secret(sk: &LedgerSecret, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::LedgerSecret, params);
    w.index(sk.parties);
    w.element(&sk.s);
    w.0
}

pub fn decode_ledger_secret(
    bytes: &[u8],
    params: &CryptoParams,
) -> Result<LedgerSecret, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::LedgerSecret, params)?;
    let parties = r.u32()? as usize;
    if parties == 0 {
        return Err(CodecError::InvalidField("party count must be positive"));
    }
    let s = r.element(&[params.external()])?;
    r.finish()?;
    Ok(LedgerSecret { parties, s })
}

pub fn encode_evaluator_secret(sk: &EvaluatorSecret, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::EvaluatorSecret, params);
    w.element(&sk.s);
    w.0
}

pub fn decode_evaluator_secret(
    bytes: &[u8],
    params: &CryptoParams,
) -> Result<EvaluatorSecret, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::EvaluatorSecret, params)?;
    let s = r.element(&[params.internal()])?;
    r.finish()?;
    Ok(EvaluatorSecret { s })
}

pub fn encode_ciphertext(ct: &InternalCiphertext, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::InternalCiphertext, params);
    w.element(&ct.c0);
    w.element(&ct.c1);
    w.f64(ct.noise);
    w.0
}

/// Accepts ciphertexts under either `p1` or the switched modulus `p0`.
pub fn decode_ciphertext(
    bytes: &[u8],
    params: &CryptoParams,
) -> Result<InternalCiphertext, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::InternalCiphertext, params)?;
    let c0 = r.element(&[params.internal(), params.switched()])?;
    let c1 = r.element(&[c0.params()])?;
    let noise = r.f64("noise bound must be finite and non-negative")?;
    r.finish()?;
    Ok(InternalCiphertext { c0, c1, noise })
}

pub fn encode_share(share: &ExternalShare, params: &CryptoParams) -> Vec<u8> {
    let mut w = Writer::new(ObjectKind::ExternalShare, params);
    w.index(share.issuer);
    w.element(&share.c);
    w.f64(share.noise);
    w.0
}

pub fn decode_share(bytes: &[u8], params: &CryptoParams) -> Result<ExternalShare, CodecError> {
    let mut r = Reader::new(bytes);
    r.expect_header(ObjectKind::ExternalShare, params)?;
    let issuer = r.u32()? as usize;
    let c = r.element(&[params.external()])?;
    let noise = r.f64("noise bound must be finite and non-negative")?;
    r.finish()?;
    Ok(ExternalShare { issuer, c, noise })
}
