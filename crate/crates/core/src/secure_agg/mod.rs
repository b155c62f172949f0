//! Additive secure aggregation of quantized gradients.
//!
//! Each party encrypts its quantized gradient as an internal BGV-style
//! ciphertext under a shared public key, expands that ciphertext into base-`b`
//! gadget digits and masks the digits with its own secret in a larger external
//! ring. The ledger adds every masked share and cancels the masks with the
//! negated sum of party secrets, which recovers the digit sum and hence the
//! internal ciphertext of the plaintext sum. Only the sum is ever decryptable:
//! the evaluator secret opens it after a modulus switch.
//!
//! [`mask`] separately implements the secret-matrix linear masking of a data
//! matrix; it is not part of the ciphertext pipeline.

mod cipher;
pub mod codec;
mod gadget;
mod keys;
pub mod mask;
mod params;
mod quant;

use alloc::string::String;
use core::fmt;

use crate::polyring::RingError;

pub use cipher::{
    decrypt_sum, encrypt_internal, measured_noise, modulus_switch, InternalCiphertext,
};
pub use gadget::{aggregate_and_unwrap, gadget_wrap, ExternalShare};
pub use keys::{
    recover_gamma, setup, EvaluatorSecret, KeyMaterial, LedgerSecret, PartySecret, PublicKey,
};
pub use params::{CryptoContext, CryptoParams, ParamRequest};
pub use quant::{chunk_plaintext, dequantize, quantize, QuantParams};

#[derive(Debug, Clone, PartialEq)]
pub enum CryptoError {
    Ring(RingError),
    ParamError(String),
    DimensionError {
        expected: usize,
        found: usize,
    },
    /// A gradient entry is NaN or infinite.
    InvalidGradient {
        index: usize,
    },
    /// Accumulated noise can no longer be decrypted correctly.
    NoiseOverflow {
        noise: f64,
        limit: f64,
    },
    /// The share set does not contain exactly one share per enrolled party.
    PartySetMismatch {
        expected: usize,
        found: usize,
    },
    SingularMask {
        condition: f64,
    },
    InvalidMask(&'static str),
    Codec(codec::CodecError),
}

impl fmt::Display for CryptoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CryptoError::Ring(e) => write!(f, "{e}"),
            CryptoError::ParamError(msg) => write!(f, "invalid crypto parameters: {msg}"),
            CryptoError::DimensionError { expected, found } => {
                write!(f, "expected length {expected}, found {found}")
            }
            CryptoError::InvalidGradient { index } => {
                write!(f, "gradient entry {index} is not finite")
            }
            CryptoError::NoiseOverflow { noise, limit } => {
                write!(f, "noise {noise:e} exceeds decryptable limit {limit:e}")
            }
            CryptoError::PartySetMismatch { expected, found } => write!(
                f,
                "aggregation needs one share from each of {expected} parties, got {found} distinct"
            ),
            CryptoError::SingularMask { condition } => {
                write!(
                    f,
                    "mask matrix is singular (condition number {condition:e})"
                )
            }
            CryptoError::InvalidMask(why) => write!(f, "invalid mask matrix: {why}"),
            CryptoError::Codec(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for CryptoError {}

impl From<RingError> for CryptoError {
    fn from(e: RingError) -> Self {
        CryptoError::Ring(e)
    }
}

impl From<codec::CodecError> for CryptoError {
    fn from(e: codec::CodecError) -> Self {
        CryptoError::Codec(e)
    }
}
