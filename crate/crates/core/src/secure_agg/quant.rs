use alloc::format;
use alloc::vec::Vec;

use super::CryptoError;
use crate::math;

/// Fixed-point mapping from real gradients to plaintexts mod `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f64,
    pub clip: f64,
    pub max_parties: usize,
    pub plaintext_modulus: u64,
}

impl Default for QuantParams {
    fn default() -> Self {
        QuantParams {
            scale: 256.0,
            clip: 8.0,
            max_parties: 15,
            plaintext_modulus: 65537,
        }
    }
}

impl QuantParams {
    /// `scale` must be a power of two and `max_parties * scale * clip < q/2`,
    /// so a sum over every party never wraps.
    pub fn validate(&self) -> Result<(), CryptoError> {
        let frac_ok = self.scale > 0.0 && self.scale.is_finite() && {
            let bits = self.scale.to_bits();
            bits & ((1u64 << 52) - 1) == 0
        };
        if !frac_ok {
            return Err(CryptoError::ParamError(format!(
                "scale {} must be a power of two",
                self.scale
            )));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(CryptoError::ParamError(format!(
                "clip {} must be positive",
                self.clip
            )));
        }
        if self.max_parties == 0 {
            return Err(CryptoError::ParamError(
                "max_parties must be at least 1".into(),
            ));
        }
        let reach = self.max_parties as f64 * self.scale * self.clip;
        if reach >= self.plaintext_modulus as f64 / 2.0 {
            return Err(CryptoError::ParamError(format!(
                "max_parties * scale * clip = {reach} must be below q/2 = {}",
                self.plaintext_modulus as f64 / 2.0
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(-self.clip, self.clip)
    }
}

/// Clip to `[-c, c]`, scale and round. Results are centered residues mod `q`.
pub fn quantize(g: &[f64], qp: &QuantParams) -> Result<Vec<i64>, CryptoError> {
    g.iter()
        .enumerate()
        .map(|(index, &x)| {
            if !x.is_finite() {
                return Err(CryptoError::InvalidGradient { index });
            }
            let v = math::round(qp.clamp(x) * qp.scale) as i64;
            Ok(math::center(
                math::reduce_signed(v, qp.plaintext_modulus),
                qp.plaintext_modulus,
            ))
        })
        .collect()
}

/// Inverse of [`quantize`] on centered residues.
pub fn dequantize(v: &[i64], qp: &QuantParams) -> Vec<f64> {
    v.iter().map(|&x| x as f64 / qp.scale).collect()
}

/// Split into zero-padded blocks of exactly `degree` entries (at least one block).
pub fn chunk_plaintext(v: &[i64], degree: usize) -> Vec<Vec<i64>> {
    assert!(degree > 0, "degree must be positive");
    let mut out: Vec<Vec<i64>> = v.chunks(degree).map(|c| c.to_vec()).collect();
    if out.is_empty() {
        out.push(Vec::new());
    }
    if let Some(last) = out.last_mut() {
        last.resize(degree, 0);
    }
    out
}
