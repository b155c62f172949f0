//! Secret-matrix linear masking of a shared data matrix.
//!
//! A participant holding a row-stochastic secret `phi` publishes `phi Z`
//! instead of `Z`; only a holder of `phi` can undo it. This is a standalone
//! primitive and is not used by the ciphertext pipeline.

use alloc::vec;
use alloc::vec::Vec;

use super::CryptoError;

/// Masks whose 1-norm condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

fn check_matrix(m: &[Vec<f64>], rows: usize, what: &'static str) -> Result<usize, CryptoError> {
    if m.len() != rows {
        return Err(CryptoError::DimensionError {
            expected: rows,
            found: m.len(),
        });
    }
    let cols = m.first().map_or(0, Vec::len);
    for row in m {
        if row.len() != cols {
            return Err(CryptoError::DimensionError {
                expected: cols,
                found: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(CryptoError::InvalidMask(what));
        }
    }
    Ok(cols)
}

fn check_phi(phi: &[Vec<f64>]) -> Result<usize, CryptoError> {
    let s = phi.len();
    if s == 0 {
        return Err(CryptoError::InvalidMask("mask must be non-empty"));
    }
    let cols = check_matrix(phi, s, "mask entries must be finite")?;
    if cols != s {
        return Err(CryptoError::DimensionError {
            expected: s,
            found: cols,
        });
    }
    for row in phi {
        if row.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(CryptoError::InvalidMask("mask entries must lie in [0, 1)"));
        }
        if (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(CryptoError::InvalidMask("mask rows must sum to 1"));
        }
    }
    Ok(s)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// LU factorization with partial pivoting, stored compactly.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    #[allow(clippy::needless_range_loop)]
    fn new(a: &[Vec<f64>]) -> Option<Lu> {
        let n = a.len();
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot = (k..n).max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))?;
            if lu[pivot][k] == 0.0 {
                return None;
            }
            lu.swap(k, pivot);
            perm.swap(k, pivot);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..n {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Some(Lu { lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

fn norm1(m: &[Vec<f64>]) -> f64 {
    let n = m.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| m.iter().map(|r| r[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Explicit inverse of `phi` after the conditioning check.
fn invert(phi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CryptoError> {
    let n = phi.len();
    let lu = Lu::new(phi).ok_or(CryptoError::SingularMask {
        condition: f64::INFINITY,
    })?;
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (i, v) in lu.solve(&e).into_iter().enumerate() {
            inv[i][j] = v;
        }
    }
    let condition = norm1(phi) * norm1(&inv);
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(CryptoError::SingularMask { condition });
    }
    Ok(inv)
}

/// `phi Z` for a valid, well-conditioned mask `phi` (S x S) and data `Z` (S x T).
pub fn linear_mask(z: &[Vec<f64>], phi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CryptoError> {
    let s = check_phi(phi)?;
    check_matrix(z, s, "data entries must be finite")?;
    invert(phi)?;
    Ok(matmul(phi, z))
}

/// Recover `Z` from `phi Z`.
pub fn unmask(masked: &[Vec<f64>], phi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CryptoError> {
    let s = check_phi(phi)?;
    let t = check_matrix(masked, s, "masked entries must be finite")?;
    let lu = Lu::new(phi).ok_or(CryptoError::SingularMask {
        condition: f64::INFINITY,
    })?;
    invert(phi)?;
    let mut out = vec![vec![0.0; t]; s];
    for j in 0..t {
        let col: Vec<f64> = masked.iter().map(|r| r[j]).collect();
        for (i, v) in lu.solve(&col).into_iter().enumerate() {
            out[i][j] = v;
        }
    }
    Ok(out)
}
