//! Squashing, routing softmax and routing by agreement for one capsule layer.

use alloc::vec;
use alloc::vec::Vec;

use super::ModelError;
use crate::math;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale `p` to norm `|p|^2 / (1 + |p|^2)` keeping its direction.
/// The zero vector maps to itself.
pub fn squash(p: &[f64]) -> Vec<f64> {
    let sq = dot(p, p);
    if sq == 0.0 {
        return vec![0.0; p.len()];
    }
    let factor = sq / (1.0 + sq) / math::sqrt(sq);
    p.iter().map(|v| v * factor).collect()
}

/// Softmax of one input capsule's logits over the output capsules.
pub fn routing_softmax(b: &[f64]) -> Vec<f64> {
    let top = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = b.iter().map(|v| math::exp(v - top)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Shape and transforms of a capsule layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleLayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    /// `W[i][j]` as row-major `out_dim x in_dim` blocks, indexed `(i * outputs + j)`.
    pub transforms: Vec<f64>,
    pub iterations: usize,
}

impl CapsuleLayerSpec {
    /// Every transform set to `w` (row-major `out_dim x in_dim`), three routing iterations.
    pub fn uniform(
        inputs: usize,
        outputs: usize,
        in_dim: usize,
        out_dim: usize,
        w: &[f64],
    ) -> Self {
        let mut transforms = Vec::with_capacity(inputs * outputs * w.len());
        for _ in 0..inputs * outputs {
            transforms.extend_from_slice(w);
        }
        CapsuleLayerSpec {
            inputs,
            outputs,
            in_dim,
            out_dim,
            transforms,
            iterations: 3,
        }
    }

    pub fn transform(&self, i: usize, j: usize) -> &[f64] {
        let block = self.in_dim * self.out_dim;
        let at = (i * self.outputs + j) * block;
        &self.transforms[at..at + block]
    }

    pub fn transform_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let block = self.in_dim * self.out_dim;
        let at = (i * self.outputs + j) * block;
        &mut self.transforms[at..at + block]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.iterations == 0 {
            return Err(ModelError::SpecError(
                "routing needs at least one iteration",
            ));
        }
        if self.inputs == 0 || self.outputs == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(ModelError::SpecError(
                "capsule counts and dimensions must be positive",
            ));
        }
        let expected = self.inputs * self.outputs * self.in_dim * self.out_dim;
        if self.transforms.len() != expected {
            return Err(ModelError::DimensionError {
                expected,
                found: self.transforms.len(),
            });
        }
        if self.transforms.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::SpecError("transforms must be finite"));
        }
        Ok(())
    }
}

/// Output poses after `spec.iterations` rounds of routing by agreement.
/// Logits start at zero on every call.
pub fn capsule_forward(
    spec: &CapsuleLayerSpec,
    u: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, ModelError> {
    spec.validate()?;
    if u.len() != spec.inputs {
        return Err(ModelError::DimensionError {
            expected: spec.inputs,
            found: u.len(),
        });
    }
    if let Some(bad) = u.iter().find(|p| p.len() != spec.in_dim) {
        return Err(ModelError::DimensionError {
            expected: spec.in_dim,
            found: bad.len(),
        });
    }

    // Predictions u_hat[i][j] = W_ij u_i.
    let u_hat: Vec<Vec<Vec<f64>>> = (0..spec.inputs)
        .map(|i| {
            (0..spec.outputs)
                .map(|j| {
                    spec.transform(i, j)
                        .chunks(spec.in_dim)
                        .map(|row| dot(row, &u[i]))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut b = vec![vec![0.0; spec.outputs]; spec.inputs];
    let mut v = vec![vec![0.0; spec.out_dim]; spec.outputs];
    for _ in 0..spec.iterations {
        let c: Vec<Vec<f64>> = b.iter().map(|row| routing_softmax(row)).collect();
        for (j, vj) in v.iter_mut().enumerate() {
            let mut s = vec![0.0; spec.out_dim];
            for i in 0..spec.inputs {
                for (acc, x) in s.iter_mut().zip(&u_hat[i][j]) {
                    *acc += c[i][j] * x;
                }
            }
            *vj = squash(&s);
        }
        for (i, row) in b.iter_mut().enumerate() {
            for (j, bij) in row.iter_mut().enumerate() {
                *bij += dot(&u_hat[i][j], &v[j]);
            }
        }
    }
    Ok(v)
}
