use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::ModelError;
use crate::polyring::standard_normal;

/// Labeled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: usize,
    classes: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: usize,
        classes: usize,
        x: Vec<f64>,
        y: Vec<usize>,
    ) -> Result<Self, ModelError> {
        if features == 0 || classes == 0 {
            return Err(ModelError::SpecError(
                "features and classes must be positive",
            ));
        }
        if x.len() != y.len() * features {
            return Err(ModelError::DimensionError {
                expected: y.len() * features,
                found: x.len(),
            });
        }
        if let Some((index, &label)) = y.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(ModelError::InvalidLabel { index, label });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::SpecError("features must be finite"));
        }
        Ok(Dataset {
            features,
            classes,
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.y[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    /// Rows selected by `idx`, in that order (repeats allowed).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.features);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            features: self.features,
            classes: self.classes,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Stack datasets with matching shapes.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset, ModelError> {
        let first = parts.first().ok_or(ModelError::EmptyDataset)?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for p in parts {
            if p.features != first.features || p.classes != first.classes {
                return Err(ModelError::DimensionError {
                    expected: first.features,
                    found: p.features,
                });
            }
            x.extend_from_slice(&p.x);
            y.extend_from_slice(&p.y);
        }
        Ok(Dataset {
            features: first.features,
            classes: first.classes,
            x,
            y,
        })
    }
}

/// Gaussian classes with diagonal covariance.
///
/// Before scaling, class `k` is centered at `separation * e_k` with noise
/// `std` per feature. Feature `f` (mean and noise) is then multiplied by
/// `scale_decay^f`, so `scale_decay = 1` gives isotropic classes and smaller
/// values give an ill-conditioned problem that gradient descent solves slowly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub features: usize,
    pub samples: usize,
    pub separation: f64,
    /// Per-feature standard deviation.
    pub std: f64,
    /// Geometric per-feature scale factor in `(0, 1]`.
    pub scale_decay: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 3,
            features: 20,
            samples: 600,
            separation: 1.5,
            std: 1.0,
            scale_decay: 1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.classes < 1 || self.features < 1 || self.samples < 1 {
            return Err(ModelError::SpecError(
                "classes, features and samples must be positive",
            ));
        }
        if self.classes > self.features {
            return Err(ModelError::SpecError(
                "need at least as many features as classes",
            ));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(ModelError::SpecError("std must be positive and finite"));
        }
        if !(self.scale_decay > 0.0 && self.scale_decay <= 1.0) {
            return Err(ModelError::SpecError("scale_decay must be in (0, 1]"));
        }
        if !self.separation.is_finite() {
            return Err(ModelError::SpecError("separation must be finite"));
        }
        Ok(())
    }
}

/// Draw `spec.samples` labeled points; identical seeds give identical data.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset, ModelError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(spec.samples * spec.features);
    let mut y = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let label = rng.gen_range(0..spec.classes);
        let mut scale = 1.0;
        for f in 0..spec.features {
            let mean = if f == label { spec.separation } else { 0.0 };
            x.push(scale * (mean + spec.std * standard_normal(&mut rng)));
            scale *= spec.scale_decay;
        }
        y.push(label);
    }
    Dataset::new(spec.features, spec.classes, x, y)
}
