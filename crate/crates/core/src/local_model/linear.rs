use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Dataset, ModelError};
use crate::fedlearn::sgd_step;
use crate::math;

/// Multinomial logistic regression. Weights are `classes` rows of
/// `features` coefficients followed by a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearSoftmax {
    pub classes: usize,
    pub features: usize,
}

impl LinearSoftmax {
    pub fn for_data(data: &Dataset) -> Self {
        LinearSoftmax {
            classes: data.classes(),
            features: data.features(),
        }
    }

    pub fn dim(&self) -> usize {
        self.classes * (self.features + 1)
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn check(&self, w: &[f64], data: &Dataset) -> Result<(), ModelError> {
        if w.len() != self.dim() {
            return Err(ModelError::DimensionError {
                expected: self.dim(),
                found: w.len(),
            });
        }
        if data.features() != self.features || data.classes() != self.classes {
            return Err(ModelError::DimensionError {
                expected: self.features,
                found: data.features(),
            });
        }
        if data.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        Ok(())
    }

    pub fn logits(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let stride = self.features + 1;
        (0..self.classes)
            .map(|k| {
                let row = &w[k * stride..(k + 1) * stride];
                row[..self.features]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + row[self.features]
            })
            .collect()
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let z = self.logits(w, x);
        let mut best = 0;
        for (k, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = k;
            }
        }
        best
    }

    /// Mean cross-entropy over `data` and its exact gradient.
    pub fn loss_and_grad(&self, w: &[f64], data: &Dataset) -> Result<(f64, Vec<f64>), ModelError> {
        self.check(w, data)?;
        let stride = self.features + 1;
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for i in 0..data.len() {
            let x = data.row(i);
            let y = data.label(i);
            let z = self.logits(w, x);
            let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| math::exp(v - top)).collect();
            let total: f64 = exps.iter().sum();
            loss += math::ln(total) + top - z[y];
            for (k, e) in exps.iter().enumerate() {
                let diff = e / total - if k == y { 1.0 } else { 0.0 };
                let row = &mut grad[k * stride..(k + 1) * stride];
                for (g, xv) in row[..self.features].iter_mut().zip(x) {
                    *g += diff * xv;
                }
                row[self.features] += diff;
            }
        }
        let n = data.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    pub fn loss(&self, w: &[f64], data: &Dataset) -> Result<f64, ModelError> {
        Ok(self.loss_and_grad(w, data)?.0)
    }

    /// Fraction of samples whose argmax prediction is the label.
    pub fn accuracy(&self, w: &[f64], data: &Dataset) -> Result<f64, ModelError> {
        self.check(w, data)?;
        let correct = (0..data.len())
            .filter(|&i| self.predict(w, data.row(i)) == data.label(i))
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Cross-entropy loss and gradient of the linear-softmax model sized for `data`.
pub fn loss_and_grad(w: &[f64], data: &Dataset) -> Result<(f64, Vec<f64>), ModelError> {
    LinearSoftmax::for_data(data).loss_and_grad(w, data)
}

pub fn evaluate_accuracy(w: &[f64], data: &Dataset) -> Result<f64, ModelError> {
    LinearSoftmax::for_data(data).accuracy(w, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub eta: f64,
    /// Number of minibatch gradient evaluations.
    pub gradients: usize,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            eta: 0.05,
            gradients: 1000,
            batch_size: 16,
        }
    }
}

/// Minibatch SGD from `w0`. Batches are drawn with replacement.
/// Returns the final weights and the number of gradients computed.
pub fn train_local<R: Rng + ?Sized>(
    w0: &[f64],
    data: &Dataset,
    params: &TrainParams,
    rng: &mut R,
) -> Result<(Vec<f64>, usize), ModelError> {
    if params.gradients == 0 || params.batch_size == 0 {
        return Err(ModelError::SpecError(
            "gradients and batch size must be positive",
        ));
    }
    let model = LinearSoftmax::for_data(data);
    model.check(w0, data)?;
    let mut w = w0.to_vec();
    let mut idx = vec![0usize; params.batch_size];
    for iteration in 0..params.gradients {
        idx.iter_mut()
            .for_each(|i| *i = rng.gen_range(0..data.len()));
        let (loss, grad) = model.loss_and_grad(&w, &data.subset(&idx))?;
        if !loss.is_finite() {
            return Err(ModelError::DivergenceError { iteration });
        }
        w = sgd_step(&w, &grad, params.eta)
            .map_err(|_| ModelError::DivergenceError { iteration })?;
    }
    Ok((w, params.gradients))
}

/// Least-squares linear model `y ~ w.x + b` with loss `(1/2n) sum (pred - y)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearRegression {
    pub features: usize,
}

impl LinearRegression {
    pub fn dim(&self) -> usize {
        self.features + 1
    }

    /// `x` holds `y.len()` rows of `features` values.
    pub fn loss_and_grad(
        &self,
        w: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        if w.len() != self.dim() {
            return Err(ModelError::DimensionError {
                expected: self.dim(),
                found: w.len(),
            });
        }
        if x.len() != y.len() * self.features {
            return Err(ModelError::DimensionError {
                expected: y.len() * self.features,
                found: x.len(),
            });
        }
        if y.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for (row, &target) in x.chunks(self.features).zip(y) {
            let r = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[self.features] - target;
            loss += 0.5 * r * r;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
            grad[self.features] += r;
        }
        let n = y.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::{gen_synthetic, SyntheticSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small() -> Dataset {
        gen_synthetic(
            &SyntheticSpec {
                classes: 3,
                features: 4,
                samples: 64,
                separation: 2.0,
                std: 1.0,
                scale_decay: 1.0,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn gradient_at_zero_has_closed_form() {
        let d = Dataset::new(2, 2, alloc::vec![1.0, -2.0], alloc::vec![1]).unwrap();
        let m = LinearSoftmax::for_data(&d);
        let (loss, g) = m.loss_and_grad(&m.zeros(), &d).unwrap();
        assert!((loss - math::ln(2.0)).abs() < 1e-15);
        // (softmax - onehot) x with softmax = (1/2, 1/2), onehot = (0, 1).
        assert_eq!(g, [0.5, -1.0, 0.5, -0.5, 1.0, -0.5]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = small();
        let m = LinearSoftmax::for_data(&d);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let w: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = m.loss_and_grad(&w, &d).unwrap();
        let h = 1e-6;
        for k in 0..m.dim() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (m.loss(&plus, &d).unwrap() - m.loss(&minus, &d).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "coordinate {k}");
        }
    }

    #[test]
    fn duplicated_batch_changes_nothing() {
        let d = small();
        let twice = Dataset::concat(&[&d, &d]).unwrap();
        let w: Vec<f64> = (0..15).map(|i| i as f64 * 0.01).collect();
        let (l1, g1) = loss_and_grad(&w, &d).unwrap();
        let (l2, g2) = loss_and_grad(&w, &twice).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn accuracy_fixtures() {
        // Two classes on a line: the model predicts class 1 for x > 0.
        let w = [-1.0, 0.0, 1.0, 0.0];
        let d = Dataset::new(
            1,
            2,
            alloc::vec![-1.0, 2.0, 3.0, -4.0],
            alloc::vec![0, 1, 1, 1],
        )
        .unwrap();
        assert_eq!(evaluate_accuracy(&w, &d).unwrap(), 0.75);
        let perfect = Dataset::new(1, 2, alloc::vec![-1.0, 2.0], alloc::vec![0, 1]).unwrap();
        assert_eq!(evaluate_accuracy(&w, &perfect).unwrap(), 1.0);
        let flipped = Dataset::new(1, 2, alloc::vec![-1.0, 2.0], alloc::vec![1, 0]).unwrap();
        assert_eq!(evaluate_accuracy(&w, &flipped).unwrap(), 0.0);
        let empty = Dataset::new(1, 2, alloc::vec![], alloc::vec![]).unwrap();
        assert_eq!(evaluate_accuracy(&w, &empty), Err(ModelError::EmptyDataset));
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let spec = SyntheticSpec {
            classes: 2,
            features: 4,
            samples: 400,
            separation: 6.0,
            std: 1.0,
            scale_decay: 1.0,
        };
        let d = gen_synthetic(&spec, 3).unwrap();
        let m = LinearSoftmax::for_data(&d);
        let p = TrainParams {
            eta: 0.05,
            gradients: 500,
            batch_size: 16,
        };
        let (w, n) = train_local(&m.zeros(), &d, &p, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(n, 500);
        assert!(m.loss(&w, &d).unwrap() < m.loss(&m.zeros(), &d).unwrap());
        assert!(m.accuracy(&w, &d).unwrap() >= 0.99);
        let (w2, _) = train_local(&m.zeros(), &d, &p, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(w, w2);
        let frozen = TrainParams { eta: 0.0, ..p };
        let (w3, _) =
            train_local(&m.zeros(), &d, &frozen, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(w3, m.zeros());
    }

    #[test]
    fn identical_means_stay_at_chance() {
        let spec = SyntheticSpec {
            classes: 2,
            features: 4,
            samples: 2000,
            separation: 0.0,
            std: 1.0,
            scale_decay: 1.0,
        };
        let train = gen_synthetic(&spec, 5).unwrap();
        let test = gen_synthetic(&spec, 6).unwrap();
        let m = LinearSoftmax::for_data(&train);
        let (w, _) = train_local(
            &m.zeros(),
            &train,
            &TrainParams::default(),
            &mut ChaCha20Rng::seed_from_u64(7),
        )
        .unwrap();
        assert!((m.accuracy(&w, &test).unwrap() - 0.5).abs() <= 0.05);
    }

    #[test]
    fn divergence_reported() {
        let d = Dataset::new(1, 2, alloc::vec![10.0], alloc::vec![0]).unwrap();
        // The first step moves the weight by 5 * eta, past f64::MAX.
        let p = TrainParams {
            eta: 1e308,
            gradients: 5,
            batch_size: 1,
        };
        let m = LinearSoftmax::for_data(&d);
        assert!(matches!(
            train_local(&m.zeros(), &d, &p, &mut ChaCha20Rng::seed_from_u64(0)),
            Err(ModelError::DivergenceError { .. })
        ));
    }

    #[test]
    fn regression_gradient() {
        let m = LinearRegression { features: 2 };
        let x = [1.0, 2.0, -1.0, 0.5];
        let y = [3.0, -1.0];
        let w = [0.5, -0.25, 0.1];
        let (loss, g) = m.loss_and_grad(&w, &x, &y).unwrap();
        // residuals: 0.5 - 0.5 + 0.1 - 3 = -2.9 ; -0.5 - 0.125 + 0.1 + 1 = 0.475
        let (r1, r2) = (-2.9, 0.475);
        assert!((loss - (r1 * r1 + r2 * r2) / 4.0).abs() < 1e-12);
        let expected = [
            (r1 * 1.0 + -r2) / 2.0,
            (r1 * 2.0 + r2 * 0.5) / 2.0,
            (r1 + r2) / 2.0,
        ];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
