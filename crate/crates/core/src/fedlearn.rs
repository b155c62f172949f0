//! Federated optimization primitives: SGD steps, local and global losses,
//! weighted gradient aggregation with absent entries, model averaging and
//! the per-round time budget.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum FedError {
    DimensionError {
        expected: usize,
        found: usize,
    },
    EmptyDataset,
    /// Every aggregation entry was absent.
    NoUpdates,
    /// Weights sum to zero (or are negative / non-finite).
    DegenerateWeights,
    InvalidStep(f64),
    NonFinite,
}

impl fmt::Display for FedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FedError::DimensionError { expected, found } => {
                write!(f, "expected dimension {expected}, found {found}")
            }
            FedError::EmptyDataset => write!(f, "dataset is empty"),
            FedError::NoUpdates => write!(f, "no participant delivered an update"),
            FedError::DegenerateWeights => write!(f, "aggregation weights sum to zero"),
            FedError::InvalidStep(eta) => {
                write!(f, "step size {eta} must be finite and non-negative")
            }
            FedError::NonFinite => write!(f, "non-finite value in model or gradient"),
        }
    }
}

impl core::error::Error for FedError {}

fn check_dim(expected: usize, found: usize) -> Result<(), FedError> {
    if expected == found {
        Ok(())
    } else {
        Err(FedError::DimensionError { expected, found })
    }
}

/// `w - eta * grad`.
pub fn sgd_step(w: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>, FedError> {
    check_dim(w.len(), grad.len())?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(FedError::InvalidStep(eta));
    }
    let out: Vec<f64> = w.iter().zip(grad).map(|(a, g)| a - eta * g).collect();
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(FedError::NonFinite)
    }
}

/// One step on the mean of per-user gradients: `w - eta/|U| * sum_u g_u`.
pub fn fedsgd_step(w: &[f64], user_grads: &[Vec<f64>], eta: f64) -> Result<Vec<f64>, FedError> {
    if user_grads.is_empty() {
        return Err(FedError::NoUpdates);
    }
    let mut mean = vec![0.0; w.len()];
    for g in user_grads {
        check_dim(w.len(), g.len())?;
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x;
        }
    }
    let n = user_grads.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    sgd_step(w, &mean, eta)
}

/// Mean per-sample loss over one participant's data.
pub fn local_loss<S>(
    w: &[f64],
    samples: &[S],
    loss: impl Fn(&[f64], &S) -> f64,
) -> Result<f64, FedError> {
    if samples.is_empty() {
        return Err(FedError::EmptyDataset);
    }
    Ok(samples.iter().map(|s| loss(w, s)).sum::<f64>() / samples.len() as f64)
}

/// `(1/|M|) sum_i u_i F_i`; `multiplicities = None` means every `u_i = 1`.
pub fn global_loss(local_losses: &[f64], multiplicities: Option<&[f64]>) -> Result<f64, FedError> {
    if local_losses.is_empty() {
        return Err(FedError::EmptyDataset);
    }
    let total: f64 = match multiplicities {
        None => local_losses.iter().sum(),
        Some(u) => {
            check_dim(local_losses.len(), u.len())?;
            local_losses.iter().zip(u).map(|(f, u)| f * u).sum()
        }
    };
    Ok(total / local_losses.len() as f64)
}

/// One participant's slot in the global aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationEntry {
    /// `None` when the participant delivered nothing this round.
    pub gradient: Option<Vec<f64>>,
    /// Data share `alpha`.
    pub share: f64,
    /// Credibility `l` in `[0, 1]`.
    pub credibility: f64,
}

/// Weighted sum `G = sum alpha_k l_k G_k` and total weight `L` over present entries.
pub fn aggregate_sum(entries: &[AggregationEntry]) -> Result<(Vec<f64>, f64), FedError> {
    let mut present = entries
        .iter()
        .filter_map(|e| e.gradient.as_ref().map(|g| (e, g)));
    let (first, g0) = present.next().ok_or(FedError::NoUpdates)?;
    let dim = g0.len();
    let mut sum = vec![0.0; dim];
    let mut total = 0.0;
    for (e, g) in core::iter::once((first, g0)).chain(present) {
        check_dim(dim, g.len())?;
        if !(e.share >= 0.0 && e.share.is_finite() && (0.0..=1.0).contains(&e.credibility)) {
            return Err(FedError::DegenerateWeights);
        }
        let c = e.share * e.credibility;
        for (s, x) in sum.iter_mut().zip(g) {
            *s += c * x;
        }
        total += c;
    }
    Ok((sum, total))
}

/// `G_global = G / L` and `theta_new = theta_prev - eta * G_global`.
pub fn aggregate_finish(
    weighted_sum: &[f64],
    total_weight: f64,
    theta_prev: &[f64],
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>), FedError> {
    if !(total_weight > 0.0 && total_weight.is_finite()) {
        return Err(FedError::DegenerateWeights);
    }
    let global: Vec<f64> = weighted_sum.iter().map(|g| g / total_weight).collect();
    let theta = sgd_step(theta_prev, &global, eta)?;
    Ok((global, theta))
}

/// Weighted gradient aggregation over the present entries, then one step.
pub fn aggregate_global(
    entries: &[AggregationEntry],
    theta_prev: &[f64],
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>), FedError> {
    let (sum, total) = aggregate_sum(entries)?;
    aggregate_finish(&sum, total, theta_prev, eta)
}

/// `sum C_i w_i / sum C_i`.
pub fn weighted_average(models: &[(f64, &[f64])]) -> Result<Vec<f64>, FedError> {
    let (_, first) = models.first().ok_or(FedError::DegenerateWeights)?;
    let dim = first.len();
    let mut total = 0.0;
    for &(c, w) in models {
        check_dim(dim, w.len())?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(FedError::DegenerateWeights);
        }
        total += c;
    }
    if total <= 0.0 {
        return Err(FedError::DegenerateWeights);
    }
    // Normalizing first keeps a lone model exact.
    let mut out = vec![0.0; dim];
    for &(c, w) in models {
        let share = c / total;
        for (o, x) in out.iter_mut().zip(w) {
            *o += share * x;
        }
    }
    Ok(out)
}

/// Per-node time limits and the simulated duration of each iteration so far.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundBudget {
    /// `T_i` per node; an empty list means unlimited.
    pub limits: Vec<f64>,
    pub elapsed: Vec<f64>,
}

/// `sum elapsed <= min limits`.
pub fn time_budget_ok(budget: &RoundBudget) -> bool {
    let spent: f64 = budget.elapsed.iter().sum();
    let cap = budget.limits.iter().copied().fold(f64::INFINITY, f64::min);
    spent <= cap
}

/// True once the loss moved less than `tol` over the last `window` rounds.
pub fn loss_plateaued(losses: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 || losses.len() <= window {
        return false;
    }
    let last = losses[losses.len() - 1];
    let earlier = losses[losses.len() - 1 - window];
    (last - earlier).abs() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn sgd_examples() {
        assert_eq!(sgd_step(&[1.0, 2.0], &[0.0, 0.0], 0.5).unwrap(), [1.0, 2.0]);
        assert!(close(
            &sgd_step(&[1.0, 1.0], &[2.0, -1.0], 0.1).unwrap(),
            &[0.8, 1.1],
            1e-15
        ));
        let g = [0.3, -0.7];
        let two = sgd_step(&sgd_step(&[0.0, 0.0], &g, 0.1).unwrap(), &g, 0.1).unwrap();
        let one = sgd_step(&[0.0, 0.0], &[0.6, -1.4], 0.1).unwrap();
        assert!(close(&two, &one, 1e-15));
        assert_eq!(
            sgd_step(&[1.0], &[1.0, 2.0], 0.1),
            Err(FedError::DimensionError {
                expected: 1,
                found: 2
            })
        );
        assert!(sgd_step(&[1.0], &[1.0], -0.1).is_err());
        assert_eq!(
            sgd_step(&[1.0], &[f64::MAX], 1e10),
            Err(FedError::NonFinite)
        );
    }

    #[test]
    fn fedsgd_is_mean_step() {
        let w = fedsgd_step(&[0.0], &[vec![2.0], vec![4.0]], 1.0).unwrap();
        assert_eq!(w, [-3.0]);
        assert_eq!(fedsgd_step(&[0.0], &[], 1.0), Err(FedError::NoUpdates));
    }

    #[test]
    fn loss_examples() {
        let sq = |w: &[f64], s: &f64| (w[0] - s).powi(2);
        assert_eq!(local_loss(&[1.0], &[1.0], sq).unwrap(), 0.0);
        assert!((global_loss(&[0.2, 0.4], None).unwrap() - 0.3).abs() < 1e-15);
        assert!((global_loss(&[0.2, 0.4], Some(&[1.0, 1.0])).unwrap() - 0.3).abs() < 1e-15);
        let data = [0.5, 1.5, 3.0];
        let doubled = [0.5, 1.5, 3.0, 0.5, 1.5, 3.0];
        assert!(
            (local_loss(&[1.0], &data, sq).unwrap() - local_loss(&[1.0], &doubled, sq).unwrap())
                .abs()
                < 1e-15
        );
        assert_eq!(
            local_loss(&[1.0], &[] as &[f64], sq),
            Err(FedError::EmptyDataset)
        );
        assert_eq!(global_loss(&[], None), Err(FedError::EmptyDataset));
    }

    fn entry(g: Option<Vec<f64>>, share: f64) -> AggregationEntry {
        AggregationEntry {
            gradient: g,
            share,
            credibility: 1.0,
        }
    }

    #[test]
    fn aggregation_examples() {
        let (g, theta) =
            aggregate_global(&[entry(Some(vec![2.0, -1.0]), 1.0)], &[1.0, 1.0], 0.1).unwrap();
        assert_eq!(g, [2.0, -1.0]);
        assert_eq!(theta, sgd_step(&[1.0, 1.0], &[2.0, -1.0], 0.1).unwrap());

        let (g, _) = aggregate_global(
            &[entry(Some(vec![2.0]), 0.5), entry(Some(vec![4.0]), 0.5)],
            &[0.0],
            1.0,
        )
        .unwrap();
        assert_eq!(g, [3.0]);

        let with_absent = [
            entry(Some(vec![2.0]), 0.2),
            entry(None, 0.5),
            entry(Some(vec![5.0]), 0.3),
        ];
        let without = [entry(Some(vec![2.0]), 0.2), entry(Some(vec![5.0]), 0.3)];
        assert_eq!(
            aggregate_global(&with_absent, &[0.0], 1.0).unwrap(),
            aggregate_global(&without, &[0.0], 1.0).unwrap()
        );

        assert_eq!(
            aggregate_global(&[entry(None, 1.0)], &[0.0], 1.0),
            Err(FedError::NoUpdates)
        );
        assert_eq!(
            aggregate_global(&[entry(Some(vec![1.0]), 0.0)], &[0.0], 1.0),
            Err(FedError::DegenerateWeights)
        );
    }

    #[test]
    fn weighted_average_examples() {
        assert_eq!(
            weighted_average(&[(1.0, &[0.0]), (3.0, &[4.0])]).unwrap(),
            [3.0]
        );
        assert_eq!(
            weighted_average(&[(2.0, &[1.0, 3.0]), (2.0, &[3.0, 5.0])]).unwrap(),
            [2.0, 4.0]
        );
        assert_eq!(
            weighted_average(&[(0.7, &[1.5, -2.0])]).unwrap(),
            [1.5, -2.0]
        );
        assert_eq!(
            weighted_average(&[(0.0, &[1.0])]),
            Err(FedError::DegenerateWeights)
        );
        assert_eq!(weighted_average(&[]), Err(FedError::DegenerateWeights));
    }

    #[test]
    fn budget_examples() {
        assert!(time_budget_ok(&RoundBudget::default()));
        assert!(time_budget_ok(&RoundBudget {
            limits: vec![10.0, 8.0],
            elapsed: vec![3.0, 4.0]
        }));
        assert!(!time_budget_ok(&RoundBudget {
            limits: vec![12.0, 9.0],
            elapsed: vec![5.0, 5.0]
        }));
        assert!(time_budget_ok(&RoundBudget {
            limits: vec![],
            elapsed: vec![1e9]
        }));
    }

    #[test]
    fn plateau_detection() {
        assert!(!loss_plateaued(&[1.0, 1.0], 5, 1e-4));
        assert!(loss_plateaued(&[1.0; 6], 5, 1e-4));
        assert!(!loss_plateaued(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5], 5, 1e-4));
    }

    proptest! {
        #[test]
        fn uniform_weights_give_plain_mean(
            grads in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..6),
            c in 0.01f64..1.0,
        ) {
            let entries: Vec<AggregationEntry> = grads.iter().map(|g| entry(Some(g.clone()), c)).collect();
            let (g, _) = aggregate_global(&entries, &[0.0; 3], 1.0).unwrap();
            for k in 0..3 {
                let mean = grads.iter().map(|v| v[k]).sum::<f64>() / grads.len() as f64;
                prop_assert!((g[k] - mean).abs() < 1e-12);
            }
        }

        #[test]
        fn weighted_average_permutation_invariant_and_idempotent(
            models in proptest::collection::vec((0.1f64..5.0, proptest::collection::vec(-10.0f64..10.0, 2)), 1..6),
        ) {
            let a: Vec<(f64, &[f64])> = models.iter().map(|(c, w)| (*c, w.as_slice())).collect();
            let mut b = a.clone();
            b.reverse();
            let x = weighted_average(&a).unwrap();
            let y = weighted_average(&b).unwrap();
            prop_assert!(close(&x, &y, 1e-12));
            let same: Vec<(f64, &[f64])> = models.iter().map(|(c, _)| (*c, models[0].1.as_slice())).collect();
            prop_assert!(close(&weighted_average(&same).unwrap(), &models[0].1, 1e-12));
        }
    }
}
