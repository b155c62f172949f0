use alloc::vec::Vec;

use super::DagError;
use crate::math;

/// Own weight of a transaction:
/// `(|d_i| + rho * sum_dm) / (sum_d + sum_dm) * s_i * acc`, clamped to `[0, 1]`.
///
/// `sum_dm` is the data volume behind the models the transaction builds on.
pub fn own_weight(
    dataset_size: f64,
    rho: f64,
    sum_dm: f64,
    sum_d: f64,
    slots: f64,
    accuracy: f64,
) -> Result<f64, DagError> {
    let inputs_ok = [dataset_size, sum_dm, sum_d, slots]
        .iter()
        .all(|x| *x >= 0.0 && x.is_finite())
        && (0.0..=1.0).contains(&rho)
        && (0.0..=1.0).contains(&accuracy);
    if !inputs_ok {
        return Err(DagError::InvalidWeightInput);
    }
    let denom = sum_d + sum_dm;
    if denom <= 0.0 {
        return Err(DagError::DegenerateWeight);
    }
    Ok(((dataset_size + rho * sum_dm) / denom * slots * accuracy).clamp(0.0, 1.0))
}

/// `W + (1/M) sum_j (acc_j - W) w_j` over the direct approvers `(acc_j, w_j)`.
///
/// With `clamp`, the result never drops below `W`.
pub fn cumulative_weight(own: f64, approvers: &[(f64, f64)], clamp: bool) -> f64 {
    if approvers.is_empty() {
        return own;
    }
    let m = approvers.len() as f64;
    let cw = own
        + approvers
            .iter()
            .map(|&(acc, w)| (acc - own) * w)
            .sum::<f64>()
            / m;
    if clamp {
        cw.max(own)
    } else {
        cw
    }
}

/// Softmax of `cw_y - cw_x` over the candidates.
pub fn transition_probabilities(cw_x: f64, candidates: &[f64]) -> Result<Vec<f64>, DagError> {
    if candidates.is_empty() {
        return Err(DagError::NoSuccessors);
    }
    // Subtracting the maximum leaves the distribution unchanged and avoids overflow.
    let top = candidates
        .iter()
        .map(|c| c - cw_x)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = candidates
        .iter()
        .map(|c| math::exp(c - cw_x - top))
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn own_weight_examples() {
        assert_eq!(own_weight(100.0, 0.5, 100.0, 300.0, 1.0, 0.0).unwrap(), 0.0);
        let w = own_weight(100.0, 0.5, 100.0, 300.0, 1.0, 0.9).unwrap();
        assert!((w - 0.3375).abs() < 1e-12);
        assert_eq!(own_weight(500.0, 0.0, 0.0, 500.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(
            own_weight(10.0, 0.5, 0.0, 0.0, 1.0, 1.0),
            Err(DagError::DegenerateWeight)
        );
        assert_eq!(
            own_weight(10.0, 1.5, 0.0, 10.0, 1.0, 1.0),
            Err(DagError::InvalidWeightInput)
        );
        // Many slots saturate at 1.
        assert_eq!(own_weight(100.0, 0.5, 0.0, 100.0, 5.0, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn cumulative_weight_examples() {
        assert_eq!(cumulative_weight(0.4, &[], true), 0.4);
        assert!((cumulative_weight(0.4, &[(0.9, 0.5)], true) - 0.65).abs() < 1e-12);
        assert_eq!(cumulative_weight(0.4, &[(0.4, 0.8)], true), 0.4);
        assert!((cumulative_weight(0.4, &[(0.2, 0.5)], false) - 0.3).abs() < 1e-12);
        assert_eq!(cumulative_weight(0.4, &[(0.2, 0.5)], true), 0.4);
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transition_probabilities(0.3, &[0.9]).unwrap(), [1.0]);
        assert_eq!(
            transition_probabilities(0.3, &[0.5, 0.5]).unwrap(),
            [0.5, 0.5]
        );
        let p = transition_probabilities(0.0, &[1.0, 0.0]).unwrap();
        let e = core::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert_eq!(
            transition_probabilities(0.0, &[]),
            Err(DagError::NoSuccessors)
        );
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            cws in proptest::collection::vec(-5.0f64..5.0, 1..10),
            x in -5.0f64..5.0,
            shift in -100.0f64..100.0,
        ) {
            let p = transition_probabilities(x, &cws).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = cws.iter().map(|c| c + shift).collect();
            let q = transition_probabilities(x + shift, &shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn own_weight_is_scale_free(
            d in 1u32..1000, dm in 0u32..1000, extra in 0u32..1000,
            rho in 0.0f64..=1.0, acc in 0.0f64..=1.0, k in 1u32..100,
        ) {
            let (d, dm, total) = (d as f64, dm as f64, (d + extra) as f64);
            let k = k as f64;
            let a = own_weight(d, rho, dm, total, 1.0, acc).unwrap();
            let b = own_weight(k * d, rho, k * dm, k * total, 1.0, acc).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn clamped_cw_never_below_own(
            own in 0.0f64..=1.0,
            approvers in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..8),
        ) {
            let cw = cumulative_weight(own, &approvers, true);
            prop_assert!(cw >= own);
            prop_assert!(cw <= 1.0 + 1e-12);
        }
    }
}
