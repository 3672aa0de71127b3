//! Brute-force Shapley values over all `2^d` coalitions.

use crate::data::Cell;
use crate::error::{Error, Result};
use crate::models::PipelineModel;

use super::{Attribution, BackgroundSet, CoalitionGame};

/// Largest `d` accepted by [`exact_shapley`].
pub const MAX_EXACT_FEATURES: usize = 14;

/// `s! (d - s - 1)! / d!` for `s = 0..d`.
pub(crate) fn shapley_weights(d: usize) -> Vec<f64> {
    (0..d)
        .map(|s| {
            // s!(d-s-1)!/d! = 1 / (d * C(d-1, s))
            1.0 / (d as f64 * binomial(d - 1, s))
        })
        .collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Exact Shapley values of the coalition game at `x`.
pub fn exact_shapley(model: &PipelineModel, x: &[Cell], bg: &BackgroundSet) -> Result<Attribution> {
    let d = model.dim();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            d,
            max: MAX_EXACT_FEATURES,
        });
    }
    let game = CoalitionGame::new(model, x, bg)?;
    let n_masks = 1usize << d;
    let masks: Vec<Vec<bool>> = (0..n_masks)
        .map(|m| (0..d).map(|j| m >> j & 1 == 1).collect())
        .collect();
    let values = game.values(&masks);
    let weights = shapley_weights(d);
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for m in (0..n_masks).filter(|m| m & bit == 0) {
            acc += weights[m.count_ones() as usize] * (values[m | bit] - values[m]);
        }
        *p = acc;
    }
    Ok(Attribution {
        phi,
        base_value: values[0],
        prediction: values[n_masks - 1],
        coalitions_evaluated: n_masks,
        enumerated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::testutil::{identity_logreg, row};

    #[test]
    fn weights_match_factorial_formula() {
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        for d in 1..=10 {
            let w = shapley_weights(d);
            for s in 0..d {
                let expected = fact(s) * fact(d - s - 1) / fact(d);
                assert!((w[s] - expected).abs() < 1e-15 * expected.max(1.0));
            }
            // Every feature's weights over all subsets sum to one.
            let total: f64 = (0..d).map(|s| binomial(d - 1, s) * w[s]).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(14, 7), 3432.0);
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(4, 4), 1.0);
    }

    /// With a single background row the coalition game of a linear logit
    /// inside the sigmoid is not additive, so the linear case is checked
    /// through the logit: enumerate the game of `z = b + w.x` directly.
    #[test]
    fn additive_game_recovers_weighted_differences() {
        let w = [0.7, -1.3, 0.4];
        let x = [1.0, 2.0, -0.5];
        let z = [0.2, -1.0, 0.5];
        // Oracle: enumerate the additive game by hand.
        let v = |mask: u32| -> f64 {
            (0..3)
                .map(|j| w[j] * if mask >> j & 1 == 1 { x[j] } else { z[j] })
                .sum()
        };
        let d = 3;
        let weights = shapley_weights(d);
        for i in 0..d {
            let mut phi = 0.0;
            for m in 0..8u32 {
                if m >> i & 1 == 0 {
                    phi += weights[m.count_ones() as usize] * (v(m | 1 << i) - v(m));
                }
            }
            assert!((phi - w[i] * (x[i] - z[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn near_linear_logreg_matches_linearization() {
        // Tiny weights keep the sigmoid in its linear regime: f ~ 1/2 + (b + w.x)/4.
        let eps = 1e-4;
        let w = [0.7 * eps, -1.3 * eps, 0.4 * eps];
        let model = identity_logreg(w.to_vec(), 0.0);
        let x = row(&[1.0, 2.0, -0.5]);
        let z = [0.2, -1.0, 0.5];
        let bg = BackgroundSet::new(vec![row(&z)], vec![0], 0).unwrap();
        let a = exact_shapley(&model, &x, &bg).unwrap();
        let xs = [1.0, 2.0, -0.5];
        for i in 0..3 {
            let lin = w[i] * (xs[i] - z[i]) / 4.0;
            assert!((a.phi[i] - lin).abs() < 1e-10, "{} vs {lin}", a.phi[i]);
        }
    }

    #[test]
    fn axioms_on_logreg() {
        let model = identity_logreg(vec![1.0, 1.0, 0.0, -0.5], 0.2);
        let x = row(&[0.8, 0.8, 3.0, 1.0]);
        let bg = BackgroundSet::new(
            vec![
                row(&[0.0, 0.0, -1.0, 0.0]),
                row(&[1.0, 1.0, 2.0, 0.5]),
                row(&[0.5, 0.5, 0.0, -1.0]),
            ],
            vec![0, 1, 2],
            0,
        )
        .unwrap();
        let a = exact_shapley(&model, &x, &bg).unwrap();
        assert!(a.efficiency_residual() < 1e-9);
        // Symmetry: features 0 and 1 have equal weights, equal x, equal background.
        assert!((a.phi[0] - a.phi[1]).abs() < 1e-12);
        // Null player: zero weight.
        assert!(a.phi[2].abs() < 1e-9);
        assert_eq!(a.prediction, model.predict_proba(&x).unwrap());
    }

    #[test]
    fn too_many_features_is_rejected() {
        let model = identity_logreg(vec![0.1; 15], 0.0);
        let x = row(&[0.0; 15]);
        let bg = BackgroundSet::new(vec![x.clone()], vec![0], 0).unwrap();
        assert!(matches!(
            exact_shapley(&model, &x, &bg),
            Err(Error::TooManyFeatures { d: 15, max: 14 })
        ));
    }
}
