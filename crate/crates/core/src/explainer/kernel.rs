//! KernelSHAP: Shapley-kernel weighted least squares over coalitions.
//!
//! Efficiency is imposed exactly by eliminating the last coefficient, so
//! `sum(phi) = f(x) - v(empty)` holds up to rounding. Coalition selection fills
//! whole subset sizes from the extremes inward while the budget covers them and
//! samples the remaining sizes with complement pairing.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Cell;
use crate::error::{Error, Result};
use crate::models::PipelineModel;
use crate::rng::{Rng, SeedStream};

use super::exact::binomial;
use super::{Attribution, BackgroundSet, CoalitionGame};

/// One regression row: which features come from `x`, and its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionSample {
    pub mask: Vec<bool>,
    pub kernel_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionPlan {
    pub samples: Vec<CoalitionSample>,
    /// True when every proper coalition is present.
    pub enumerated: bool,
}

/// `2d + 2048`, capped at the number of proper coalitions.
pub fn default_budget(d: usize) -> usize {
    let wanted = 2 * d + 2048;
    proper_coalitions(d).map_or(wanted, |p| wanted.min(p))
}

fn proper_coalitions(d: usize) -> Option<usize> {
    if d >= usize::BITS as usize - 1 {
        None
    } else {
        Some((1usize << d) - 2)
    }
}

/// Shapley kernel `(d - 1) / (C(d, s) s (d - s))`.
pub(crate) fn shapley_kernel(d: usize, s: usize) -> f64 {
    (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64)
}

/// Chooses the coalitions (and their regression weights) for a budget.
pub fn plan_coalitions(d: usize, budget: usize, rng: &mut Rng) -> Result<CoalitionPlan> {
    if d < 2 {
        return Err(Error::validation("at least two features are required"));
    }
    if budget < d + 2 {
        return Err(Error::validation(format!(
            "coalition budget {budget} is below the minimum d + 2 = {}",
            d + 2
        )));
    }
    if proper_coalitions(d).is_some_and(|p| p <= budget) {
        let samples = (1..(1usize << d) - 1)
            .map(|m| {
                let mask: Vec<bool> = (0..d).map(|j| m >> j & 1 == 1).collect();
                let s = m.count_ones() as usize;
                CoalitionSample {
                    mask,
                    kernel_weight: shapley_kernel(d, s),
                }
            })
            .collect();
        return Ok(CoalitionPlan {
            samples,
            enumerated: true,
        });
    }

    // Sizes 1..=ceil((d-1)/2); sizes up to floor((d-1)/2) are paired with their complements.
    let num_sizes = (d - 1).div_ceil(2);
    let num_paired = (d - 1) / 2;
    let mut size_weight: Vec<f64> = (1..=num_sizes)
        .map(|s| (d - 1) as f64 / (s * (d - s)) as f64)
        .collect();
    for w in size_weight.iter_mut().take(num_paired) {
        *w *= 2.0;
    }
    let total: f64 = size_weight.iter().sum();
    for w in &mut size_weight {
        *w /= total;
    }

    let mut samples = Vec::new();
    let mut left = budget as f64;
    let mut remaining = size_weight.clone();
    let mut num_full = 0;
    for s in 1..=num_sizes {
        let paired = s <= num_paired;
        let count = binomial(d, s) * if paired { 2.0 } else { 1.0 };
        if left * remaining[s - 1] / count < 1.0 - 1e-8 {
            break;
        }
        num_full += 1;
        left -= count;
        if remaining[s - 1] < 1.0 {
            let scale = 1.0 - remaining[s - 1];
            for r in &mut remaining {
                *r /= scale;
            }
        }
        let mut w = size_weight[s - 1] / binomial(d, s);
        if paired {
            w /= 2.0;
        }
        for_each_combination(d, s, |idx| {
            let mut mask = vec![false; d];
            for &i in idx {
                mask[i] = true;
            }
            if paired {
                let complement = mask.iter().map(|m| !m).collect();
                samples.push(CoalitionSample {
                    mask,
                    kernel_weight: w,
                });
                samples.push(CoalitionSample {
                    mask: complement,
                    kernel_weight: w,
                });
            } else {
                samples.push(CoalitionSample {
                    mask,
                    kernel_weight: w,
                });
            }
        });
    }

    let n_fixed = samples.len();
    let mut samples_left = budget.saturating_sub(n_fixed);
    if num_full < num_sizes && samples_left > 0 {
        let mut draw_weight: Vec<f64> = size_weight.clone();
        for w in draw_weight.iter_mut().take(num_paired) {
            *w /= 2.0;
        }
        let draw_weight = &draw_weight[num_full..];
        let dist = WeightedIndex::new(draw_weight)
            .map_err(|e| Error::validation(format!("coalition size weights: {e}")))?;
        let max_draws = 4 * samples_left;
        let mut used: HashMap<Vec<bool>, usize> = HashMap::new();
        let mut draws = 0;
        while samples_left > 0 && draws < max_draws {
            draws += 1;
            let s = dist.sample(rng) + num_full + 1;
            let mut mask = vec![false; d];
            for i in sample(rng, d, s) {
                mask[i] = true;
            }
            let paired = s <= num_paired;
            let slot = match used.get(&mask) {
                Some(&at) => {
                    samples[at].kernel_weight += 1.0;
                    Some(at)
                }
                None => {
                    used.insert(mask.clone(), samples.len());
                    samples_left -= 1;
                    samples.push(CoalitionSample {
                        mask: mask.clone(),
                        kernel_weight: 1.0,
                    });
                    None
                }
            };
            if samples_left > 0 && paired {
                let complement: Vec<bool> = mask.iter().map(|m| !m).collect();
                match slot {
                    Some(at) => samples[at + 1].kernel_weight += 1.0,
                    None => {
                        samples_left -= 1;
                        samples.push(CoalitionSample {
                            mask: complement,
                            kernel_weight: 1.0,
                        });
                    }
                }
            }
        }
        let weight_left: f64 = size_weight[num_full..].iter().sum();
        let drawn: f64 = samples[n_fixed..].iter().map(|c| c.kernel_weight).sum();
        if drawn > 0.0 {
            for c in &mut samples[n_fixed..] {
                c.kernel_weight *= weight_left / drawn;
            }
        }
    }
    Ok(CoalitionPlan {
        samples,
        enumerated: false,
    })
}

/// Calls `f` on every `s`-subset of `0..d` in lexicographic order.
fn for_each_combination(d: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < d - s + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// KernelSHAP estimate with all coalition randomness keyed by `explainer_seed`.
pub fn kernel_shap(
    model: &PipelineModel,
    x: &[Cell],
    bg: &BackgroundSet,
    n_coalitions: usize,
    explainer_seed: u64,
) -> Result<Attribution> {
    let d = model.dim();
    let game = CoalitionGame::new(model, x, bg)?;
    let mut rng = SeedStream::new(explainer_seed).fork("coalitions").rng();
    let plan = plan_coalitions(d, n_coalitions, &mut rng)?;
    let base = game.empty_value();
    let fx = game.full_value();
    let masks: Vec<Vec<bool>> = plan.samples.iter().map(|c| c.mask.clone()).collect();
    let values = game.values(&masks);
    let phi = solve_constrained(&plan.samples, &values, base, fx)?;
    Ok(Attribution {
        phi,
        base_value: base,
        prediction: fx,
        coalitions_evaluated: plan.samples.len() + 2,
        enumerated: plan.enumerated,
    })
}

/// Weighted least squares with `sum(phi) = fx - base`, solved by Householder QR
/// after substituting `phi_last = (fx - base) - sum(phi_rest)`.
fn solve_constrained(
    samples: &[CoalitionSample],
    values: &[f64],
    base: f64,
    fx: f64,
) -> Result<Vec<f64>> {
    let d = samples[0].mask.len();
    let p = d - 1;
    let n = samples.len();
    let gap = fx - base;
    let mut a = DMatrix::<f64>::zeros(n, p);
    let mut b = DVector::<f64>::zeros(n);
    for (r, (c, &v)) in samples.iter().zip(values).enumerate() {
        let sw = c.kernel_weight.sqrt();
        let last = f64::from(u8::from(c.mask[p]));
        for j in 0..p {
            a[(r, j)] = sw * (f64::from(u8::from(c.mask[j])) - last);
        }
        b[r] = sw * (v - base - last * gap);
    }
    if n < p {
        return Err(Error::RankDeficient {
            rank: n,
            expected: p,
        });
    }
    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = diag_max * 1e-10;
    let rank = (0..p).filter(|&i| r[(i, i)].abs() > tol).count();
    if rank < p || diag_max == 0.0 {
        return Err(Error::RankDeficient { rank, expected: p });
    }
    let qtb = qr.q().transpose() * b;
    let w = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { rank, expected: p })?;
    let mut phi: Vec<f64> = w.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(gap - rest);
    Ok(phi)
}
