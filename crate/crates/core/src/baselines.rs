//! Randomized null models for calibrating observed disagreement.
//!
//! The l2 reference comes from a Dirichlet model: an attribution magnitude
//! vector `X = T * M` with `M ~ Dirichlet(kappa * m)`, where the first `k`
//! features share mass `rho` and the remaining `d - k` share `1 - rho`. Two
//! independent draws satisfy
//!
//! ```text
//! E ||X - Y||^2 = 2 T^2 / (kappa + 1) * (1 - rho^2 / k - (1 - rho)^2 / (d - k))
//! ```
//!
//! Rank metrics are calibrated against pairs of independent Mallows
//! permutations around the identity. Because Jaccard, RBO and Kendall-tau are
//! invariant under a common relabeling of both rankings, the identity center
//! loses no generality.
//!
//! Monte Carlo loops are split into fixed-size chunks, each with its own
//! forked stream, and the chunk results are combined in chunk order, so
//! estimates do not depend on the number of worker threads.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{default_rbo_p, kendall_tau, rbo_sensitivity, topk_jaccard, MetricKind};
use crate::rng::{Rng, SeedStream};
use crate::types::Ranking;

/// Samples per Monte Carlo work unit.
const CHUNK: usize = 4096;

/// Default number of Mallows pairs per baseline estimate.
pub const DEFAULT_MALLOWS_SAMPLES: usize = 20_000;

/// Total attribution mass used when no empirical value is available.
pub const DEFAULT_TOTAL_MASS: f64 = 0.4;
pub const DEFAULT_RHOS: [f64; 3] = [0.6, 0.7, 0.8];
pub const DEFAULT_KAPPAS: [f64; 11] = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0];
pub const DEFAULT_QS: [f64; 3] = [0.3, 0.4, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletNullConfig {
    pub d: usize,
    pub k: usize,
    /// Total absolute attribution mass `T`.
    pub total_mass: f64,
    pub rho: f64,
    pub kappa: f64,
}

impl DirichletNullConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.d {
            return Err(Error::validation(format!(
                "Dirichlet null needs 1 <= k < d (k = {}, d = {})",
                self.k, self.d
            )));
        }
        if !(self.total_mass > 0.0 && self.total_mass.is_finite()) {
            return Err(Error::validation(format!(
                "total mass {} must be positive",
                self.total_mass
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::validation(format!(
                "concentration {} must be positive",
                self.kappa
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::validation(format!(
                "top-mass fraction {} must lie in [0, 1]",
                self.rho
            )));
        }
        Ok(())
    }

    /// Mean simplex point `m`.
    pub fn mean_shares(&self) -> Vec<f64> {
        let top = self.rho / self.k as f64;
        let rest = (1.0 - self.rho) / (self.d - self.k) as f64;
        (0..self.d)
            .map(|i| if i < self.k { top } else { rest })
            .collect()
    }

    /// Dirichlet parameters `kappa * m`, all of which must be positive.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let alphas: Vec<f64> = self.mean_shares().iter().map(|m| self.kappa * m).collect();
        if let Some(i) = alphas.iter().position(|&a| a <= 0.0) {
            return Err(Error::validation(format!(
                "Dirichlet parameter {i} is {} (top-mass fraction must lie strictly inside (0, 1))",
                alphas[i]
            )));
        }
        Ok(alphas)
    }
}

/// Closed-form expected squared l2 distance between two independent draws.
pub fn dirichlet_l2_expectation(cfg: &DirichletNullConfig) -> Result<f64> {
    cfg.validate()?;
    let k = cfg.k as f64;
    let rest = (cfg.d - cfg.k) as f64;
    let t = cfg.total_mass;
    Ok(2.0 * t * t / (cfg.kappa + 1.0)
        * (1.0 - cfg.rho * cfg.rho / k - (1.0 - cfg.rho) * (1.0 - cfg.rho) / rest))
}

/// Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    fn from_chunks(chunks: &[(f64, f64)], n: usize) -> Self {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &(s, q) in chunks {
            sum += s;
            sum_sq += q;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / nf).sqrt(),
            n_samples: n,
        }
    }
}

/// Runs `n` draws of `draw` in seeded chunks and returns per-chunk `(sum, sum of squares)`.
fn chunked<F>(n: usize, stream: SeedStream, draw: F) -> Vec<(f64, f64)>
where
    F: Fn(&mut Rng) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.fork_index("chunk", c as u64).rng();
            let len = CHUNK.min(n - c * CHUNK);
            let mut s = 0.0;
            let mut q = 0.0;
            for _ in 0..len {
                let v = draw(&mut rng);
                s += v;
                q += v * v;
            }
            (s, q)
        })
        .collect()
}

/// Draws `M ~ Dirichlet(alphas)` into `out` by normalizing Gamma variates.
pub fn sample_dirichlet(gammas: &[Gamma<f64>], rng: &mut Rng, out: &mut [f64]) {
    let mut total = 0.0;
    for (o, g) in out.iter_mut().zip(gammas) {
        *o = g.sample(rng);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn gammas(alphas: &[f64]) -> Result<Vec<Gamma<f64>>> {
    alphas
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::validation(format!("Gamma({a}, 1): {e}"))))
        .collect()
}

/// Monte Carlo estimate of `E ||X - Y||^2` from `n_samples` independent pairs.
pub fn dirichlet_l2_monte_carlo(
    cfg: &DirichletNullConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::validation("Monte Carlo needs at least one sample"));
    }
    let g = gammas(&cfg.alphas()?)?;
    let d = cfg.d;
    let t = cfg.total_mass;
    let stream = SeedStream::new(seed).fork("dirichlet");
    let chunks = chunked(n_samples, stream, |rng| {
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        sample_dirichlet(&g, rng, &mut x);
        sample_dirichlet(&g, rng, &mut y);
        x.iter().zip(&y).map(|(a, b)| (t * (a - b)).powi(2)).sum()
    });
    Ok(McEstimate::from_chunks(&chunks, n_samples))
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "Mallows dispersion {q} must lie in [0, 1)"
        )))
    }
}

/// Draws from Mallows(identity, q) by repeated insertion.
///
/// Item `j` (0-based) is inserted `r` places before the end of the current
/// list of `j` items with probability `q^r / sum_{s<=j} q^s`, adding exactly
/// `r` inversions.
pub fn mallows_draw(d: usize, q: f64, rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(d);
    let mut weights: Vec<f64> = Vec::with_capacity(d);
    for j in 0..d {
        weights.push(q.powi(j as i32));
        let total: f64 = weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut r = 0;
        let mut acc = weights[0];
        while acc <= u && r < j {
            r += 1;
            acc += weights[r];
        }
        order.insert(j - r, j);
    }
    order
}

/// One Mallows(identity, q) ranking drawn from a stream keyed by `seed`.
pub fn mallows_sample(d: usize, q: f64, seed: u64) -> Result<Ranking> {
    check_q(q)?;
    let mut rng = SeedStream::new(seed).fork("mallows").rng();
    Ranking::from_order(mallows_draw(d, q, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MallowsNullConfig {
    pub d: usize,
    pub q: f64,
    /// Top-k depth for the Jaccard functional.
    pub k: usize,
    /// RBO persistence; `None` means `1 - 1/d`.
    pub p: Option<f64>,
    pub n_samples: usize,
}

impl MallowsNullConfig {
    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if self.d < 2 {
            return Err(Error::validation("Mallows null needs d >= 2"));
        }
        if self.k == 0 || self.k > self.d {
            return Err(Error::validation(format!(
                "top-k depth {} must lie in 1..={}",
                self.k, self.d
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::validation("Monte Carlo needs at least one sample"));
        }
        let p = self.rbo_p();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::validation(format!(
                "RBO persistence {p} must lie in (0, 1)"
            )));
        }
        Ok(())
    }

    pub fn rbo_p(&self) -> f64 {
        self.p.unwrap_or_else(|| default_rbo_p(self.d))
    }
}

fn rank_functional(
    functional: MetricKind,
    cfg: &MallowsNullConfig,
    a: &Ranking,
    b: &Ranking,
) -> f64 {
    match functional {
        MetricKind::JaccardTopk => topk_jaccard(a, b, cfg.k).expect("validated"),
        MetricKind::Rbo => rbo_sensitivity(a, b, cfg.rbo_p()).expect("validated"),
        MetricKind::KendallTau => kendall_tau(a, b).expect("validated") as f64,
        MetricKind::L2 => unreachable!("checked by caller"),
    }
}

/// Mean functional value over independent pairs drawn from Mallows(`center`, q).
pub fn mallows_baseline_centered(
    cfg: &MallowsNullConfig,
    functional: MetricKind,
    center: &Ranking,
    seed: u64,
) -> Result<McEstimate> {
    cfg.validate()?;
    if functional == MetricKind::L2 {
        return Err(Error::validation(
            "the Mallows null calibrates rank metrics only",
        ));
    }
    if center.len() != cfg.d {
        return Err(Error::validation("central ranking length differs from d"));
    }
    let stream = SeedStream::new(seed).fork("mallows-baseline");
    let relabel = center.order();
    let chunks = chunked(cfg.n_samples, stream, |rng| {
        let a: Vec<usize> = mallows_draw(cfg.d, cfg.q, rng)
            .iter()
            .map(|&i| relabel[i])
            .collect();
        let b: Vec<usize> = mallows_draw(cfg.d, cfg.q, rng)
            .iter()
            .map(|&i| relabel[i])
            .collect();
        let a = Ranking::from_order(a).expect("permutation");
        let b = Ranking::from_order(b).expect("permutation");
        rank_functional(functional, cfg, &a, &b)
    });
    Ok(McEstimate::from_chunks(&chunks, cfg.n_samples))
}

/// Mean functional value over independent pairs drawn from Mallows(identity, q).
pub fn mallows_baseline(
    cfg: &MallowsNullConfig,
    functional: MetricKind,
    seed: u64,
) -> Result<McEstimate> {
    mallows_baseline_centered(cfg, functional, &Ranking::identity(cfg.d), seed)
}

/// Grid of null-model hyperparameters swept to form a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "null", rename_all = "lowercase")]
pub enum BaselineSweep {
    Dirichlet {
        d: usize,
        k: usize,
        total_mass: f64,
        rhos: Vec<f64>,
        kappas: Vec<f64>,
    },
    Mallows {
        d: usize,
        k: usize,
        p: Option<f64>,
        qs: Vec<f64>,
        n_samples: usize,
    },
}

impl BaselineSweep {
    /// Default l2 sweep: rho in {0.6, 0.7, 0.8}, kappa in 5..=15.
    pub fn default_l2(d: usize, k: usize, total_mass: f64) -> Self {
        BaselineSweep::Dirichlet {
            d,
            k,
            total_mass,
            rhos: DEFAULT_RHOS.to_vec(),
            kappas: DEFAULT_KAPPAS.to_vec(),
        }
    }

    /// Default rank sweep: q in {0.3, 0.4, 0.5} with 20,000 pairs each.
    pub fn default_rank(d: usize, k: usize, p: Option<f64>) -> Self {
        BaselineSweep::Mallows {
            d,
            k,
            p,
            qs: DEFAULT_QS.to_vec(),
            n_samples: DEFAULT_MALLOWS_SAMPLES,
        }
    }

    /// The default sweep appropriate for `metric`.
    pub fn default_for(
        metric: MetricKind,
        d: usize,
        k: usize,
        total_mass: f64,
        p: Option<f64>,
    ) -> Self {
        match metric {
            MetricKind::L2 => Self::default_l2(d, k, total_mass),
            _ => Self::default_rank(d, k, p),
        }
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "null", rename_all = "lowercase")]
pub enum BandPoint {
    Dirichlet {
        config: DirichletNullConfig,
        expected_squared: f64,
        /// `sqrt(expected_squared)`, comparable with observed distances.
        rms: f64,
    },
    Mallows {
        config: MallowsNullConfig,
        estimate: McEstimate,
    },
}

impl BandPoint {
    /// Value on the scale of the observed metric.
    pub fn value(&self) -> f64 {
        match self {
            BandPoint::Dirichlet { rms, .. } => *rms,
            BandPoint::Mallows { estimate, .. } => estimate.mean,
        }
    }
}

/// `[min, max]` of a null expectation over a hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineBand {
    pub metric_kind: MetricKind,
    pub lower: f64,
    pub upper: f64,
    /// Band of the squared-distance expectation (l2 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squared: Option<(f64, f64)>,
    pub seed: u64,
    pub points: Vec<BandPoint>,
}

pub fn baseline_band(metric: MetricKind, sweep: &BaselineSweep, seed: u64) -> Result<BaselineBand> {
    let points: Vec<BandPoint> = match (metric, sweep) {
        (
            MetricKind::L2,
            BaselineSweep::Dirichlet {
                d,
                k,
                total_mass,
                rhos,
                kappas,
            },
        ) => {
            let mut points = Vec::with_capacity(rhos.len() * kappas.len());
            for &rho in rhos {
                for &kappa in kappas {
                    let config = DirichletNullConfig {
                        d: *d,
                        k: *k,
                        total_mass: *total_mass,
                        rho,
                        kappa,
                    };
                    let expected_squared = dirichlet_l2_expectation(&config)?;
                    points.push(BandPoint::Dirichlet {
                        config,
                        expected_squared,
                        rms: expected_squared.sqrt(),
                    });
                }
            }
            points
        }
        (
            MetricKind::JaccardTopk | MetricKind::Rbo | MetricKind::KendallTau,
            BaselineSweep::Mallows {
                d,
                k,
                p,
                qs,
                n_samples,
            },
        ) => qs
            .iter()
            .map(|&q| {
                let config = MallowsNullConfig {
                    d: *d,
                    q,
                    k: *k,
                    p: *p,
                    n_samples: *n_samples,
                };
                let estimate = mallows_baseline(&config, metric, seed)?;
                Ok(BandPoint::Mallows { config, estimate })
            })
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::validation(format!(
                "metric `{metric}` cannot be calibrated with this null model"
            )))
        }
    };
    if points.is_empty() {
        return Err(Error::validation("baseline sweep is empty"));
    }
    let values: Vec<f64> = points.iter().map(BandPoint::value).collect();
    let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let squared_values: Vec<f64> = points
        .iter()
        .filter_map(|p| match p {
            BandPoint::Dirichlet {
                expected_squared, ..
            } => Some(*expected_squared),
            BandPoint::Mallows { .. } => None,
        })
        .collect();
    let squared = (!squared_values.is_empty()).then(|| {
        (
            squared_values.iter().copied().fold(f64::INFINITY, f64::min),
            squared_values
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        )
    });
    Ok(BaselineBand {
        metric_kind: metric,
        lower,
        upper,
        squared,
        seed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::types::Ranking;

    fn cfg(d: usize, k: usize, t: f64, rho: f64, kappa: f64) -> DirichletNullConfig {
        DirichletNullConfig {
            d,
            k,
            total_mass: t,
            rho,
            kappa,
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(
            dirichlet_l2_expectation(&cfg(2, 1, 1.0, 0.5, 1.0)).unwrap(),
            0.5
        );
        assert!(dirichlet_l2_expectation(&cfg(16, 3, 0.4, 0.7, 1e9)).unwrap() < 1e-9);
        assert!(dirichlet_l2_expectation(&cfg(3, 3, 0.4, 0.7, 10.0)).is_err());
        assert!(dirichlet_l2_expectation(&cfg(3, 0, 0.4, 0.7, 10.0)).is_err());
    }

    /// Independent oracle: the variance/covariance identity `(1 - sum m_i^2) / (kappa + 1)`.
    #[test]
    fn closed_form_matches_moment_identity() {
        for (d, k, rho, kappa) in [(16, 3, 0.7, 10.0), (5, 2, 0.6, 5.0), (8, 1, 0.9, 2.5)] {
            let c = cfg(d, k, 0.4, rho, kappa);
            let m = c.mean_shares();
            let sum_sq: f64 = m.iter().map(|v| v * v).sum();
            let oracle = 2.0 * 0.4 * 0.4 * (1.0 - sum_sq) / (kappa + 1.0);
            assert!((dirichlet_l2_expectation(&c).unwrap() - oracle).abs() < 1e-15);
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let c = cfg(16, 3, 0.4, 0.7, 10.0);
        let est = dirichlet_l2_monte_carlo(&c, 50_000, 1).unwrap();
        let exact = dirichlet_l2_expectation(&c).unwrap();
        assert!(
            (est.mean - exact).abs() < 3.0 * est.std_error,
            "{est:?} vs {exact}"
        );
        assert_eq!(est, dirichlet_l2_monte_carlo(&c, 50_000, 1).unwrap());
        assert!(dirichlet_l2_monte_carlo(&cfg(4, 1, 0.4, 1.0, 10.0), 10, 1).is_err());
    }

    #[test]
    fn dirichlet_draws_lie_on_simplex() {
        let c = cfg(6, 2, 1.0, 0.5, 1.0);
        let g = gammas(&c.alphas().unwrap()).unwrap();
        let mut rng = SeedStream::new(3).rng();
        let mut m = vec![0.0; 6];
        let mut first = 0.0;
        let n = 20_000;
        for _ in 0..n {
            sample_dirichlet(&g, &mut rng, &mut m);
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(m.iter().all(|&v| v >= 0.0));
            first += m[0];
        }
        // E[M_0] = rho / k = 0.25.
        assert!((first / n as f64 - 0.25).abs() < 0.01);
    }

    fn inversions(order: &[usize]) -> usize {
        let mut n = 0;
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                n += usize::from(order[i] > order[j]);
            }
        }
        n
    }

    fn all_perms(d: usize) -> Vec<Vec<usize>> {
        if d == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(d - 1) {
            for at in 0..=p.len() {
                let mut q = p.clone();
                q.insert(at, d - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn mallows_matches_enumeration_small() {
        let (d, q, n) = (4, 0.4f64, 100_000);
        let perms = all_perms(d);
        let z: f64 = perms.iter().map(|p| q.powi(inversions(p) as i32)).sum();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut rng = SeedStream::new(8).rng();
        for _ in 0..n {
            *counts.entry(mallows_draw(d, q, &mut rng)).or_default() += 1;
        }
        let tv: f64 = perms
            .iter()
            .map(|p| {
                let exact = q.powi(inversions(p) as i32) / z;
                let emp = *counts.get(p).unwrap_or(&0) as f64 / n as f64;
                (exact - emp).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn mallows_zero_dispersion_is_identity() {
        for seed in 0..20 {
            assert_eq!(mallows_sample(7, 0.0, seed).unwrap(), Ranking::identity(7));
        }
        assert!(mallows_sample(7, 1.0, 0).is_err());
        let c = MallowsNullConfig {
            d: 8,
            q: 0.0,
            k: 3,
            p: None,
            n_samples: 500,
        };
        assert_eq!(
            mallows_baseline(&c, MetricKind::JaccardTopk, 1)
                .unwrap()
                .mean,
            0.0
        );
        assert_eq!(mallows_baseline(&c, MetricKind::Rbo, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn mean_inversions_increase_with_q() {
        let mut last = -1.0;
        for i in 1..=9 {
            let c = MallowsNullConfig {
                d: 8,
                q: i as f64 / 10.0,
                k: 3,
                p: None,
                n_samples: 20_000,
            };
            // Kendall distance between two independent draws grows with dispersion.
            let m = mallows_baseline(&c, MetricKind::KendallTau, 2)
                .unwrap()
                .mean;
            assert!(m > last, "q = {}: {m} <= {last}", c.q);
            last = m;
        }
    }

    #[test]
    fn central_ranking_invariance() {
        let c = MallowsNullConfig {
            d: 10,
            q: 0.4,
            k: 3,
            p: None,
            n_samples: 20_000,
        };
        let center = Ranking::from_order(vec![7, 2, 9, 0, 4, 1, 8, 3, 6, 5]).unwrap();
        for f in [MetricKind::JaccardTopk, MetricKind::Rbo] {
            let a = mallows_baseline(&c, f, 5).unwrap();
            let b = mallows_baseline_centered(&c, f, &center, 6).unwrap();
            let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            assert!((a.mean - b.mean).abs() < 3.0 * se, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn bands() {
        let l2 = baseline_band(MetricKind::L2, &BaselineSweep::default_l2(16, 3, 0.4), 0).unwrap();
        assert_eq!(l2.points.len(), 33);
        let at =
            |rho: f64, kappa: f64| dirichlet_l2_expectation(&cfg(16, 3, 0.4, rho, kappa)).unwrap();
        let max_sq = [0.6, 0.7, 0.8]
            .iter()
            .map(|&r| at(r, 5.0))
            .fold(f64::MIN, f64::max);
        let min_sq = [0.6, 0.7, 0.8]
            .iter()
            .map(|&r| at(r, 15.0))
            .fold(f64::MAX, f64::min);
        assert_eq!(l2.squared, Some((min_sq, max_sq)));
        assert_eq!(l2.upper, max_sq.sqrt());
        assert_eq!(l2.lower, min_sq.sqrt());

        let single = BaselineSweep::Dirichlet {
            d: 16,
            k: 3,
            total_mass: 0.4,
            rhos: vec![0.7],
            kappas: vec![10.0],
        };
        let b = baseline_band(MetricKind::L2, &single, 0).unwrap();
        assert_eq!(b.lower, b.upper);

        let rank = BaselineSweep::Mallows {
            d: 16,
            k: 3,
            p: None,
            qs: vec![0.3, 0.4, 0.5],
            n_samples: 4000,
        };
        let j = baseline_band(MetricKind::JaccardTopk, &rank, 3).unwrap();
        let v: Vec<f64> = j.points.iter().map(BandPoint::value).collect();
        assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
        assert_eq!((j.lower, j.upper), (v[0], v[2]));
        assert_eq!(j, baseline_band(MetricKind::JaccardTopk, &rank, 3).unwrap());

        let zero = BaselineSweep::Mallows {
            d: 16,
            k: 3,
            p: None,
            qs: vec![0.0],
            n_samples: 100,
        };
        let z = baseline_band(MetricKind::JaccardTopk, &zero, 3).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));

        let empty = BaselineSweep::Mallows {
            d: 16,
            k: 3,
            p: None,
            qs: vec![],
            n_samples: 100,
        };
        assert!(baseline_band(MetricKind::Rbo, &empty, 0).is_err());
        assert!(baseline_band(MetricKind::L2, &rank, 0).is_err());
    }
}
