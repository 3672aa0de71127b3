//! Pairwise disagreement between explanations of the same query.
//!
//! Magnitude metric: l2 distance. Rank metrics: top-k Jaccard distance,
//! rank-biased overlap sensitivity (`1 - RBO`) and the Kendall-tau inversion
//! count. Rank metrics only see the [`Ranking`] induced by `|phi|`, so they are
//! unchanged by positive rescaling of either vector.
//!
//! Aggregates sum sorted values, which makes them bitwise independent of the
//! order in which runs are supplied.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ExplanationVector, Ranking};

/// Default top-k depth for the Jaccard distance.
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    L2,
    JaccardTopk,
    Rbo,
    KendallTau,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::L2,
        MetricKind::JaccardTopk,
        MetricKind::Rbo,
        MetricKind::KendallTau,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::L2 => "l2",
            MetricKind::JaccardTopk => "jaccard_topk",
            MetricKind::Rbo => "rbo",
            MetricKind::KendallTau => "kendall_tau",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown metric `{s}`")))
    }
}

/// Metric parameters. `p = None` means `1 - 1/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub p: Option<f64>,
}

fn default_k() -> usize {
    DEFAULT_TOP_K
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOP_K,
            p: None,
        }
    }
}

impl MetricParams {
    /// The RBO persistence used for `d` features.
    pub fn rbo_p(&self, d: usize) -> f64 {
        self.p.unwrap_or_else(|| default_rbo_p(d))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::validation(format!(
                "top-k depth {} must lie in 1..={d}",
                self.k
            )));
        }
        check_p(self.rbo_p(d))
    }
}

/// `1 - 1/d`.
pub fn default_rbo_p(d: usize) -> f64 {
    1.0 - 1.0 / d as f64
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "RBO persistence {p} must lie in (0, 1)"
        )))
    }
}

fn check_lengths(a: &Ranking, b: &Ranking) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "rankings have different lengths ({} and {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// One metric value for one pair of explanations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDisagreement {
    pub metric_kind: MetricKind,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// Euclidean distance between two attribution vectors.
pub fn l2_distance(a: &ExplanationVector, b: &ExplanationVector) -> Result<f64> {
    if !a.same_schema(b) {
        return Err(Error::Schema(
            "explanations refer to different feature sets".into(),
        ));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `1 - |A ∩ B| / |A ∪ B|` for the top-`k` index sets.
pub fn topk_jaccard(a: &Ranking, b: &Ranking, k: usize) -> Result<f64> {
    check_lengths(a, b)?;
    let d = a.len();
    if k == 0 || k > d {
        return Err(Error::validation(format!(
            "top-k depth {k} must lie in 1..={d}"
        )));
    }
    let mut in_a = vec![false; d];
    for &i in a.top(k) {
        in_a[i] = true;
    }
    let inter = b.top(k).iter().filter(|&&i| in_a[i]).count();
    let union = 2 * k - inter;
    Ok((union - inter) as f64 / union as f64)
}

/// `1 - RBO_ext`, with `RBO_ext = (1-p) sum_{l=1..d} p^(l-1) A_l + p^d A_d` and
/// `A_l` the prefix overlap fraction at depth `l`.
pub fn rbo_sensitivity(a: &Ranking, b: &Ranking, p: f64) -> Result<f64> {
    check_lengths(a, b)?;
    check_p(p)?;
    if a.order() == b.order() {
        return Ok(0.0);
    }
    let d = a.len();
    let mut seen_a = vec![false; d];
    let mut seen_b = vec![false; d];
    let mut overlap = 0usize;
    let mut weight = 1.0;
    let mut sum = 0.0;
    let mut agreement = 0.0;
    for depth in 1..=d {
        let x = a.order()[depth - 1];
        let y = b.order()[depth - 1];
        if x == y {
            overlap += 1;
        } else {
            if seen_b[x] {
                overlap += 1;
            }
            if seen_a[y] {
                overlap += 1;
            }
        }
        seen_a[x] = true;
        seen_b[y] = true;
        agreement = overlap as f64 / depth as f64;
        sum += weight * agreement;
        weight *= p;
    }
    // `weight` is now p^d.
    let rbo = (1.0 - p) * sum + weight * agreement;
    Ok((1.0 - rbo).clamp(0.0, 1.0))
}

/// Number of discordant item pairs between two rankings.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<usize> {
    check_lengths(a, b)?;
    let pos_b = b.positions();
    let seq: Vec<usize> = a.order().iter().map(|&i| pos_b[i]).collect();
    let mut inversions = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    Ok(inversions)
}

/// Evaluates one metric on one pair of explanations.
pub fn pair_value(
    a: &ExplanationVector,
    b: &ExplanationVector,
    metric: MetricKind,
    params: &MetricParams,
) -> Result<f64> {
    if !a.same_schema(b) {
        return Err(Error::Schema(
            "explanations refer to different feature sets".into(),
        ));
    }
    match metric {
        MetricKind::L2 => l2_distance(a, b),
        MetricKind::JaccardTopk => topk_jaccard(&a.ranking(), &b.ranking(), params.k),
        MetricKind::Rbo => rbo_sensitivity(&a.ranking(), &b.ranking(), params.rbo_p(a.dim())),
        MetricKind::KendallTau => Ok(kendall_tau(&a.ranking(), &b.ranking())? as f64),
    }
}

/// Per-feature spread of attributions across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSensitivityProfile {
    pub feature_names: Vec<String>,
    /// Mean absolute difference over ordered pairs of distinct runs.
    pub sensitivity: Vec<f64>,
    /// Mean `|phi|` across runs.
    pub mean_abs: Vec<f64>,
    pub n_runs: usize,
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn check_runs(runs: &[ExplanationVector]) -> Result<()> {
    if runs.len() < 2 {
        return Err(Error::validation(format!(
            "need at least 2 runs, got {}",
            runs.len()
        )));
    }
    if runs.iter().any(|r| !r.same_schema(&runs[0])) {
        return Err(Error::Schema("runs refer to different feature sets".into()));
    }
    Ok(())
}

pub fn feature_sensitivity(runs: &[ExplanationVector]) -> Result<FeatureSensitivityProfile> {
    check_runs(runs)?;
    let n = runs.len();
    let d = runs[0].dim();
    let mut sensitivity = Vec::with_capacity(d);
    let mut mean_abs = Vec::with_capacity(d);
    for m in 0..d {
        let mut diffs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                diffs.push((runs[i].values()[m] - runs[j].values()[m]).abs());
            }
        }
        sensitivity.push(sorted_sum(diffs) * 2.0 / (n * (n - 1)) as f64);
        mean_abs.push(sorted_sum(runs.iter().map(|r| r.values()[m].abs()).collect()) / n as f64);
    }
    Ok(FeatureSensitivityProfile {
        feature_names: runs[0].feature_names().to_vec(),
        sensitivity,
        mean_abs,
        n_runs: n,
    })
}

/// Distribution of one metric over all unordered pairs of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub metric: MetricKind,
    pub mean: f64,
    pub median: f64,
    /// Values for pairs `(i, j)`, `i < j`, in lexicographic pair order.
    pub values: Vec<f64>,
}

impl PairwiseSummary {
    pub fn from_values(metric: MetricKind, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("no pairwise values to summarize"));
        }
        let (mean, median) = mean_median(&values);
        Ok(Self {
            metric,
            mean,
            median,
            values,
        })
    }
}

/// Mean and median of a nonempty slice, independent of its order.
pub fn mean_median(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    (mean, median)
}

/// Index pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

pub fn pairwise_aggregate(
    runs: &[ExplanationVector],
    metric: MetricKind,
    params: &MetricParams,
) -> Result<PairwiseSummary> {
    check_runs(runs)?;
    params.validate(runs[0].dim())?;
    let values = pairs(runs.len())
        .map(|(i, j)| pair_value(&runs[i], &runs[j], metric, params))
        .collect::<Result<Vec<_>>>()?;
    PairwiseSummary::from_values(metric, values)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::types::SeedPair;

    fn ev(values: &[f64]) -> ExplanationVector {
        let names: Arc<[String]> = (0..values.len())
            .map(|i| format!("f{i}"))
            .collect::<Vec<_>>()
            .into();
        ExplanationVector::new(values.to_vec(), names, "i", SeedPair::new(0, 0)).unwrap()
    }

    fn rk(order: &[usize]) -> Ranking {
        Ranking::from_order(order.to_vec()).unwrap()
    }

    /// Direct transcription of the RBO sum with explicit set intersections.
    fn rbo_oracle(a: &[usize], b: &[usize], p: f64) -> f64 {
        let d = a.len();
        let overlap = |l: usize| {
            let sa: std::collections::BTreeSet<_> = a[..l].iter().collect();
            b[..l].iter().filter(|x| sa.contains(x)).count() as f64 / l as f64
        };
        let mut s = 0.0;
        for l in 1..=d {
            s += p.powi(l as i32 - 1) * overlap(l);
        }
        1.0 - ((1.0 - p) * s + p.powi(d as i32) * overlap(d))
    }

    #[test]
    fn l2_examples() {
        assert_eq!(
            l2_distance(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(),
            2f64.sqrt()
        );
        let v = l2_distance(&ev(&[0.3, -0.1, 0.2]), &ev(&[0.1, 0.1, 0.2])).unwrap();
        assert!((v - 0.08f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            l2_distance(&ev(&[0.3, -0.1]), &ev(&[0.3, -0.1])).unwrap(),
            0.0
        );
        assert!(l2_distance(&ev(&[0.3, -0.1]), &ev(&[0.3, -0.1, 0.0])).is_err());
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(
            topk_jaccard(&rk(&[0, 1, 2, 3]), &rk(&[1, 2, 0, 3]), 2).unwrap(),
            2.0 / 3.0
        );
        assert_eq!(
            topk_jaccard(&rk(&[0, 1, 2, 3]), &rk(&[2, 3, 0, 1]), 2).unwrap(),
            1.0
        );
        assert_eq!(
            topk_jaccard(&rk(&[0, 1, 2, 3]), &rk(&[0, 1, 2, 3]), 3).unwrap(),
            0.0
        );
        assert!(topk_jaccard(&rk(&[0, 1]), &rk(&[0, 1]), 3).is_err());
        assert!(topk_jaccard(&rk(&[0, 1]), &rk(&[0, 1]), 0).is_err());
    }

    #[test]
    fn rbo_examples() {
        for p in [0.1, 0.5, 0.9] {
            let v = rbo_sensitivity(&rk(&[0, 1]), &rk(&[1, 0]), p).unwrap();
            assert!((v - (1.0 - p)).abs() < 1e-15);
        }
        assert_eq!(
            rbo_sensitivity(&rk(&[2, 0, 1]), &rk(&[2, 0, 1]), 0.5).unwrap(),
            0.0
        );
        assert!(rbo_sensitivity(&rk(&[0, 1]), &rk(&[1, 0]), 1.0).is_err());
        assert!(rbo_sensitivity(&rk(&[0, 1]), &rk(&[1, 0]), 0.0).is_err());
        assert_eq!(default_rbo_p(4), 0.75);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(
            kendall_tau(&rk(&[0, 1, 2, 3]), &rk(&[3, 2, 1, 0])).unwrap(),
            6
        );
        assert_eq!(kendall_tau(&rk(&[0, 1, 2]), &rk(&[0, 2, 1])).unwrap(), 1);
        assert_eq!(kendall_tau(&rk(&[0, 1, 2]), &rk(&[0, 1, 2])).unwrap(), 0);
        assert!(kendall_tau(&rk(&[0, 1, 2]), &rk(&[0, 1])).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        let p = feature_sensitivity(&[ev(&[0.0, 1.0]), ev(&[1.0, 1.0]), ev(&[2.0, 1.0])]).unwrap();
        assert!((p.sensitivity[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.sensitivity[1], 0.0);
        assert_eq!(p.mean_abs, vec![1.0, 1.0]);
        assert!(feature_sensitivity(&[ev(&[0.0, 1.0])]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let runs = [ev(&[0.3, -0.1, 0.2]), ev(&[0.1, 0.1, 0.2])];
        let s = pairwise_aggregate(&runs, MetricKind::L2, &MetricParams::default()).unwrap();
        assert_eq!(s.values.len(), 1);
        assert_eq!(s.mean, s.values[0]);
        assert_eq!(s.median, s.values[0]);
        let same = [
            ev(&[0.3, -0.1, 0.2]),
            ev(&[0.3, -0.1, 0.2]),
            ev(&[0.3, -0.1, 0.2]),
        ];
        for m in MetricKind::ALL {
            let s = pairwise_aggregate(&same, m, &MetricParams::default()).unwrap();
            assert_eq!(s.mean, 0.0);
            assert_eq!(s.values.len(), 3);
        }
        let bad = MetricParams { k: 4, p: None };
        assert!(pairwise_aggregate(&same, MetricKind::JaccardTopk, &bad).is_err());
    }

    #[test]
    fn metric_kind_strings() {
        for m in MetricKind::ALL {
            assert_eq!(m.as_str().parse::<MetricKind>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.as_str())
            );
        }
    }

    fn perm(d: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..d).collect::<Vec<usize>>()).prop_shuffle()
    }

    fn perm_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2usize..12).prop_flat_map(|d| (perm(d), perm(d)))
    }

    /// Attribution vectors on a coarse grid: distinct magnitudes differ by at least 1/8.
    fn phi_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..10).prop_flat_map(|d| {
            let v = prop::collection::vec((-40i32..40).prop_map(|i| i as f64 / 8.0), d);
            (v.clone(), v)
        })
    }

    proptest! {
        #[test]
        fn rank_metrics_are_symmetric_and_bounded((a, b) in perm_pair(), p in 0.01f64..0.99) {
            let (ra, rb) = (rk(&a), rk(&b));
            let d = a.len();
            for k in 1..=d {
                let j = topk_jaccard(&ra, &rb, k).unwrap();
                prop_assert_eq!(j, topk_jaccard(&rb, &ra, k).unwrap());
                prop_assert!((0.0..=1.0).contains(&j));
            }
            let r = rbo_sensitivity(&ra, &rb, p).unwrap();
            prop_assert_eq!(r, rbo_sensitivity(&rb, &ra, p).unwrap());
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((r - rbo_oracle(&a, &b, p).clamp(0.0, 1.0)).abs() < 1e-12);
            let t = kendall_tau(&ra, &rb).unwrap();
            prop_assert_eq!(t, kendall_tau(&rb, &ra).unwrap());
            prop_assert!(t <= d * (d - 1) / 2);
        }

        #[test]
        fn identity_pairs_are_zero(a in (2usize..12).prop_flat_map(perm), p in 0.01f64..0.99) {
            let r = rk(&a);
            prop_assert_eq!(topk_jaccard(&r, &r, 1.max(a.len() / 2)).unwrap(), 0.0);
            prop_assert_eq!(rbo_sensitivity(&r, &r, p).unwrap(), 0.0);
            prop_assert_eq!(kendall_tau(&r, &r).unwrap(), 0);
        }

        #[test]
        fn magnitude_metrics_are_symmetric((a, b) in phi_pair()) {
            let (ea, eb) = (ev(&a), ev(&b));
            let params = MetricParams { k: 2, p: None };
            for m in MetricKind::ALL {
                let x = pair_value(&ea, &eb, m, &params).unwrap();
                prop_assert_eq!(x, pair_value(&eb, &ea, m, &params).unwrap());
                prop_assert!(x >= 0.0);
            }
            prop_assert_eq!(l2_distance(&ea, &ea).unwrap(), 0.0);
        }

        #[test]
        fn rank_metrics_ignore_positive_rescaling((a, b) in phi_pair(), ca in 0.01f64..100.0, cb in 0.01f64..100.0) {
            let (ea, eb) = (ev(&a), ev(&b));
            let sa: Vec<f64> = a.iter().map(|v| v * ca).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * cb).collect();
            let (fa, fb) = (ev(&sa), ev(&sb));
            let params = MetricParams { k: 2, p: None };
            for m in [MetricKind::JaccardTopk, MetricKind::Rbo, MetricKind::KendallTau] {
                prop_assert_eq!(pair_value(&ea, &eb, m, &params).unwrap(), pair_value(&fa, &fb, m, &params).unwrap());
            }
        }

        #[test]
        fn two_run_sensitivity_is_absolute_difference((a, b) in phi_pair()) {
            let p = feature_sensitivity(&[ev(&a), ev(&b)]).unwrap();
            for m in 0..a.len() {
                prop_assert_eq!(p.sensitivity[m], (a[m] - b[m]).abs());
            }
        }

        #[test]
        fn aggregates_ignore_run_order(
            runs in (2usize..6, 3usize..7).prop_flat_map(|(n, d)| {
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
            }).prop_flat_map(|runs| (Just(runs.clone()), Just(runs).prop_shuffle()))
        ) {
            let (original, shuffled) = runs;
            let a: Vec<_> = original.iter().map(|v| ev(v)).collect();
            let b: Vec<_> = shuffled.iter().map(|v| ev(v)).collect();
            prop_assert_eq!(feature_sensitivity(&a).unwrap().sensitivity, feature_sensitivity(&b).unwrap().sensitivity);
            for m in MetricKind::ALL {
                let params = MetricParams { k: 2, p: None };
                let x = pairwise_aggregate(&a, m, &params).unwrap();
                let y = pairwise_aggregate(&b, m, &params).unwrap();
                prop_assert_eq!(x.mean, y.mean);
                prop_assert_eq!(x.median, y.median);
            }
        }
    }
}
