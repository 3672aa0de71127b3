//! Confidence strata over predicted probabilities.

use serde::{Deserialize, Serialize};

use super::report::{AggregateDistribution, InstanceResult};
use crate::metrics::{mean_median, MetricKind};

/// `certain`: `P > 0.9` or `P < 0.1`. `uncertain`: `0.4 <= P <= 0.6`.
/// Everything else is `other` and is kept out of the two named strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceStratum {
    Certain,
    Uncertain,
    Other,
}

impl ConfidenceStratum {
    pub const ALL: [ConfidenceStratum; 3] = [
        ConfidenceStratum::Certain,
        ConfidenceStratum::Uncertain,
        ConfidenceStratum::Other,
    ];

    pub fn of(p: f64) -> Self {
        if !(0.1..=0.9).contains(&p) {
            ConfidenceStratum::Certain
        } else if (0.4..=0.6).contains(&p) {
            ConfidenceStratum::Uncertain
        } else {
            ConfidenceStratum::Other
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ConfidenceStratum::Certain => "certain",
            ConfidenceStratum::Uncertain => "uncertain",
            ConfidenceStratum::Other => "other",
        }
    }
}

/// Metric distributions and the mean feature-sensitivity profile of one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub stratum: ConfidenceStratum,
    pub n_instances: usize,
    pub metrics: Vec<AggregateDistribution>,
    /// Per-feature mean of the instance sensitivity profiles; empty when the stratum is empty.
    pub mean_sensitivity: Vec<f64>,
    /// Per-feature mean of the instance mean `|phi|`.
    pub mean_abs_attribution: Vec<f64>,
}

fn column_means(rows: &[&[f64]]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    (0..rows[0].len())
        .map(|m| mean_median(&rows.iter().map(|r| r[m]).collect::<Vec<_>>()).0)
        .collect()
}

/// Groups instance results by confidence stratum. Every stratum is reported,
/// including empty ones.
pub fn stratify_confidence(results: &[InstanceResult]) -> Vec<StratumSummary> {
    ConfidenceStratum::ALL
        .into_iter()
        .map(|stratum| {
            let members: Vec<&InstanceResult> =
                results.iter().filter(|r| r.stratum == stratum).collect();
            let metrics = MetricKind::ALL
                .into_iter()
                .map(|m| {
                    AggregateDistribution::from_instance_means(
                        m,
                        members
                            .iter()
                            .filter_map(|r| r.summary(m))
                            .map(|s| s.mean)
                            .collect(),
                    )
                })
                .collect();
            let sens: Vec<&[f64]> = members
                .iter()
                .map(|r| r.sensitivity.sensitivity.as_slice())
                .collect();
            let abs: Vec<&[f64]> = members
                .iter()
                .map(|r| r.sensitivity.mean_abs.as_slice())
                .collect();
            StratumSummary {
                stratum,
                n_instances: members.len(),
                metrics,
                mean_sensitivity: column_means(&sens),
                mean_abs_attribution: column_means(&abs),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(ConfidenceStratum::of(0.95), ConfidenceStratum::Certain);
        assert_eq!(ConfidenceStratum::of(0.05), ConfidenceStratum::Certain);
        assert_eq!(ConfidenceStratum::of(0.5), ConfidenceStratum::Uncertain);
        assert_eq!(ConfidenceStratum::of(0.4), ConfidenceStratum::Uncertain);
        assert_eq!(ConfidenceStratum::of(0.6), ConfidenceStratum::Uncertain);
        assert_eq!(ConfidenceStratum::of(0.75), ConfidenceStratum::Other);
        assert_eq!(ConfidenceStratum::of(0.9), ConfidenceStratum::Other);
        assert_eq!(ConfidenceStratum::of(0.1), ConfidenceStratum::Other);
        assert_eq!(ConfidenceStratum::of(0.25), ConfidenceStratum::Other);
    }

    #[test]
    fn empty_input_reports_empty_strata() {
        let s = stratify_confidence(&[]);
        assert_eq!(s.len(), 3);
        assert!(s
            .iter()
            .all(|x| x.n_instances == 0 && x.mean_sensitivity.is_empty()));
        assert!(s[0].metrics.iter().all(|m| m.mean.is_none()));
    }
}
