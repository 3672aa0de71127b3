//! Campaign execution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AuditCampaign, InstanceSelection};
use super::report::{
    AggregateDistribution, CampaignReport, DatasetSummary, InstanceResult, RunRecord,
};
use super::report::{REPORT_FORMAT, REPORT_FORMAT_VERSION};
use super::strata::{stratify_confidence, ConfidenceStratum};
use crate::baselines::{baseline_band, BaselineSweep};
use crate::data::{stratified_folds, Cell, Dataset};
use crate::error::{Error, Result};
use crate::explainer::{exact_shapley, kernel_shap, sample_background, Attribution, BackgroundSet};
use crate::metrics::{feature_sensitivity, mean_median, pairwise_aggregate, MetricKind};
use crate::models::{fit_with_selection, roc_auc, GridSearchOutcome, PipelineModel};
use crate::rng::SeedStream;
use crate::types::{ExplainerKind, ExplanationVector, MultiplicitySetting};

/// Explains one raw row. Kernel coalition draws use a per-row stream forked
/// from `explainer_seed`, so results do not depend on which other rows are explained.
pub fn explain_row(
    model: &PipelineModel,
    x: &[Cell],
    row: usize,
    bg: &BackgroundSet,
    kind: ExplainerKind,
    n_coalitions: usize,
    explainer_seed: u64,
) -> Result<Attribution> {
    match kind {
        ExplainerKind::Exact => exact_shapley(model, x, bg),
        ExplainerKind::Kernel => {
            let seed = SeedStream::new(explainer_seed)
                .fork_index("instance", row as u64)
                .seed();
            kernel_shap(model, x, bg, n_coalitions, seed)
        }
    }
}

fn distinct(values: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn campaign_error(fold: usize, model_seed: u64, source: Error) -> Error {
    Error::Campaign {
        fold,
        model_seed,
        source: Box::new(source),
    }
}

fn instance_id(ds: &Dataset, row: usize) -> String {
    format!("{}:{row}", ds.id())
}

/// Runs one campaign end to end.
pub fn run_campaign(c: &AuditCampaign, ds: &Dataset) -> Result<CampaignReport> {
    c.validate(ds)?;
    let seed_pairs = c.seed_pairs()?;
    let fold_seed = c.fold_seed()?;
    let grid = c.grid()?;
    let plan = stratified_folds(ds, c.folds.n_folds, fold_seed)?;
    let n_folds = plan.n_folds;
    let d = ds.dim();
    let budget = c.coalition_budget(d);
    let k_bg = c.explainer.background_size;

    let model_seeds = distinct(seed_pairs.iter().map(|p| p.model_seed));
    let expl_seeds = distinct(seed_pairs.iter().map(|p| p.explainer_seed));
    let train_idx: Vec<Vec<usize>> = (0..n_folds).map(|f| plan.train_indices(f)).collect();
    let test_idx: Vec<Vec<usize>> = (0..n_folds).map(|f| plan.test_indices(f)).collect();
    let train_sets: Vec<Dataset> = train_idx.iter().map(|idx| ds.subset(idx)).collect();

    // Models, one per (fold, distinct model seed).
    let model_units: Vec<(usize, u64)> = (0..n_folds)
        .flat_map(|f| model_seeds.iter().map(move |&s| (f, s)))
        .collect();
    let fitted: Vec<(PipelineModel, GridSearchOutcome)> = model_units
        .par_iter()
        .map(|&(f, s)| {
            fit_with_selection(&train_sets[f], &grid, s).map_err(|e| campaign_error(f, s, e))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let model_at = |f: usize, s: u64| -> &(PipelineModel, GridSearchOutcome) {
        let j = model_seeds
            .iter()
            .position(|&m| m == s)
            .expect("known seed");
        &fitted[f * model_seeds.len() + j]
    };

    // Backgrounds, one per (fold, distinct explainer seed).
    let backgrounds: Vec<BackgroundSet> = (0..n_folds)
        .flat_map(|f| expl_seeds.iter().map(move |&s| (f, s)))
        .map(|(f, s)| sample_background(&train_sets[f], k_bg, s))
        .collect::<Result<_>>()?;
    let bg_at = |f: usize, s: u64| -> &BackgroundSet {
        let j = expl_seeds.iter().position(|&e| e == s).expect("known seed");
        &backgrounds[f * expl_seeds.len() + j]
    };

    // Instance selection.
    let selected: Vec<Vec<usize>> = (0..n_folds)
        .map(|f| -> Result<Vec<usize>> {
            let rows = &test_idx[f];
            Ok(match c.instances {
                InstanceSelection::All => rows.clone(),
                InstanceSelection::FirstPerFold { n } => rows.iter().take(n).copied().collect(),
                InstanceSelection::ConfidenceBalanced { n } => {
                    let model = &model_at(f, seed_pairs[0].model_seed).0;
                    let mut certain = 0;
                    let mut uncertain = 0;
                    let mut keep = Vec::new();
                    for &r in rows {
                        let slot = match ConfidenceStratum::of(model.predict_proba(ds.row(r))?) {
                            ConfidenceStratum::Certain => &mut certain,
                            ConfidenceStratum::Uncertain => &mut uncertain,
                            ConfidenceStratum::Other => continue,
                        };
                        if *slot < n {
                            *slot += 1;
                            keep.push(r);
                        }
                    }
                    keep
                }
            })
        })
        .collect::<Result<_>>()?;

    // Explanations, one per (fold, instance, run).
    let units: Vec<(usize, usize, usize)> = (0..n_folds)
        .flat_map(|f| {
            let runs = seed_pairs.len();
            selected[f]
                .iter()
                .flat_map(move |&r| (0..runs).map(move |run| (f, r, run)))
        })
        .collect();
    let names = ds.schema().names();
    let explained: Vec<(ExplanationVector, Attribution)> = units
        .par_iter()
        .map(|&(f, row, run)| {
            let pair = seed_pairs[run];
            let model = &model_at(f, pair.model_seed).0;
            let bg = bg_at(f, pair.explainer_seed);
            let attribution = explain_row(
                model,
                ds.row(row),
                row,
                bg,
                c.explainer.kind,
                budget,
                pair.explainer_seed,
            )
            .map_err(|e| campaign_error(f, pair.model_seed, e))?;
            let ev = ExplanationVector::new(
                attribution.phi.clone(),
                names.clone(),
                instance_id(ds, row),
                pair,
            )?;
            Ok((ev, attribution))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    // Per-instance assembly.
    let runs = seed_pairs.len();
    let mut instances = Vec::new();
    for (chunk, &(f, row, _)) in explained.chunks(runs).zip(units.iter().step_by(runs)) {
        let explanations: Vec<ExplanationVector> = chunk.iter().map(|(e, _)| e.clone()).collect();
        let predictions: Vec<f64> = chunk.iter().map(|(_, a)| a.prediction).collect();
        let residual = chunk
            .iter()
            .map(|(_, a)| a.efficiency_residual())
            .fold(0.0, f64::max);
        let confidence = if c.setting == MultiplicitySetting::ExplainerInduced {
            if predictions
                .iter()
                .any(|p| p.to_bits() != predictions[0].to_bits())
            {
                return Err(Error::validation(format!(
                    "row {row}: predictions differ across runs of an explainer-induced campaign"
                )));
            }
            predictions[0]
        } else {
            mean_median(&predictions).0
        };
        let metrics = MetricKind::ALL
            .into_iter()
            .map(|m| pairwise_aggregate(&explanations, m, &c.metrics))
            .collect::<Result<_>>()?;
        instances.push(InstanceResult {
            instance: row,
            fold: f,
            label: ds.labels()[row],
            predictions,
            confidence,
            stratum: ConfidenceStratum::of(confidence),
            metrics,
            sensitivity: feature_sensitivity(&explanations)?,
            max_efficiency_residual: residual,
            explanations,
        });
    }

    let aggregates = MetricKind::ALL
        .into_iter()
        .map(|m| {
            AggregateDistribution::from_instance_means(
                m,
                instances
                    .iter()
                    .filter_map(|i| i.summary(m))
                    .map(|s| s.mean)
                    .collect(),
            )
        })
        .collect();
    let strata = stratify_confidence(&instances);

    // Run provenance.
    let mut run_records = Vec::new();
    for f in 0..n_folds {
        for (run, pair) in seed_pairs.iter().enumerate() {
            let (model, outcome) = model_at(f, pair.model_seed);
            let scores: Vec<f64> = test_idx[f]
                .iter()
                .map(|&r| model.predict_proba(ds.row(r)))
                .collect::<Result<_>>()?;
            let labels: Vec<u8> = test_idx[f].iter().map(|&r| ds.labels()[r]).collect();
            let bg = bg_at(f, pair.explainer_seed);
            run_records.push(RunRecord {
                fold: f,
                run,
                model_seed: pair.model_seed,
                explainer_seed: pair.explainer_seed,
                hyperparams: outcome.best.clone(),
                validation_auc: outcome.validation_auc.clone(),
                test_auc: roc_auc(&scores, &labels)?,
                background_rows: bg.source_rows().iter().map(|&p| train_idx[f][p]).collect(),
            });
        }
    }

    // Baselines.
    let (total_mass, total_mass_source) = match c.baselines.total_mass {
        Some(t) => (t, "config"),
        None => {
            let masses: Vec<f64> = instances
                .iter()
                .flat_map(|i| i.explanations.iter().map(ExplanationVector::total_mass))
                .collect();
            if masses.is_empty() {
                (0.0, "empirical")
            } else {
                (mean_median(&masses).0, "empirical")
            }
        }
    };
    let baseline_seed = c.baseline_seed()?;
    let mut baselines = Vec::new();
    if c.baselines.enabled && total_mass > 0.0 {
        for m in MetricKind::ALL {
            let sweep = match m {
                MetricKind::L2 => BaselineSweep::Dirichlet {
                    d,
                    k: c.metrics.k,
                    total_mass,
                    rhos: c.baselines.rhos.clone(),
                    kappas: c.baselines.kappas.clone(),
                },
                _ => BaselineSweep::Mallows {
                    d,
                    k: c.metrics.k,
                    p: c.metrics.p,
                    qs: c.baselines.qs.clone(),
                    n_samples: c.baselines.n_samples,
                },
            };
            baselines.push(baseline_band(m, &sweep, baseline_seed)?);
        }
    }

    let max_efficiency_residual = instances
        .iter()
        .map(|i| i.max_efficiency_residual)
        .fold(0.0, f64::max);
    Ok(CampaignReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        campaign: c.clone(),
        dataset: DatasetSummary {
            id: ds.id().into(),
            rows: ds.len(),
            dropped_rows: ds.dropped_rows(),
            positives: ds.positives(),
            features: names.to_vec(),
        },
        fold_seed,
        fold_sizes: plan.fold_sizes(),
        seed_pairs,
        n_coalitions: budget,
        background_size: k_bg,
        runs: run_records,
        instances,
        aggregates,
        strata,
        total_mass,
        total_mass_source: total_mass_source.into(),
        baseline_seed,
        baselines,
        max_efficiency_residual,
    })
}

/// Model-induced and explainer-induced distributions of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideBySide {
    pub metric: MetricKind,
    pub model_induced: AggregateDistribution,
    pub explainer_induced: AggregateDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissectReport {
    pub side_by_side: Vec<SideBySide>,
    pub model_induced: CampaignReport,
    pub explainer_induced: CampaignReport,
}

/// Splits multiplicity into its model-induced and explainer-induced parts.
///
/// Both campaigns share the fold plan. The model-induced campaign pairs the
/// `R` model seeds with the first explainer seed; the explainer-induced one
/// pairs the first model seed with the `R` explainer seeds.
pub fn dissect(c: &AuditCampaign, ds: &Dataset) -> Result<DissectReport> {
    let mut joint = c.clone();
    joint.setting = MultiplicitySetting::Overall;
    let pairs = joint.seed_pairs()?;
    let model_seeds: Vec<u64> = pairs.iter().map(|p| p.model_seed).collect();
    let expl_seeds: Vec<u64> = pairs.iter().map(|p| p.explainer_seed).collect();
    let fold_seed = joint.fold_seed()?;
    let baseline_seed = joint.baseline_seed()?;

    let with = |setting, model: Vec<u64>, expl: Vec<u64>| {
        let mut x = c.clone();
        x.setting = setting;
        x.model_seeds = Some(model);
        x.explainer_seeds = Some(expl);
        x.folds.seed = Some(fold_seed);
        x.baselines.seed = Some(baseline_seed);
        x
    };
    let mi = with(
        MultiplicitySetting::ModelInduced,
        model_seeds.clone(),
        vec![expl_seeds[0]],
    );
    let ei = with(
        MultiplicitySetting::ExplainerInduced,
        vec![model_seeds[0]],
        expl_seeds,
    );
    let model_induced = run_campaign(&mi, ds)?;
    let explainer_induced = run_campaign(&ei, ds)?;
    let side_by_side = MetricKind::ALL
        .into_iter()
        .map(|m| SideBySide {
            metric: m,
            model_induced: model_induced.aggregate(m).expect("all metrics").clone(),
            explainer_induced: explainer_induced.aggregate(m).expect("all metrics").clone(),
        })
        .collect();
    Ok(DissectReport {
        side_by_side,
        model_induced,
        explainer_induced,
    })
}
