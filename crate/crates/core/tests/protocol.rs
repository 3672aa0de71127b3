use std::path::PathBuf;

use multiplicity::metrics::MetricKind;
use multiplicity::protocol::{dissect, run_campaign, AuditCampaign, ConfidenceStratum};
use multiplicity::Error;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn toy(extra: &str) -> AuditCampaign {
    let dir = data_dir();
    let text = format!(
        r#"
model_class = "logreg"
setting = "overall"
n_runs = 3
seed = 11

[dataset]
csv = "{}"
schema = "{}"

[folds]
n_folds = 3

[explainer]
background_size = 15

[instances]
mode = "first_per_fold"
n = 3

[metrics]
k = 2

[baselines]
n_samples = 500
{extra}
"#,
        dir.join("toy.csv").display(),
        dir.join("toy.schema.toml").display()
    );
    AuditCampaign::from_toml_str(&text).unwrap()
}

#[test]
fn campaign_reports_are_reproducible() {
    let mut c = toy("");
    c.model_class = multiplicity::ModelClass::Dtree;
    let ds = c.dataset.load().unwrap();
    let a = run_campaign(&c, &ds).unwrap();
    let b = run_campaign(&c, &ds).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.instances.len(), 9);
    assert_eq!(a.runs.len(), 9);
    assert!(a.max_efficiency_residual <= 1e-7);
    assert_eq!(a.strata.len(), ConfidenceStratum::ALL.len());
}

#[test]
fn deterministic_training_has_no_model_induced_disagreement() {
    let mut c = toy("");
    c.setting = multiplicity::MultiplicitySetting::ModelInduced;
    c.model.selection = multiplicity::protocol::SelectionMode::Fixed;
    let ds = c.dataset.load().unwrap();
    let report = run_campaign(&c, &ds).unwrap();
    for m in MetricKind::ALL {
        assert_eq!(report.aggregate(m).unwrap().mean, Some(0.0), "{m}");
    }
}

#[test]
fn explainer_induced_needs_distinct_seeds() {
    let mut c = toy("");
    c.setting = multiplicity::MultiplicitySetting::ExplainerInduced;
    c.model_seeds = Some(vec![1]);
    c.explainer_seeds = Some(vec![5, 5, 6]);
    let ds = c.dataset.load().unwrap();
    assert!(matches!(run_campaign(&c, &ds), Err(Error::Config(_))));
}

#[test]
fn oversized_k_fails_before_training() {
    let mut c = toy("");
    c.metrics.k = 4;
    let ds = c.dataset.load().unwrap();
    assert!(run_campaign(&c, &ds).is_err());
}

#[test]
fn dissect_separates_sources() {
    let c = toy("");
    let ds = c.dataset.load().unwrap();
    let report = dissect(&c, &ds).unwrap();
    let l2 = report
        .side_by_side
        .iter()
        .find(|s| s.metric == MetricKind::L2)
        .unwrap();
    // Logistic regression training ignores the model seed; backgrounds do not.
    assert_eq!(l2.model_induced.mean, Some(0.0));
    assert!(l2.explainer_induced.mean.unwrap() > 0.0);
    assert_eq!(
        report.model_induced.fold_seed,
        report.explainer_induced.fold_seed
    );
}

#[test]
fn exact_and_kernel_campaigns_agree_when_enumerating() {
    let kernel = toy("");
    let mut exact = toy("");
    exact.explainer.kind = multiplicity::ExplainerKind::Exact;
    let ds = kernel.dataset.load().unwrap();
    let a = run_campaign(&kernel, &ds).unwrap();
    let b = run_campaign(&exact, &ds).unwrap();
    for (x, y) in a.instances.iter().zip(&b.instances) {
        for (ex, ey) in x.explanations.iter().zip(&y.explanations) {
            for (p, q) in ex.values().iter().zip(ey.values()) {
                assert!((p - q).abs() <= 1e-8);
            }
        }
    }
}
