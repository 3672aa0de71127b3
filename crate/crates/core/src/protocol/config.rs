//! Campaign configuration (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{DEFAULT_KAPPAS, DEFAULT_MALLOWS_SAMPLES, DEFAULT_QS, DEFAULT_RHOS};
use crate::data::{load_csv, Dataset, Schema};
use crate::error::{Error, Result};
use crate::explainer::{default_budget, MAX_EXACT_FEATURES};
use crate::metrics::MetricParams;
use crate::models::{default_grid, HyperParams};
use crate::rng::SeedStream;
use crate::types::{ExplainerKind, ModelClass, MultiplicitySetting, SeedPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Defaults to the CSV file stem.
    #[serde(default)]
    pub id: Option<String>,
    pub csv: PathBuf,
    pub schema: PathBuf,
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        let schema = Schema::from_path(&self.schema)?;
        let ds = load_csv(&self.csv, &schema)?;
        Ok(match &self.id {
            Some(id) => ds.with_id(id.clone()),
            None => ds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    /// Falls back to the campaign root seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_folds() -> usize {
    5
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            n_folds: default_folds(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Validation-split grid search keyed by the model seed.
    #[default]
    Grid,
    /// Train the first grid entry (or the class defaults) directly.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub selection: SelectionMode,
    /// Candidate hyperparameters; defaults depend on the model class.
    #[serde(default)]
    pub grid: Option<Vec<HyperParams>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerConfig {
    #[serde(default = "default_kind")]
    pub kind: ExplainerKind,
    pub background_size: usize,
    /// Coalition budget; `2d + 2048` capped at `2^d - 2` when absent.
    #[serde(default)]
    pub n_coalitions: Option<usize>,
}

fn default_kind() -> ExplainerKind {
    ExplainerKind::Kernel
}

/// Which test rows of each fold are explained.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSelection {
    #[default]
    All,
    /// The first `n` test rows of each fold.
    FirstPerFold { n: usize },
    /// Up to `n` certain and `n` uncertain test rows per fold, in fold order,
    /// judged by the model of the first run.
    ConfidenceBalanced { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Falls back to a stream derived from the fold seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Total attribution mass for the Dirichlet null; the empirical mean
    /// `sum |phi|` over all explanations when absent.
    #[serde(default)]
    pub total_mass: Option<f64>,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_qs")]
    pub qs: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn yes() -> bool {
    true
}
fn default_rhos() -> Vec<f64> {
    DEFAULT_RHOS.to_vec()
}
fn default_kappas() -> Vec<f64> {
    DEFAULT_KAPPAS.to_vec()
}
fn default_qs() -> Vec<f64> {
    DEFAULT_QS.to_vec()
}
fn default_samples() -> usize {
    DEFAULT_MALLOWS_SAMPLES
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            seed: None,
            total_mass: None,
            rhos: default_rhos(),
            kappas: default_kappas(),
            qs: default_qs(),
            n_samples: default_samples(),
        }
    }
}

/// One campaign: a fixed explanation query family rerun under `n_runs` seed pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditCampaign {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSource,
    pub model_class: ModelClass,
    pub setting: MultiplicitySetting,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// Root seed from which unspecified seeds are derived.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model_seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub explainer_seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub folds: FoldConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub explainer: ExplainerConfig,
    #[serde(default)]
    pub instances: InstanceSelection,
    #[serde(default)]
    pub metrics: MetricParams,
    #[serde(default)]
    pub baselines: BaselineConfig,
}

fn default_runs() -> usize {
    10
}

impl AuditCampaign {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file; dataset paths are resolved against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            c.dataset.csv = dir.join(&c.dataset.csv);
            c.dataset.schema = dir.join(&c.dataset.schema);
        }
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn seeds_or_derived(
        &self,
        given: &Option<Vec<u64>>,
        label: &str,
        count: usize,
    ) -> Result<Vec<u64>> {
        match (given, self.seed) {
            (Some(list), _) => Ok(list.clone()),
            (None, Some(root)) => Ok((0..count as u64)
                .map(|i| SeedStream::new(root).fork_index(label, i).seed())
                .collect()),
            (None, None) => Err(Error::Config(format!(
                "no {label}s given and no root `seed` to derive them from"
            ))),
        }
    }

    /// The seed pair of every run, after checking the setting's invariants.
    pub fn seed_pairs(&self) -> Result<Vec<SeedPair>> {
        let r = self.n_runs;
        if r < 2 {
            return Err(Error::Config(format!(
                "n_runs must be at least 2 (got {r})"
            )));
        }
        let (n_model, n_expl) = match self.setting {
            MultiplicitySetting::Overall => (r, r),
            MultiplicitySetting::ModelInduced => (r, 1),
            MultiplicitySetting::ExplainerInduced => (1, r),
        };
        let model = self.seeds_or_derived(&self.model_seeds, "model-seed", n_model)?;
        let expl = self.seeds_or_derived(&self.explainer_seeds, "explainer-seed", n_expl)?;
        let check = |what: &str, seeds: &[u64], want: usize| -> Result<()> {
            if seeds.len() != want {
                return Err(Error::Config(format!(
                    "{} setting needs {want} {what} seed(s), got {}",
                    self.setting,
                    seeds.len()
                )));
            }
            if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
                return Err(Error::Config(format!("{what} seeds must be distinct")));
            }
            Ok(())
        };
        check("model", &model, n_model)?;
        check("explainer", &expl, n_expl)?;
        Ok((0..r)
            .map(|i| SeedPair::new(model[i.min(n_model - 1)], expl[i.min(n_expl - 1)]))
            .collect())
    }

    pub fn fold_seed(&self) -> Result<u64> {
        self.folds
            .seed
            .or(self.seed)
            .ok_or_else(|| Error::Config("no fold seed and no root `seed`".into()))
    }

    pub fn baseline_seed(&self) -> Result<u64> {
        match self.baselines.seed {
            Some(s) => Ok(s),
            None => Ok(SeedStream::new(self.fold_seed()?).fork("baselines").seed()),
        }
    }

    pub fn grid(&self) -> Result<Vec<HyperParams>> {
        let grid = self
            .model
            .grid
            .clone()
            .unwrap_or_else(|| match self.model.selection {
                SelectionMode::Grid => default_grid(self.model_class),
                SelectionMode::Fixed => vec![HyperParams::default_for(self.model_class)],
            });
        if grid.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        if let Some(bad) = grid.iter().find(|h| h.model_class() != self.model_class) {
            return Err(Error::Config(format!(
                "grid entry for `{}` in a `{}` campaign",
                bad.model_class(),
                self.model_class
            )));
        }
        Ok(match self.model.selection {
            SelectionMode::Grid => grid,
            SelectionMode::Fixed => grid[..1].to_vec(),
        })
    }

    /// The coalition budget for `d` features.
    pub fn coalition_budget(&self, d: usize) -> usize {
        self.explainer
            .n_coalitions
            .unwrap_or_else(|| default_budget(d))
    }

    /// Checks everything that can be checked before training.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        self.seed_pairs()?;
        self.fold_seed()?;
        self.grid()?;
        let d = ds.dim();
        self.metrics
            .validate(d)
            .map_err(|e| Error::Config(e.to_string()))?;
        let n_folds = self.folds.n_folds;
        if n_folds < 2 || n_folds > ds.len() {
            return Err(Error::Config(format!(
                "n_folds = {n_folds} is out of range"
            )));
        }
        let min_train = ds.len() - ds.len().div_ceil(n_folds);
        let k = self.explainer.background_size;
        if k == 0 || k > min_train {
            return Err(Error::Config(format!(
                "background_size = {k} must lie in 1..={min_train} (smallest training split)"
            )));
        }
        match self.explainer.kind {
            ExplainerKind::Exact if d > MAX_EXACT_FEATURES => return Err(Error::Config(format!(
                "exact explainer supports at most {MAX_EXACT_FEATURES} features (dataset has {d})"
            ))),
            ExplainerKind::Kernel if self.coalition_budget(d) < d + 2 => {
                return Err(Error::Config(format!(
                    "n_coalitions must be at least d + 2 = {}",
                    d + 2
                )))
            }
            _ => {}
        }
        match self.instances {
            InstanceSelection::FirstPerFold { n } | InstanceSelection::ConfidenceBalanced { n }
                if n == 0 =>
            {
                return Err(Error::Config("instance count must be positive".into()))
            }
            _ => {}
        }
        if let Some(t) = self.baselines.total_mass {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "baselines.total_mass = {t} must be positive"
                )));
            }
        }
        if self.baselines.enabled && self.metrics.k >= d {
            return Err(Error::Config(format!(
                "the Dirichlet baseline needs k < d (k = {}, d = {d})",
                self.metrics.k
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        model_class = "logreg"
        setting = "explainer_induced"
        n_runs = 3
        seed = 11

        [dataset]
        csv = "toy.csv"
        schema = "toy.schema.toml"

        [explainer]
        background_size = 10
    "#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = AuditCampaign::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.folds.n_folds, 5);
        assert_eq!(c.metrics.k, 3);
        assert_eq!(c.explainer.kind, ExplainerKind::Kernel);
        assert_eq!(c.instances, InstanceSelection::All);
        let pairs = c.seed_pairs().unwrap();
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.model_seed == pairs[0].model_seed));
        assert_ne!(pairs[0].explainer_seed, pairs[1].explainer_seed);
        assert_eq!(c.fold_seed().unwrap(), 11);
        let round = AuditCampaign::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn seed_invariants_per_setting() {
        let mut c = AuditCampaign::from_toml_str(MINIMAL).unwrap();
        c.seed = None;
        assert!(c.seed_pairs().is_err());
        c.model_seeds = Some(vec![1]);
        c.explainer_seeds = Some(vec![5, 5, 6]);
        assert!(c.seed_pairs().is_err());
        c.explainer_seeds = Some(vec![5, 6, 7]);
        assert_eq!(c.seed_pairs().unwrap()[2], SeedPair::new(1, 7));
        c.setting = MultiplicitySetting::ModelInduced;
        assert!(c.seed_pairs().is_err());
        c.model_seeds = Some(vec![1, 2, 3]);
        c.explainer_seeds = Some(vec![9]);
        assert_eq!(c.seed_pairs().unwrap()[1], SeedPair::new(2, 9));
        c.setting = MultiplicitySetting::Overall;
        assert!(c.seed_pairs().is_err());
        c.explainer_seeds = Some(vec![4, 5, 6]);
        assert_eq!(c.seed_pairs().unwrap()[0], SeedPair::new(1, 4));
        c.n_runs = 1;
        assert!(c.seed_pairs().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[metrics]\nk = 3\nbogus = 1\n");
        assert!(matches!(
            AuditCampaign::from_toml_str(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn instance_selection_parses() {
        let text = format!("{MINIMAL}\n[instances]\nmode = \"confidence_balanced\"\nn = 4\n");
        let c = AuditCampaign::from_toml_str(&text).unwrap();
        assert_eq!(c.instances, InstanceSelection::ConfidenceBalanced { n: 4 });
    }

    #[test]
    fn grid_follows_selection_mode() {
        let mut c = AuditCampaign::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.grid().unwrap(), default_grid(ModelClass::Logreg));
        c.model.selection = SelectionMode::Fixed;
        assert_eq!(
            c.grid().unwrap(),
            vec![HyperParams::default_for(ModelClass::Logreg)]
        );
        c.model.grid = Some(vec![HyperParams::default_for(ModelClass::Mlp)]);
        assert!(c.grid().is_err());
    }
}
