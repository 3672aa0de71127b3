//! `multiplicity`: seed-controlled explanation multiplicity audits.
//!
//! Every command that draws random numbers takes its seeds from flags or the
//! campaign config and refuses to run without them.

mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use multiplicity::baselines::{
    baseline_band, BaselineSweep, DEFAULT_MALLOWS_SAMPLES, DEFAULT_TOTAL_MASS,
};
use multiplicity::data::{load_csv, stratified_folds, Dataset, Schema};
use multiplicity::explainer::{default_budget, sample_background};
use multiplicity::metrics::MetricKind;
use multiplicity::models::{
    default_grid, fit_with_selection, HyperParams, ModelDocument, SplitProvenance,
};
use multiplicity::protocol::{
    dissect, explain_row, run_campaign, write_explanations_jsonl, write_pairs_csv, AuditCampaign,
    CampaignReport,
};
use multiplicity::{ExplainerKind, ExplanationVector, ModelClass, SeedPair};

use output::Outputs;

#[derive(Parser)]
#[command(
    name = "multiplicity",
    version,
    about = "Audit explanation multiplicity of SHAP attributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign from a TOML config and write its report files.
    Audit(CampaignArgs),
    /// Run the model-induced and explainer-induced halves of a campaign side by side.
    Dissect(CampaignArgs),
    /// Evaluate a null-model baseline band.
    Baseline(BaselineArgs),
    /// Explain one dataset row with a saved model.
    Explain(ExplainArgs),
    /// Fit a model and save it as JSON.
    Train(TrainArgs),
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    /// Root seed; fills in any seed the config leaves unspecified.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "multiplicity-out")]
    out_dir: PathBuf,
    /// Print the parsed config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct BaselineArgs {
    /// One of l2, jaccard_topk, rbo, kendall_tau.
    metric: MetricKind,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Total attribution mass T (l2 only).
    #[arg(long, default_value_t = DEFAULT_TOTAL_MASS)]
    total_mass: f64,
    #[arg(long, value_delimiter = ',')]
    rhos: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    /// Mallows dispersions (rank metrics only).
    #[arg(long, value_delimiter = ',')]
    qs: Option<Vec<f64>>,
    /// RBO persistence; `1 - 1/d` when absent.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MALLOWS_SAMPLES)]
    n_samples: usize,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl DatasetArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        let schema = Schema::from_path(&self.schema)?;
        Ok(load_csv(&self.data, &schema)?)
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Dataset row to explain.
    #[arg(long)]
    index: usize,
    #[arg(long)]
    explainer_seed: u64,
    /// Enumerate all coalitions exactly (at most 14 features).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 100)]
    background_size: usize,
    #[arg(long)]
    n_coalitions: Option<usize>,
    /// Length of the printed top-k listing.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    model_class: ModelClass,
    #[arg(long)]
    model_seed: u64,
    /// Train on the training split of this fold instead of the full dataset.
    #[arg(long, requires = "fold_seed")]
    fold: Option<usize>,
    #[arg(long, default_value_t = 5)]
    n_folds: usize,
    #[arg(long)]
    fold_seed: Option<u64>,
    /// Skip the validation grid search and fit the class defaults.
    #[arg(long)]
    fixed: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Audit(args) => audit(args),
        Command::Dissect(args) => cmd_dissect(args),
        Command::Baseline(args) => baseline(args),
        Command::Explain(args) => explain(args),
        Command::Train(args) => train(args),
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}

fn load_campaign(args: &CampaignArgs) -> anyhow::Result<AuditCampaign> {
    let mut c = AuditCampaign::from_path(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if args.seed.is_some() {
        c.seed = args.seed;
    }
    Ok(c)
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    jobs: Option<usize>,
    wall_clock_seconds: f64,
}

fn timing_json(command: &str, jobs: Option<usize>, started: Instant) -> anyhow::Result<String> {
    let t = Timing {
        command,
        jobs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(serde_json::to_string_pretty(&t)? + "\n")
}

fn print_summary(report: &CampaignReport) {
    println!(
        "{} {} {}: {} instances, {} runs, max efficiency residual {:.3e}",
        report.dataset.id,
        report.model_class(),
        report.setting(),
        report.instances.len(),
        report.seed_pairs.len(),
        report.max_efficiency_residual
    );
    for agg in &report.aggregates {
        let band = report
            .baselines
            .iter()
            .find(|b| b.metric_kind == agg.metric);
        print!("  {:<13}", agg.metric.as_str());
        match (agg.mean, agg.median) {
            (Some(mean), Some(median)) => print!(" mean {mean:.4}  median {median:.4}"),
            _ => print!(" (no instances)"),
        }
        match band {
            Some(b) => println!("  null band [{:.4}, {:.4}]", b.lower, b.upper),
            None => println!(),
        }
    }
}

fn audit(args: CampaignArgs) -> anyhow::Result<()> {
    let c = load_campaign(&args)?;
    if args.dry_run {
        print!("{}", c.to_toml_string()?);
        return Ok(());
    }
    let started = Instant::now();
    let ds = c.dataset.load()?;
    let report = with_jobs(args.jobs, || run_campaign(&c, &ds))??;

    let mut out = Outputs::new(&args.out_dir)?;
    let written = (|| -> anyhow::Result<()> {
        out.write("report.json", (report.to_json()? + "\n").as_bytes())?;
        let mut pairs = Vec::new();
        write_pairs_csv(&report, &mut pairs)?;
        out.write("pairs.csv", &pairs)?;
        let mut lines = Vec::new();
        write_explanations_jsonl(&report, &mut lines)?;
        out.write("explanations.jsonl", &lines)?;
        out.write(
            "timing.json",
            timing_json("audit", args.jobs, started)?.as_bytes(),
        )?;
        Ok(())
    })();
    if let Err(e) = written {
        out.discard();
        return Err(e);
    }
    print_summary(&report);
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

fn cmd_dissect(args: CampaignArgs) -> anyhow::Result<()> {
    let c = load_campaign(&args)?;
    if args.dry_run {
        print!("{}", c.to_toml_string()?);
        return Ok(());
    }
    let started = Instant::now();
    let ds = c.dataset.load()?;
    let report = with_jobs(args.jobs, || dissect(&c, &ds))??;

    let mut out = Outputs::new(&args.out_dir)?;
    let written = (|| -> anyhow::Result<()> {
        out.write(
            "dissect.json",
            (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
        )?;
        out.write(
            "timing.json",
            timing_json("dissect", args.jobs, started)?.as_bytes(),
        )?;
        Ok(())
    })();
    if let Err(e) = written {
        out.discard();
        return Err(e);
    }
    println!(
        "{:<13} {:>15} {:>18}",
        "metric", "model_induced", "explainer_induced"
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for row in &report.side_by_side {
        println!(
            "{:<13} {:>15} {:>18}",
            row.metric.as_str(),
            fmt(row.model_induced.mean),
            fmt(row.explainer_induced.mean)
        );
    }
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

fn baseline(args: BaselineArgs) -> anyhow::Result<()> {
    let mut sweep =
        BaselineSweep::default_for(args.metric, args.d, args.k, args.total_mass, args.p);
    match &mut sweep {
        BaselineSweep::Dirichlet { rhos, kappas, .. } => {
            if args.qs.is_some() {
                bail!("--qs applies to rank metrics only");
            }
            if let Some(r) = &args.rhos {
                *rhos = r.clone();
            }
            if let Some(k) = &args.kappas {
                *kappas = k.clone();
            }
        }
        BaselineSweep::Mallows { qs, n_samples, .. } => {
            if args.rhos.is_some() || args.kappas.is_some() {
                bail!("--rhos and --kappas apply to l2 only");
            }
            if let Some(q) = &args.qs {
                *qs = q.clone();
            }
            *n_samples = args.n_samples;
        }
    }
    let band = with_jobs(args.jobs, || baseline_band(args.metric, &sweep, args.seed))??;
    for point in &band.points {
        eprintln!("{}", serde_json::to_string(point)?);
    }
    eprintln!(
        "{} band [{:.6}, {:.6}]",
        band.metric_kind, band.lower, band.upper
    );
    let json = serde_json::to_string_pretty(&band)? + "\n";
    match &args.out {
        Some(path) => write_file(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ExplainOutput {
    explanation: ExplanationVector,
    model_class: ModelClass,
    explainer: ExplainerKind,
    background_rows: Vec<usize>,
    n_coalitions: usize,
    base_value: f64,
    prediction: f64,
    efficiency_residual: f64,
    top_k: Vec<TopFeature>,
}

#[derive(Serialize)]
struct TopFeature {
    rank: usize,
    feature: String,
    phi: f64,
}

fn explain(args: ExplainArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let doc = ModelDocument::from_json(&text)?;
    let model = doc.model;
    let ds = args.dataset.load()?;
    if args.index >= ds.len() {
        bail!(
            "row index {} out of range for {} rows",
            args.index,
            ds.len()
        );
    }
    let pool = match &doc.split {
        Some(split) => ds.subset(&split.train_rows),
        None => ds.clone(),
    };
    let bg = sample_background(&pool, args.background_size, args.explainer_seed)?;
    let background_rows: Vec<usize> = match &doc.split {
        Some(split) => bg
            .source_rows()
            .iter()
            .map(|&i| split.train_rows[i])
            .collect(),
        None => bg.source_rows().to_vec(),
    };
    let x = ds.row(args.index);
    let kind = if args.exact {
        ExplainerKind::Exact
    } else {
        ExplainerKind::Kernel
    };
    let n_coalitions = args
        .n_coalitions
        .unwrap_or_else(|| default_budget(model.dim()));
    let attribution = explain_row(
        &model,
        x,
        args.index,
        &bg,
        kind,
        n_coalitions,
        args.explainer_seed,
    )?;
    let (base_value, prediction) = (attribution.base_value, attribution.prediction);
    let efficiency_residual = attribution.efficiency_residual();
    let n_evaluated = attribution.coalitions_evaluated;
    let seeds = SeedPair::new(model.model_seed(), args.explainer_seed);
    let explanation =
        attribution.into_explanation(&model, format!("{}:{}", ds.id(), args.index), seeds)?;
    let top_k = explanation
        .ranking()
        .top(args.k.min(explanation.dim()))
        .iter()
        .enumerate()
        .map(|(rank, &j)| TopFeature {
            rank: rank + 1,
            feature: explanation.feature_names()[j].clone(),
            phi: explanation.values()[j],
        })
        .collect::<Vec<_>>();
    for t in &top_k {
        eprintln!("{:>2}. {:<24} {:+.6}", t.rank, t.feature, t.phi);
    }
    let output = ExplainOutput {
        explanation,
        model_class: model.model_class(),
        explainer: kind,
        background_rows,
        n_coalitions: n_evaluated,
        base_value,
        prediction,
        efficiency_residual,
        top_k,
    };
    let json = serde_json::to_string_pretty(&output)? + "\n";
    match &args.out {
        Some(path) => write_file(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let ds = args.dataset.load()?;
    let (train_split, split) = match (args.fold, args.fold_seed) {
        (Some(fold), Some(fold_seed)) => {
            if fold >= args.n_folds {
                bail!("fold {fold} out of range for {} folds", args.n_folds);
            }
            let plan = stratified_folds(&ds, args.n_folds, fold_seed)?;
            let train_rows = plan.train_indices(fold);
            let split = SplitProvenance {
                dataset_id: ds.id().to_string(),
                fold_seed,
                n_folds: args.n_folds,
                fold,
                test_rows: plan.test_indices(fold),
                train_rows: train_rows.clone(),
            };
            (ds.subset(&train_rows), Some(split))
        }
        _ => (ds.clone(), None),
    };
    let grid = if args.fixed {
        vec![HyperParams::default_for(args.model_class)]
    } else {
        default_grid(args.model_class)
    };
    let (model, outcome) = fit_with_selection(&train_split, &grid, args.model_seed)?;
    eprintln!("selected {:?}", outcome.best);
    let doc = ModelDocument::new(model, split);
    write_file(&args.out, (doc.to_json()? + "\n").as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
