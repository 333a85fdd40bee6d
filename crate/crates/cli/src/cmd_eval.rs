use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;

use matchx_core::datagen::load_dataset;
use matchx_core::explain::{
    explain_random, explain_sa, explain_with_stats, Budget, ExplainConfig, ExplainCounters,
    ReferenceSet,
};
use matchx_core::gnn::load_checkpoint;
use matchx_core::matcher::Metric;
use matchx_core::metrics::{build_report, default_rho_grid, write_report_csv, write_report_json};
use matchx_core::rng::derive_seed_str;
use matchx_core::Error;

use crate::config::{snapshot_path, write_snapshot, ConfigFile};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Explainer {
    /// Counterpart matching pipeline
    Match,
    /// Uniform random node sets
    Random,
    /// Edge-gradient saliency
    Sa,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Optional TOML config; flags override its [eval] section
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Graphs to evaluate on (JSON dataset)
    #[arg(long)]
    data: PathBuf,
    /// Reference pool for the matching explainer (defaults to --data)
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long)]
    ref_sample: Option<f64>,
    #[arg(long, value_enum)]
    explainer: Option<Explainer>,
    /// Comma-separated retaining ratios (default 0.1..=1.0)
    #[arg(long)]
    rho_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Distance metric: euclidean | hamming
    #[arg(long)]
    metric: Option<String>,
    /// Output prefix: writes `<prefix>.report.csv` and `<prefix>.summary.json`
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct Resolved {
    command: &'static str,
    checkpoint: String,
    data: String,
    refs: String,
    explainer: Explainer,
    rho_grid: Vec<f64>,
    reference_sample: Option<f64>,
    metric: Metric,
    seed: u64,
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let grid = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::ParseError(format!("rho grid: {e}")))?;
    if grid.is_empty() || grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::ParseError("rho grid values must be in (0, 1]".into()).into());
    }
    Ok(grid)
}

pub fn run(args: EvalArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_ref())?;
    let seed = args.seed.or(file.get_u64("eval", "seed")?).unwrap_or(0);
    let metric = Metric::from_str(
        &args
            .metric
            .or(file.get_string("eval", "metric")?)
            .unwrap_or_else(|| "euclidean".into()),
    )?;
    let explainer = match args.explainer {
        Some(e) => e,
        None => match file.get_string("eval", "explainer")?.as_deref() {
            None | Some("match") => Explainer::Match,
            Some("random") => Explainer::Random,
            Some("sa") => Explainer::Sa,
            Some(other) => anyhow::bail!("config [eval].explainer: unknown {other:?}"),
        },
    };
    let grid = match args.rho_grid.or(file.get_string("eval", "rho_grid")?) {
        Some(text) => parse_grid(&text)?,
        None => default_rho_grid(),
    };
    let ref_sample = match args.ref_sample {
        Some(f) => Some(f),
        None => file.get_f64("eval", "ref_sample")?,
    };

    let model = load_checkpoint(&args.checkpoint)?;
    let data = load_dataset(&args.data)?;
    let refs_path = args.refs.clone().unwrap_or_else(|| args.data.clone());
    let refs = ReferenceSet::build(&model, load_dataset(&refs_path)?)?;
    let counters = ExplainCounters::default();

    let started = std::time::Instant::now();
    let mut report = match explainer {
        Explainer::Match => {
            let f = |m: &matchx_core::gnn::Model, g: &matchx_core::Graph, k: usize| {
                let cfg = ExplainConfig {
                    budget: Budget::Nodes(k),
                    reference_sample: ref_sample,
                    seed: derive_seed_str(seed, "explain", &g.id),
                    metric,
                };
                let (e, stats) = explain_with_stats(m, g, &refs, &cfg)?;
                counters.record(&stats);
                Ok(e)
            };
            build_report(&model, &f, &data, &grid)?
        }
        Explainer::Random => {
            let f = |_m: &matchx_core::gnn::Model, g: &matchx_core::Graph, k: usize| {
                explain_random(g, k, derive_seed_str(seed, "eval-random", &g.id))
            };
            build_report(&model, &f, &data, &grid)?
        }
        Explainer::Sa => {
            let f =
                |m: &matchx_core::gnn::Model, g: &matchx_core::Graph, k: usize| explain_sa(m, g, k);
            build_report(&model, &f, &data, &grid)?
        }
    };
    report.counters = counters.snapshot();
    let elapsed = started.elapsed();

    let csv_path = args.output.with_extension("report.csv");
    let json_path = args.output.with_extension("summary.json");
    if let Some(dir) = args.output.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_report_csv(&report, &csv_path)?;
    write_report_json(&report, data.len(), &json_path)?;
    write_snapshot(
        &snapshot_path(&args.output),
        &Resolved {
            command: "eval",
            checkpoint: args.checkpoint.display().to_string(),
            data: args.data.display().to_string(),
            refs: refs_path.display().to_string(),
            explainer,
            rho_grid: grid.clone(),
            reference_sample: ref_sample,
            metric,
            seed,
        },
    )?;

    println!(
        "explainer {:?}: ACC-AUC {:.4}{} over {} graphs ({} ratios) in {:.1?}",
        explainer,
        report.acc_auc,
        report
            .recall_at_n
            .map_or(String::new(), |r| format!(", Recall@N {r:.4}")),
        data.len(),
        grid.len(),
        elapsed
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
