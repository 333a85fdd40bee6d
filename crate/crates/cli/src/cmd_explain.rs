use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use matchx_core::datagen::load_dataset;
use matchx_core::explain::{
    explain, explanation_dot, Budget, ExplainConfig, ExplanationRecord, ReferenceSet,
};
use matchx_core::gnn::load_checkpoint;
use matchx_core::matcher::Metric;
use matchx_core::rng::derive_seed;
use matchx_core::Error;

use crate::config::{write_snapshot, ConfigFile};

#[derive(Args)]
pub struct ExplainArgs {
    /// Optional TOML config; flags override its [explain] section
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Graphs to explain (JSON dataset)
    #[arg(long)]
    data: PathBuf,
    /// Reference pool (defaults to --data)
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Fraction of the reference pool to sweep (seeded subsample)
    #[arg(long)]
    ref_sample: Option<f64>,
    /// Retaining ratio (K = ceil(rho * |V|))
    #[arg(long, conflicts_with = "k")]
    rho: Option<f64>,
    /// Fixed node budget K
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Distance metric: euclidean | hamming
    #[arg(long)]
    metric: Option<String>,
    /// Explain a single graph id instead of the whole dataset
    #[arg(long)]
    graph_id: Option<String>,
    /// Output directory (explanations.json, one DOT per graph, run_config.json)
    #[arg(long)]
    outdir: PathBuf,
}

/// Export row; explanation failures keep the row with an error marker so a
/// sweep never loses graphs silently.
#[derive(Serialize)]
struct Row {
    #[serde(flatten)]
    record: ExplanationRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Resolved {
    command: &'static str,
    checkpoint: String,
    data: String,
    refs: String,
    budget: Budget,
    reference_sample: Option<f64>,
    metric: Metric,
    seed: u64,
    graph_id: Option<String>,
}

pub fn run(args: ExplainArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_ref())?;
    let seed = args.seed.or(file.get_u64("explain", "seed")?).unwrap_or(0);
    let metric = Metric::from_str(
        &args
            .metric
            .or(file.get_string("explain", "metric")?)
            .unwrap_or_else(|| "euclidean".into()),
    )?;
    let budget = match (args.k, args.rho) {
        (Some(k), _) => Budget::Nodes(k),
        (None, Some(r)) => Budget::Ratio(r),
        (None, None) => match (
            file.get_usize("explain", "k")?,
            file.get_f64("explain", "rho")?,
        ) {
            (Some(k), _) => Budget::Nodes(k),
            (None, Some(r)) => Budget::Ratio(r),
            (None, None) => Budget::Ratio(0.5),
        },
    };
    let ref_sample = match args.ref_sample {
        Some(f) => Some(f),
        None => file.get_f64("explain", "ref_sample")?,
    };

    let model = load_checkpoint(&args.checkpoint)?;
    let data = load_dataset(&args.data)?;
    let refs_path = args.refs.clone().unwrap_or_else(|| args.data.clone());
    let ref_graphs = load_dataset(&refs_path)?;
    let refs = ReferenceSet::build(&model, ref_graphs)?;

    let cfg = ExplainConfig {
        budget,
        reference_sample: ref_sample,
        seed: derive_seed(seed, "explain", 0),
        metric,
    };

    std::fs::create_dir_all(&args.outdir)
        .with_context(|| format!("creating {}", args.outdir.display()))?;

    let targets: Vec<_> = match &args.graph_id {
        Some(id) => {
            let g = data
                .iter()
                .find(|g| &g.id == id)
                .ok_or_else(|| Error::ParseError(format!("graph id {id:?} not in dataset")))?;
            vec![g.clone()]
        }
        None => data,
    };

    let mut rows = Vec::with_capacity(targets.len());
    let mut failures = 0usize;
    for g in &targets {
        match explain(&model, g, &refs, &cfg) {
            Ok(e) => {
                let dot = explanation_dot(g, &e);
                let dot_path = args.outdir.join(format!("{}.dot", g.id));
                std::fs::write(&dot_path, dot)
                    .with_context(|| format!("writing {}", dot_path.display()))?;
                rows.push(Row {
                    record: ExplanationRecord::new(&g.id, &e),
                    error: None,
                });
            }
            Err(Error::NoQualifiedCounterpart(_)) => {
                failures += 1;
                rows.push(Row {
                    record: ExplanationRecord {
                        graph_id: g.id.clone(),
                        nodes: Vec::new(),
                        counterpart_id: None,
                        delta: 0.0,
                        d_g: 0.0,
                        verified: false,
                    },
                    error: Some("no_qualified_counterpart".into()),
                });
            }
            Err(other) => return Err(other.into()),
        }
    }

    let out_path = args.outdir.join("explanations.json");
    std::fs::write(&out_path, serde_json::to_string_pretty(&rows)? + "\n")
        .with_context(|| format!("writing {}", out_path.display()))?;
    write_snapshot(
        &args.outdir.join("run_config.json"),
        &Resolved {
            command: "explain",
            checkpoint: args.checkpoint.display().to_string(),
            data: args.data.display().to_string(),
            refs: refs_path.display().to_string(),
            budget,
            reference_sample: ref_sample,
            metric,
            seed,
            graph_id: args.graph_id.clone(),
        },
    )?;

    println!(
        "explained {} graphs ({} without qualified counterpart) -> {}",
        targets.len(),
        failures,
        out_path.display()
    );
    Ok(())
}
