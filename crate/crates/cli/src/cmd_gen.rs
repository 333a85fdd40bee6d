use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use matchx_core::datagen::{
    gen_motif_dataset, save_dataset, save_manifest, DatasetManifest, DatasetSpec,
};

use crate::config::{snapshot_path, write_snapshot, ConfigFile};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// Two classes: house vs cycle
    Ba2,
    /// Three classes: house, cycle, grid
    Ba3,
}

#[derive(Args)]
pub struct GenArgs {
    /// Optional TOML config; flags override its [gen] section
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset preset
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Number of graphs
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest base size (before the motif is attached)
    #[arg(long)]
    base_min: Option<usize>,
    #[arg(long)]
    base_max: Option<usize>,
    /// Bridge edges between base and motif
    #[arg(long)]
    attach_edges: Option<usize>,
    /// Degree one-hot cap (feature width = cap + 1)
    #[arg(long)]
    degree_cap: Option<usize>,
    /// Output dataset file (JSON)
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct Resolved {
    command: &'static str,
    preset: String,
    spec: DatasetSpec,
    output: String,
}

pub fn run(args: GenArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_ref())?;
    let preset = match args.preset {
        Some(p) => p,
        None => match file.get_string("gen", "preset")?.as_deref() {
            Some("ba2") | None => Preset::Ba2,
            Some("ba3") => Preset::Ba3,
            Some(other) => anyhow::bail!("config [gen].preset: unknown preset {other:?}"),
        },
    };
    let n = match args.n {
        Some(n) => n,
        None => file.get_usize("gen", "n")?.unwrap_or(300),
    };
    let seed = match args.seed {
        Some(s) => s,
        None => file.get_u64("gen", "seed")?.unwrap_or(0),
    };

    let mut spec = match preset {
        Preset::Ba2 => DatasetSpec::preset_ba2(n, seed),
        Preset::Ba3 => DatasetSpec::preset_ba3(n, seed),
    };
    if let Some(v) = args.base_min.or(file.get_usize("gen", "base_min")?) {
        spec.base_size.0 = v;
    }
    if let Some(v) = args.base_max.or(file.get_usize("gen", "base_max")?) {
        spec.base_size.1 = v;
    }
    if let Some(v) = args.attach_edges.or(file.get_usize("gen", "attach_edges")?) {
        spec.attach_edges = v;
    }
    if let Some(v) = args.degree_cap.or(file.get_usize("gen", "degree_cap")?) {
        spec.degree_cap = v;
    }

    let graphs = gen_motif_dataset(&spec)?;
    save_dataset(&graphs, &args.output)?;
    save_manifest(&DatasetManifest::new(spec.clone()), &args.output)?;
    write_snapshot(
        &snapshot_path(&args.output),
        &Resolved {
            command: "gen",
            preset: format!("{preset:?}").to_lowercase(),
            spec,
            output: args.output.display().to_string(),
        },
    )
    .context("writing config snapshot")?;

    println!("wrote {} graphs to {}", graphs.len(), args.output.display());
    Ok(())
}
