use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use matchx_core::augment::{train_with_augmentation_logged, AugmentConfig, Strategy};
use matchx_core::datagen::load_dataset;
use matchx_core::gnn::{accuracy, save_checkpoint, Activation, Model, Pooling, TrainConfig};
use matchx_core::rng::derive_seed;

use crate::config::{snapshot_path, write_snapshot, ConfigFile};

#[derive(Args)]
pub struct TrainArgs {
    /// Optional TOML config; flags override its [train] section
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training dataset (JSON)
    #[arg(long)]
    data: PathBuf,
    /// Optional held-out dataset for the test_acc log column
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Output checkpoint file
    #[arg(short, long)]
    output: PathBuf,
    /// Training log CSV (default: `<output>.log.csv`)
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Root seed; model init, shuffling, and augmentation draw from
    /// separate substreams of it
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden width of each message-passing layer
    #[arg(long)]
    hidden: Option<usize>,
    /// Number of message-passing layers
    #[arg(long)]
    layers: Option<usize>,
    /// Pooling: sum | mean
    #[arg(long)]
    pooling: Option<String>,
    /// Activation: softplus | tanh
    #[arg(long)]
    activation: Option<String>,
    /// Augmentation strategy: none | dropnode | fpdrop | matchdrop
    #[arg(long)]
    strategy: Option<String>,
    /// Retaining ratio for augmentation
    #[arg(long)]
    rho: Option<f64>,
    /// Plain epochs before augmentation starts (default: 10% of epochs)
    #[arg(long)]
    warmup: Option<usize>,
}

#[derive(Serialize)]
struct Resolved {
    command: &'static str,
    data: String,
    test_data: Option<String>,
    output: String,
    log: String,
    widths: Vec<usize>,
    pooling: Pooling,
    activation: Activation,
    train: TrainConfig,
    augment: AugmentConfig,
    root_seed: u64,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_ref())?;
    let pick_usize = |flag: Option<usize>, key: &str, dflt: usize| -> Result<usize> {
        Ok(flag.or(file.get_usize("train", key)?).unwrap_or(dflt))
    };

    let epochs = pick_usize(args.epochs, "epochs", 100)?;
    let batch_size = pick_usize(args.batch_size, "batch_size", 32)?;
    let hidden = pick_usize(args.hidden, "hidden", 64)?;
    let layers = pick_usize(args.layers, "layers", 2)?;
    let lr = args.lr.or(file.get_f64("train", "lr")?).unwrap_or(1e-2);
    let root_seed = args.seed.or(file.get_u64("train", "seed")?).unwrap_or(0);
    let pooling = Pooling::from_str(
        &args
            .pooling
            .or(file.get_string("train", "pooling")?)
            .unwrap_or_else(|| "sum".into()),
    )?;
    let activation = Activation::from_str(
        &args
            .activation
            .or(file.get_string("train", "activation")?)
            .unwrap_or_else(|| "softplus".into()),
    )?;
    let strategy = Strategy::from_str(
        &args
            .strategy
            .or(file.get_string("train", "strategy")?)
            .unwrap_or_else(|| "none".into()),
    )?;
    let rho = args.rho.or(file.get_f64("train", "rho")?).unwrap_or(0.95);
    let warmup = match args.warmup.or(file.get_usize("train", "warmup")?) {
        Some(w) => w,
        None => epochs / 10,
    };

    let train_data = load_dataset(&args.data)?;
    let test_data = args.test_data.as_ref().map(load_dataset).transpose()?;

    let feature_width = train_data
        .first()
        .map(|g| g.feature_width())
        .ok_or(matchx_core::Error::EmptyDataset)?;
    let classes = train_data
        .iter()
        .map(|g| g.label.map_or(0, |c| c + 1))
        .max()
        .unwrap_or(0)
        .max(2);

    let mut widths = vec![feature_width];
    widths.extend(std::iter::repeat_n(hidden, layers));
    widths.push(classes);

    let model = Model::with_activation(
        widths.clone(),
        pooling,
        activation,
        derive_seed(root_seed, "model", 0),
    )?;
    let train_cfg = TrainConfig {
        epochs,
        batch_size,
        learning_rate: lr,
        seed: derive_seed(root_seed, "train", 0),
        ..TrainConfig::default()
    };
    let augment_cfg = AugmentConfig {
        strategy,
        rho,
        warmup_epochs: warmup,
        seed: derive_seed(root_seed, "augment", 0),
    };

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.output.with_extension("log.csv"));
    let mut log = String::from("epoch,train_loss,train_acc,test_acc,strategy,rho,seed\n");
    let strategy_name = format!("{strategy:?}").to_lowercase();

    let (trained, _history) = train_with_augmentation_logged(
        &model,
        &train_data,
        &train_cfg,
        &augment_cfg,
        |epoch, m, mean_ce| {
            let train_acc = accuracy(m, &train_data).unwrap_or(f64::NAN);
            let test_acc = test_data
                .as_ref()
                .map(|d| accuracy(m, d).unwrap_or(f64::NAN));
            log.push_str(&format!(
                "{epoch},{mean_ce},{train_acc},{},{strategy_name},{rho},{root_seed}\n",
                test_acc.map_or(String::new(), |a| a.to_string()),
            ));
        },
    )?;

    save_checkpoint(&trained, &args.output)?;
    let mut f = std::fs::File::create(&log_path)
        .with_context(|| format!("creating log {}", log_path.display()))?;
    f.write_all(log.as_bytes())?;

    write_snapshot(
        &snapshot_path(&args.output),
        &Resolved {
            command: "train",
            data: args.data.display().to_string(),
            test_data: args.test_data.as_ref().map(|p| p.display().to_string()),
            output: args.output.display().to_string(),
            log: log_path.display().to_string(),
            widths,
            pooling,
            activation,
            train: train_cfg,
            augment: augment_cfg,
            root_seed,
        },
    )?;

    let final_train_acc = accuracy(&trained, &train_data)?;
    match &test_data {
        Some(d) => println!(
            "trained {} epochs: train_acc {final_train_acc:.4} test_acc {:.4}",
            epochs,
            accuracy(&trained, d)?
        ),
        None => println!("trained {} epochs: train_acc {final_train_acc:.4}", epochs),
    }
    Ok(())
}
