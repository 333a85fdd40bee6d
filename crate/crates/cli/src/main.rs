//! Single-binary front end: generate synthetic datasets, train models with
//! optional matching-driven augmentation, explain predictions, and evaluate
//! explainers. Every run is reproducible from one root seed and writes a
//! resolved-config snapshot next to its outputs.

mod cmd_eval;
mod cmd_explain;
mod cmd_gen;
mod cmd_train;
mod config;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 2 usage (via clap), 3 data error, 4 internal.
const EXIT_DATA: i32 = 3;
const EXIT_INTERNAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "matchx",
    version,
    about = "Graph classifiers explained by subgraph matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motif dataset
    Gen(cmd_gen::GenArgs),
    /// Train a model, optionally with augmentation
    Train(cmd_train::TrainArgs),
    /// Explain predictions for a dataset
    Explain(cmd_explain::ExplainArgs),
    /// Evaluate an explainer and write a fidelity report
    Eval(cmd_eval::EvalArgs),
}

fn init_threads() {
    if let Ok(v) = std::env::var("MATCHX_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                // ignore failure: the pool may already be initialized in tests
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    use matchx_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(
            E::ParseError(_)
            | E::MissingLabel(_)
            | E::InvalidGraph(_)
            | E::InvalidNodeSet(_)
            | E::InvalidSpec(_)
            | E::EmptyDataset
            | E::ShapeError(_)
            | E::BudgetError(_)
            | E::Io { .. },
        ) => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen::run(args),
        Command::Train(args) => cmd_train::run(args),
        Command::Explain(args) => cmd_explain::run(args),
        Command::Eval(args) => cmd_eval::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code_for(&err));
    }
}
