//! Structure-aware training augmentation.
//!
//! Random node dropping can destroy the very substructure that determines a
//! graph's label while the label is kept, teaching the model wrong
//! associations. The matching-driven strategy avoids that: it matches each
//! training graph against a random same-class counterpart with the current
//! model, keeps the matched (informative) portion, and drops only the rest.
//! The inverse strategy, which drops *inside* the informative portion,
//! exists as a deliberately harmful baseline.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{match_pair, Budget, ReferenceSet};
use crate::gnn::{run_training, Model, TrainConfig};
use crate::graph::{induced_subgraph, Graph, NodeSet};
use crate::matcher::Metric;
use crate::rng::substream_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    DropNode,
    FpDrop,
    MatchDrop,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "dropnode" => Ok(Strategy::DropNode),
            "fpdrop" => Ok(Strategy::FpDrop),
            "matchdrop" => Ok(Strategy::MatchDrop),
            other => Err(Error::ParseError(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub strategy: Strategy,
    /// Retaining ratio: the kept subgraph has `ceil(rho * |V|)` nodes.
    pub rho: f64,
    /// Plain-training epochs before augmentation kicks in.
    pub warmup_epochs: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            strategy: Strategy::None,
            rho: 0.95,
            warmup_epochs: 10,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::BudgetError(format!(
                "rho = {} out of (0, 1]",
                self.rho
            )));
        }
        Ok(())
    }
}

fn keep_count(n: usize, rho: f64) -> usize {
    Budget::Ratio(rho)
        .resolve(n)
        .expect("rho validated by caller")
}

fn random_subset(n: usize, k: usize, rng: &mut ChaCha8Rng) -> NodeSet {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    NodeSet::from_unsorted(idx)
}

/// Induced subgraph on a uniformly random `ceil(rho * |V|)`-node subset;
/// the label rides along.
pub fn dropnode_subgraph(g: &Graph, rho: f64, rng: &mut ChaCha8Rng) -> Result<Graph> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::BudgetError(format!("rho = {rho} out of (0, 1]")));
    }
    let k = keep_count(g.num_nodes(), rho);
    induced_subgraph(g, &random_subset(g.num_nodes(), k, rng))
}

/// Uniform choice among pool graphs with the same ground-truth label, a
/// different id, and at least `k` nodes.
fn pick_counterpart<'p>(
    g: &Graph,
    pool: &'p ReferenceSet,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Option<&'p Graph> {
    let label = g.label?;
    let qualified: Vec<&Graph> = pool
        .graphs()
        .iter()
        .filter(|c| c.label == Some(label) && c.id != g.id && c.num_nodes() >= k)
        .collect();
    if qualified.is_empty() {
        None
    } else {
        Some(qualified[rng.gen_range(0..qualified.len())])
    }
}

/// The matched (most informative) `ceil(rho * |V|)`-node subgraph of `g`,
/// found by matching against one random same-class counterpart with the
/// current model. Falls back to [`dropnode_subgraph`] when no counterpart
/// qualifies.
pub fn matchdrop_subgraph(
    model: &Model,
    g: &Graph,
    pool: &ReferenceSet,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Graph> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::BudgetError(format!("rho = {rho} out of (0, 1]")));
    }
    let k = keep_count(g.num_nodes(), rho);
    match pick_counterpart(g, pool, k, rng) {
        Some(counterpart) => {
            let (nodes, _, _) = match_pair(model, g, counterpart, k, Metric::Euclidean)?;
            induced_subgraph(g, &nodes)
        }
        None => dropnode_subgraph(g, rho, rng),
    }
}

/// The adversarial inverse: identifies the informative set exactly as
/// matchdrop does, then removes `floor((1 - rho) * |V|)` nodes *from within
/// it*, keeping the uninformative remainder intact. If the drop count would
/// exceed the informative set, the whole set goes (degenerate case).
pub fn fpdrop_subgraph(
    model: &Model,
    g: &Graph,
    pool: &ReferenceSet,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Graph> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::BudgetError(format!("rho = {rho} out of (0, 1]")));
    }
    let n = g.num_nodes();
    let k = keep_count(n, rho);
    let informative = match pick_counterpart(g, pool, k, rng) {
        Some(counterpart) => {
            let (nodes, _, _) = match_pair(model, g, counterpart, k, Metric::Euclidean)?;
            nodes
        }
        None => random_subset(n, k, rng),
    };
    // floor((1 - rho) * n) == n - ceil(rho * n) exactly; reusing the kept
    // count avoids a second rounding of the same ratio.
    let drop_count = (n - keep_count(n, rho)).min(informative.len());
    let mut inside: Vec<usize> = informative.iter().collect();
    inside.shuffle(rng);
    let dropped: std::collections::HashSet<usize> = inside.into_iter().take(drop_count).collect();
    let kept: NodeSet = (0..n).filter(|i| !dropped.contains(i)).collect();
    induced_subgraph(g, &kept)
}

/// Applies the configured strategy to one graph with a per-(epoch, graph)
/// derived RNG, so the draw sequence of one graph never shifts another's.
fn augment_one(
    model: &Model,
    g: &Graph,
    pool: &ReferenceSet,
    acfg: &AugmentConfig,
    epoch: usize,
    index: usize,
) -> Result<Graph> {
    let mut rng = substream_at(acfg.seed, "augment", (epoch as u64) << 32 | index as u64);
    match acfg.strategy {
        Strategy::None => Ok(g.clone()),
        Strategy::DropNode => dropnode_subgraph(g, acfg.rho, &mut rng),
        Strategy::MatchDrop => matchdrop_subgraph(model, g, pool, acfg.rho, &mut rng),
        Strategy::FpDrop => fpdrop_subgraph(model, g, pool, acfg.rho, &mut rng),
    }
}

/// Warmup epochs of plain training, then per-epoch regeneration of every
/// training graph via the chosen strategy (matching against the current
/// model state) and cross-entropy steps on the augmented graphs with their
/// original labels. `on_epoch` observes `(epoch, model, mean_ce)` after
/// each epoch.
pub fn train_with_augmentation_logged<C>(
    model: &Model,
    train: &[Graph],
    cfg: &TrainConfig,
    acfg: &AugmentConfig,
    on_epoch: C,
) -> Result<(Model, Vec<f64>)>
where
    C: FnMut(usize, &Model, f64),
{
    acfg.validate()?;
    let pool = ReferenceSet::unscored(train.to_vec());
    run_training(
        model,
        cfg,
        |epoch, current: &Model| {
            if acfg.strategy == Strategy::None || epoch < acfg.warmup_epochs {
                return Ok(Cow::Borrowed(train));
            }
            let augmented: Vec<Graph> = train
                .par_iter()
                .enumerate()
                .map(|(i, g)| augment_one(current, g, &pool, acfg, epoch, i))
                .collect::<Result<_>>()?;
            Ok(Cow::Owned(augmented))
        },
        on_epoch,
    )
}

/// [`train_with_augmentation_logged`] without the observer.
pub fn train_with_augmentation(
    model: &Model,
    train: &[Graph],
    cfg: &TrainConfig,
    acfg: &AugmentConfig,
) -> Result<(Model, Vec<f64>)> {
    train_with_augmentation_logged(model, train, cfg, acfg, |_, _, _| {})
}
