//! Matching-based explanation pipeline plus the random and edge-saliency
//! baselines.
//!
//! For a target graph, every counterpart in the reference set that received
//! the same predicted class (and is large enough) is matched node-to-node
//! in embedding space; the matched node set becomes a candidate
//! explanation, kept only if the induced subgraph reproduces the original
//! prediction. Among the surviving candidates the one whose removal drops
//! the target-class probability the most wins. Candidates from different
//! counterparts can differ, so explanations are inherently non-unique; all
//! tie-breaks here are deterministic (higher delta, then smaller matching
//! distance, then lexicographic node set).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{self, Model};
use crate::graph::{complement_nodes, induced_subgraph, Graph, NodeSet};
use crate::matcher::{greedy_match, pairwise_distances, Metric};
use crate::rng::substream;

/// Explanation size: an explicit node count or a retaining ratio resolved
/// per graph as `ceil(rho * |V|)`, clamped to `[1, |V|]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Nodes(usize),
    Ratio(f64),
}

impl Budget {
    pub fn resolve(&self, num_nodes: usize) -> Result<usize> {
        if num_nodes == 0 {
            return Err(Error::BudgetError("graph has no nodes".into()));
        }
        match *self {
            Budget::Nodes(k) => {
                if k == 0 || k > num_nodes {
                    Err(Error::BudgetError(format!(
                        "K = {k} out of [1, {num_nodes}]"
                    )))
                } else {
                    Ok(k)
                }
            }
            Budget::Ratio(rho) => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::BudgetError(format!("rho = {rho} out of (0, 1]")));
                }
                // Snap products like 0.9 * 20 = 18.000000000000004 back to
                // the integer before taking the ceiling.
                let x = rho * num_nodes as f64;
                let k = if (x - x.round()).abs() < 1e-9 {
                    x.round() as usize
                } else {
                    x.ceil() as usize
                };
                Ok(k.clamp(1, num_nodes))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub budget: Budget,
    /// Optional fraction of the reference set to sweep (seeded subsample).
    pub reference_sample: Option<f64>,
    pub seed: u64,
    pub metric: Metric,
}

impl ExplainConfig {
    pub fn with_budget(budget: Budget) -> Self {
        ExplainConfig {
            budget,
            reference_sample: None,
            seed: 0,
            metric: Metric::Euclidean,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(f) = self.reference_sample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::BudgetError(format!(
                    "reference_sample = {f} out of (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// A selected explanation: the node set, where it came from, the matching
/// distance, the probability drop when it is removed, and whether the
/// induced subgraph reproduced the original prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub nodes: NodeSet,
    pub counterpart_id: Option<String>,
    pub d_g: f64,
    pub delta: f64,
    pub verified: bool,
}

/// Pool of candidate counterpart graphs with the model's predicted class
/// and node embeddings cached per graph. The fingerprint pins the cache to
/// one exact model.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    graphs: Vec<Graph>,
    predicted: Option<Vec<usize>>,
    embeddings: Option<Vec<crate::matrix::Matrix>>,
    fingerprint: Option<u64>,
}

impl ReferenceSet {
    /// Caches predictions and embeddings for every graph against the given
    /// model, so explanation sweeps never re-embed the pool.
    pub fn build(model: &Model, graphs: Vec<Graph>) -> Result<Self> {
        let scored = graphs
            .par_iter()
            .map(|g| {
                let probs = gnn::forward_predict(model, g)?;
                let emb = gnn::forward_embed(model, g)?;
                Ok((gnn::argmax(&probs), emb))
            })
            .collect::<Result<Vec<_>>>()?;
        let (predicted, embeddings) = scored.into_iter().unzip();
        Ok(ReferenceSet {
            graphs,
            predicted: Some(predicted),
            embeddings: Some(embeddings),
            fingerprint: Some(model.fingerprint()),
        })
    }

    /// A pool without cached predictions; enough for label-driven uses
    /// (training-time augmentation), not for [`explain`].
    pub fn unscored(graphs: Vec<Graph>) -> Self {
        ReferenceSet {
            graphs,
            predicted: None,
            embeddings: None,
            fingerprint: None,
        }
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    fn scored_for(&self, model: &Model) -> Result<(&[usize], &[crate::matrix::Matrix])> {
        match (&self.predicted, &self.embeddings, self.fingerprint) {
            (Some(classes), Some(embeddings), Some(fp)) if fp == model.fingerprint() => {
                Ok((classes, embeddings))
            }
            _ => Err(Error::ModelMismatch),
        }
    }
}

/// Deterministic work counters for one or more explanation sweeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainStats {
    /// Reference graphs examined for qualification.
    pub qualifications: u64,
    /// Qualified counterparts actually matched.
    pub matchings: u64,
    /// Greedy selection rounds across all matchings (K per matching).
    pub matching_rounds: u64,
}

impl ExplainStats {
    pub fn add(&mut self, other: &ExplainStats) {
        self.qualifications += other.qualifications;
        self.matchings += other.matchings;
        self.matching_rounds += other.matching_rounds;
    }
}

/// Thread-safe accumulator for [`ExplainStats`] across a whole evaluation.
#[derive(Debug, Default)]
pub struct ExplainCounters {
    qualifications: AtomicU64,
    matchings: AtomicU64,
    matching_rounds: AtomicU64,
}

impl ExplainCounters {
    pub fn record(&self, stats: &ExplainStats) {
        self.qualifications
            .fetch_add(stats.qualifications, Ordering::Relaxed);
        self.matchings.fetch_add(stats.matchings, Ordering::Relaxed);
        self.matching_rounds
            .fetch_add(stats.matching_rounds, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> ExplainStats {
        ExplainStats {
            qualifications: self.qualifications.load(Ordering::Relaxed),
            matchings: self.matchings.load(Ordering::Relaxed),
            matching_rounds: self.matching_rounds.load(Ordering::Relaxed),
        }
    }
}

/// True iff `g2` can serve as a counterpart for `g`: same predicted class,
/// a different graph id, and at least `k` nodes.
pub fn qualify_counterpart(model: &Model, g: &Graph, g2: &Graph, k: usize) -> Result<bool> {
    if g2.id == g.id || g2.num_nodes() < k {
        return Ok(false);
    }
    Ok(gnn::predict_class(model, g)? == gnn::predict_class(model, g2)?)
}

/// Matches `g` against a qualified counterpart: embeds both graphs, builds
/// the pairwise distance matrix, runs the greedy matcher, and returns the
/// matched `g`-side nodes, the matching distance, and whether the induced
/// subgraph reproduces the prediction on `g`.
pub fn match_pair(
    model: &Model,
    g: &Graph,
    g2: &Graph,
    k: usize,
    metric: Metric,
) -> Result<(NodeSet, f64, bool)> {
    let emb = gnn::forward_embed(model, g)?;
    let class = gnn::predict_class(model, g)?;
    let emb2 = gnn::forward_embed(model, g2)?;
    match_embedded(model, g, &emb, class, &emb2, k, metric)
}

fn match_embedded(
    model: &Model,
    g: &Graph,
    emb_g: &crate::matrix::Matrix,
    class_g: usize,
    emb_g2: &crate::matrix::Matrix,
    k: usize,
    metric: Metric,
) -> Result<(NodeSet, f64, bool)> {
    let dists = pairwise_distances(emb_g, emb_g2, metric)?;
    let corr = greedy_match(&dists, k)?;
    debug_assert_eq!(corr.pairs.len(), k);
    let nodes: NodeSet = corr.pairs.iter().map(|&(i, _)| i).collect();
    let sub = induced_subgraph(g, &nodes)?;
    let verified = gnn::predict_class(model, &sub)? == class_g;
    Ok((nodes, corr.total_distance, verified))
}

/// Probability drop of the target class when the nodes of `s` are removed:
/// `p(c*, g) - p(c*, g minus s)`, where `c*` is the label when present and
/// the predicted class otherwise.
pub fn delta_score(model: &Model, g: &Graph, s: &NodeSet) -> Result<f64> {
    s.validate(g)?;
    let probs = gnn::forward_predict(model, g)?;
    let c_star = match g.label {
        Some(c) if c < probs.len() => c,
        _ => gnn::argmax(&probs),
    };
    let rest = induced_subgraph(g, &complement_nodes(g, s)?)?;
    let rest_probs = gnn::forward_predict(model, &rest)?;
    Ok(probs[c_star] - rest_probs[c_star])
}

/// One candidate from matching `g` against a single counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub nodes: NodeSet,
    pub counterpart_id: String,
    /// Index of the counterpart within the (subsampled) reference sweep.
    pub counterpart_pos: usize,
    pub d_g: f64,
    pub verified: bool,
}

/// All deduplicated candidates for `g`, in ascending node-set order, plus
/// the work counters of the sweep. Exposed so that the non-uniqueness of
/// explanations is observable and the argmax is re-checkable.
pub fn candidate_explanations(
    model: &Model,
    g: &Graph,
    refs: &ReferenceSet,
    cfg: &ExplainConfig,
) -> Result<(Vec<Candidate>, ExplainStats)> {
    cfg.validate()?;
    let (classes, embeddings) = refs.scored_for(model)?;
    let k = cfg.budget.resolve(g.num_nodes())?;

    let selected: Vec<usize> = match cfg.reference_sample {
        None => (0..refs.len()).collect(),
        Some(f) => {
            let take = ((f * refs.len() as f64).ceil() as usize).clamp(1, refs.len());
            let mut rng = substream(cfg.seed, "explain-sample");
            let mut idx: Vec<usize> = (0..refs.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(take);
            idx.sort_unstable();
            idx
        }
    };

    let class_g = gnn::predict_class(model, g)?;
    let emb_g = gnn::forward_embed(model, g)?;

    let per_ref: Vec<Option<(NodeSet, f64, bool, usize)>> = selected
        .par_iter()
        .enumerate()
        .map(|(pos, &ri)| {
            let g2 = &refs.graphs[ri];
            let qualified = classes[ri] == class_g && g2.id != g.id && g2.num_nodes() >= k;
            if !qualified {
                return Ok(None);
            }
            let (nodes, d_g, verified) =
                match_embedded(model, g, &emb_g, class_g, &embeddings[ri], k, cfg.metric)?;
            Ok(Some((nodes, d_g, verified, pos)))
        })
        .collect::<Result<_>>()?;

    let mut stats = ExplainStats {
        qualifications: selected.len() as u64,
        ..Default::default()
    };
    // Deduplicate identical node sets, keeping the occurrence with the
    // smallest matching distance (earliest counterpart on ties).
    let mut unique: BTreeMap<NodeSet, Candidate> = BTreeMap::new();
    for item in per_ref.into_iter().flatten() {
        let (nodes, d_g, verified, pos) = item;
        stats.matchings += 1;
        stats.matching_rounds += k as u64;
        let cand = Candidate {
            nodes: nodes.clone(),
            counterpart_id: refs.graphs[selected[pos]].id.clone(),
            counterpart_pos: pos,
            d_g,
            verified,
        };
        match unique.get_mut(&nodes) {
            None => {
                unique.insert(nodes, cand);
            }
            Some(existing) => {
                if d_g < existing.d_g {
                    *existing = cand;
                }
            }
        }
    }

    Ok((unique.into_values().collect(), stats))
}

/// Full pipeline for one graph: sweep the reference set, keep verified
/// candidates, and return the one maximizing the probability drop. If no
/// counterpart qualifies this is an error; if counterparts qualify but none
/// verifies, the minimum-distance candidate is returned flagged
/// `verified = false` so evaluation sweeps always have an answer.
pub fn explain(
    model: &Model,
    g: &Graph,
    refs: &ReferenceSet,
    cfg: &ExplainConfig,
) -> Result<Explanation> {
    explain_with_stats(model, g, refs, cfg).map(|(e, _)| e)
}

pub fn explain_with_stats(
    model: &Model,
    g: &Graph,
    refs: &ReferenceSet,
    cfg: &ExplainConfig,
) -> Result<(Explanation, ExplainStats)> {
    let (candidates, stats) = candidate_explanations(model, g, refs, cfg)?;
    if candidates.is_empty() {
        return Err(Error::NoQualifiedCounterpart(g.id.clone()));
    }

    let verified: Vec<&Candidate> = candidates.iter().filter(|c| c.verified).collect();
    let chosen = if verified.is_empty() {
        // Fallback: nothing recovered the prediction; surface the closest
        // match rather than aborting a whole evaluation run.
        let best = candidates
            .iter()
            .min_by(|a, b| {
                a.d_g
                    .partial_cmp(&b.d_g)
                    .unwrap()
                    .then_with(|| a.nodes.cmp(&b.nodes))
            })
            .unwrap();
        let delta = delta_score(model, g, &best.nodes)?;
        Explanation {
            nodes: best.nodes.clone(),
            counterpart_id: Some(best.counterpart_id.clone()),
            d_g: best.d_g,
            delta,
            verified: false,
        }
    } else {
        let mut best: Option<(f64, &Candidate)> = None;
        for cand in &verified {
            let delta = delta_score(model, g, &cand.nodes)?;
            let better = match best {
                None => true,
                Some((bd, bc)) => {
                    delta > bd || (delta == bd && cand.d_g < bc.d_g)
                    // equal delta and d_g: keep the earlier candidate, which
                    // has the lexicographically smaller node set
                }
            };
            if better {
                best = Some((delta, cand));
            }
        }
        let (delta, cand) = best.unwrap();
        Explanation {
            nodes: cand.nodes.clone(),
            counterpart_id: Some(cand.counterpart_id.clone()),
            d_g: cand.d_g,
            delta,
            verified: true,
        }
    };
    Ok((chosen, stats))
}

/// Uniformly random K-node baseline. Distance and delta are not defined for
/// it; reporting fills the delta in via [`delta_score`].
pub fn explain_random(g: &Graph, k: usize, seed: u64) -> Result<Explanation> {
    let n = g.num_nodes();
    if k == 0 || k > n {
        return Err(Error::BudgetError(format!("K = {k} out of [1, {n}]")));
    }
    let mut rng = substream(seed, "explain-random");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.truncate(k);
    Ok(Explanation {
        nodes: NodeSet::from_unsorted(idx),
        counterpart_id: None,
        d_g: 0.0,
        delta: 0.0,
        verified: false,
    })
}

/// Gradient-saliency baseline: scores each node by the summed absolute
/// sensitivity of the predicted-class logit to its incident edge weights
/// and keeps the top K (ties to the smaller index).
pub fn explain_sa(model: &Model, g: &Graph, k: usize) -> Result<Explanation> {
    let n = g.num_nodes();
    if k == 0 || k > n {
        return Err(Error::BudgetError(format!("K = {k} out of [1, {n}]")));
    }
    if g.num_edges() == 0 {
        return Err(Error::EmptySaliency(g.id.clone()));
    }
    let class = gnn::predict_class(model, g)?;
    let saliency = gnn::edge_saliency(model, g, class)?;
    let mut score = vec![0.0; n];
    for (e, s) in g.edges.iter().zip(&saliency) {
        score[e.u] += s.abs();
        score[e.v] += s.abs();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[b].partial_cmp(&score[a]).unwrap().then(a.cmp(&b)));
    order.truncate(k);
    let nodes = NodeSet::from_unsorted(order);
    let sub = induced_subgraph(g, &nodes)?;
    let verified = gnn::predict_class(model, &sub)? == class;
    Ok(Explanation {
        nodes,
        counterpart_id: None,
        d_g: 0.0,
        delta: 0.0,
        verified,
    })
}

/// Export record: `{graph_id, nodes, counterpart_id, delta, d_g, verified}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub graph_id: String,
    pub nodes: Vec<usize>,
    pub counterpart_id: Option<String>,
    pub delta: f64,
    pub d_g: f64,
    pub verified: bool,
}

impl ExplanationRecord {
    pub fn new(graph_id: &str, e: &Explanation) -> Self {
        ExplanationRecord {
            graph_id: graph_id.to_string(),
            nodes: e.nodes.iter().collect(),
            counterpart_id: e.counterpart_id.clone(),
            delta: e.delta,
            d_g: e.d_g,
            verified: e.verified,
        }
    }
}

/// Graphviz rendering of `g` with the explanation nodes filled.
pub fn explanation_dot(g: &Graph, e: &Explanation) -> String {
    let mut out = String::new();
    out.push_str(&format!("graph \"{}\" {{\n", g.id));
    out.push_str("  node [shape=circle];\n");
    for i in 0..g.num_nodes() {
        if e.nodes.contains(i) {
            out.push_str(&format!("  {i} [style=filled, fillcolor=lightblue];\n"));
        } else {
            out.push_str(&format!("  {i};\n"));
        }
    }
    for edge in &g.edges {
        if edge.w == 1.0 {
            out.push_str(&format!("  {} -- {};\n", edge.u, edge.v));
        } else {
            out.push_str(&format!(
                "  {} -- {} [label=\"{}\"];\n",
                edge.u, edge.v, edge.w
            ));
        }
    }
    out.push_str("}\n");
    out
}
