//! Fidelity and recall metrics plus report assembly.
//!
//! ACC@rho forwards each graph's size-`ceil(rho |V|)` explanation back into
//! the model and counts how often the original prediction is recovered.
//! ACC-AUC aggregates the curve over a ratio grid as the arithmetic mean
//! (the grid is uniform, so the mean and a normalized trapezoid differ only
//! at the endpoints; the mean is the definition used everywhere here).
//! Recall@N scores explanations of size `N = |ground truth|` against the
//! known explanatory node set when a graph carries one.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{delta_score, Budget, ExplainStats, Explanation};
use crate::gnn::{self, Model};
use crate::graph::{induced_subgraph, Graph, NodeSet};

/// Explainer hook used by the sweeps: `(model, graph, K) -> Explanation`.
pub type ExplainFn<'a> = dyn Fn(&Model, &Graph, usize) -> Result<Explanation> + Sync + 'a;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub graph_id: String,
    pub rho: f64,
    pub recovered: bool,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub rho_grid: Vec<f64>,
    pub acc_curve: Vec<f64>,
    pub acc_auc: f64,
    /// Mean recall at `K = |gt_nodes|` over the graphs that carry a ground
    /// truth; `None` when no graph does.
    pub recall_at_n: Option<f64>,
    /// Calibration companion to `recall_at_n`: the expected recall of a
    /// uniformly random size-K explanation, `mean(K / |V|)`.
    pub random_recall_expectation: Option<f64>,
    pub rows: Vec<ReportRow>,
    /// Work accounting for the sweep; deterministic counters, filled in by
    /// the caller that owns the explainer's counters.
    pub counters: ExplainStats,
}

/// The default ratio grid {0.1, 0.2, ..., 1.0}.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

fn recovered(model: &Model, g: &Graph, explanation: &Result<Explanation>) -> Result<bool> {
    match explanation {
        // A failed explanation never aborts a sweep; it counts as not
        // recovered.
        Err(_) => Ok(false),
        Ok(e) => {
            let sub = induced_subgraph(g, &e.nodes)?;
            Ok(gnn::predict_class(model, &sub)? == gnn::predict_class(model, g)?)
        }
    }
}

/// Fraction of graphs whose prediction survives restriction to the
/// explanation of ratio `rho`.
pub fn acc_at_rho(
    model: &Model,
    explain_fn: &ExplainFn<'_>,
    data: &[Graph],
    rho: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits: usize = data
        .par_iter()
        .map(|g| {
            let k = Budget::Ratio(rho).resolve(g.num_nodes())?;
            let e = explain_fn(model, g, k);
            Ok(usize::from(recovered(model, g, &e)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(hits as f64 / data.len() as f64)
}

/// Arithmetic mean of the accuracy curve.
pub fn acc_auc(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// |pred ∩ truth| / |truth|.
pub fn recall_at_n(pred: &NodeSet, truth: &NodeSet) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::UndefinedRecall);
    }
    Ok(pred.intersection_len(truth) as f64 / truth.len() as f64)
}

/// Sweeps the ratio grid, collecting one row per (ratio, graph), the
/// accuracy curve with its mean, and ground-truth recall where available.
pub fn build_report(
    model: &Model,
    explain_fn: &ExplainFn<'_>,
    data: &[Graph],
    grid: &[f64],
) -> Result<ExplanationReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if grid.is_empty() {
        return Err(Error::EmptyCurve);
    }

    let mut rows = Vec::with_capacity(grid.len() * data.len());
    let mut acc_curve = Vec::with_capacity(grid.len());
    for &rho in grid {
        let per_graph: Vec<(bool, f64)> = data
            .par_iter()
            .map(|g| {
                let k = Budget::Ratio(rho).resolve(g.num_nodes())?;
                let e = explain_fn(model, g, k);
                let rec = recovered(model, g, &e)?;
                let delta = match &e {
                    Ok(expl) => delta_score(model, g, &expl.nodes)?,
                    Err(_) => 0.0,
                };
                Ok((rec, delta))
            })
            .collect::<Result<_>>()?;
        let hits = per_graph.iter().filter(|(rec, _)| *rec).count();
        acc_curve.push(hits as f64 / data.len() as f64);
        for (g, (rec, delta)) in data.iter().zip(per_graph) {
            rows.push(ReportRow {
                graph_id: g.id.clone(),
                rho,
                recovered: rec,
                delta,
            });
        }
    }

    let with_truth: Vec<&Graph> = data
        .iter()
        .filter(|g| g.gt_nodes.as_ref().is_some_and(|s| !s.is_empty()))
        .collect();
    let (recall, random_expectation) = if with_truth.is_empty() {
        (None, None)
    } else {
        let sum: f64 = with_truth
            .par_iter()
            .map(|g| {
                let truth = g.gt_nodes.as_ref().unwrap();
                let k = truth.len().min(g.num_nodes());
                match explain_fn(model, g, k) {
                    Ok(e) => recall_at_n(&e.nodes, truth),
                    Err(_) => Ok(0.0),
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        let expectation: f64 = with_truth
            .iter()
            .map(|g| {
                let k = g.gt_nodes.as_ref().unwrap().len().min(g.num_nodes());
                k as f64 / g.num_nodes() as f64
            })
            .sum();
        (
            Some(sum / with_truth.len() as f64),
            Some(expectation / with_truth.len() as f64),
        )
    };

    Ok(ExplanationReport {
        rho_grid: grid.to_vec(),
        acc_curve: acc_curve.clone(),
        acc_auc: acc_auc(&acc_curve)?,
        recall_at_n: recall,
        random_recall_expectation: random_expectation,
        rows,
        counters: ExplainStats::default(),
    })
}

/// Per-graph rows as CSV: `graph_id,rho,recovered,delta`. Byte-stable for a
/// fixed seed.
pub fn write_report_csv(report: &ExplanationReport, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = String::from("graph_id,rho,recovered,delta\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.graph_id, row.rho, row.recovered, row.delta
        ));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(&path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    rho_grid: &'a [f64],
    acc_curve: &'a [f64],
    acc_auc: f64,
    recall_at_n: Option<f64>,
    random_recall_expectation: Option<f64>,
    n_graphs: usize,
    counters: &'a ExplainStats,
}

/// Summary JSON (curve, AUC, recall, counters). Byte-stable for a fixed
/// seed.
pub fn write_report_json(
    report: &ExplanationReport,
    n_graphs: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let summary = Summary {
        rho_grid: &report.rho_grid,
        acc_curve: &report.acc_curve,
        acc_auc: report.acc_auc,
        recall_at_n: report.recall_at_n,
        random_recall_expectation: report.random_recall_expectation,
        n_graphs,
        counters: &report.counters,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
