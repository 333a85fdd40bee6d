//! Wire format for graphs.
//!
//! Schema per graph object:
//! `{"id": str, "num_nodes": int, "features": [[f64]], "edges": [[u,v,w]],
//!   "label": int|null, "gt_nodes": [int]|null}`
//! Unknown extra fields are ignored with a warning on load so files from
//! newer writers keep working.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};

#[derive(Serialize, Deserialize)]
struct GraphJson {
    id: String,
    num_nodes: usize,
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize, f64)>,
    label: Option<usize>,
    gt_nodes: Option<Vec<usize>>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

pub fn graph_to_value(g: &Graph) -> serde_json::Value {
    let rec = GraphJson {
        id: g.id.clone(),
        num_nodes: g.num_nodes(),
        features: g.node_features.clone(),
        edges: g.edges.iter().map(|e| (e.u, e.v, e.w)).collect(),
        label: g.label,
        gt_nodes: g.gt_nodes.as_ref().map(|s| s.iter().collect()),
        extra: BTreeMap::new(),
    };
    serde_json::to_value(rec).expect("graph serialization cannot fail")
}

pub fn graph_from_value(value: serde_json::Value) -> Result<Graph> {
    let rec: GraphJson = serde_json::from_value(value)
        .map_err(|e| Error::ParseError(format!("graph object: {e}")))?;
    if !rec.extra.is_empty() {
        let keys: Vec<_> = rec.extra.keys().cloned().collect();
        eprintln!(
            "warning: graph {}: ignoring unknown fields: {}",
            rec.id,
            keys.join(", ")
        );
    }
    if rec.features.len() != rec.num_nodes {
        return Err(Error::ParseError(format!(
            "graph {}: num_nodes is {} but features has {} rows",
            rec.id,
            rec.num_nodes,
            rec.features.len()
        )));
    }
    let mut g = Graph::new(rec.id, rec.features, rec.edges, rec.label)
        .map_err(|e| Error::ParseError(e.to_string()))?;
    if let Some(gt) = rec.gt_nodes {
        let gt = NodeSet::from_unsorted(gt);
        gt.validate(&g)
            .map_err(|e| Error::ParseError(e.to_string()))?;
        g.gt_nodes = Some(gt);
    }
    Ok(g)
}

pub fn graphs_to_json(graphs: &[Graph]) -> String {
    let values: Vec<_> = graphs.iter().map(graph_to_value).collect();
    serde_json::to_string_pretty(&values).expect("dataset serialization cannot fail")
}

pub fn graphs_from_json(text: &str) -> Result<Vec<Graph>> {
    let values: Vec<serde_json::Value> = serde_json::from_str(text)
        .map_err(|e| Error::ParseError(format!("dataset (line {}): {e}", e.line())))?;
    values.into_iter().map(graph_from_value).collect()
}
