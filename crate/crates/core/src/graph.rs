//! Immutable attributed graphs and node-induced subgraph operations.
//!
//! Graphs are undirected and simple: every edge is stored once with `u < v`,
//! self-loops and duplicates are rejected at construction. Once built, a
//! graph is never mutated, so it can be shared freely across worker threads.

use std::collections::BTreeMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected edge, stored with `u < v`. The optional feature vector is
/// carried for completeness but not consumed by matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    pub feat: Option<Vec<f64>>,
}

/// Attributed graph: one feature row per node, an undirected weighted edge
/// list, an optional class label, and an optional ground-truth explanatory
/// node set (known for synthetic data, absent otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub id: String,
    pub node_features: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
    pub label: Option<usize>,
    pub gt_nodes: Option<NodeSet>,
}

impl Graph {
    /// Builds a graph from plain `(u, v, w)` triples, validating all
    /// structural invariants.
    pub fn new(
        id: impl Into<String>,
        node_features: Vec<Vec<f64>>,
        edges: Vec<(usize, usize, f64)>,
        label: Option<usize>,
    ) -> Result<Self> {
        let edges = edges
            .into_iter()
            .map(|(u, v, w)| Edge {
                u,
                v,
                w,
                feat: None,
            })
            .collect();
        Self::with_edges(id, node_features, edges, label)
    }

    pub fn with_edges(
        id: impl Into<String>,
        node_features: Vec<Vec<f64>>,
        edges: Vec<Edge>,
        label: Option<usize>,
    ) -> Result<Self> {
        let id = id.into();
        let n = node_features.len();
        let width = node_features.first().map_or(0, |r| r.len());
        for (i, row) in node_features.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidGraph(format!(
                    "{id}: feature row {i} has length {} but row 0 has {width}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "{id}: feature row {i} contains a non-finite value"
                )));
            }
        }

        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = HashSet::new();
        let feat_width = edges.iter().find_map(|e| e.feat.as_ref().map(|f| f.len()));
        for e in edges {
            let (u, v) = if e.u <= e.v { (e.u, e.v) } else { (e.v, e.u) };
            if u == v {
                return Err(Error::InvalidGraph(format!("{id}: self-loop at node {u}")));
            }
            if v >= n {
                return Err(Error::InvalidGraph(format!(
                    "{id}: edge ({u},{v}) out of range for {n} nodes"
                )));
            }
            if !e.w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "{id}: edge ({u},{v}) has non-finite weight"
                )));
            }
            if let (Some(fw), Some(f)) = (feat_width, e.feat.as_ref()) {
                if f.len() != fw {
                    return Err(Error::InvalidGraph(format!(
                        "{id}: edge ({u},{v}) feature length {} differs from {fw}",
                        f.len()
                    )));
                }
            }
            if !seen.insert((u, v)) {
                return Err(Error::InvalidGraph(format!(
                    "{id}: duplicate edge ({u},{v})"
                )));
            }
            normalized.push(Edge {
                u,
                v,
                w: e.w,
                feat: e.feat,
            });
        }

        Ok(Graph {
            id,
            node_features,
            edges: normalized,
            label,
            gt_nodes: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Feature width ψ_v (0 for an empty graph).
    pub fn feature_width(&self) -> usize {
        self.node_features.first().map_or(0, |r| r.len())
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.u == node || e.v == node)
            .count()
    }

    /// Symmetric adjacency list: for each node, `(neighbor, weight, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64, usize)>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, e.w, idx));
            adj[e.v].push((e.u, e.w, idx));
        }
        adj
    }

    /// Relabels nodes so old node `i` becomes `perm[i]`. Used by the
    /// permutation-invariance tests.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{}: permutation length {} != {n}",
                self.id,
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidGraph(format!(
                    "{}: not a permutation",
                    self.id
                )));
            }
            seen[p] = true;
        }
        let mut features = vec![Vec::new(); n];
        for (i, row) in self.node_features.iter().enumerate() {
            features[perm[i]] = row.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: perm[e.u],
                v: perm[e.v],
                w: e.w,
                feat: e.feat.clone(),
            })
            .collect();
        let mut g = Graph::with_edges(self.id.clone(), features, edges, self.label)?;
        g.gt_nodes = self
            .gt_nodes
            .as_ref()
            .map(|s| NodeSet::from_unsorted(s.iter().map(|i| perm[i]).collect()));
        Ok(g)
    }
}

/// Sorted set of node indices, always strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    /// Sorts and deduplicates.
    pub fn from_unsorted(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        NodeSet(ids)
    }

    pub fn empty() -> Self {
        NodeSet(Vec::new())
    }

    pub fn full(n: usize) -> Self {
        NodeSet((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.iter().filter(|&i| other.contains(i)).count()
    }

    /// All indices must be valid node ids of `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        if let Some(&last) = self.0.last() {
            if last >= g.num_nodes() {
                return Err(Error::InvalidNodeSet(format!(
                    "node {last} out of range for graph {} with {} nodes",
                    g.id,
                    g.num_nodes()
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        NodeSet::from_unsorted(iter.into_iter().collect())
    }
}

/// Node-induced subgraph: keeps exactly the nodes of `s` (relabeled densely,
/// preserving order) and the edges of `g` with both endpoints in `s`.
/// Label and id are copied; `gt_nodes` is intersected and remapped.
pub fn induced_subgraph(g: &Graph, s: &NodeSet) -> Result<Graph> {
    s.validate(g)?;
    let mut remap = BTreeMap::new();
    for (new, old) in s.iter().enumerate() {
        remap.insert(old, new);
    }
    let features = s.iter().map(|i| g.node_features[i].clone()).collect();
    let edges = g
        .edges
        .iter()
        .filter(|e| remap.contains_key(&e.u) && remap.contains_key(&e.v))
        .map(|e| Edge {
            u: remap[&e.u],
            v: remap[&e.v],
            w: e.w,
            feat: e.feat.clone(),
        })
        .collect();
    let mut sub = Graph::with_edges(g.id.clone(), features, edges, g.label)?;
    sub.gt_nodes = g.gt_nodes.as_ref().and_then(|gt| {
        let kept: NodeSet = gt.iter().filter_map(|i| remap.get(&i).copied()).collect();
        if kept.is_empty() {
            None
        } else {
            Some(kept)
        }
    });
    Ok(sub)
}

/// V \ s.
pub fn complement_nodes(g: &Graph, s: &NodeSet) -> Result<NodeSet> {
    s.validate(g)?;
    Ok((0..g.num_nodes()).filter(|&i| !s.contains(i)).collect())
}
