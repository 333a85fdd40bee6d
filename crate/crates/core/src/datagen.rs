//! Synthetic motif datasets with known ground-truth explanations.
//!
//! Each graph is a preferential-attachment base with one motif (house,
//! six-cycle, or 3x3 grid) glued on by random bridge edges; the label is
//! the motif class and `gt_nodes` records exactly the motif nodes. Node
//! features are a one-hot encoding of the (capped) degree, computed after
//! assembly so bridges count.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::io::{graphs_from_json, graphs_to_json};
use crate::rng::substream_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motif {
    House,
    Cycle,
    Grid,
}

impl std::str::FromStr for Motif {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "house" => Ok(Motif::House),
            "cycle" => Ok(Motif::Cycle),
            "grid" => Ok(Motif::Grid),
            other => Err(Error::ParseError(format!("unknown motif {other:?}"))),
        }
    }
}

/// Fixed motif patterns: house = square plus apex (5 nodes, 6 edges),
/// cycle = 6-ring, grid = 3x3 lattice (9 nodes, 12 edges).
pub fn motif_pattern(motif: Motif) -> (usize, Vec<(usize, usize)>) {
    match motif {
        Motif::House => (5, vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)]),
        Motif::Cycle => (6, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]),
        Motif::Grid => (
            9,
            vec![
                (0, 1),
                (1, 2),
                (3, 4),
                (4, 5),
                (6, 7),
                (7, 8),
                (0, 3),
                (3, 6),
                (1, 4),
                (4, 7),
                (2, 5),
                (5, 8),
            ],
        ),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_graphs: usize,
    /// Inclusive range of base node counts.
    pub base_size: (usize, usize),
    pub motifs: Vec<Motif>,
    /// Random base-to-motif bridge edges per graph.
    pub attach_edges: usize,
    /// Degrees are one-hot encoded up to this cap (feature width cap + 1).
    pub degree_cap: usize,
    pub seed: u64,
}

impl DatasetSpec {
    /// Two-class house-vs-cycle preset for fast runs.
    pub fn preset_ba2(n_graphs: usize, seed: u64) -> Self {
        DatasetSpec {
            n_graphs,
            base_size: (15, 25),
            motifs: vec![Motif::House, Motif::Cycle],
            attach_edges: 1,
            degree_cap: 10,
            seed,
        }
    }

    /// Three-class preset with house, cycle, and grid motifs.
    pub fn preset_ba3(n_graphs: usize, seed: u64) -> Self {
        DatasetSpec {
            motifs: vec![Motif::House, Motif::Cycle, Motif::Grid],
            ..Self::preset_ba2(n_graphs, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_graphs == 0 {
            return Err(Error::InvalidSpec("n_graphs must be >= 1".into()));
        }
        if self.base_size.0 < 5 {
            return Err(Error::InvalidSpec("base size minimum is 5".into()));
        }
        if self.base_size.0 > self.base_size.1 {
            return Err(Error::InvalidSpec(format!(
                "base size range ({}, {}) is empty",
                self.base_size.0, self.base_size.1
            )));
        }
        if self.motifs.is_empty() {
            return Err(Error::InvalidSpec("motif set is empty".into()));
        }
        if self.attach_edges == 0 || self.attach_edges > self.base_size.0 {
            return Err(Error::InvalidSpec(format!(
                "attach_edges = {} out of [1, {}]",
                self.attach_edges, self.base_size.0
            )));
        }
        if self.degree_cap == 0 {
            return Err(Error::InvalidSpec("degree_cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Feature width of generated graphs: degrees 0..=cap, one-hot.
    pub fn feature_width(&self) -> usize {
        self.degree_cap + 1
    }
}

/// Preferential-attachment base: a seed triangle, then each new node links
/// to two distinct existing nodes sampled proportionally to degree.
fn ba_base(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    debug_assert!(n >= 5);
    let mut edges = vec![(0, 1), (0, 2), (1, 2)];
    let mut degree = vec![2usize; 3];
    degree.resize(n, 0);
    for t in 3..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(2);
        for _ in 0..2 {
            let total: usize = (0..t)
                .filter(|i| !chosen.contains(i))
                .map(|i| degree[i])
                .sum();
            let mut ticket = rng.gen_range(0..total);
            let mut pick = 0;
            for (i, &deg) in degree.iter().enumerate().take(t) {
                if chosen.contains(&i) {
                    continue;
                }
                if ticket < deg {
                    pick = i;
                    break;
                }
                ticket -= deg;
            }
            chosen.push(pick);
        }
        for &c in &chosen {
            edges.push((c, t));
            degree[c] += 1;
            degree[t] += 1;
        }
    }
    edges
}

fn one_graph(spec: &DatasetSpec, index: usize) -> Graph {
    let mut rng = substream_at(spec.seed, "data", index as u64);
    let base_n = rng.gen_range(spec.base_size.0..=spec.base_size.1);
    let motif_idx = index % spec.motifs.len();
    let motif = spec.motifs[motif_idx];
    let (motif_n, motif_edges) = motif_pattern(motif);

    let mut edges = ba_base(base_n, &mut rng);
    for &(u, v) in &motif_edges {
        edges.push((base_n + u, base_n + v));
    }
    let mut bridges = std::collections::BTreeSet::new();
    while bridges.len() < spec.attach_edges {
        let u = rng.gen_range(0..base_n);
        let v = base_n + rng.gen_range(0..motif_n);
        bridges.insert((u, v));
    }
    edges.extend(bridges.iter().copied());

    let n = base_n + motif_n;
    let mut degree = vec![0usize; n];
    for &(u, v) in &edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    let width = spec.feature_width();
    let features: Vec<Vec<f64>> = degree
        .iter()
        .map(|&d| {
            let mut row = vec![0.0; width];
            row[d.min(spec.degree_cap)] = 1.0;
            row
        })
        .collect();

    let weighted = edges.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    let mut g = Graph::new(format!("g{index}"), features, weighted, Some(motif_idx))
        .expect("generated graphs satisfy the construction invariants");
    g.gt_nodes = Some(NodeSet::from_unsorted((base_n..n).collect()));
    g
}

/// Generates the dataset described by `spec`; motifs are assigned round
/// robin so class counts differ by at most one, and each graph draws from
/// its own seed substream.
pub fn gen_motif_dataset(spec: &DatasetSpec) -> Result<Vec<Graph>> {
    spec.validate()?;
    Ok((0..spec.n_graphs)
        .into_par_iter()
        .map(|i| one_graph(spec, i))
        .collect())
}

/// Sidecar manifest written next to a dataset file. The timestamp lives
/// only here, never in the dataset itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub spec: DatasetSpec,
    pub generated_at_unix: u64,
}

impl DatasetManifest {
    pub fn new(spec: DatasetSpec) -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        DatasetManifest {
            version: 1,
            seed: spec.seed,
            spec,
            generated_at_unix: now,
        }
    }
}

/// `data.json` -> `data.manifest.json`.
pub fn manifest_path(dataset_path: impl AsRef<Path>) -> PathBuf {
    dataset_path.as_ref().with_extension("manifest.json")
}

pub fn save_dataset(graphs: &[Graph], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(graphs_to_json(graphs).as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))
}

pub fn save_manifest(manifest: &DatasetManifest, dataset_path: impl AsRef<Path>) -> Result<()> {
    let path = manifest_path(&dataset_path);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialization cannot fail");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    graphs_from_json(&text)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.as_ref().display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::induced_subgraph;

    /// Structure-only graph isomorphism by backtracking; fine for <= 9
    /// nodes.
    fn isomorphic(a: &Graph, b: &Graph) -> bool {
        if a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges() {
            return false;
        }
        let n = a.num_nodes();
        let adj = |g: &Graph| {
            let mut m = vec![vec![false; n]; n];
            for e in &g.edges {
                m[e.u][e.v] = true;
                m[e.v][e.u] = true;
            }
            m
        };
        let (aa, bb) = (adj(a), adj(b));
        let mut da: Vec<usize> = (0..n)
            .map(|i| aa[i].iter().filter(|&&x| x).count())
            .collect();
        let mut db: Vec<usize> = (0..n)
            .map(|i| bb[i].iter().filter(|&&x| x).count())
            .collect();
        da.sort_unstable();
        db.sort_unstable();
        if da != db {
            return false;
        }

        fn assign(
            pos: usize,
            map: &mut Vec<usize>,
            used: &mut Vec<bool>,
            aa: &[Vec<bool>],
            bb: &[Vec<bool>],
        ) -> bool {
            let n = aa.len();
            if pos == n {
                return true;
            }
            for cand in 0..n {
                if used[cand] {
                    continue;
                }
                let ok = (0..pos).all(|p| aa[pos][p] == bb[cand][map[p]]);
                if ok {
                    map.push(cand);
                    used[cand] = true;
                    if assign(pos + 1, map, used, aa, bb) {
                        return true;
                    }
                    map.pop();
                    used[cand] = false;
                }
            }
            false
        }
        assign(0, &mut Vec::new(), &mut vec![false; n], &aa, &bb)
    }

    fn pattern_graph(motif: Motif) -> Graph {
        let (n, edges) = motif_pattern(motif);
        Graph::new(
            "pattern",
            vec![vec![0.0]; n],
            edges.into_iter().map(|(u, v)| (u, v, 1.0)).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_motif_spec_yields_uniform_labels() {
        let spec = DatasetSpec {
            n_graphs: 10,
            base_size: (8, 12),
            motifs: vec![Motif::House],
            attach_edges: 1,
            degree_cap: 10,
            seed: 3,
        };
        let data = gen_motif_dataset(&spec).unwrap();
        assert_eq!(data.len(), 10);
        for g in &data {
            assert_eq!(g.label, Some(0));
            assert_eq!(g.gt_nodes.as_ref().unwrap().len(), 5);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DatasetSpec::preset_ba3(12, 77);
        let a = gen_motif_dataset(&spec).unwrap();
        let b = gen_motif_dataset(&spec).unwrap();
        assert_eq!(graphs_to_json(&a), graphs_to_json(&b));
    }

    #[test]
    fn classes_are_balanced_round_robin() {
        let spec = DatasetSpec::preset_ba3(14, 5);
        let data = gen_motif_dataset(&spec).unwrap();
        let mut counts = [0usize; 3];
        for g in &data {
            counts[g.label.unwrap()] += 1;
        }
        let max = counts.iter().max().unwrap();
        let min = counts.iter().min().unwrap();
        assert!(max - min <= 1, "{counts:?}");
    }

    #[test]
    fn gt_nodes_induce_the_motif_pattern() {
        let spec = DatasetSpec::preset_ba3(9, 11);
        let data = gen_motif_dataset(&spec).unwrap();
        for g in &data {
            let motif = spec.motifs[g.label.unwrap()];
            let sub = induced_subgraph(g, g.gt_nodes.as_ref().unwrap()).unwrap();
            assert!(
                isomorphic(&sub, &pattern_graph(motif)),
                "graph {} does not induce its {motif:?} pattern",
                g.id
            );
        }
    }

    #[test]
    fn base_sizes_respect_the_range() {
        let spec = DatasetSpec {
            n_graphs: 8,
            base_size: (6, 9),
            motifs: vec![Motif::Cycle],
            attach_edges: 2,
            degree_cap: 5,
            seed: 2,
        };
        for g in gen_motif_dataset(&spec).unwrap() {
            let total = g.num_nodes();
            assert!((6 + 6..=9 + 6).contains(&total));
            assert_eq!(g.feature_width(), 6);
            // one-hot rows
            for row in &g.node_features {
                assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
                assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), 5);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = DatasetSpec::preset_ba2(10, 1);
        spec.base_size = (3, 10);
        assert!(gen_motif_dataset(&spec).is_err());
        let mut spec = DatasetSpec::preset_ba2(10, 1);
        spec.motifs.clear();
        assert!(gen_motif_dataset(&spec).is_err());
        let mut spec = DatasetSpec::preset_ba2(10, 1);
        spec.n_graphs = 0;
        assert!(gen_motif_dataset(&spec).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.json");
        let spec = DatasetSpec::preset_ba2(6, 9);
        let data = gen_motif_dataset(&spec).unwrap();
        save_dataset(&data, &path).unwrap();
        save_manifest(&DatasetManifest::new(spec), &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, data);
        assert!(manifest_path(&path).exists());
        assert_eq!(
            manifest_path(&path).file_name().unwrap(),
            "data.manifest.json"
        );
    }

    #[test]
    fn malformed_dataset_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::ParseError(_))));
    }
}
