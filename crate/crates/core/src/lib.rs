//! Graph classification at desk scale, explained by subgraph matching.
//!
//! The crate trains small message-passing networks on attributed graphs and
//! explains their predictions non-parametrically: a target graph is matched
//! against counterpart graphs that received the same prediction, the
//! cheapest node correspondence is extracted greedily, and the candidate
//! subgraph whose removal hurts the prediction most is returned as the
//! explanation. The same matcher drives a structure-preserving augmentation
//! scheme that only drops nodes outside the informative region, plus the
//! usual random baselines, fidelity/recall metrics, and a synthetic motif
//! dataset generator with known ground truth.

pub mod augment;
pub mod datagen;
pub mod error;
pub mod explain;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod matcher;
pub mod matrix;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{complement_nodes, induced_subgraph, Edge, Graph, NodeSet};
pub use matcher::{
    brute_force_match, greedy_match, pairwise_distances, Correspondence, DistanceMatrix, Metric,
};
