//! Desk-scale message-passing network with exact reverse-mode gradients.
//!
//! The architecture is a stack of sum-aggregation layers with a learnable
//! self-weight (`(1 + eps) * h_i + sum_j w_ij h_j`), each followed by two
//! affine maps with an elementwise nonlinearity, then sum or mean pooling
//! and an affine head to class logits. Everything is f64 and fully
//! deterministic, so analytic gradients can be checked against central
//! finite differences and serialized outputs are byte-stable.
//!
//! Both supported nonlinearities are smooth, which keeps finite-difference
//! gradient checks meaningful everywhere. Softplus is the default: unlike
//! tanh it does not compress all embeddings into a bounded cube, so node
//! embeddings of structurally different nodes stay far apart, which is what
//! the matching-based explanation downstream feeds on.

mod autodiff;
mod train;

pub use autodiff::Gradients;
pub(crate) use autodiff::{backward, forward_trace};
pub(crate) use train::run_training;
pub use train::{accuracy, train_supervised, Adam, TrainConfig};

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Sum,
    Mean,
}

impl std::str::FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Pooling::Sum),
            "mean" => Ok(Pooling::Mean),
            other => Err(Error::ParseError(format!("unknown pooling {other:?}"))),
        }
    }
}

/// Elementwise layer nonlinearity. Both choices are smooth; softplus is
/// unbounded, tanh is zero-preserving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn eval(self, x: f64) -> f64 {
        match self {
            // ln(1 + e^x); the branch avoids exp overflow and is exact to
            // f64 precision for x > 30
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the *output* y = act(x):
    /// softplus' = sigmoid(x) = 1 - e^{-y}; tanh' = 1 - y^2.
    #[inline]
    pub(crate) fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Softplus => 1.0 - (-y).exp(),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softplus" => Ok(Activation::Softplus),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::ParseError(format!("unknown activation {other:?}"))),
        }
    }
}

/// Message-passing classifier. `widths` chains the feature width through the
/// hidden layers to the class count: `[psi_v, d_1, ..., d_L, M]`; layer `l`
/// maps `widths[l]` to `widths[l+1]` and the head maps the pooled
/// `widths[L]`-vector to `M` logits. Parameters live in one flat vector, per
/// layer `[eps, W1 (row-major), b1, W2, b2]` and finally `[W_head, b_head]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    widths: Vec<usize>,
    pooling: Pooling,
    activation: Activation,
    params: Vec<f64>,
}

/// Borrowed view of one layer's parameters.
pub(crate) struct LayerView<'a> {
    pub eps: f64,
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
    pub in_w: usize,
    pub out_w: usize,
}

pub(crate) struct HeadView<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub in_w: usize,
    pub classes: usize,
}

fn layer_param_count(in_w: usize, out_w: usize) -> usize {
    1 + out_w * in_w + out_w + out_w * out_w + out_w
}

/// Total parameter count for a width chain.
pub fn param_count(widths: &[usize]) -> usize {
    let layers = widths.len().saturating_sub(2);
    let mut total = 0;
    for l in 0..layers {
        total += layer_param_count(widths[l], widths[l + 1]);
    }
    if widths.len() >= 2 {
        let d = widths[widths.len() - 2];
        let m = widths[widths.len() - 1];
        total += m * d + m;
    }
    total
}

impl Model {
    /// Fresh model with the default softplus nonlinearity.
    pub fn new(widths: Vec<usize>, pooling: Pooling, seed: u64) -> Result<Self> {
        Self::with_activation(widths, pooling, Activation::Softplus, seed)
    }

    /// Fresh model with uniform Xavier-style weight init, zero biases and
    /// zero self-weights, drawn from the `model-init` substream of `seed`.
    pub fn with_activation(
        widths: Vec<usize>,
        pooling: Pooling,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Self::validate_widths(&widths)?;
        let mut rng = substream(seed, "model-init");
        let mut params = vec![0.0; param_count(&widths)];
        let mut offset = 0;
        for l in 0..widths.len() - 2 {
            let (in_w, out_w) = (widths[l], widths[l + 1]);
            offset += 1; // eps stays 0
            let s1 = (6.0 / (in_w + out_w) as f64).sqrt();
            for p in &mut params[offset..offset + out_w * in_w] {
                *p = rng.gen_range(-s1..s1);
            }
            offset += out_w * in_w + out_w;
            let s2 = (6.0 / (2 * out_w) as f64).sqrt();
            for p in &mut params[offset..offset + out_w * out_w] {
                *p = rng.gen_range(-s2..s2);
            }
            offset += out_w * out_w + out_w;
        }
        let d = widths[widths.len() - 2];
        let m = widths[widths.len() - 1];
        let sh = (6.0 / (d + m) as f64).sqrt();
        for p in &mut params[offset..offset + m * d] {
            *p = rng.gen_range(-sh..sh);
        }
        Ok(Model {
            widths,
            pooling,
            activation,
            params,
        })
    }

    /// Wraps an explicit parameter vector (checkpoint load, tests).
    pub fn from_params(
        widths: Vec<usize>,
        pooling: Pooling,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        Self::validate_widths(&widths)?;
        let expected = param_count(&widths);
        if params.len() != expected {
            return Err(Error::ShapeError(format!(
                "expected {expected} parameters for widths {widths:?}, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::ShapeError("non-finite parameter".into()));
        }
        Ok(Model {
            widths,
            pooling,
            activation,
            params,
        })
    }

    fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 {
            return Err(Error::ShapeError(
                "widths must chain input -> hidden* -> classes".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::ShapeError("zero width in chain".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    /// Width of the final pre-pooling embedding.
    pub fn embed_width(&self) -> usize {
        self.widths[self.widths.len() - 2]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn layer(&self, l: usize) -> LayerView<'_> {
        let mut offset = 0;
        for i in 0..l {
            offset += layer_param_count(self.widths[i], self.widths[i + 1]);
        }
        let (in_w, out_w) = (self.widths[l], self.widths[l + 1]);
        let eps = self.params[offset];
        let w1 = &self.params[offset + 1..offset + 1 + out_w * in_w];
        let mut at = offset + 1 + out_w * in_w;
        let b1 = &self.params[at..at + out_w];
        at += out_w;
        let w2 = &self.params[at..at + out_w * out_w];
        at += out_w * out_w;
        let b2 = &self.params[at..at + out_w];
        LayerView {
            eps,
            w1,
            b1,
            w2,
            b2,
            in_w,
            out_w,
        }
    }

    pub(crate) fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|i| layer_param_count(self.widths[i], self.widths[i + 1]))
            .sum()
    }

    pub(crate) fn head(&self) -> HeadView<'_> {
        let offset = self.layer_offset(self.num_layers());
        let d = self.embed_width();
        let m = self.num_classes();
        HeadView {
            w: &self.params[offset..offset + m * d],
            b: &self.params[offset + m * d..offset + m * d + m],
            in_w: d,
            classes: m,
        }
    }

    /// Stable hash of architecture and parameters; used to pin cached
    /// reference-set predictions to the exact model that produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for &w in &self.widths {
            eat(w as u64);
        }
        eat(match self.pooling {
            Pooling::Sum => 1,
            Pooling::Mean => 2,
        });
        eat(match self.activation {
            Activation::Softplus => 1,
            Activation::Tanh => 2,
        });
        for &p in &self.params {
            eat(p.to_bits());
        }
        h
    }
}

/// Node embeddings from the final message-passing layer (pre-pooling),
/// one row per node.
pub fn forward_embed(model: &Model, g: &Graph) -> Result<Matrix> {
    let trace = forward_trace(model, g)?;
    Ok(trace.h.last().unwrap().clone())
}

/// Class probabilities (softmax of the head logits). An empty graph pools
/// to the zero vector, so the result is the softmax of the head bias.
pub fn forward_predict(model: &Model, g: &Graph) -> Result<Vec<f64>> {
    let trace = forward_trace(model, g)?;
    Ok(softmax(&trace.logits))
}

/// Raw head logits, pre-softmax.
pub fn forward_logits(model: &Model, g: &Graph) -> Result<Vec<f64>> {
    let trace = forward_trace(model, g)?;
    Ok(trace.logits)
}

/// Index of the most probable class; ties resolve to the lowest index.
pub fn predict_class(model: &Model, g: &Graph) -> Result<usize> {
    Ok(argmax(&forward_predict(model, g)?))
}

/// Cross-entropy of the labeled class plus the full gradient (parameters
/// and edge weights) in one reverse pass.
pub fn loss_gradients(model: &Model, g: &Graph, label: usize) -> Result<(f64, Gradients)> {
    if label >= model.num_classes() {
        return Err(Error::ShapeError(format!(
            "label {label} out of range for {} classes",
            model.num_classes()
        )));
    }
    autodiff::loss_and_gradients(model, g, label)
}

/// d(logit_c) / d(edge weight) for every edge of `g`, in edge-list order.
/// Edge weights enter every aggregation layer, so contributions from all
/// layers accumulate. Edgeless graphs yield an empty vector.
pub fn edge_saliency(model: &Model, g: &Graph, class: usize) -> Result<Vec<f64>> {
    if class >= model.num_classes() {
        return Err(Error::ShapeError(format!(
            "class {class} out of range for {} classes",
            model.num_classes()
        )));
    }
    let trace = forward_trace(model, g)?;
    let mut dlogits = vec![0.0; model.num_classes()];
    dlogits[class] = 1.0;
    let grads = backward(model, g, &trace, &dlogits);
    Ok(grads.edges)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn default_activation() -> Activation {
    Activation::Softplus
}

#[derive(Serialize, Deserialize)]
struct CheckpointJson {
    version: u32,
    widths: Vec<usize>,
    pooling: Pooling,
    #[serde(default = "default_activation")]
    activation: Activation,
    params: Vec<f64>,
}

/// Writes the versioned checkpoint JSON
/// `{"version":1,"widths":[...],"pooling":"sum|mean","activation":...,
/// "params":[...]}`. Files without the activation key load with the
/// softplus default.
pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let rec = CheckpointJson {
        version: 1,
        widths: model.widths.clone(),
        pooling: model.pooling,
        activation: model.activation,
        params: model.params.clone(),
    };
    let text = serde_json::to_string(&rec).expect("checkpoint serialization cannot fail");
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rec: CheckpointJson = serde_json::from_str(&text).map_err(|e| {
        Error::ParseError(format!(
            "checkpoint {} (line {}): {e}",
            path.as_ref().display(),
            e.line()
        ))
    })?;
    if rec.version != 1 {
        return Err(Error::ParseError(format!(
            "checkpoint {}: unsupported version {}",
            path.as_ref().display(),
            rec.version
        )));
    }
    Model::from_params(rec.widths, rec.pooling, rec.activation, rec.params)
}
