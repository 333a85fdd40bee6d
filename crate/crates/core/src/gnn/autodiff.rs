//! Forward pass with cached intermediates and the matching hand-rolled
//! reverse pass. The architecture is fixed, so an explicit backward walk is
//! simpler and faster than a general tape, and every step has a closed-form
//! adjoint that the finite-difference tests can pin down.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

use super::{softmax, Activation, LayerView, Model, Pooling};

/// Cached intermediates of one forward pass.
pub(crate) struct Trace {
    /// `h[0]` is the input features; `h[l]` the output of layer `l`.
    pub h: Vec<Matrix>,
    /// Aggregated input `(1+eps) h_i + sum_j w_ij h_j` per layer.
    pub a: Vec<Matrix>,
    /// First-affine activation `tanh(W1 a + b1)` per layer.
    pub u: Vec<Matrix>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Trace {
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }
}

/// Parameter and edge-weight gradients from one backward pass. `params`
/// aligns with `Model::params`; `edges` aligns with `Graph::edges`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub edges: Vec<f64>,
}

fn aggregate(h: &Matrix, eps: f64, adj: &[Vec<(usize, f64, usize)>]) -> Matrix {
    let (n, w) = (h.rows(), h.cols());
    let mut a = Matrix::zeros(n, w);
    for (i, neighbors) in adj.iter().enumerate() {
        let self_row = h.row(i);
        let out = a.row_mut(i);
        for (o, v) in out.iter_mut().zip(self_row) {
            *o = (1.0 + eps) * v;
        }
        for &(j, wgt, _) in neighbors {
            for (o, v) in out.iter_mut().zip(h.row(j)) {
                *o += wgt * v;
            }
        }
    }
    a
}

/// `y = act(x W^T + b)` row by row; `w` is `out x in` row-major.
fn affine_act(x: &Matrix, w: &[f64], b: &[f64], out_w: usize, act: Activation) -> Matrix {
    let (n, in_w) = (x.rows(), x.cols());
    let mut y = Matrix::zeros(n, out_w);
    for i in 0..n {
        let xi = x.row(i);
        let yi = y.row_mut(i);
        for (o, yo) in yi.iter_mut().enumerate() {
            let mut acc = b[o];
            let wrow = &w[o * in_w..(o + 1) * in_w];
            for (wv, xv) in wrow.iter().zip(xi) {
                acc += wv * xv;
            }
            *yo = act.eval(acc);
        }
    }
    y
}

pub(crate) fn forward_trace(model: &Model, g: &Graph) -> Result<Trace> {
    let n = g.num_nodes();
    if n > 0 && g.feature_width() != model.input_width() {
        return Err(Error::ShapeError(format!(
            "graph {} feature width {} != model input width {}",
            g.id,
            g.feature_width(),
            model.input_width()
        )));
    }
    let adj = g.adjacency();

    let x = if n == 0 {
        Matrix::zeros(0, model.input_width())
    } else {
        Matrix::from_rows(g.node_features.clone()).expect("graph invariant: uniform rows")
    };

    let layers = model.num_layers();
    let act = model.activation();
    let mut h = Vec::with_capacity(layers + 1);
    let mut a_cache = Vec::with_capacity(layers);
    let mut u_cache = Vec::with_capacity(layers);
    h.push(x);
    for l in 0..layers {
        let lv = model.layer(l);
        let a = aggregate(&h[l], lv.eps, &adj);
        let u = affine_act(&a, lv.w1, lv.b1, lv.out_w, act);
        let out = affine_act(&u, lv.w2, lv.b2, lv.out_w, act);
        a_cache.push(a);
        u_cache.push(u);
        h.push(out);
    }

    let last = h.last().unwrap();
    let mut pooled = last.column_sums();
    if model.pooling() == Pooling::Mean && n > 0 {
        for p in &mut pooled {
            *p /= n as f64;
        }
    }

    let head = model.head();
    let mut logits = vec![0.0; head.classes];
    for (c, logit) in logits.iter_mut().enumerate() {
        let mut acc = head.b[c];
        let wrow = &head.w[c * head.in_w..(c + 1) * head.in_w];
        for (wv, pv) in wrow.iter().zip(&pooled) {
            acc += wv * pv;
        }
        *logit = acc;
    }

    Ok(Trace {
        h,
        a: a_cache,
        u: u_cache,
        pooled,
        logits,
    })
}

/// Adjoint of `affine_act`: given dL/dy and the cached output y, adds the
/// weight/bias gradients into `dw`/`db` and returns dL/dx.
fn backward_affine_act(
    x: &Matrix,
    y: &Matrix,
    w: &[f64],
    dy: &Matrix,
    dw: &mut [f64],
    db: &mut [f64],
    act: Activation,
) -> Matrix {
    let (n, in_w, out_w) = (x.rows(), x.cols(), y.cols());
    let mut dx = Matrix::zeros(n, in_w);
    for i in 0..n {
        let yi = y.row(i);
        let dyi = dy.row(i);
        let xi = x.row(i);
        for o in 0..out_w {
            // both activations expose their derivative through the output
            let dz = dyi[o] * act.grad_from_output(yi[o]);
            if dz == 0.0 {
                continue;
            }
            db[o] += dz;
            let wrow = &w[o * in_w..(o + 1) * in_w];
            let dwrow = &mut dw[o * in_w..(o + 1) * in_w];
            let dxi = dx.row_mut(i);
            for k in 0..in_w {
                dwrow[k] += dz * xi[k];
                dxi[k] += dz * wrow[k];
            }
        }
    }
    dx
}

/// Reverse pass seeded with dL/dlogits. Returns gradients for every model
/// parameter and every edge weight of `g`.
pub(crate) fn backward(model: &Model, g: &Graph, trace: &Trace, dlogits: &[f64]) -> Gradients {
    let n = g.num_nodes();
    let adj = g.adjacency();
    let layers = model.num_layers();
    let mut dparams = vec![0.0; model.params().len()];
    let mut dedges = vec![0.0; g.num_edges()];

    // Head: logits = W pooled + b.
    let head = model.head();
    let head_offset = model.layer_offset(layers);
    let mut dpooled = vec![0.0; head.in_w];
    {
        let (dw, db) = dparams[head_offset..].split_at_mut(head.classes * head.in_w);
        for c in 0..head.classes {
            let dl = dlogits[c];
            if dl == 0.0 {
                continue;
            }
            db[c] += dl;
            let wrow = &head.w[c * head.in_w..(c + 1) * head.in_w];
            let dwrow = &mut dw[c * head.in_w..(c + 1) * head.in_w];
            for k in 0..head.in_w {
                dwrow[k] += dl * trace.pooled[k];
                dpooled[k] += dl * wrow[k];
            }
        }
    }

    // Pooling: sum broadcasts dpooled to every node; mean scales by 1/n.
    let scale = match model.pooling() {
        Pooling::Sum => 1.0,
        Pooling::Mean => {
            if n == 0 {
                0.0
            } else {
                1.0 / n as f64
            }
        }
    };
    let mut dh = Matrix::zeros(n, head.in_w);
    for i in 0..n {
        for (o, dp) in dh.row_mut(i).iter_mut().zip(&dpooled) {
            *o = dp * scale;
        }
    }

    let act = model.activation();
    for l in (0..layers).rev() {
        let lv: LayerView<'_> = model.layer(l);
        let offset = model.layer_offset(l);
        let (deps_slot, rest) = dparams[offset..].split_at_mut(1);
        let (dw1, rest) = rest.split_at_mut(lv.out_w * lv.in_w);
        let (db1, rest) = rest.split_at_mut(lv.out_w);
        let (dw2, rest) = rest.split_at_mut(lv.out_w * lv.out_w);
        let (db2, _) = rest.split_at_mut(lv.out_w);

        // h_l = act(W2 u + b2), u = act(W1 a + b1)
        let du = backward_affine_act(&trace.u[l], &trace.h[l + 1], lv.w2, &dh, dw2, db2, act);
        let da = backward_affine_act(&trace.a[l], &trace.u[l], lv.w1, &du, dw1, db1, act);

        // a_i = (1 + eps) h_i + sum_j w_ij h_j
        let h_prev = &trace.h[l];
        let mut deps = 0.0;
        let mut dh_prev = Matrix::zeros(n, lv.in_w);
        for (i, neighbors) in adj.iter().enumerate() {
            let dai = da.row(i);
            deps += dai
                .iter()
                .zip(h_prev.row(i))
                .map(|(x, y)| x * y)
                .sum::<f64>();
            let dhp = dh_prev.row_mut(i);
            for (o, v) in dhp.iter_mut().zip(dai) {
                *o += (1.0 + lv.eps) * v;
            }
            for &(j, wgt, _) in neighbors {
                for (o, v) in dh_prev.row_mut(j).iter_mut().zip(dai) {
                    *o += wgt * v;
                }
            }
        }
        // The same edge weight feeds both endpoints in every layer, so the
        // contributions accumulate across layers and directions.
        for (idx, e) in g.edges.iter().enumerate() {
            let forward: f64 = da
                .row(e.u)
                .iter()
                .zip(h_prev.row(e.v))
                .map(|(x, y)| x * y)
                .sum();
            let reverse: f64 = da
                .row(e.v)
                .iter()
                .zip(h_prev.row(e.u))
                .map(|(x, y)| x * y)
                .sum();
            dedges[idx] += forward + reverse;
        }
        deps_slot[0] += deps;
        dh = dh_prev;
    }

    Gradients {
        params: dparams,
        edges: dedges,
    }
}

/// Cross-entropy of the labeled class plus gradients in one pass.
pub(crate) fn loss_and_gradients(
    model: &Model,
    g: &Graph,
    label: usize,
) -> Result<(f64, Gradients)> {
    let trace = forward_trace(model, g)?;
    let probs = trace.probabilities();
    let loss = -probs[label].max(1e-300).ln();
    // d CE / d logits = softmax - onehot
    let mut dlogits = probs;
    dlogits[label] -= 1.0;
    let grads = backward(model, g, &trace, &dlogits);
    Ok((loss, grads))
}
