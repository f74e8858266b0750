//! Symmetric node-level NT-Xent objective, its gradient, and the training
//! loop.
//!
//! For anchor `i` in view 1 the positive is node `i` in view 2; negatives are
//! every other node in view 2 (inter-view) and every other node in view 1
//! (intra-view). The loss averages both anchor directions over all nodes.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, AugmentationPlan};
use crate::encoder::{backward, forward, glorot_init, EncoderDims, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::derive_seed;
use crate::sparse::normalized_adjacency;

/// Unit-normalized rows. Zero rows stay zero; the count of such rows is
/// returned as a degeneracy diagnostic.
fn normalize_rows(z: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>, usize) {
    let norms: Array1<f64> = z.map_axis(Axis(1), |row| row.dot(&row).sqrt());
    let mut u = z.to_owned();
    let mut zero = 0;
    for (mut row, &n) in u.rows_mut().into_iter().zip(norms.iter()) {
        if n > 0.0 {
            row /= n;
        } else {
            zero += 1;
        }
    }
    (u, norms, zero)
}

#[derive(Debug, Clone)]
pub struct CosineMatrix {
    pub values: Array2<f64>,
    /// Rows (across both inputs) with zero norm.
    pub degenerate_rows: usize,
}

/// Entry `(i, k)` is the cosine similarity of `z1[i]` and `z2[k]`; pairs that
/// involve a zero-norm row score 0.
pub fn pairwise_cosine(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>) -> CosineMatrix {
    let (u, _, d1) = normalize_rows(z1);
    let (v, _, d2) = normalize_rows(z2);
    CosineMatrix {
        values: u.dot(&v.t()),
        degenerate_rows: d1 + d2,
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Anchor-row loss given the anchor's similarity rows (already divided by τ).
fn anchor_loss(inter: ndarray::ArrayView1<'_, f64>, intra: ndarray::ArrayView1<'_, f64>, i: usize) -> f64 {
    let terms = inter
        .iter()
        .copied()
        .chain(intra.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v));
    log_sum_exp(terms) - inter[i]
}

/// `ℓ(z1_i, z2_i)`: anchor `z1[i]`, positive `z2[i]`.
pub fn nt_xent_pair_loss(i: usize, z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>, tau: f64) -> f64 {
    let (u, _, _) = normalize_rows(z1);
    let (v, _, _) = normalize_rows(z2);
    let anchor = u.row(i);
    let inter = v.dot(&anchor) / tau;
    let intra = u.dot(&anchor) / tau;
    anchor_loss(inter.view(), intra.view(), i)
}

#[derive(Debug, Clone)]
pub struct LossAndGradient {
    pub loss: f64,
    pub dz1: Array2<f64>,
    pub dz2: Array2<f64>,
    pub degenerate_rows: usize,
}

/// Softmax weights of every logit in each anchor row plus the per-row loss.
struct AnchorSide {
    inter_w: Array2<f64>,
    intra_w: Array2<f64>,
    losses: Array1<f64>,
}

fn anchor_side(inter: &Array2<f64>, intra: &Array2<f64>) -> AnchorSide {
    let n = inter.nrows();
    let mut inter_w = Array2::zeros((n, n));
    let mut intra_w = Array2::zeros((n, n));
    let mut losses = Array1::zeros(n);
    for i in 0..n {
        let (a, b) = (inter.row(i), intra.row(i));
        let mut max = a.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        for (k, &v) in b.iter().enumerate() {
            if k != i {
                max = max.max(v);
            }
        }
        let mut sum = 0.0;
        for &v in a.iter() {
            sum += (v - max).exp();
        }
        for (k, &v) in b.iter().enumerate() {
            if k != i {
                sum += (v - max).exp();
            }
        }
        let lse = max + sum.ln();
        losses[i] = lse - a[i];
        for k in 0..n {
            inter_w[[i, k]] = (a[k] - lse).exp();
            if k != i {
                intra_w[[i, k]] = (b[k] - lse).exp();
            }
        }
    }
    AnchorSide {
        inter_w,
        intra_w,
        losses,
    }
}

/// `J = (1/2N) Σ_i [ℓ(z1_i, z2_i) + ℓ(z2_i, z1_i)]` and its gradient with
/// respect to the raw (unnormalized) projections.
pub fn loss_gradient(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>, tau: f64) -> LossAndGradient {
    assert_eq!(z1.dim(), z2.dim(), "views must have matching shapes");
    let n = z1.nrows();
    let (u, nu, d1) = normalize_rows(z1);
    let (v, nv, d2) = normalize_rows(z2);
    let s12 = u.dot(&v.t()) / tau;
    let s11 = u.dot(&u.t()) / tau;
    let s22 = v.dot(&v.t()) / tau;
    let s21 = s12.t().to_owned();

    let one = anchor_side(&s12, &s11);
    let two = anchor_side(&s21, &s22);
    let scale = 1.0 / (2.0 * n as f64 * tau);
    let loss = (one.losses.sum() + two.losses.sum()) / (2.0 * n as f64);

    // dJ/dS12 (in units of 1/τ already folded into `scale`)
    let mut g12 = &one.inter_w + &two.inter_w.t();
    for i in 0..n {
        g12[[i, i]] -= 2.0;
    }
    let g11 = &one.intra_w + &one.intra_w.t();
    let g22 = &two.intra_w + &two.intra_w.t();
    let du = (g12.dot(&v) + g11.dot(&u)) * scale;
    let dv = (g12.t().dot(&u) + g22.dot(&v)) * scale;

    let project = |unit: &Array2<f64>, norms: &Array1<f64>, grad: Array2<f64>| {
        let mut out = grad;
        for ((mut g, w), &nrm) in out.rows_mut().into_iter().zip(unit.rows()).zip(norms.iter()) {
            if nrm > 0.0 {
                let radial = g.dot(&w);
                g.scaled_add(-radial, &w);
                g /= nrm;
            } else {
                g.fill(0.0);
            }
        }
        out
    };
    LossAndGradient {
        loss,
        dz1: project(&u, &nu, du),
        dz2: project(&v, &nv, dv),
        degenerate_rows: d1 + d2,
    }
}

pub fn total_loss(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>, tau: f64) -> f64 {
    let n = z1.nrows();
    let (u, _, _) = normalize_rows(z1);
    let (v, _, _) = normalize_rows(z2);
    let s12 = u.dot(&v.t()) / tau;
    let s11 = u.dot(&u.t()) / tau;
    let s22 = v.dot(&v.t()) / tau;
    let mut total = 0.0;
    for i in 0..n {
        total += anchor_loss(s12.row(i), s11.row(i), i);
        total += anchor_loss(s12.column(i), s22.row(i), i);
    }
    total / (2.0 * n as f64)
}

// ---------------------------------------------------------------------------
// Optimizer

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: EncoderParams,
    v: EncoderParams,
    t: i32,
}

impl Adam {
    pub fn new(dims: EncoderDims, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: EncoderParams::zeros(dims),
            v: EncoderParams::zeros(dims),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::weight_decay")]
    pub weight_decay: f64,
    /// Width of both GCN layers and both projection layers.
    #[serde(default = "defaults::hidden")]
    pub hidden_dim: usize,
    /// Taken from the experiment-level seed, never from a config section.
    #[serde(skip)]
    pub seed: u64,
}

pub(crate) mod defaults {
    pub fn tau() -> f64 {
        0.4
    }
    pub fn epochs() -> usize {
        400
    }
    pub fn learning_rate() -> f64 {
        5e-4
    }
    pub fn weight_decay() -> f64 {
        1e-5
    }
    pub fn hidden() -> usize {
        256
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: defaults::tau(),
            epochs: defaults::epochs(),
            learning_rate: defaults::learning_rate(),
            weight_decay: defaults::weight_decay(),
            hidden_dim: defaults::hidden(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Validation(format!("tau must be positive, got {}", self.tau)));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be at least 1".into()));
        }
        // lr = 0 is accepted: it freezes the parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Validation("weight_decay must be non-negative".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Validation("hidden_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self, n_features: usize) -> EncoderDims {
        EncoderDims::uniform(n_features, self.hidden_dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_per_epoch: Vec<f64>,
    /// Not serialized so reports stay bitwise reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub degenerate_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

const INIT_LABEL: u64 = u64::MAX;

/// Seed for the augmentation randomness of `epoch`.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, epoch as u64)
}

pub fn train(g: &Graph, cfg: &TrainConfig, augment: &AugmentConfig) -> Result<(EncoderParams, TrainReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let plan = AugmentationPlan::prepare(g, augment)?;
    let dims = cfg.dims(g.n_features());
    let mut params = glorot_init(dims, derive_seed(cfg.seed, INIT_LABEL))?;
    let mut adam = Adam::new(dims, cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut degenerate_rows = 0;

    for epoch in 0..cfg.epochs {
        let (v1, v2) = plan.sample(g, epoch_seed(cfg.seed, epoch))?;
        let a1 = normalized_adjacency(&v1.adjacency);
        let a2 = normalized_adjacency(&v2.adjacency);
        let c1 = forward(&params, &a1, v1.features.view())?;
        let c2 = forward(&params, &a2, v2.features.view())?;
        let lg = loss_gradient(c1.z.view(), c2.z.view(), cfg.tau);
        if !lg.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("loss {} after {:?}", lg.loss, losses.last()),
            });
        }
        degenerate_rows += lg.degenerate_rows;
        losses.push(lg.loss);

        let mut grads = backward(&params, &a1, &c1, &lg.dz1);
        grads.add_assign(&backward(&params, &a2, &c2, &lg.dz2));
        if cfg.weight_decay > 0.0 {
            for (gt, pt) in grads.tensors_mut().into_iter().zip(params.tensors()) {
                for (gv, pv) in gt.iter_mut().zip(pt) {
                    *gv += cfg.weight_decay * pv;
                }
            }
        }
        if !grads.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: "non-finite gradient".into(),
            });
        }
        adam.step(&mut params, &grads);
        log::debug!("epoch {epoch}: loss {:.6}", lg.loss);
    }

    Ok((
        params,
        TrainReport {
            loss_per_epoch: losses,
            wall_time_secs: started.elapsed().as_secs_f64(),
            degenerate_rows,
            checkpoint: None,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub h: Array2<f64>,
    pub z: Array2<f64>,
}

/// Embeddings of the uncorrupted graph.
pub fn embed(params: &EncoderParams, g: &Graph) -> Result<Embeddings> {
    let a = normalized_adjacency(g.adjacency());
    let cache = forward(params, &a, g.features().view())?;
    Ok(Embeddings {
        h: cache.h,
        z: cache.z,
    })
}
