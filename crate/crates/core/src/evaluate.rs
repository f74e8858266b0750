//! Downstream node classification and group-fairness metrics.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive::embed;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Uniform random partition with `round(fraction * n)` training nodes.
pub fn split_nodes(n: usize, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Validation(format!(
            "fraction {fraction} of {n} nodes leaves an empty train or test set"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train_idx,
        test_idx,
        seed,
        train_fraction: fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// The training set held a single class.
    pub degenerate: bool,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Mean log-loss plus `(l2 / 2) ||w||²`; the bias is not penalized.
pub fn logistic_objective(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    l2: f64,
    w: ArrayView1<'_, f64>,
    b: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let margins = x.dot(&w) + b;
    let data: f64 = margins
        .iter()
        .zip(y)
        .map(|(&t, &yi)| softplus(t) - f64::from(yi) * t)
        .sum();
    data / n + 0.5 * l2 * w.dot(&w)
}

fn logistic_gradient(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    l2: f64,
    w: ArrayView1<'_, f64>,
    b: f64,
) -> (Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let margins = x.dot(&w) + b;
    let resid: Array1<f64> = margins
        .iter()
        .zip(y)
        .map(|(&t, &yi)| sigmoid(t) - f64::from(yi))
        .collect();
    let gw = x.t().dot(&resid) / n + &w * l2;
    (gw, resid.sum() / n)
}

pub const LOGISTIC_TOLERANCE: f64 = 1e-6;
pub const LOGISTIC_MAX_ITER: usize = 5000;

/// Full-batch gradient descent with Armijo backtracking.
pub fn train_logistic(x: ArrayView2<'_, f64>, y: &[u8], l2: f64) -> Result<LogisticModel> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::Validation(format!(
            "logistic regression got {} rows and {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Validation(format!("l2 must be non-negative, got {l2}")));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        log::warn!("logistic training set holds a single class; using a constant classifier");
        return Ok(LogisticModel {
            weights: vec![0.0; x.ncols()],
            bias: if positives == 0 { -f64::INFINITY } else { f64::INFINITY },
            iterations: 0,
            grad_norm: 0.0,
            degenerate: true,
        });
    }

    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0;
    let mut f = logistic_objective(x, y, l2, w.view(), b);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < LOGISTIC_MAX_ITER {
        let (gw, gb) = logistic_gradient(x, y, l2, w.view(), b);
        let sq = gw.dot(&gw) + gb * gb;
        grad_norm = sq.sqrt();
        if grad_norm < LOGISTIC_TOLERANCE {
            break;
        }
        // Start each search a little larger than the last accepted step.
        step *= 2.0;
        loop {
            let w_new = &w - &(&gw * step);
            let b_new = b - step * gb;
            let f_new = logistic_objective(x, y, l2, w_new.view(), b_new);
            if f_new <= f - 0.5 * step * sq {
                w = w_new;
                b = b_new;
                f = f_new;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Ok(LogisticModel {
                    weights: w.to_vec(),
                    bias: b,
                    iterations,
                    grad_norm,
                    degenerate: false,
                });
            }
        }
        iterations += 1;
    }
    Ok(LogisticModel {
        weights: w.to_vec(),
        bias: b,
        iterations,
        grad_norm,
        degenerate: false,
    })
}

/// `ŷ = 1` iff `sigmoid(w·h + b) >= 0.5`, i.e. iff `w·h + b >= 0`.
pub fn predict(model: &LogisticModel, h: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    if h.ncols() != model.weights.len() {
        return Err(Error::Validation(format!(
            "model has {} weights, embeddings have {} columns",
            model.weights.len(),
            h.ncols()
        )));
    }
    let w = ArrayView1::from(&model.weights);
    Ok(h.rows()
        .into_iter()
        .map(|row| u8::from(row.dot(&w) + model.bias >= 0.0))
        .collect())
}

fn rate(yhat: &[u8], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for (i, &p) in yhat.iter().enumerate() {
        if keep(i) {
            total += 1;
            hits += p as usize;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// `|P(ŷ=1 | s=0) − P(ŷ=1 | s=1)|`.
pub fn statistical_parity(yhat: &[u8], s: &[u8]) -> Result<f64> {
    if yhat.len() != s.len() {
        return Err(Error::Validation("prediction and group vectors differ in length".into()));
    }
    let group = |g: u8| {
        rate(yhat, |i| s[i] == g)
            .ok_or_else(|| Error::UndefinedMetric(format!("statistical parity: group s={g} is empty")))
    };
    Ok((group(0)? - group(1)?).abs())
}

/// `|P(ŷ=1 | y=1, s=0) − P(ŷ=1 | y=1, s=1)|`.
pub fn equal_opportunity(yhat: &[u8], y: &[u8], s: &[u8]) -> Result<f64> {
    if yhat.len() != s.len() || y.len() != s.len() {
        return Err(Error::Validation("prediction, label and group vectors differ in length".into()));
    }
    let group = |g: u8| {
        rate(yhat, |i| s[i] == g && y[i] == 1).ok_or_else(|| {
            Error::UndefinedMetric(format!("equal opportunity: no positive labels in group s={g}"))
        })
    };
    Ok((group(0)? - group(1)?).abs())
}

pub fn accuracy(yhat: &[u8], y: &[u8]) -> f64 {
    let hits = yhat.iter().zip(y).filter(|(a, b)| a == b).count();
    hits as f64 / y.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (n − 1); zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub seed: u64,
    pub accuracy: f64,
    pub delta_sp: f64,
    pub delta_eo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFailure {
    pub seed: u64,
    pub error: String,
}

/// Metrics in percent over test nodes, aggregated across random splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: MeanStd,
    pub delta_sp: MeanStd,
    pub delta_eo: MeanStd,
    pub n_splits: usize,
    /// Raw per-split values in [0, 1].
    pub splits: Vec<SplitResult>,
    pub failed_splits: Vec<SplitFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_splits")]
    pub n_splits: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
}

fn default_splits() -> usize {
    3
}

fn default_fraction() -> f64 {
    0.9
}

fn default_l2() -> f64 {
    1.0
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_splits: default_splits(),
            train_fraction: default_fraction(),
            l2: default_l2(),
        }
    }
}

fn rows(h: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    h.select(Axis(0), idx)
}

fn pick(v: &[u8], idx: &[usize]) -> Vec<u8> {
    idx.iter().map(|&i| v[i]).collect()
}

fn evaluate_split(h: &Array2<f64>, y: &[u8], s: &[u8], split: &Split, l2: f64) -> Result<SplitResult> {
    let model = train_logistic(rows(h, &split.train_idx).view(), &pick(y, &split.train_idx), l2)?;
    // Metrics only ever see test-node slices.
    let yhat = predict(&model, rows(h, &split.test_idx).view())?;
    let y_test = pick(y, &split.test_idx);
    let s_test = pick(s, &split.test_idx);
    Ok(SplitResult {
        seed: split.seed,
        accuracy: accuracy(&yhat, &y_test),
        delta_sp: statistical_parity(&yhat, &s_test)?,
        delta_eo: equal_opportunity(&yhat, &y_test, &s_test)?,
    })
}

/// Evaluates fixed embeddings `h` over `cfg.n_splits` random splits.
pub fn evaluate_embeddings(
    h: &Array2<f64>,
    y: &[u8],
    s: &[u8],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<FairnessReport> {
    if cfg.n_splits == 0 {
        return Err(Error::Validation("n_splits must be at least 1".into()));
    }
    let mut splits = Vec::new();
    let mut failed = Vec::new();
    for k in 0..cfg.n_splits {
        let split_seed = derive_seed(seed, k as u64);
        let split = split_nodes(h.nrows(), cfg.train_fraction, split_seed)?;
        match evaluate_split(h, y, s, &split, cfg.l2) {
            Ok(r) => splits.push(r),
            Err(e) => {
                log::warn!("split {k} failed: {e}");
                failed.push(SplitFailure {
                    seed: split_seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let pct = |f: fn(&SplitResult) -> f64| {
        MeanStd::of(&splits.iter().map(|r| 100.0 * f(r)).collect::<Vec<_>>())
    };
    Ok(FairnessReport {
        accuracy: pct(|r| r.accuracy),
        delta_sp: pct(|r| r.delta_sp),
        delta_eo: pct(|r| r.delta_eo),
        n_splits: cfg.n_splits,
        splits,
        failed_splits: failed,
    })
}

/// Embeds the uncorrupted graph once and evaluates it over random splits.
pub fn evaluate_pipeline(
    g: &Graph,
    params: &EncoderParams,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<FairnessReport> {
    let y = g
        .labels()
        .ok_or_else(|| Error::Validation("evaluation needs node labels".into()))?;
    if params.dims().input != g.n_features() {
        return Err(Error::Validation(format!(
            "checkpoint expects {} features, graph has {}",
            params.dims().input,
            g.n_features()
        )));
    }
    let emb = embed(params, g)?;
    evaluate_embeddings(&emb.h, y, g.sensitive(), cfg, seed)
}
