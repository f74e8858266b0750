//! Checks that adaptive feature masking lowers the expected total
//! correlation `ρ = Σ R_i` relative to uniform masking with the same mean
//! keep rate, where `R_i = |r_i|` if feature `i` survives and 0 otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::feature_mask_plan;
use crate::error::{Error, Result};
use crate::rng::{CounterRng, Stream};
use crate::stats::CorrelationReport;

/// Absolute tolerance on "equal totals" and on the final inequality.
pub const SUM_TOLERANCE: f64 = 1e-12;
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoLabel {
    Adaptive,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoModel {
    pub abs_r: Vec<f64>,
    pub keep_prob: Vec<f64>,
    pub label: RhoLabel,
}

impl RhoModel {
    pub fn new(abs_r: Vec<f64>, keep_prob: Vec<f64>, label: RhoLabel) -> Result<Self> {
        if abs_r.len() != keep_prob.len() {
            return Err(Error::Validation(format!(
                "{} correlations but {} keep probabilities",
                abs_r.len(),
                keep_prob.len()
            )));
        }
        if let Some(v) = abs_r.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("|r| must be finite and non-negative, got {v}")));
        }
        if let Some(p) = keep_prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!("keep probability {p} outside [0, 1]")));
        }
        Ok(Self { abs_r, keep_prob, label })
    }

    pub fn n_features(&self) -> usize {
        self.abs_r.len()
    }
}

/// `Σ keep_i · |r_i|`.
pub fn expected_rho(model: &RhoModel) -> f64 {
    model.abs_r.iter().zip(&model.keep_prob).map(|(r, p)| r * p).sum()
}

/// Same `|r|`, every keep probability replaced by their mean.
pub fn uniform_counterpart(model: &RhoModel) -> RhoModel {
    let f = model.keep_prob.len();
    let mean = if f == 0 {
        0.0
    } else {
        model.keep_prob.iter().sum::<f64>() / f as f64
    };
    RhoModel {
        abs_r: model.abs_r.clone(),
        keep_prob: vec![mean; f],
        label: RhoLabel::Uniform,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
}

const MC_CHUNK: usize = 4096;

/// Sample mean and standard error of `ρ` over independent trials.
///
/// Trial `t` draws feature `i` from index `t * F + i` of the Monte Carlo
/// stream, so the estimate does not depend on the thread count.
pub fn monte_carlo_rho(model: &RhoModel, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Validation(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let f = model.n_features() as u64;
    let view = match model.label {
        RhoLabel::Adaptive => 0,
        RhoLabel::Uniform => 1,
    };
    let rng = CounterRng::new(seed, view, Stream::MonteCarlo);
    let n_chunks = trials.div_ceil(MC_CHUNK);
    // Per-chunk (count, mean, M2), merged in chunk order.
    let partial: Vec<(f64, f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for t in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(trials) {
                let base = t as u64 * f;
                let rho: f64 = model
                    .abs_r
                    .iter()
                    .zip(&model.keep_prob)
                    .enumerate()
                    .filter(|(i, (_, &p))| rng.bernoulli(base + *i as u64, p))
                    .map(|(_, (r, _))| r)
                    .sum();
                n += 1.0;
                let d = rho - mean;
                mean += d / n;
                m2 += d * (rho - mean);
            }
            (n, mean, m2)
        })
        .collect();
    let (n, mean, m2) = partial.iter().fold((0.0, 0.0, 0.0), |(na, ma, qa), &(nb, mb, qb)| {
        let n = na + nb;
        let d = mb - ma;
        (n, ma + d * nb / n, qa + qb + d * d * na * nb / n)
    });
    let var = m2 / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var / n).sqrt(),
    })
}

/// Prefix sums of `p` dominate those of `q` and the totals agree, taking
/// both sequences in the order given.
pub fn prefix_dominates(p: &[f64], q: &[f64]) -> bool {
    if p.len() != q.len() {
        return false;
    }
    let (mut sp, mut sq) = (0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        sp += a;
        sq += b;
        if sp < sq - SUM_TOLERANCE {
            return false;
        }
    }
    (sp - sq).abs() <= SUM_TOLERANCE
}

/// `p` majorizes `q`: after sorting both non-increasing, every prefix sum of
/// `p` is at least that of `q` and the totals are equal.
pub fn check_majorization(p: &[f64], q: &[f64]) -> bool {
    let desc = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    prefix_dominates(&desc(p), &desc(q))
}

/// Feature indices ordered by `|r|` ascending. Ties put the larger keep
/// probability first, which is the ordering the argument needs.
pub fn order_by_abs_r(model: &RhoModel) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..model.n_features()).collect();
    idx.sort_by(|&a, &b| {
        model.abs_r[a]
            .total_cmp(&model.abs_r[b])
            .then(model.keep_prob[b].total_cmp(&model.keep_prob[a]))
    });
    idx
}

/// `Σ p_i |r_i|` rewritten as `Σ_l (|r_l| − |r_{l−1}|) · Σ_{i≥l} p_i` with the
/// features sorted by `|r|` ascending and `|r_0| = 0`.
pub fn telescoped_rho(model: &RhoModel) -> f64 {
    let order = order_by_abs_r(model);
    let mut tail: Vec<f64> = order.iter().map(|&i| model.keep_prob[i]).collect();
    for l in (0..tail.len().saturating_sub(1)).rev() {
        tail[l] += tail[l + 1];
    }
    let mut prev = 0.0;
    let mut total = 0.0;
    for (l, &i) in order.iter().enumerate() {
        total += (model.abs_r[i] - prev) * tail[l];
        prev = model.abs_r[i];
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub analytic_adaptive: f64,
    pub analytic_uniform: f64,
    pub mc_adaptive: MonteCarloEstimate,
    pub mc_uniform: MonteCarloEstimate,
    /// Keep probabilities listed by `|r|` ascending dominate the uniform
    /// sequence prefix by prefix.
    pub majorization_holds: bool,
    /// Keep probability never rises as `|r|` grows.
    pub monotone_pairing: bool,
    pub inequality_holds: bool,
    pub trials: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.inequality_holds && self.majorization_holds
    }
}

/// Builds the adaptive and uniform models for a correlation report and
/// compares them analytically and by simulation.
pub fn verify_proposition1(
    report: &CorrelationReport,
    p_f: f64,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if trials < MIN_TRIALS {
        return Err(Error::Validation(format!(
            "verification needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let plan = feature_mask_plan(report, p_f)?;
    let abs_r: Vec<f64> = report.r.iter().map(|r| r.abs()).collect();
    let adaptive = RhoModel::new(abs_r, plan.keep_prob, RhoLabel::Adaptive)?;
    let uniform = uniform_counterpart(&adaptive);

    let order = order_by_abs_r(&adaptive);
    let sorted: Vec<f64> = order.iter().map(|&i| adaptive.keep_prob[i]).collect();
    let monotone_pairing = sorted.windows(2).all(|w| w[0] >= w[1]);
    let majorization_holds = prefix_dominates(&sorted, &uniform.keep_prob);

    let analytic_adaptive = expected_rho(&adaptive);
    let analytic_uniform = expected_rho(&uniform);
    Ok(VerificationReport {
        analytic_adaptive,
        analytic_uniform,
        mc_adaptive: monte_carlo_rho(&adaptive, trials, seed)?,
        mc_uniform: monte_carlo_rho(&uniform, trials, seed)?,
        majorization_holds,
        monotone_pairing,
        inequality_holds: analytic_adaptive <= analytic_uniform + SUM_TOLERANCE,
        trials,
    })
}
