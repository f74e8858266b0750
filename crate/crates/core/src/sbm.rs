//! Two-block stochastic block model with group-dependent features.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::graph::{Adjacency, Graph};

/// Blocks coincide with sensitive groups: block 0 gets `s = 0`, block 1
/// gets `s = 1`.
///
/// The first `n_biased_features` columns are `s + noise_scale * N(0, 1)`; the
/// rest are `noise_scale * N(0, 1)` and independent of `s`. Labels are
/// `1[ signal + label_sensitive_weight * (2s - 1) + label_noise * N(0, 1) > 0 ]`
/// where `signal` is the standardized sum of the `n_label_features`
/// unbiased columns that follow the biased ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSpec {
    pub nodes_per_block: [usize; 2],
    pub p_within: f64,
    pub p_between: f64,
    pub n_features: usize,
    pub n_biased_features: usize,
    pub noise_scale: f64,
    #[serde(default = "default_label_features")]
    pub n_label_features: usize,
    #[serde(default = "default_label_sensitive_weight")]
    pub label_sensitive_weight: f64,
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
}

fn default_label_features() -> usize {
    4
}

fn default_label_sensitive_weight() -> f64 {
    0.5
}

fn default_label_noise() -> f64 {
    0.5
}

impl SbmSpec {
    /// The 400-node homophilous benchmark: two blocks of 200, 20 features of
    /// which 2 depend on the sensitive attribute.
    pub fn desk_benchmark() -> Self {
        Self {
            nodes_per_block: [200, 200],
            p_within: 0.9,
            p_between: 0.1,
            n_features: 20,
            n_biased_features: 2,
            noise_scale: 1.0,
            n_label_features: default_label_features(),
            label_sensitive_weight: default_label_sensitive_weight(),
            label_noise: default_label_noise(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_block[0] + self.nodes_per_block[1]
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("p_within", self.p_within)?;
        check_prob("p_between", self.p_between)?;
        if self.n_nodes() == 0 {
            return Err(Error::Validation("SBM needs at least one node".into()));
        }
        if self.n_biased_features > self.n_features {
            return Err(Error::Validation(format!(
                "n_biased_features ({}) exceeds n_features ({})",
                self.n_biased_features, self.n_features
            )));
        }
        if self.n_biased_features + self.n_label_features > self.n_features {
            return Err(Error::Validation(
                "label features must be drawn from the unbiased columns".into(),
            ));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::Validation("noise_scale must be positive".into()));
        }
        if !(self.label_noise.is_finite() && self.label_noise >= 0.0)
            || !self.label_sensitive_weight.is_finite()
        {
            return Err(Error::Validation("label model parameters must be finite".into()));
        }
        Ok(())
    }
}

pub fn generate_sbm(spec: &SbmSpec, seed: u64) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensitive: Vec<u8> = (0..n)
        .map(|v| u8::from(v >= spec.nodes_per_block[0]))
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if sensitive[i] == sensitive[j] {
                spec.p_within
            } else {
                spec.p_between
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let adjacency = Adjacency::from_sorted_edges(n, edges);

    let mut features = Array2::zeros((n, spec.n_features));
    for v in 0..n {
        for f in 0..spec.n_features {
            let noise: f64 = rng.sample(StandardNormal);
            let shift = if f < spec.n_biased_features {
                f64::from(sensitive[v])
            } else {
                0.0
            };
            features[[v, f]] = shift + spec.noise_scale * noise;
        }
    }

    let label_cols = spec.n_biased_features..spec.n_biased_features + spec.n_label_features;
    let norm = (spec.n_label_features.max(1) as f64).sqrt() * spec.noise_scale;
    let labels = (0..n)
        .map(|v| {
            let signal: f64 = label_cols.clone().map(|f| features[[v, f]]).sum::<f64>() / norm;
            let noise: f64 = rng.sample(StandardNormal);
            let group = 2.0 * f64::from(sensitive[v]) - 1.0;
            let latent = signal + spec.label_sensitive_weight * group + spec.label_noise * noise;
            u8::from(latent > 0.0)
        })
        .collect();

    Graph::new(adjacency, features, sensitive, Some(labels))
}
