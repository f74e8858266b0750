//! Two-layer GCN encoder followed by a two-layer MLP projection head.
//!
//! ```text
//! H = ReLU(Â · ReLU(Â · X · W1) · W2)
//! Z = ReLU(H · P1 + b1) · P2 + b2
//! ```
//!
//! Gradients are computed by hand; `backward` is exact up to floating point
//! (ReLU uses subgradient 0 at 0).

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::NormalizedAdjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub proj_hidden: usize,
    pub proj_output: usize,
}

impl EncoderDims {
    /// Projection head as wide as the embedding.
    pub fn uniform(input: usize, width: usize) -> Self {
        Self {
            input,
            hidden: width,
            output: width,
            proj_hidden: width,
            proj_output: width,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.input,
            self.hidden,
            self.output,
            self.proj_hidden,
            self.proj_output,
        ];
        if all.contains(&0) {
            return Err(Error::Validation(format!("encoder dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Encoder weights. Also used as the container for their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub gcn_w1: Array2<f64>,
    pub gcn_w2: Array2<f64>,
    pub proj_w1: Array2<f64>,
    pub proj_b1: Array1<f64>,
    pub proj_w2: Array2<f64>,
    pub proj_b2: Array1<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
}

/// Glorot-uniform weights, zero biases.
pub fn glorot_init(dims: EncoderDims, seed: u64) -> Result<EncoderParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(EncoderParams {
        gcn_w1: glorot(&mut rng, dims.input, dims.hidden),
        gcn_w2: glorot(&mut rng, dims.hidden, dims.output),
        proj_w1: glorot(&mut rng, dims.output, dims.proj_hidden),
        proj_b1: Array1::zeros(dims.proj_hidden),
        proj_w2: glorot(&mut rng, dims.proj_hidden, dims.proj_output),
        proj_b2: Array1::zeros(dims.proj_output),
    })
}

impl EncoderParams {
    pub fn zeros(dims: EncoderDims) -> Self {
        Self {
            gcn_w1: Array2::zeros((dims.input, dims.hidden)),
            gcn_w2: Array2::zeros((dims.hidden, dims.output)),
            proj_w1: Array2::zeros((dims.output, dims.proj_hidden)),
            proj_b1: Array1::zeros(dims.proj_hidden),
            proj_w2: Array2::zeros((dims.proj_hidden, dims.proj_output)),
            proj_b2: Array1::zeros(dims.proj_output),
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            input: self.gcn_w1.nrows(),
            hidden: self.gcn_w1.ncols(),
            output: self.gcn_w2.ncols(),
            proj_hidden: self.proj_w1.ncols(),
            proj_output: self.proj_w2.ncols(),
        }
    }

    /// Mutable flat views of every tensor, in a fixed order.
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.gcn_w1.as_slice_mut().expect("standard layout"),
            self.gcn_w2.as_slice_mut().expect("standard layout"),
            self.proj_w1.as_slice_mut().expect("standard layout"),
            self.proj_b1.as_slice_mut().expect("standard layout"),
            self.proj_w2.as_slice_mut().expect("standard layout"),
            self.proj_b2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.gcn_w1.as_slice().expect("standard layout"),
            self.gcn_w2.as_slice().expect("standard layout"),
            self.proj_w1.as_slice().expect("standard layout"),
            self.proj_b1.as_slice().expect("standard layout"),
            self.proj_w2.as_slice().expect("standard layout"),
            self.proj_b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &EncoderParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `Â X`
    ax: Array2<f64>,
    pre1: Array2<f64>,
    /// `Â · ReLU(pre1)`
    a_act1: Array2<f64>,
    pre2: Array2<f64>,
    pub h: Array2<f64>,
    proj_pre: Array2<f64>,
    proj_act: Array2<f64>,
    pub z: Array2<f64>,
}

impl ForwardCache {
    /// Which ReLU inputs are positive, over all three activation layers. Two
    /// parameter settings with the same pattern lie in one smooth piece of the
    /// network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        [&self.pre1, &self.pre2, &self.proj_pre]
            .iter()
            .flat_map(|a| a.iter().map(|&v| v > 0.0))
            .collect()
    }
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn relu_mask(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    Zip::from(grad).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
}

fn check_input(params: &EncoderParams, a_hat: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != params.gcn_w1.nrows() || x.nrows() != a_hat.n() {
        return Err(Error::Validation(format!(
            "input is {}x{}, encoder expects {}x{}",
            x.nrows(),
            x.ncols(),
            a_hat.n(),
            params.gcn_w1.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite encoder input".into()));
    }
    Ok(())
}

pub fn gcn_forward(
    params: &EncoderParams,
    a_hat: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_input(params, a_hat, x)?;
    let h1 = relu(&a_hat.matmul(x).dot(&params.gcn_w1));
    Ok(relu(&a_hat.matmul(h1.view()).dot(&params.gcn_w2)))
}

pub fn projection_forward(params: &EncoderParams, h: ArrayView2<'_, f64>) -> Array2<f64> {
    let hidden = relu(&(h.dot(&params.proj_w1) + &params.proj_b1));
    hidden.dot(&params.proj_w2) + &params.proj_b2
}

/// Full forward pass retaining everything `backward` needs.
pub fn forward(
    params: &EncoderParams,
    a_hat: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
) -> Result<ForwardCache> {
    check_input(params, a_hat, x)?;
    let ax = a_hat.matmul(x);
    let pre1 = ax.dot(&params.gcn_w1);
    let a_act1 = a_hat.matmul(relu(&pre1).view());
    let pre2 = a_act1.dot(&params.gcn_w2);
    let h = relu(&pre2);
    let proj_pre = h.dot(&params.proj_w1) + &params.proj_b1;
    let proj_act = relu(&proj_pre);
    let z = proj_act.dot(&params.proj_w2) + &params.proj_b2;
    Ok(ForwardCache {
        ax,
        pre1,
        a_act1,
        pre2,
        h,
        proj_pre,
        proj_act,
        z,
    })
}

/// Gradients of a scalar loss with respect to every parameter, given
/// `dz = dLoss/dZ` for the cached forward pass.
pub fn backward(
    params: &EncoderParams,
    a_hat: &NormalizedAdjacency,
    cache: &ForwardCache,
    dz: &Array2<f64>,
) -> EncoderParams {
    let proj_w2 = cache.proj_act.t().dot(dz);
    let proj_b2 = dz.sum_axis(Axis(0));
    let mut d_proj = dz.dot(&params.proj_w2.t());
    relu_mask(&mut d_proj, &cache.proj_pre);
    let proj_w1 = cache.h.t().dot(&d_proj);
    let proj_b1 = d_proj.sum_axis(Axis(0));
    let mut d_pre2 = d_proj.dot(&params.proj_w1.t());
    relu_mask(&mut d_pre2, &cache.pre2);
    let gcn_w2 = cache.a_act1.t().dot(&d_pre2);
    // Â is symmetric, so Âᵀ · G = Â · G.
    let mut d_pre1 = a_hat.matmul(d_pre2.dot(&params.gcn_w2.t()).view());
    relu_mask(&mut d_pre1, &cache.pre1);
    let gcn_w1 = cache.ax.t().dot(&d_pre1);
    EncoderParams {
        gcn_w1,
        gcn_w2,
        proj_w1,
        proj_b1,
        proj_w2,
        proj_b2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    dims: EncoderDims,
    gcn_w1: Vec<f64>,
    gcn_w2: Vec<f64>,
    proj_w1: Vec<f64>,
    proj_b1: Vec<f64>,
    proj_w2: Vec<f64>,
    proj_b2: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "fairgcl-encoder-v1";

impl EncoderParams {
    pub fn to_json(&self) -> Result<String> {
        let [a, b, c, d, e, f] = self.tensors().map(<[f64]>::to_vec);
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            dims: self.dims(),
            gcn_w1: a,
            gcn_w2: b,
            proj_w1: c,
            proj_b1: d,
            proj_w2: e,
            proj_b2: f,
        };
        Ok(serde_json::to_string(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!("unknown checkpoint format {:?}", ckpt.format)));
        }
        let d = ckpt.dims;
        d.validate()?;
        let mat = |v: Vec<f64>, r: usize, c: usize, name: &str| {
            Array2::from_shape_vec((r, c), v)
                .map_err(|_| Error::Validation(format!("checkpoint tensor {name} has the wrong size")))
        };
        let vec = |v: Vec<f64>, n: usize, name: &str| {
            if v.len() == n {
                Ok(Array1::from(v))
            } else {
                Err(Error::Validation(format!("checkpoint tensor {name} has the wrong size")))
            }
        };
        let params = EncoderParams {
            gcn_w1: mat(ckpt.gcn_w1, d.input, d.hidden, "gcn_w1")?,
            gcn_w2: mat(ckpt.gcn_w2, d.hidden, d.output, "gcn_w2")?,
            proj_w1: mat(ckpt.proj_w1, d.output, d.proj_hidden, "proj_w1")?,
            proj_b1: vec(ckpt.proj_b1, d.proj_hidden, "proj_b1")?,
            proj_w2: mat(ckpt.proj_w2, d.proj_hidden, d.proj_output, "proj_w2")?,
            proj_b2: vec(ckpt.proj_b2, d.proj_output, "proj_b2")?,
        };
        if !params.is_finite() {
            return Err(Error::Numeric("checkpoint contains non-finite weights".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use crate::sparse::normalized_adjacency;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> NormalizedAdjacency {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i < j)
            .collect();
        let keep: Vec<(usize, usize)> = pairs.into_iter().filter(|_| rng.random_bool(0.35)).collect();
        let (adj, _) = Adjacency::from_pairs(n, keep).unwrap();
        normalized_adjacency(&adj)
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let dims = EncoderDims::uniform(4, 8);
        let p = glorot_init(dims, 1).unwrap();
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(p.gcn_w1.iter().all(|w| w.abs() <= bound));
        assert_eq!(p, glorot_init(dims, 1).unwrap());
        assert!(p.proj_b1.iter().all(|&b| b == 0.0));
        assert!(glorot_init(EncoderDims::uniform(0, 3), 1).is_err());
    }

    #[test]
    fn glorot_variance() {
        // uniform(-b, b) has variance b^2/3 = 2/(fan_in + fan_out)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = glorot(&mut rng, 250, 400);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let want = 2.0 / 650.0;
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    }

    #[test]
    fn identity_composition() {
        let (adj, _) = Adjacency::from_pairs(3, []).unwrap();
        let a = normalized_adjacency(&adj);
        let mut p = EncoderParams::zeros(EncoderDims::uniform(2, 2));
        p.gcn_w1 = Array2::eye(2);
        p.gcn_w2 = Array2::eye(2);
        let x = ndarray::array![[1.0, 2.0], [0.0, 3.0], [4.0, 0.5]];
        assert_eq!(gcn_forward(&p, &a, x.view()).unwrap(), x);
        p.proj_w1 = Array2::eye(2);
        p.proj_w2 = Array2::eye(2);
        assert_eq!(projection_forward(&p, x.view()), x);
    }

    #[test]
    fn zero_input_and_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_graph(&mut rng, 5);
        let p = glorot_init(EncoderDims::uniform(3, 4), 0).unwrap();
        let h = gcn_forward(&p, &a, Array2::zeros((5, 3)).view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        let z = projection_forward(&EncoderParams::zeros(EncoderDims::uniform(3, 4)), h.view());
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_input_rejected() {
        let (adj, _) = Adjacency::from_pairs(2, [(0, 1)]).unwrap();
        let a = normalized_adjacency(&adj);
        let p = glorot_init(EncoderDims::uniform(1, 2), 0).unwrap();
        let x = ndarray::array![[1.0], [f64::NAN]];
        assert!(matches!(gcn_forward(&p, &a, x.view()), Err(Error::Numeric(_))));
    }

    #[test]
    fn forward_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_graph(&mut rng, 6);
        let dense = a.to_dense();
        let dims = EncoderDims {
            input: 4,
            hidden: 5,
            output: 3,
            proj_hidden: 4,
            proj_output: 2,
        };
        let mut p = glorot_init(dims, 9).unwrap();
        p.proj_b1 = Array1::from_shape_simple_fn(4, || rng.random_range(-0.5..0.5));
        p.proj_b2 = Array1::from_shape_simple_fn(2, || rng.random_range(-0.5..0.5));
        let x = random_matrix(&mut rng, 6, 4);
        let r = |m: Array2<f64>| m.mapv(|v| v.max(0.0));
        let h = r(dense.dot(&r(dense.dot(&x).dot(&p.gcn_w1))).dot(&p.gcn_w2));
        let z = r(h.dot(&p.proj_w1) + &p.proj_b1).dot(&p.proj_w2) + &p.proj_b2;
        let cache = forward(&p, &a, x.view()).unwrap();
        for (u, v) in cache.h.iter().zip(h.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        for (u, v) in cache.z.iter().zip(z.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(cache.h, gcn_forward(&p, &a, x.view()).unwrap());
        assert_eq!(cache.z, projection_forward(&p, cache.h.view()));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_graph(&mut rng, 6);
        let p = glorot_init(EncoderDims::uniform(3, 4), 0).unwrap();
        let x = random_matrix(&mut rng, 6, 3);
        let cache = forward(&p, &a, x.view()).unwrap();
        let g = backward(&p, &a, &cache, &Array2::zeros(cache.z.raw_dim()));
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sum_loss_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_graph(&mut rng, 10);
        let dims = EncoderDims {
            input: 4,
            hidden: 6,
            output: 5,
            proj_hidden: 4,
            proj_output: 3,
        };
        let mut p = glorot_init(dims, 2).unwrap();
        p.proj_b1.fill(0.1);
        let x = random_matrix(&mut rng, 10, 4);
        let cache = forward(&p, &a, x.view()).unwrap();
        let g = backward(&p, &a, &cache, &Array2::ones(cache.z.raw_dim()));
        let loss = |q: &EncoderParams| forward(q, &a, x.view()).unwrap().z.sum();
        let step = 1e-5;
        let grads = g.tensors();
        for t in 0..6 {
            for k in 0..grads[t].len() {
                let mut plus = p.clone();
                plus.tensors_mut()[t][k] += step;
                let mut minus = p.clone();
                minus.tensors_mut()[t][k] -= step;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let an = grads[t][k];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-6, "tensor {t} index {k}: fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn linear_region_closed_form() {
        // Positive inputs, positive weights: every ReLU is active, so
        // sum(Z) = 1ᵀ Â Â X W1 W2 P1 P2 1 + const and dW1 = (ÂÂX)ᵀ 1 (W2 P1 P2 1)ᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_graph(&mut rng, 7);
        let dense = a.to_dense();
        let dims = EncoderDims::uniform(3, 4);
        let mut p = EncoderParams::zeros(dims);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.random_range(0.1..1.0);
            }
        }
        let x = Array2::from_shape_simple_fn((7, 3), || rng.random_range(0.1..1.0));
        let cache = forward(&p, &a, x.view()).unwrap();
        let g = backward(&p, &a, &cache, &Array2::ones(cache.z.raw_dim()));
        let ones_n = Array2::<f64>::ones((7, 1));
        let ones_out = Array2::<f64>::ones((dims.proj_output, 1));
        let right = p.gcn_w2.dot(&p.proj_w1).dot(&p.proj_w2).dot(&ones_out);
        let left = dense.dot(&dense).dot(&x).t().dot(&ones_n);
        let want = left.dot(&right.t());
        for (u, v) in g.gcn_w1.iter().zip(want.iter()) {
            assert!((u - v).abs() < 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = glorot_init(EncoderDims::uniform(3, 5), 8).unwrap();
        let back = EncoderParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        let mut bad: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        bad["dims"]["hidden"] = 7.into();
        assert!(EncoderParams::from_json(&bad.to_string()).is_err());
    }
}
