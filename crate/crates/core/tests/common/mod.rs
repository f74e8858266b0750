//! Shared builders and independent oracles for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use fairgcl::graph::{Adjacency, Edge, Graph};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Erdős–Rényi graph with random groups, Gaussian features and labels.
pub fn random_graph(n: usize, p_edge: f64, n_features: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p_edge {
                pairs.push((i, j));
            }
        }
    }
    let (adj, _) = Adjacency::from_pairs(n, pairs).unwrap();
    let s: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let x = Array2::from_shape_fn((n, n_features), |_| rng.sample::<f64, _>(StandardNormal));
    Graph::new(adj, x, s, Some(y)).unwrap()
}

/// Edges lying in at least one triangle whose three nodes share `s`,
/// found by checking every node triple.
pub fn brute_force_triangle_edges(g: &Graph) -> BTreeSet<Edge> {
    let n = g.n_nodes();
    let adj = g.adjacency();
    let s = g.sensitive();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                if s[a] == s[b]
                    && s[b] == s[c]
                    && adj.has_edge(a, b)
                    && adj.has_edge(b, c)
                    && adj.has_edge(a, c)
                {
                    out.insert((a, b));
                    out.insert((b, c));
                    out.insert((a, c));
                }
            }
        }
    }
    out
}

/// Equal-tailed 99% acceptance region for a Binomial(n, p) count.
pub fn binomial_interval(n: u64, p: f64) -> (u64, u64) {
    if p <= 0.0 {
        return (0, 0);
    }
    if p >= 1.0 {
        return (n, n);
    }
    let b = Binomial::new(p, n).unwrap();
    (b.inverse_cdf(0.005), b.inverse_cdf(0.995))
}

fn normalize(z: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = z.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Symmetric NT-Xent computed by summing exponentials directly.
pub fn naive_nt_xent(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>, tau: f64) -> f64 {
    let u = normalize(z1);
    let v = normalize(z2);
    let n = u.nrows();
    let sim = |a: &Array2<f64>, i: usize, b: &Array2<f64>, k: usize| (a.row(i).dot(&b.row(k)) / tau).exp();
    let mut total = 0.0;
    for i in 0..n {
        for (a, b) in [(&u, &v), (&v, &u)] {
            let pos = sim(a, i, b, i);
            let mut denom = 0.0;
            for k in 0..n {
                denom += sim(a, i, b, k);
                if k != i {
                    denom += sim(a, i, a, k);
                }
            }
            total += -(pos / denom).ln();
        }
    }
    total / (2.0 * n as f64)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

/// Outcome of a central finite-difference check of the two-view contrastive
/// loss through the projection head and both GCN layers.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub n_nodes: usize,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±step crosses a ReLU kink, where the loss is not
    /// differentiable along the probe.
    pub kink_skipped: usize,
}

fn two_view_loss(
    p: &fairgcl::encoder::EncoderParams,
    views: &[(fairgcl::sparse::NormalizedAdjacency, Array2<f64>); 2],
    tau: f64,
) -> (f64, Vec<bool>) {
    use fairgcl::encoder::forward;
    let c1 = forward(p, &views[0].0, views[0].1.view()).unwrap();
    let c2 = forward(p, &views[1].0, views[1].1.view()).unwrap();
    let mut pattern = c1.activation_pattern();
    pattern.extend(c2.activation_pattern());
    (fairgcl::contrastive::total_loss(c1.z.view(), c2.z.view(), tau), pattern)
}

/// Random instance with at most `max_nodes` nodes: two independently drawn
/// views over the same nodes, random layer widths, nonzero projection
/// biases. Returns `None` if some projection row is exactly zero.
pub fn gradient_check(seed: u64, max_nodes: usize, step: f64, tau: f64) -> Option<GradientCheck> {
    use fairgcl::contrastive::loss_gradient;
    use fairgcl::encoder::{backward, forward, glorot_init, EncoderDims};
    use fairgcl::sparse::normalized_adjacency;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=max_nodes);
    let f = rng.random_range(2..=5);
    let dims = EncoderDims {
        input: f,
        hidden: rng.random_range(2..=6),
        output: rng.random_range(2..=5),
        proj_hidden: rng.random_range(2..=6),
        proj_output: rng.random_range(2..=4),
    };
    let g1 = random_graph(n, 0.4, f, rng.random());
    let g2 = random_graph(n, 0.4, f, rng.random());
    let views = [
        (normalized_adjacency(g1.adjacency()), g1.features().clone()),
        (normalized_adjacency(g2.adjacency()), g2.features().clone()),
    ];
    let mut params = glorot_init(dims, rng.random()).unwrap();
    for b in [&mut params.proj_b1, &mut params.proj_b2] {
        b.mapv_inplace(|_| 0.1 * rng.sample::<f64, _>(StandardNormal));
    }

    let c1 = forward(&params, &views[0].0, views[0].1.view()).unwrap();
    let c2 = forward(&params, &views[1].0, views[1].1.view()).unwrap();
    let lg = loss_gradient(c1.z.view(), c2.z.view(), tau);
    if lg.degenerate_rows > 0 {
        return None;
    }
    let mut grads = backward(&params, &views[0].0, &c1, &lg.dz1);
    grads.add_assign(&backward(&params, &views[1].0, &c2, &lg.dz2));
    let (_, base_pattern) = two_view_loss(&params, &views, tau);

    let mut out = GradientCheck { n_nodes: n, max_rel_error: 0.0, checked: 0, kink_skipped: 0 };
    for t in 0..6 {
        for k in 0..params.tensors()[t].len() {
            let mut plus = params.clone();
            plus.tensors_mut()[t][k] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[t][k] -= step;
            let (lp, pp) = two_view_loss(&plus, &views, tau);
            let (lm, pm) = two_view_loss(&minus, &views, tau);
            if pp != base_pattern || pm != base_pattern {
                out.kink_skipped += 1;
                continue;
            }
            let fd = (lp - lm) / (2.0 * step);
            let an = grads.tensors()[t][k];
            // Below 1e-5 the difference quotient is dominated by rounding
            // (about eps * |loss| / step), so magnitudes are floored there.
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    Some(out)
}

/// The first `count` non-degenerate gradient-check instances.
pub fn gradient_checks(count: usize, max_nodes: usize, step: f64, tau: f64) -> Vec<GradientCheck> {
    (0u64..)
        .filter_map(|seed| gradient_check(seed, max_nodes, step, tau))
        .take(count)
        .collect()
}
