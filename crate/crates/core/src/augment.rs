//! Fairness-aware corruption of graphs into contrastive views.
//!
//! Features are masked column-wise with keep probabilities derived from the
//! p-value of each feature's correlation with the sensitive attribute. Edges
//! are deleted independently with per-edge probabilities set by one of five
//! adaptive schemes (or a uniform control rate).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::graph::{degree_stats, edge_group_counts, monochromatic_triangle_mask, Adjacency, Graph};
use crate::rng::{CounterRng, Stream};
use crate::stats::{feature_correlation_report, CorrelationMethod, CorrelationReport};

/// Which of the two contrastive views a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl ViewId {
    pub fn index(self) -> u64 {
        match self {
            ViewId::One => 1,
            ViewId::Two => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Feature masking

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMaskPlan {
    /// Probability that each feature is kept (mask entry 1).
    pub keep_prob: Vec<f64>,
    pub base_mask_prob: f64,
    /// `None` for a uniform plan.
    pub method: Option<CorrelationMethod>,
}

/// `keep_i = p_uncorr_i * (1 - p_f)`.
pub fn feature_mask_plan(report: &CorrelationReport, p_f: f64) -> Result<FeatureMaskPlan> {
    check_prob("p_f", p_f)?;
    Ok(FeatureMaskPlan {
        keep_prob: report
            .p_uncorr
            .iter()
            .map(|p| (p * (1.0 - p_f)).clamp(0.0, 1.0))
            .collect(),
        base_mask_prob: p_f,
        method: Some(report.method),
    })
}

pub fn uniform_feature_mask_plan(n_features: usize, keep: f64) -> Result<FeatureMaskPlan> {
    check_prob("uniform keep probability", keep)?;
    Ok(FeatureMaskPlan {
        keep_prob: vec![keep; n_features],
        base_mask_prob: 1.0 - keep,
        method: None,
    })
}

impl FeatureMaskPlan {
    pub fn mean_keep(&self) -> f64 {
        if self.keep_prob.is_empty() {
            return 1.0;
        }
        self.keep_prob.iter().sum::<f64>() / self.keep_prob.len() as f64
    }
}

pub fn sample_feature_mask(plan: &FeatureMaskPlan, seed: u64, view: ViewId) -> Vec<u8> {
    let rng = CounterRng::new(seed, view.index(), Stream::FeatureMask);
    plan.keep_prob
        .iter()
        .enumerate()
        .map(|(i, &p)| u8::from(rng.bernoulli(i as u64, p)))
        .collect()
}

pub fn apply_feature_mask(x: &Array2<f64>, mask: &[u8]) -> Result<Array2<f64>> {
    if mask.len() != x.ncols() {
        return Err(Error::Validation(format!(
            "mask has {} entries for {} features",
            mask.len(),
            x.ncols()
        )));
    }
    let mut out = x.clone();
    for (c, &m) in mask.iter().enumerate() {
        if m == 0 {
            out.column_mut(c).fill(0.0);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Edge deletion

/// How the four counterfactual probabilities are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterfactualReading {
    /// `p1..p4` are probabilities of keeping an edge.
    #[default]
    Retention,
    /// `p1..p4` are probabilities of deleting an edge.
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase", deny_unknown_fields)]
pub enum EdgeScheme {
    Dyadic {
        p_kappa: f64,
        p_max: f64,
    },
    Parity {
        p_kappa: f64,
        p_max1: f64,
        p_max2: f64,
        p_max3: f64,
    },
    Counterfactual {
        p1: f64,
        p2: f64,
        p3: f64,
        p4: f64,
        #[serde(default)]
        reading: CounterfactualReading,
    },
    Triangle {
        alpha: f64,
        p_b1: f64,
        p_b2: f64,
    },
    Degree {
        p_b1: f64,
        p_b2: f64,
        p_max: f64,
    },
    /// Every edge deleted with the same probability (control).
    Uniform {
        p: f64,
    },
}

impl EdgeScheme {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeScheme::Dyadic { .. } => "dyadic",
            EdgeScheme::Parity { .. } => "parity",
            EdgeScheme::Counterfactual { .. } => "counterfactual",
            EdgeScheme::Triangle { .. } => "triangle",
            EdgeScheme::Degree { .. } => "degree",
            EdgeScheme::Uniform { .. } => "uniform",
        }
    }

    /// Checks ranges and the ordering constraints each scheme requires.
    pub fn validate(&self) -> Result<()> {
        match *self {
            EdgeScheme::Dyadic { p_kappa, p_max } => {
                check_prob("p_kappa", p_kappa)?;
                check_prob("p_max", p_max)
            }
            EdgeScheme::Parity {
                p_kappa,
                p_max1,
                p_max2,
                p_max3,
            } => {
                check_prob("p_kappa", p_kappa)?;
                check_prob("p_max1", p_max1)?;
                check_prob("p_max2", p_max2)?;
                check_prob("p_max3", p_max3)?;
                if !(p_max1 <= p_max2 && p_max2 <= p_max3) {
                    return Err(Error::Validation(format!(
                        "parity caps must satisfy p_max1 <= p_max2 <= p_max3, got {p_max1}, {p_max2}, {p_max3}"
                    )));
                }
                Ok(())
            }
            EdgeScheme::Counterfactual { p1, p2, p3, p4, .. } => {
                for (name, p) in [("p1", p1), ("p2", p2), ("p3", p3), ("p4", p4)] {
                    check_prob(name, p)?;
                }
                if p1 <= p2 {
                    return Err(Error::Validation(format!(
                        "counterfactual scheme requires p1 > p2, got p1={p1}, p2={p2}"
                    )));
                }
                if p3 >= p4 {
                    return Err(Error::Validation(format!(
                        "counterfactual scheme requires p3 < p4, got p3={p3}, p4={p4}"
                    )));
                }
                Ok(())
            }
            EdgeScheme::Triangle { alpha, p_b1, p_b2 } => {
                check_prob("p_b1", p_b1)?;
                check_prob("p_b2", p_b2)?;
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::Validation(format!(
                        "triangle scheme requires alpha > 1, got {alpha}"
                    )));
                }
                check_base_order(p_b1, p_b2)
            }
            EdgeScheme::Degree { p_b1, p_b2, p_max } => {
                check_prob("p_b1", p_b1)?;
                check_prob("p_b2", p_b2)?;
                check_prob("p_max", p_max)?;
                check_base_order(p_b1, p_b2)
            }
            EdgeScheme::Uniform { p } => check_prob("uniform deletion probability", p),
        }
    }
}

fn check_base_order(p_b1: f64, p_b2: f64) -> Result<()> {
    if p_b1 <= p_b2 {
        return Err(Error::Validation(format!(
            "base probabilities must satisfy p_b1 > p_b2, got p_b1={p_b1}, p_b2={p_b2}"
        )));
    }
    Ok(())
}

/// Per-edge deletion probabilities aligned with `Graph::edges()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDeletionPlan {
    pub scheme: EdgeScheme,
    pub view: ViewId,
    pub delete_prob: Vec<f64>,
    /// Probabilities before any cap or clamp was applied.
    pub pre_clamp: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EdgeDeletionPlan {
    pub fn mean_delete(&self) -> f64 {
        if self.delete_prob.is_empty() {
            return 0.0;
        }
        self.delete_prob.iter().sum::<f64>() / self.delete_prob.len() as f64
    }

    fn build(g: &Graph, scheme: EdgeScheme, view: ViewId, pre: Vec<f64>, post: Vec<f64>) -> Self {
        debug_assert_eq!(pre.len(), g.n_edges());
        Self {
            scheme,
            view,
            delete_prob: post.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
            pre_clamp: pre,
            warnings: Vec::new(),
        }
    }
}

pub fn edge_probs_dyadic(g: &Graph, p_kappa: f64, p_max: f64) -> Result<EdgeDeletionPlan> {
    let scheme = EdgeScheme::Dyadic { p_kappa, p_max };
    scheme.validate()?;
    let counts = edge_group_counts(g);
    let (same, diff) = (counts.same as f64, counts.diff as f64);
    let mut warnings = Vec::new();
    let same_prob = if counts.same == 0 {
        warnings.push("no same-attribute edges; dyadic ratio skipped".to_string());
        1.0 - p_kappa
    } else if counts.diff == 0 {
        warnings.push("no cross-attribute edges; dyadic ratio skipped".to_string());
        1.0 - p_kappa
    } else {
        1.0 - (diff / same) * p_kappa
    };
    let pre: Vec<f64> = g
        .edges()
        .iter()
        .map(|&e| if g.same_group(e) { same_prob } else { 1.0 - p_kappa })
        .collect();
    let post = pre.iter().map(|p| p.clamp(0.0, p_max)).collect();
    let mut plan = EdgeDeletionPlan::build(g, scheme, ViewId::One, pre, post);
    plan.warnings = warnings;
    Ok(plan)
}

/// Edge groups used by the parity scheme. Cross edges form one group since
/// `|E_01| = |E_10|` for an undirected graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParityGroup {
    Cross,
    Zero,
    One,
}

fn parity_group(g: &Graph, (a, b): (usize, usize)) -> ParityGroup {
    match (g.sensitive()[a], g.sensitive()[b]) {
        (0, 0) => ParityGroup::Zero,
        (1, 1) => ParityGroup::One,
        _ => ParityGroup::Cross,
    }
}

pub fn edge_probs_parity(
    g: &Graph,
    p_kappa: f64,
    caps: (f64, f64, f64),
) -> Result<EdgeDeletionPlan> {
    let scheme = EdgeScheme::Parity {
        p_kappa,
        p_max1: caps.0,
        p_max2: caps.1,
        p_max3: caps.2,
    };
    scheme.validate()?;
    let counts = edge_group_counts(g);
    // directed-instance cardinalities of each group
    let card = |grp: ParityGroup| match grp {
        ParityGroup::Cross => counts.pair(0, 1),
        ParityGroup::Zero => counts.pair(0, 0),
        ParityGroup::One => counts.pair(1, 1),
    };
    let groups = [ParityGroup::Cross, ParityGroup::Zero, ParityGroup::One];
    let mut warnings = Vec::new();
    for grp in groups {
        if card(grp) == 0 {
            warnings.push(format!("parity group {grp:?} is empty and was skipped"));
        }
    }
    let m = groups.iter().map(|&grp| card(grp)).filter(|&c| c > 0).min();

    let mut sorted = groups;
    sorted.sort_by_key(|&grp| card(grp));
    let cap_for = |grp: ParityGroup| {
        let rank = sorted.iter().position(|&x| x == grp).unwrap();
        [caps.0, caps.1, caps.2][rank]
    };

    let group_prob = |grp: ParityGroup| -> (f64, f64) {
        let c = card(grp);
        match m {
            Some(m) if c == m => (1.0 - p_kappa, 1.0 - p_kappa),
            Some(m) if c > 0 => {
                let pre = 1.0 - (m as f64 / c as f64) * p_kappa;
                (pre, pre.min(cap_for(grp)))
            }
            _ => (1.0 - p_kappa, 1.0 - p_kappa),
        }
    };
    let table = [
        group_prob(ParityGroup::Cross),
        group_prob(ParityGroup::Zero),
        group_prob(ParityGroup::One),
    ];
    let lookup = |grp: ParityGroup| table[groups.iter().position(|&x| x == grp).unwrap()];
    let (pre, post): (Vec<f64>, Vec<f64>) = g
        .edges()
        .iter()
        .map(|&e| lookup(parity_group(g, e)))
        .unzip();
    let mut plan = EdgeDeletionPlan::build(g, scheme, ViewId::One, pre, post);
    plan.warnings = warnings;
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterfactualParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub reading: CounterfactualReading,
}

pub fn edge_probs_counterfactual(
    g: &Graph,
    params: CounterfactualParams,
    view: ViewId,
) -> Result<EdgeDeletionPlan> {
    let CounterfactualParams {
        p1,
        p2,
        p3,
        p4,
        reading,
    } = params;
    let scheme = EdgeScheme::Counterfactual {
        p1,
        p2,
        p3,
        p4,
        reading,
    };
    scheme.validate()?;
    let (same, cross) = match view {
        ViewId::One => (p1, p2),
        ViewId::Two => (p3, p4),
    };
    let to_delete = |p: f64| match reading {
        CounterfactualReading::Retention => 1.0 - p,
        CounterfactualReading::Deletion => p,
    };
    let pre: Vec<f64> = g
        .edges()
        .iter()
        .map(|&e| to_delete(if g.same_group(e) { same } else { cross }))
        .collect();
    let post = pre.clone();
    Ok(EdgeDeletionPlan::build(g, scheme, view, pre, post))
}

pub fn edge_probs_triangle(g: &Graph, alpha: f64, p_b1: f64, p_b2: f64) -> Result<EdgeDeletionPlan> {
    let scheme = EdgeScheme::Triangle { alpha, p_b1, p_b2 };
    scheme.validate()?;
    let in_t = monochromatic_triangle_mask(g);
    let pre: Vec<f64> = g
        .edges()
        .iter()
        .zip(&in_t)
        .map(|(&e, &t)| match (t, g.same_group(e)) {
            (true, _) => alpha * p_b1,
            (false, true) => p_b1,
            (false, false) => p_b2,
        })
        .collect();
    let post = pre.iter().map(|p| p.min(1.0)).collect();
    Ok(EdgeDeletionPlan::build(g, scheme, ViewId::One, pre, post))
}

pub fn edge_probs_degree(g: &Graph, p_b1: f64, p_b2: f64, p_max: f64) -> Result<EdgeDeletionPlan> {
    let scheme = EdgeScheme::Degree { p_b1, p_b2, p_max };
    scheme.validate()?;
    let stats = degree_stats(g.adjacency());
    let d_max = stats.d_max as f64;
    let regular = stats.d_max as f64 == stats.d_mean;
    let (pre, post): (Vec<f64>, Vec<f64>) = g
        .edges()
        .iter()
        .map(|&(a, b)| {
            let base = if g.same_group((a, b)) { p_b1 } else { p_b2 };
            let low = stats.degrees[a].min(stats.degrees[b]) as f64;
            if regular {
                (base, base.min(p_max))
            } else if d_max == low {
                (f64::INFINITY, p_max)
            } else {
                let pre = (d_max - stats.d_mean) / (d_max - low) * base;
                (pre, pre.min(p_max))
            }
        })
        .unzip();
    Ok(EdgeDeletionPlan::build(g, scheme, ViewId::One, pre, post))
}

pub fn edge_probs_uniform(g: &Graph, p: f64) -> Result<EdgeDeletionPlan> {
    let scheme = EdgeScheme::Uniform { p };
    scheme.validate()?;
    let pre = vec![p; g.n_edges()];
    Ok(EdgeDeletionPlan::build(g, scheme, ViewId::One, pre.clone(), pre))
}

/// Dispatches to the scheme-specific constructor.
pub fn edge_plan(g: &Graph, scheme: &EdgeScheme, view: ViewId) -> Result<EdgeDeletionPlan> {
    let mut plan = match *scheme {
        EdgeScheme::Dyadic { p_kappa, p_max } => edge_probs_dyadic(g, p_kappa, p_max)?,
        EdgeScheme::Parity {
            p_kappa,
            p_max1,
            p_max2,
            p_max3,
        } => edge_probs_parity(g, p_kappa, (p_max1, p_max2, p_max3))?,
        EdgeScheme::Counterfactual {
            p1,
            p2,
            p3,
            p4,
            reading,
        } => {
            let params = CounterfactualParams {
                p1,
                p2,
                p3,
                p4,
                reading,
            };
            return edge_probs_counterfactual(g, params, view);
        }
        EdgeScheme::Triangle { alpha, p_b1, p_b2 } => edge_probs_triangle(g, alpha, p_b1, p_b2)?,
        EdgeScheme::Degree { p_b1, p_b2, p_max } => edge_probs_degree(g, p_b1, p_b2, p_max)?,
        EdgeScheme::Uniform { p } => edge_probs_uniform(g, p)?,
    };
    plan.view = view;
    Ok(plan)
}

/// One Bernoulli draw per undirected edge; a hit deletes both orientations.
pub fn sample_edge_deletion(
    g: &Graph,
    plan: &EdgeDeletionPlan,
    seed: u64,
    view: ViewId,
) -> Result<Adjacency> {
    if plan.delete_prob.len() != g.n_edges() {
        return Err(Error::Validation(format!(
            "deletion plan has {} entries for {} edges",
            plan.delete_prob.len(),
            g.n_edges()
        )));
    }
    let rng = CounterRng::new(seed, view.index(), Stream::EdgeDeletion);
    Ok(g
        .adjacency()
        .filter_edges(|id| !rng.bernoulli(id as u64, plan.delete_prob[id])))
}

// ---------------------------------------------------------------------------
// Views

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FeatureMasking {
    Adaptive { method: CorrelationMethod, p_f: f64 },
    Uniform { keep: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_mask: Option<FeatureMasking>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<EdgeScheme>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default)]
    pub view1: ViewConfig,
    #[serde(default)]
    pub view2: ViewConfig,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for view in [&self.view1, &self.view2] {
            match &view.feature_mask {
                Some(FeatureMasking::Adaptive { p_f, .. }) => check_prob("p_f", *p_f)?,
                Some(FeatureMasking::Uniform { keep }) => check_prob("keep", *keep)?,
                None => {}
            }
            if let Some(scheme) = &view.edges {
                scheme.validate()?;
            }
        }
        Ok(())
    }

    pub fn view(&self, view: ViewId) -> &ViewConfig {
        match view {
            ViewId::One => &self.view1,
            ViewId::Two => &self.view2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub view: ViewId,
    pub feature_scheme: Option<String>,
    pub edge_scheme: Option<EdgeScheme>,
    pub kept_features: usize,
    pub kept_edges: usize,
    pub original_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphView {
    pub adjacency: Adjacency,
    pub features: Array2<f64>,
    /// Sampled feature mask (all ones when masking is disabled).
    pub mask: Vec<u8>,
    pub provenance: Provenance,
}

/// Plans for one view, computed once per graph and reused across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedView {
    pub view: ViewId,
    pub feature_plan: Option<FeatureMaskPlan>,
    pub edge_plan: Option<EdgeDeletionPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub views: [PreparedView; 2],
}

fn prepare_view(g: &Graph, cfg: &ViewConfig, view: ViewId) -> Result<PreparedView> {
    let feature_plan = match &cfg.feature_mask {
        Some(FeatureMasking::Adaptive { method, p_f }) => {
            let report = feature_correlation_report(g, *method)?;
            Some(feature_mask_plan(&report, *p_f)?)
        }
        Some(FeatureMasking::Uniform { keep }) => {
            Some(uniform_feature_mask_plan(g.n_features(), *keep)?)
        }
        None => None,
    };
    let edge_plan = cfg
        .edges
        .as_ref()
        .map(|scheme| edge_plan(g, scheme, view))
        .transpose()?;
    if let Some(plan) = &edge_plan {
        for w in &plan.warnings {
            log::warn!("view {}: {w}", view.index());
        }
    }
    Ok(PreparedView {
        view,
        feature_plan,
        edge_plan,
    })
}

impl AugmentationPlan {
    pub fn prepare(g: &Graph, cfg: &AugmentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            views: [
                prepare_view(g, &cfg.view1, ViewId::One)?,
                prepare_view(g, &cfg.view2, ViewId::Two)?,
            ],
        })
    }

    pub fn sample(&self, g: &Graph, seed: u64) -> Result<(GraphView, GraphView)> {
        let [a, b] = &self.views;
        Ok((a.sample(g, seed)?, b.sample(g, seed)?))
    }

    /// Uniform control with the same mean keep and delete rates per view.
    pub fn uniform_counterpart(&self) -> AugmentConfig {
        let convert = |v: &PreparedView| ViewConfig {
            feature_mask: v
                .feature_plan
                .as_ref()
                .map(|p| FeatureMasking::Uniform { keep: p.mean_keep() }),
            edges: v
                .edge_plan
                .as_ref()
                .map(|p| EdgeScheme::Uniform { p: p.mean_delete() }),
        };
        AugmentConfig {
            view1: convert(&self.views[0]),
            view2: convert(&self.views[1]),
        }
    }
}

impl PreparedView {
    pub fn sample(&self, g: &Graph, seed: u64) -> Result<GraphView> {
        let (mask, features) = match &self.feature_plan {
            Some(plan) => {
                let mask = sample_feature_mask(plan, seed, self.view);
                let x = apply_feature_mask(g.features(), &mask)?;
                (mask, x)
            }
            None => (vec![1; g.n_features()], g.features().clone()),
        };
        let adjacency = match &self.edge_plan {
            Some(plan) => sample_edge_deletion(g, plan, seed, self.view)?,
            None => g.adjacency().clone(),
        };
        let provenance = Provenance {
            seed,
            view: self.view,
            feature_scheme: self.feature_plan.as_ref().map(|p| match p.method {
                Some(m) => format!("adaptive-{m}"),
                None => "uniform".to_string(),
            }),
            edge_scheme: self.edge_plan.as_ref().map(|p| p.scheme.clone()),
            kept_features: mask.iter().map(|&m| m as usize).sum(),
            kept_edges: adjacency.n_edges(),
            original_edges: g.n_edges(),
        };
        Ok(GraphView {
            adjacency,
            features,
            mask,
            provenance,
        })
    }
}

pub fn make_views(g: &Graph, cfg: &AugmentConfig, seed: u64) -> Result<(GraphView, GraphView)> {
    AugmentationPlan::prepare(g, cfg)?.sample(g, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::graph_from;
    use crate::graph::EdgeGroupCounts;
    use ndarray::array;
    use proptest::prelude::*;

    fn report(p: &[f64]) -> CorrelationReport {
        CorrelationReport {
            method: CorrelationMethod::Pearson,
            r: vec![0.0; p.len()],
            p_uncorr: p.to_vec(),
            degenerate: vec![false; p.len()],
            n_samples: 10,
        }
    }

    fn triangle(s: [u8; 3]) -> Graph {
        graph_from(3, &[(0, 1), (1, 2), (0, 2)], &s)
    }

    #[test]
    fn mask_plan_arithmetic() {
        let plan = feature_mask_plan(&report(&[1.0, 0.5]), 0.6).unwrap();
        assert!((plan.keep_prob[0] - 0.4).abs() < 1e-15);
        assert!((plan.keep_prob[1] - 0.2).abs() < 1e-15);
        let all = feature_mask_plan(&report(&[1.0, 0.5, 0.1]), 1.0).unwrap();
        assert!(all.keep_prob.iter().all(|&k| k == 0.0));
        let corr = feature_mask_plan(&report(&[0.0]), 0.1).unwrap();
        assert_eq!(corr.keep_prob, vec![0.0]);
        assert!(feature_mask_plan(&report(&[1.0]), 1.2).is_err());
    }

    #[test]
    fn mask_sampling_boundaries() {
        let ones = FeatureMaskPlan {
            keep_prob: vec![1.0; 9],
            base_mask_prob: 0.0,
            method: None,
        };
        assert_eq!(sample_feature_mask(&ones, 3, ViewId::One), vec![1; 9]);
        let zeros = FeatureMaskPlan {
            keep_prob: vec![0.0; 9],
            ..ones
        };
        assert_eq!(sample_feature_mask(&zeros, 3, ViewId::Two), vec![0; 9]);
    }

    #[test]
    fn mask_application() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(apply_feature_mask(&x, &[1, 1]).unwrap(), x);
        assert_eq!(apply_feature_mask(&x, &[0, 0]).unwrap(), Array2::<f64>::zeros((2, 2)));
        assert_eq!(apply_feature_mask(&x, &[1, 0]).unwrap(), array![[1.0, 0.0], [3.0, 0.0]]);
        assert!(apply_feature_mask(&x, &[1]).is_err());
    }

    #[test]
    fn dyadic_balanced_graph() {
        // square 0-1-2-3 with s = [0,0,1,1]: two same, two cross edges
        let g = graph_from(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[0, 0, 1, 1]);
        let plan = edge_probs_dyadic(&g, 0.7, 1.0).unwrap();
        for &p in &plan.pre_clamp {
            assert!((p - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn parity_example_from_counts() {
        // Build a graph with |E_11|=100, |E_00|=50, |E_01|=|E_10|=10 directed
        // instances: 50 undirected 1-1 edges, 25 0-0 edges, 10 cross edges.
        let mut pairs = Vec::new();
        // nodes 0..30 have s=0, 30..60 have s=1
        let zeros: Vec<usize> = (0..30).collect();
        let ones: Vec<usize> = (30..60).collect();
        let mut push_k = |grp: &[usize], other: &[usize], k: usize| {
            let mut c = 0;
            'o: for &a in grp {
                for &b in other {
                    if a < b && c < k {
                        pairs.push((a, b));
                        c += 1;
                    }
                    if c == k {
                        break 'o;
                    }
                }
            }
        };
        push_k(&zeros, &zeros, 25);
        push_k(&ones, &ones, 50);
        push_k(&zeros, &ones, 10);
        let mut s = vec![0u8; 30];
        s.extend(vec![1u8; 30]);
        let g = graph_from(60, &pairs, &s);
        let c: EdgeGroupCounts = edge_group_counts(&g);
        assert_eq!((c.pair(1, 1), c.pair(0, 0), c.pair(0, 1)), (100, 50, 10));
        let plan = edge_probs_parity(&g, 0.8, (1.0, 1.0, 1.0)).unwrap();
        for (&e, &p) in g.edges().iter().zip(&plan.pre_clamp) {
            let want = match parity_group(&g, e) {
                ParityGroup::Cross => 0.2,
                ParityGroup::Zero => 0.84,
                ParityGroup::One => 0.92,
            };
            assert!((p - want).abs() < 1e-12, "{e:?} {p}");
        }
        // caps: cross (smallest) -> p_max1, zeros -> p_max2, ones -> p_max3
        let capped = edge_probs_parity(&g, 0.8, (0.1, 0.5, 0.85)).unwrap();
        for (&e, &p) in g.edges().iter().zip(&capped.delete_prob) {
            let want = match parity_group(&g, e) {
                ParityGroup::Cross => 0.2,
                ParityGroup::Zero => 0.5,
                ParityGroup::One => 0.85,
            };
            assert!((p - want).abs() < 1e-12);
        }
        assert!(edge_probs_parity(&g, 0.8, (0.9, 0.5, 0.85)).is_err());
    }

    #[test]
    fn counterfactual_extremes() {
        let g = graph_from(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[0, 0, 1, 1]);
        let params = CounterfactualParams {
            p1: 1.0,
            p2: 0.0,
            p3: 0.0,
            p4: 1.0,
            reading: CounterfactualReading::Retention,
        };
        let v1 = edge_probs_counterfactual(&g, params, ViewId::One).unwrap();
        let a1 = sample_edge_deletion(&g, &v1, 5, ViewId::One).unwrap();
        assert!(a1.edges().iter().all(|&e| g.same_group(e)));
        assert_eq!(a1.n_edges(), 2);
        let v2 = edge_probs_counterfactual(&g, params, ViewId::Two).unwrap();
        let a2 = sample_edge_deletion(&g, &v2, 5, ViewId::Two).unwrap();
        assert!(a2.edges().iter().all(|&e| !g.same_group(e)));
        assert_eq!(a2.n_edges(), 2);
    }

    #[test]
    fn counterfactual_pokec_view1() {
        let g = graph_from(4, &[(0, 1), (1, 2)], &[0, 0, 1, 1]);
        let params = CounterfactualParams {
            p1: 0.75,
            p2: 0.15,
            p3: 0.30,
            p4: 0.60,
            reading: CounterfactualReading::Retention,
        };
        let plan = edge_probs_counterfactual(&g, params, ViewId::One).unwrap();
        assert!((plan.delete_prob[0] - 0.25).abs() < 1e-15);
        assert!((plan.delete_prob[1] - 0.85).abs() < 1e-15);
        let deletion = CounterfactualParams {
            reading: CounterfactualReading::Deletion,
            ..params
        };
        let plan = edge_probs_counterfactual(&g, deletion, ViewId::One).unwrap();
        assert_eq!(plan.delete_prob, vec![0.75, 0.15]);
        let bad = CounterfactualParams { p1: 0.1, ..params };
        assert!(edge_probs_counterfactual(&g, bad, ViewId::One).is_err());
    }

    #[test]
    fn triangle_cases() {
        let mono = edge_probs_triangle(&triangle([0, 0, 0]), 1.4, 0.6, 0.2).unwrap();
        for &p in &mono.delete_prob {
            assert!((p - 0.84).abs() < 1e-12);
        }
        let g = triangle([0, 0, 1]);
        let mixed = edge_probs_triangle(&g, 1.4, 0.6, 0.2).unwrap();
        for (&(a, b), &p) in g.edges().iter().zip(&mixed.delete_prob) {
            let want = if (a, b) == (0, 1) { 0.6 } else { 0.2 };
            assert_eq!(p, want);
        }
        let clamped = edge_probs_triangle(&triangle([1, 1, 1]), 2.0, 0.7, 0.2).unwrap();
        assert!(clamped.delete_prob.iter().all(|&p| p == 1.0));
        assert!(edge_probs_triangle(&g, 1.0, 0.6, 0.2).is_err());
        assert!(edge_probs_triangle(&g, 1.4, 0.2, 0.6).is_err());
    }

    #[test]
    fn degree_factor_example() {
        // star with centre degree 10 plus a pendant path so that
        // d_max = 10, and check one edge whose low endpoint has degree 2.
        // Use the formula directly on a star + chain graph.
        let mut pairs: Vec<(usize, usize)> = (1..=10).map(|v| (0, v)).collect();
        pairs.push((1, 11));
        let g = graph_from(12, &pairs, &[0; 12]);
        let stats = degree_stats(g.adjacency());
        assert_eq!(stats.d_max, 10);
        let plan = edge_probs_degree(&g, 0.85, 0.1, 0.9).unwrap();
        let id = g.adjacency().edge_id(0, 1).unwrap();
        let factor = (10.0 - stats.d_mean) / (10.0 - 2.0);
        assert!((plan.delete_prob[id] - (factor * 0.85).min(0.9)).abs() < 1e-15);
    }

    #[test]
    fn degree_arithmetic_matches_formula() {
        // the worked example: d_max=10, d_mean=4, low degree 2
        let factor: f64 = (10.0 - 4.0) / (10.0 - 2.0);
        assert!(((factor * 0.85).min(0.9) - 0.6375).abs() < 1e-15);
    }

    #[test]
    fn degree_singularities() {
        // K4 minus nothing: regular, factor 1
        let k4 = graph_from(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], &[0, 0, 1, 1]);
        let plan = edge_probs_degree(&k4, 0.85, 0.15, 0.9).unwrap();
        for (&e, &p) in k4.edges().iter().zip(&plan.delete_prob) {
            assert_eq!(p, if k4.same_group(e) { 0.85 } else { 0.15 });
        }
        // two hubs of max degree joined by an edge, plus leaves
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)];
        let g = graph_from(6, &pairs, &[0; 6]);
        let plan = edge_probs_degree(&g, 0.5, 0.1, 0.77).unwrap();
        let id = g.adjacency().edge_id(0, 1).unwrap();
        assert_eq!(plan.delete_prob[id], 0.77);
    }

    #[test]
    fn sampling_extremes() {
        let g = triangle([0, 1, 0]);
        let keep_all = edge_probs_uniform(&g, 0.0).unwrap();
        assert_eq!(&sample_edge_deletion(&g, &keep_all, 1, ViewId::One).unwrap(), g.adjacency());
        let drop_all = edge_probs_uniform(&g, 1.0).unwrap();
        assert_eq!(sample_edge_deletion(&g, &drop_all, 1, ViewId::One).unwrap().n_edges(), 0);
        let other = graph_from(4, &[(0, 1)], &[0; 4]);
        assert!(sample_edge_deletion(&other, &drop_all, 1, ViewId::One).is_err());
    }

    #[test]
    fn disabled_config_returns_input() {
        let g = triangle([0, 1, 0]);
        let (a, b) = make_views(&g, &AugmentConfig::default(), 4).unwrap();
        for v in [a, b] {
            assert_eq!(&v.adjacency, g.adjacency());
            assert_eq!(&v.features, g.features());
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (4usize..25).prop_flat_map(|n| {
            (
                prop::collection::vec((0..n, 0..n), 1..(n * 3)),
                prop::collection::vec(0u8..2, n),
            )
                .prop_map(move |(pairs, s)| graph_from(n, &pairs, &s))
        })
    }

    fn arb_scheme() -> impl Strategy<Value = EdgeScheme> {
        let p = || 0.0f64..=1.0;
        prop_oneof![
            (p(), p()).prop_map(|(p_kappa, p_max)| EdgeScheme::Dyadic { p_kappa, p_max }),
            (p(), p(), p(), p()).prop_map(|(k, a, b, c)| {
                let mut caps = [a, b, c];
                caps.sort_by(f64::total_cmp);
                EdgeScheme::Parity { p_kappa: k, p_max1: caps[0], p_max2: caps[1], p_max3: caps[2] }
            }),
            (0.0f64..0.5, 0.5f64..=1.0, 0.0f64..0.5, 0.5f64..=1.0).prop_map(|(lo1, hi1, lo2, hi2)| {
                EdgeScheme::Counterfactual { p1: hi1, p2: lo1, p3: lo2, p4: hi2, reading: CounterfactualReading::Retention }
            }),
            (1.01f64..3.0, 0.5f64..=1.0, 0.0f64..0.5)
                .prop_map(|(alpha, p_b1, p_b2)| EdgeScheme::Triangle { alpha, p_b1, p_b2 }),
            (0.5f64..=1.0, 0.0f64..0.5, p())
                .prop_map(|(p_b1, p_b2, p_max)| EdgeScheme::Degree { p_b1, p_b2, p_max }),
        ]
    }

    proptest! {
        #[test]
        fn probabilities_in_unit_interval(g in arb_graph(), scheme in arb_scheme()) {
            for view in [ViewId::One, ViewId::Two] {
                let plan = edge_plan(&g, &scheme, view).unwrap();
                prop_assert_eq!(plan.delete_prob.len(), g.n_edges());
                for &p in &plan.delete_prob {
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
        }

        #[test]
        fn orientation_consistency(g in arb_graph(), scheme in arb_scheme()) {
            // reversing node ids maps each edge (a, b) to (n-1-b, n-1-a)
            let n = g.n_nodes();
            let perm: Vec<usize> = (0..n).map(|v| n - 1 - v).collect();
            let h = g.permuted(&perm).unwrap();
            let pg = edge_plan(&g, &scheme, ViewId::One).unwrap();
            let ph = edge_plan(&h, &scheme, ViewId::One).unwrap();
            for (id, &(a, b)) in g.edges().iter().enumerate() {
                let jd = h.adjacency().edge_id(perm[b], perm[a]).unwrap();
                prop_assert_eq!(pg.delete_prob[id], ph.delete_prob[jd]);
            }
        }

        #[test]
        fn dyadic_balance(g in arb_graph(), k in 0.0f64..=1.0) {
            let counts = edge_group_counts(&g);
            prop_assume!(counts.same > 0 && counts.diff > 0);
            let plan = edge_probs_dyadic(&g, k, 1.0).unwrap();
            let mut kept_same = 0.0;
            let mut kept_diff = 0.0;
            for (&e, &p) in g.edges().iter().zip(&plan.pre_clamp) {
                if g.same_group(e) { kept_same += 2.0 * (1.0 - p) } else { kept_diff += 2.0 * (1.0 - p) }
            }
            let target = counts.diff as f64 * k;
            prop_assert!((kept_same - target).abs() <= 1e-9 * target.max(1.0));
            prop_assert!((kept_diff - target).abs() <= 1e-9 * target.max(1.0));
        }

        #[test]
        fn mask_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, pf in 0.0f64..=1.0) {
            let plan = feature_mask_plan(&report(&[a, b]), pf).unwrap();
            if a <= b {
                prop_assert!(plan.keep_prob[0] <= plan.keep_prob[1]);
            }
            prop_assert!(plan.keep_prob.iter().all(|&k| k <= 1.0 - pf + 1e-15));
        }

        #[test]
        fn degree_monotone_in_low_endpoint(g in arb_graph()) {
            let stats = degree_stats(g.adjacency());
            prop_assume!(stats.d_max as f64 != stats.d_mean);
            let plan = edge_probs_degree(&g, 0.6, 0.3, 1.0).unwrap();
            let low = |(a, b): (usize, usize)| stats.degrees[a].min(stats.degrees[b]);
            for (i, &e) in g.edges().iter().enumerate() {
                for (j, &f) in g.edges().iter().enumerate() {
                    if g.same_group(e) == g.same_group(f) && low(e) < low(f) {
                        prop_assert!(plan.pre_clamp[i] <= plan.pre_clamp[j]);
                    }
                }
            }
        }
    }
}
