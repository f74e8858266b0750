//! Tuned augmentation hyperparameters for the Pokec-z and Pokec-n
//! benchmarks, one entry per method and view.

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, CounterfactualReading, EdgeScheme, FeatureMasking, ViewConfig};
use crate::error::{Error, Result};
use crate::stats::CorrelationMethod::{self, Pearson, Spearman};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dataset {
    PokecZ,
    PokecN,
}

impl Dataset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "pokec-z" => Ok(Dataset::PokecZ),
            "pokec-n" => Ok(Dataset::PokecN),
            other => Err(Error::Config(format!(
                "unknown preset table `{other}` (expected pokec-z or pokec-n)"
            ))),
        }
    }
}

/// Method names in table order.
pub const METHODS: [&str; 11] = [
    "FM", "D", "par", "C", "T", "deg", "FM+D", "FM+par", "FM+C", "FM+T", "FM+deg",
];

fn fm(method: CorrelationMethod, p_f: f64) -> Option<FeatureMasking> {
    Some(FeatureMasking::Adaptive { method, p_f })
}

fn pair(a: ViewConfig, b: ViewConfig) -> AugmentConfig {
    AugmentConfig { view1: a, view2: b }
}

fn view(feature_mask: Option<FeatureMasking>, edges: Option<EdgeScheme>) -> ViewConfig {
    ViewConfig { feature_mask, edges }
}

fn same(feature: [Option<FeatureMasking>; 2], edges: Option<EdgeScheme>) -> AugmentConfig {
    let [a, b] = feature;
    pair(view(a, edges.clone()), view(b, edges))
}

fn dyadic(p_kappa: f64, p_max: f64) -> Option<EdgeScheme> {
    Some(EdgeScheme::Dyadic { p_kappa, p_max })
}

fn parity(p_kappa: f64, p_max1: f64, p_max2: f64, p_max3: f64) -> Option<EdgeScheme> {
    Some(EdgeScheme::Parity { p_kappa, p_max1, p_max2, p_max3 })
}

fn counterfactual(p1: f64, p2: f64, p3: f64, p4: f64) -> Option<EdgeScheme> {
    Some(EdgeScheme::Counterfactual {
        p1,
        p2,
        p3,
        p4,
        reading: CounterfactualReading::Retention,
    })
}

fn triangle(alpha: f64, p_b1: f64, p_b2: f64) -> Option<EdgeScheme> {
    Some(EdgeScheme::Triangle { alpha, p_b1, p_b2 })
}

fn degree(p_b1: f64, p_b2: f64, p_max: f64) -> Option<EdgeScheme> {
    Some(EdgeScheme::Degree { p_b1, p_b2, p_max })
}

/// Augmentation settings for `method` on `dataset`.
pub fn preset(dataset: Dataset, method: &str) -> Result<AugmentConfig> {
    use Dataset::*;
    let none = || [None, None];
    let cfg = match (dataset, method) {
        (PokecZ, "FM") => same([fm(Spearman, 0.6), fm(Spearman, 0.8)], None),
        (PokecN, "FM") => same([fm(Pearson, 0.6), fm(Pearson, 0.4)], None),

        (PokecZ, "D") => same(none(), dyadic(0.85, 0.85)),
        (PokecN, "D") => same(none(), dyadic(0.85, 0.90)),

        (PokecZ, "par") => same(none(), parity(0.80, 0.50, 0.80, 0.85)),
        (PokecN, "par") => same(none(), parity(0.80, 0.50, 0.91, 0.92)),

        // Both views share one scheme; view 1 reads (p1, p2), view 2 (p3, p4).
        (PokecZ, "C") => same(none(), counterfactual(0.75, 0.15, 0.30, 0.60)),
        (PokecN, "C") => same(none(), counterfactual(0.90, 0.10, 0.15, 0.85)),

        (PokecZ, "T") => same(none(), triangle(1.4, 0.60, 0.20)),
        (PokecN, "T") => same(none(), triangle(1.125, 0.85, 0.10)),

        (PokecZ, "deg") => same(none(), degree(0.85, 0.15, 0.90)),
        (PokecN, "deg") => same(none(), degree(0.65, 0.15, 0.90)),

        (PokecZ, "FM+D") => same([fm(Pearson, 0.6), fm(Pearson, 0.4)], dyadic(0.85, 0.85)),
        (PokecN, "FM+D") => same([fm(Pearson, 0.6), fm(Pearson, 0.4)], dyadic(0.80, 0.70)),

        (PokecZ, "FM+par") => same(
            [fm(Spearman, 0.6), fm(Spearman, 0.8)],
            parity(0.85, 0.50, 0.80, 0.90),
        ),
        (PokecN, "FM+par") => same(
            [fm(Spearman, 0.6), fm(Spearman, 0.8)],
            parity(0.85, 0.50, 0.70, 0.75),
        ),

        (PokecZ, "FM+C") => same(
            [fm(Spearman, 0.6), fm(Spearman, 0.8)],
            counterfactual(0.80, 0.20, 0.30, 0.70),
        ),
        (PokecN, "FM+C") => same(
            [fm(Pearson, 0.6), fm(Pearson, 0.4)],
            counterfactual(0.85, 0.15, 0.15, 0.85),
        ),

        (PokecZ | PokecN, "FM+T") => same([fm(Spearman, 0.6), fm(Spearman, 0.8)], triangle(1.4, 0.60, 0.20)),

        (PokecZ, "FM+deg") => same([fm(Pearson, 0.6), fm(Pearson, 0.4)], degree(0.85, 0.20, 0.90)),
        (PokecN, "FM+deg") => same([fm(Pearson, 0.6), fm(Pearson, 0.4)], degree(0.70, 0.10, 0.85)),

        (_, other) => {
            return Err(Error::Config(format!(
                "unknown method `{other}`; expected one of {}",
                METHODS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
