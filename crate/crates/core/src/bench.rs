//! Train-and-evaluate runs over several augmentation settings, including a
//! uniform control matched to their mean corruption rates.

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, AugmentationPlan, EdgeScheme, FeatureMasking, ViewConfig};
use crate::contrastive::{train, TrainConfig};
use crate::error::Result;
use crate::evaluate::{evaluate_pipeline, EvalConfig, FairnessReport, MeanStd};
use crate::graph::Graph;

pub const UNIFORM_CONTROL: &str = "uniform-control";

/// Mean corruption rates of one view of one prepared plan.
#[derive(Debug, Clone, Copy, Default)]
struct Rates {
    keep_sum: f64,
    keep_n: usize,
    delete_sum: f64,
    delete_n: usize,
}

/// Uniform augmentation whose per-view feature keep rate and edge deletion
/// rate are the averages of the adaptive plans' mean rates on `g`. A view
/// gets a masking (or deletion) component only if some adaptive setting has
/// one for that view.
pub fn uniform_control(g: &Graph, adaptive: &[AugmentConfig]) -> Result<AugmentConfig> {
    let mut rates = [Rates::default(); 2];
    for cfg in adaptive {
        let plan = AugmentationPlan::prepare(g, cfg)?;
        for (r, v) in rates.iter_mut().zip(&plan.views) {
            if let Some(p) = &v.feature_plan {
                r.keep_sum += p.mean_keep();
                r.keep_n += 1;
            }
            if let Some(p) = &v.edge_plan {
                r.delete_sum += p.mean_delete();
                r.delete_n += 1;
            }
        }
    }
    let to_view = |r: &Rates| ViewConfig {
        feature_mask: (r.keep_n > 0).then(|| FeatureMasking::Uniform {
            keep: r.keep_sum / r.keep_n as f64,
        }),
        edges: (r.delete_n > 0).then(|| EdgeScheme::Uniform {
            p: r.delete_sum / r.delete_n as f64,
        }),
    };
    Ok(AugmentConfig {
        view1: to_view(&rates[0]),
        view2: to_view(&rates[1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub augment: AugmentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<FairnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Trains on `g` with `augment` and evaluates the frozen encoder.
pub fn run_one(
    g: &Graph,
    train_cfg: &TrainConfig,
    eval_cfg: &EvalConfig,
    augment: &AugmentConfig,
    seed: u64,
) -> Result<FairnessReport> {
    let (params, _) = train(g, train_cfg, augment)?;
    evaluate_pipeline(g, &params, eval_cfg, seed)
}

/// One row per named setting. A failing setting records its error and the
/// remaining settings still run.
pub fn run_bench(
    g: &Graph,
    train_cfg: &TrainConfig,
    eval_cfg: &EvalConfig,
    schemes: &[(String, AugmentConfig)],
    seed: u64,
) -> Vec<BenchRow> {
    schemes
        .iter()
        .map(|(name, augment)| {
            log::info!("bench: running {name}");
            match run_one(g, train_cfg, eval_cfg, augment, seed) {
                Ok(report) => BenchRow {
                    name: name.clone(),
                    augment: augment.clone(),
                    report: Some(report),
                    error: None,
                },
                Err(e) => {
                    log::warn!("bench: {name} failed: {e}");
                    BenchRow {
                        name: name.clone(),
                        augment: augment.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// Fixed-width text table with mean ± std for each metric.
pub fn render_table(rows: &[BenchRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>16}  {:>16}  {:>16}\n",
        "method", "accuracy %", "ΔSP %", "ΔEO %"
    );
    let cell = |m: &MeanStd| m.to_string();
    for r in rows {
        match &r.report {
            Some(rep) => out.push_str(&format!(
                "{:<width$}  {:>16}  {:>16}  {:>16}\n",
                r.name,
                cell(&rep.accuracy),
                cell(&rep.delta_sp),
                cell(&rep.delta_eo)
            )),
            None => out.push_str(&format!(
                "{:<width$}  failed: {}\n",
                r.name,
                r.error.as_deref().unwrap_or("unknown error")
            )),
        }
    }
    out
}
