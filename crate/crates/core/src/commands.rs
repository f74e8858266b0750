//! The command-line subcommands. Each writes a versioned JSON report under
//! the configured output directory and returns it for display.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentationPlan, Provenance};
use crate::bench::{render_table, run_bench, uniform_control, BenchRow, UNIFORM_CONTROL};
use crate::config::ExperimentConfig;
use crate::contrastive::{train, TrainReport};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_pipeline, FairnessReport};
use crate::graph::{degree_stats, edge_group_counts, monochromatic_triangle_mask, Graph};
use crate::io::{write_graph, write_text};
use crate::stats::{feature_correlation_report, CorrelationMethod, CorrelationReport};
use crate::verify::{verify_proposition1, VerificationReport};

pub const REPORT_SCHEMA: &str = "fairgcl-report-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub report: T,
}

pub fn write_report<T: Serialize>(path: &Path, command: &str, seed: u64, report: &T) -> Result<()> {
    let env = Envelope {
        schema: REPORT_SCHEMA.to_string(),
        command: command.to_string(),
        seed,
        report,
    };
    let mut body = serde_json::to_string_pretty(&env)?;
    body.push('\n');
    write_text(path, &body)
}

// ---------------------------------------------------------------------------
// stats

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_edges: usize,
    pub same_group_edges: usize,
    pub cross_group_edges: usize,
    /// Nodes with `s = 0` and `s = 1`.
    pub group_sizes: [usize; 2],
    /// Directed edge counts `|E_ab|`, indexed `[a][b]`.
    pub directed_pair_counts: [[usize; 2]; 2],
    pub degree: DegreeSummary,
    pub monochromatic_triangle_edges: usize,
    pub labels_present: bool,
    pub pearson: CorrelationReport,
    pub spearman: CorrelationReport,
}

pub fn graph_stats(g: &Graph) -> Result<StatsReport> {
    let counts = edge_group_counts(g);
    let deg = degree_stats(g.adjacency());
    let ones = g.sensitive().iter().filter(|&&s| s == 1).count();
    Ok(StatsReport {
        n_nodes: g.n_nodes(),
        n_features: g.n_features(),
        n_edges: g.n_edges(),
        same_group_edges: counts.same_undirected(),
        cross_group_edges: counts.diff_undirected(),
        group_sizes: [g.n_nodes() - ones, ones],
        directed_pair_counts: counts.by_pair,
        degree: DegreeSummary {
            min: deg.degrees.iter().copied().min().unwrap_or(0),
            max: deg.d_max,
            mean: deg.d_mean,
        },
        monochromatic_triangle_edges: monochromatic_triangle_mask(g).iter().filter(|&&t| t).count(),
        labels_present: g.labels().is_some(),
        pearson: feature_correlation_report(g, CorrelationMethod::Pearson)?,
        spearman: feature_correlation_report(g, CorrelationMethod::Spearman)?,
    })
}

pub fn render_stats(r: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes            {}", r.n_nodes);
    let _ = writeln!(out, "features         {}", r.n_features);
    let _ = writeln!(out, "edges            {}", r.n_edges);
    let _ = writeln!(out, "same-group edges {}", r.same_group_edges);
    let _ = writeln!(out, "cross-group      {}", r.cross_group_edges);
    let _ = writeln!(out, "s=0 / s=1 nodes  {} / {}", r.group_sizes[0], r.group_sizes[1]);
    let _ = writeln!(
        out,
        "degree           min {} max {} mean {:.3}",
        r.degree.min, r.degree.max, r.degree.mean
    );
    let _ = writeln!(out, "edges in monochromatic triangles {}", r.monochromatic_triangle_edges);
    let _ = writeln!(out, "\nfeature  pearson r   p-value    spearman r  p-value");
    for i in 0..r.n_features {
        let _ = writeln!(
            out,
            "{:>7}  {:>9.4}  {:>9.3e}  {:>10.4}  {:>9.3e}",
            i, r.pearson.r[i], r.pearson.p_uncorr[i], r.spearman.r[i], r.spearman.p_uncorr[i]
        );
    }
    out
}

pub fn cmd_stats(cfg: &ExperimentConfig) -> Result<StatsReport> {
    let g = cfg.load_dataset()?;
    let report = graph_stats(&g)?;
    write_report(&cfg.output.dir.join("stats.json"), "stats", cfg.seed, &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// augment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSummary {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub feature_keep_probs: Option<Vec<f64>>,
    pub mean_keep: Option<f64>,
    pub mean_delete: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub views: Vec<ViewSummary>,
}

pub fn cmd_augment(cfg: &ExperimentConfig) -> Result<AugmentReport> {
    let g = cfg.load_dataset()?;
    let plan = AugmentationPlan::prepare(&g, &cfg.augment)?;
    let mut views = Vec::new();
    for prepared in &plan.views {
        let view = prepared.sample(&g, cfg.seed)?;
        let dir = cfg.output.dir.join(format!("view{}", prepared.view.index()));
        let vg = Graph::new(
            view.adjacency,
            view.features,
            g.sensitive().to_vec(),
            g.labels().map(<[u8]>::to_vec),
        )?;
        write_graph(&dir, &vg)?;
        views.push(ViewSummary {
            dir,
            provenance: view.provenance,
            feature_keep_probs: prepared.feature_plan.as_ref().map(|p| p.keep_prob.clone()),
            mean_keep: prepared.feature_plan.as_ref().map(|p| p.mean_keep()),
            mean_delete: prepared.edge_plan.as_ref().map(|p| p.mean_delete()),
            warnings: prepared
                .edge_plan
                .as_ref()
                .map(|p| p.warnings.clone())
                .unwrap_or_default(),
        });
    }
    let report = AugmentReport { views };
    write_report(&cfg.output.dir.join("provenance.json"), "augment", cfg.seed, &report)?;
    Ok(report)
}

pub fn render_augment(r: &AugmentReport) -> String {
    let mut out = String::new();
    for v in &r.views {
        let p = &v.provenance;
        let _ = writeln!(
            out,
            "view {}: features kept {} | edges kept {}/{} | scheme {} | written to {}",
            p.view.index(),
            p.kept_features,
            p.kept_edges,
            p.original_edges,
            p.edge_scheme.as_ref().map_or("none", |s| s.name()),
            v.dir.display()
        );
    }
    out
}

// ---------------------------------------------------------------------------
// train / eval

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let g = cfg.load_dataset()?;
    let (params, mut report) = train(&g, &cfg.train, &cfg.augment)?;
    let ckpt = cfg.output.checkpoint_path();
    params.save(&ckpt)?;
    report.checkpoint = Some(ckpt.display().to_string());
    write_report(&cfg.output.dir.join("train.json"), "train", cfg.seed, &report)?;
    Ok(report)
}

pub fn render_train(r: &TrainReport) -> String {
    let first = r.loss_per_epoch.first().copied().unwrap_or(f64::NAN);
    let last = r.loss_per_epoch.last().copied().unwrap_or(f64::NAN);
    format!(
        "epochs {} | loss {:.6} -> {:.6} | degenerate rows {} | {:.2}s | checkpoint {}\n",
        r.loss_per_epoch.len(),
        first,
        last,
        r.degenerate_rows,
        r.wall_time_secs,
        r.checkpoint.as_deref().unwrap_or("-")
    )
}

pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<FairnessReport> {
    let g = cfg.load_dataset()?;
    let path = checkpoint.map_or_else(|| cfg.output.checkpoint_path(), Path::to_path_buf);
    let params = EncoderParams::load(&path)?;
    let report = evaluate_pipeline(&g, &params, &cfg.eval, cfg.seed)?;
    write_report(&cfg.output.dir.join("eval.json"), "eval", cfg.seed, &report)?;
    Ok(report)
}

pub fn render_eval(r: &FairnessReport) -> String {
    let mut out = format!(
        "{:>16}  {:>16}  {:>16}\n{:>16}  {:>16}  {:>16}\n",
        "accuracy %",
        "ΔSP %",
        "ΔEO %",
        r.accuracy.to_string(),
        r.delta_sp.to_string(),
        r.delta_eo.to_string()
    );
    for f in &r.failed_splits {
        let _ = writeln!(out, "split with seed {} failed: {}", f.seed, f.error);
    }
    out
}

// ---------------------------------------------------------------------------
// verify-prop1

pub fn cmd_verify_prop1(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let g = cfg.load_dataset()?;
    let corr = feature_correlation_report(&g, cfg.verify.method)?;
    let report = verify_proposition1(&corr, cfg.verify.p_f, cfg.verify.trials, cfg.seed)?;
    write_report(&cfg.output.dir.join("verify.json"), "verify-prop1", cfg.seed, &report)?;
    Ok(report)
}

pub fn render_verify(r: &VerificationReport) -> String {
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    format!(
        "E[rho] adaptive {:.6} (MC {:.6} ± {:.6})\n\
         E[rho] uniform  {:.6} (MC {:.6} ± {:.6})\n\
         adaptive <= uniform: {}\n\
         majorization:        {}\n\
         monotone pairing:    {}\n\
         trials {}\n",
        r.analytic_adaptive,
        r.mc_adaptive.mean,
        r.mc_adaptive.stderr,
        r.analytic_uniform,
        r.mc_uniform.mean,
        r.mc_uniform.stderr,
        verdict(r.inequality_holds),
        verdict(r.majorization_holds),
        verdict(r.monotone_pairing),
        r.trials
    )
}

// ---------------------------------------------------------------------------
// bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Settings in the order `bench.schemes` lists them, with the uniform
/// control (if requested) built from all the other settings.
pub fn bench_plan(cfg: &ExperimentConfig, g: &Graph) -> Result<Vec<(String, crate::augment::AugmentConfig)>> {
    let (settings, control) = cfg.bench_settings()?;
    if cfg.bench.schemes.is_empty() {
        return Err(Error::Config("bench.schemes is empty".into()));
    }
    let control_cfg = if control {
        let adaptive: Vec<_> = settings.iter().map(|(_, a)| a.clone()).collect();
        Some(uniform_control(g, &adaptive)?)
    } else {
        None
    };
    let mut rest = settings.into_iter();
    let mut out = Vec::new();
    for name in &cfg.bench.schemes {
        if name == UNIFORM_CONTROL {
            out.push((name.clone(), control_cfg.clone().expect("control requested")));
        } else {
            out.push(rest.next().expect("one setting per non-control name"));
        }
    }
    Ok(out)
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let g = cfg.load_dataset()?;
    let plan = bench_plan(cfg, &g)?;
    let report = BenchReport {
        rows: run_bench(&g, &cfg.train, &cfg.eval, &plan, cfg.seed),
    };
    write_report(&cfg.output.dir.join("bench.json"), "bench", cfg.seed, &report)?;
    write_text(&cfg.output.dir.join("bench.txt"), &render_table(&report.rows))?;
    Ok(report)
}

pub fn render_bench(r: &BenchReport) -> String {
    render_table(&r.rows)
}
