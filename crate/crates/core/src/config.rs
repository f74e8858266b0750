//! Experiment configuration, read from a TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::bench::UNIFORM_CONTROL;
use crate::contrastive::TrainConfig;
use crate::error::{Error, Result};
use crate::evaluate::EvalConfig;
use crate::graph::Graph;
use crate::io::{load_graph, GraphFiles};
use crate::presets::{self, Dataset};
use crate::sbm::{generate_sbm, SbmSpec};
use crate::stats::CorrelationMethod;
use crate::verify::MIN_TRIALS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetConfig {
    /// Edge list, feature CSV, and 0/1 vectors on disk. Relative paths are
    /// resolved against the config file's directory.
    Files {
        edges: PathBuf,
        features: PathBuf,
        sensitive: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    /// Two-block stochastic block model generated from the experiment seed.
    Sbm(SbmSpec),
    /// The 400-node SBM benchmark with default settings.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Defaults to `<dir>/checkpoint.json`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            checkpoint: None,
        }
    }
}

impl OutputConfig {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.dir.join("checkpoint.json"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_method")]
    pub method: CorrelationMethod,
    #[serde(default = "default_p_f")]
    pub p_f: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_method() -> CorrelationMethod {
    CorrelationMethod::Pearson
}

fn default_p_f() -> f64 {
    0.6
}

fn default_trials() -> usize {
    100_000
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            p_f: default_p_f(),
            trials: default_trials(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Table the named methods are drawn from: `pokec-z` or `pokec-n`.
    #[serde(default)]
    pub preset: Option<String>,
    /// Rows to run, in order. `uniform-control` is matched to every other
    /// listed setting.
    #[serde(default)]
    pub schemes: Vec<String>,
    /// Extra named settings; these shadow preset names.
    #[serde(default)]
    pub custom: BTreeMap<String, AugmentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetConfig::Sbm(spec) = &self.dataset {
            spec.validate()?;
        }
        self.augment.validate()?;
        self.train.validate()?;
        if self.eval.n_splits == 0 {
            return Err(Error::Config("eval.n_splits must be at least 1".into()));
        }
        if !(self.eval.train_fraction > 0.0 && self.eval.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "eval.train_fraction must lie in (0, 1), got {}",
                self.eval.train_fraction
            )));
        }
        if !(self.eval.l2 >= 0.0 && self.eval.l2.is_finite()) {
            return Err(Error::Config(format!("eval.l2 must be non-negative, got {}", self.eval.l2)));
        }
        if !(0.0..=1.0).contains(&self.verify.p_f) {
            return Err(Error::Config(format!("verify.p_f must lie in [0, 1], got {}", self.verify.p_f)));
        }
        if self.verify.trials < MIN_TRIALS {
            return Err(Error::Config(format!(
                "verify.trials must be at least {MIN_TRIALS}, got {}",
                self.verify.trials
            )));
        }
        for aug in self.bench.custom.values() {
            aug.validate()?;
        }
        if !self.bench.schemes.is_empty() {
            self.bench_settings()?;
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_dataset(&self) -> Result<Graph> {
        match &self.dataset {
            DatasetConfig::Files {
                edges,
                features,
                sensitive,
                labels,
            } => {
                let files = GraphFiles {
                    edges: self.resolve(edges),
                    features: self.resolve(features),
                    sensitive: self.resolve(sensitive),
                    labels: labels.as_deref().map(|p| self.resolve(p)),
                };
                Ok(load_graph(&files)?.0)
            }
            DatasetConfig::Sbm(spec) => generate_sbm(spec, self.seed),
            DatasetConfig::Desk => generate_sbm(&SbmSpec::desk_benchmark(), self.seed),
        }
    }

    /// Named adaptive settings listed in `bench.schemes`, in order, and
    /// whether a uniform control was requested.
    pub fn bench_settings(&self) -> Result<(Vec<(String, AugmentConfig)>, bool)> {
        let table = self.bench.preset.as_deref().map(Dataset::parse).transpose()?;
        let mut out = Vec::new();
        let mut control = false;
        for name in &self.bench.schemes {
            if name == UNIFORM_CONTROL {
                control = true;
                continue;
            }
            let cfg = match (self.bench.custom.get(name), table) {
                (Some(c), _) => c.clone(),
                (None, Some(t)) => presets::preset(t, name)?,
                (None, None) => {
                    return Err(Error::Config(format!(
                        "bench scheme `{name}` is neither in [bench.custom] nor resolvable without bench.preset"
                    )))
                }
            };
            out.push((name.clone(), cfg));
        }
        if control && out.is_empty() {
            return Err(Error::Config(
                "uniform-control needs at least one other scheme to match".into(),
            ));
        }
        Ok((out, control))
    }
}
