//! Run configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Later keys override
//! earlier ones, and `--set key=value` flags are applied after the file.
//! [`RunConfig::to_text`] writes every key, so a saved config reproduces the
//! run exactly.

use std::fmt::Write as _;
use std::path::PathBuf;

use cdimc_core::dataset::{MaskMode, MaskSpec, SyntheticSpec};
use cdimc_core::pipeline::PipelineConfig;
use cdimc_core::pretrain::Reconstruction;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A dataset directory (see [`crate::io`]).
    Dir(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub pipeline: PipelineConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::Synthetic(SyntheticSpec { clusters: 3, n: 300, dims: vec![10, 10], separation: 4.0, seed: 0 }),
            pipeline: PipelineConfig {
                clusters: 3,
                mask: Some(MaskSpec::new(MaskMode::PerViewRemoval, 0.3, 0)),
                ..PipelineConfig::default()
            },
            seeds: vec![0],
            out: PathBuf::from("out"),
        }
    }
}

/// Every key accepted by [`RunConfig::set`], in the order `to_text` writes them.
pub const KEYS: &[&str] = &[
    "data",
    "synth_clusters",
    "synth_n",
    "synth_dims",
    "synth_separation",
    "synth_seed",
    "mask_mode",
    "mask_rate",
    "mask_seed",
    "clusters",
    "knn",
    "alpha",
    "pretrain_lr",
    "pretrain_epochs",
    "pretrain_batch_size",
    "reconstruction",
    "finetune_lr",
    "max_outer",
    "max_inner",
    "stop_threshold",
    "finetune_batch_size",
    "hidden_width",
    "standardize",
    "use_pretrain",
    "use_graph",
    "use_self_pace",
    "seeds",
    "out",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

/// Comma-separated list; `a..b` expands to the half-open range.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => out.extend(num::<u64>(key, a)?..num::<u64>(key, b)?),
            None => out.push(num(key, part)?),
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(out)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("line {}: {m}", no + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    fn synthetic(&mut self, key: &str) -> Result<&mut SyntheticSpec> {
        match &mut self.data {
            DataSource::Synthetic(spec) => Ok(spec),
            DataSource::Dir(_) => Err(CliError::Config(format!("{key} needs `data = synthetic`"))),
        }
    }

    fn mask(&mut self) -> &mut MaskSpec {
        self.pipeline.mask.get_or_insert(MaskSpec::new(MaskMode::PerViewRemoval, 0.0, 0))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        match key {
            "data" if value == "synthetic" => {
                if !matches!(self.data, DataSource::Synthetic(_)) {
                    self.data = RunConfig::default().data;
                }
            }
            "data" => self.data = DataSource::Dir(PathBuf::from(value)),
            "synth_clusters" => self.synthetic(key)?.clusters = num(key, value)?,
            "synth_n" => self.synthetic(key)?.n = num(key, value)?,
            "synth_dims" => {
                self.synthetic(key)?.dims = parse_list(key, value)?.into_iter().map(|d| d as usize).collect()
            }
            "synth_separation" => self.synthetic(key)?.separation = num(key, value)?,
            "synth_seed" => self.synthetic(key)?.seed = num(key, value)?,
            "mask_mode" => match value {
                "none" => p.mask = None,
                "per-view" => self.mask().mode = MaskMode::PerViewRemoval,
                "paired" => self.mask().mode = MaskMode::PairedSubset,
                _ => return Err(CliError::Config(format!("{key}: expected none, per-view or paired, got {value:?}"))),
            },
            "mask_rate" => self.mask().rate = num(key, value)?,
            "mask_seed" => self.mask().seed = num(key, value)?,
            "clusters" => p.clusters = num(key, value)?,
            "knn" => p.knn = num(key, value)?,
            "alpha" => p.alpha = num(key, value)?,
            "pretrain_lr" => p.pretrain_lr = num(key, value)?,
            "pretrain_epochs" => p.pretrain_epochs = num(key, value)?,
            "pretrain_batch_size" => p.pretrain_batch_size = num(key, value)?,
            "reconstruction" => {
                p.reconstruction = match value {
                    "fused" => Reconstruction::Fused,
                    "per-view" => Reconstruction::PerView,
                    _ => return Err(CliError::Config(format!("{key}: expected fused or per-view, got {value:?}"))),
                }
            }
            "finetune_lr" => p.finetune_lr = num(key, value)?,
            "max_outer" => p.max_outer = num(key, value)?,
            "max_inner" => p.max_inner = num(key, value)?,
            "stop_threshold" => p.stop_threshold = num(key, value)?,
            "finetune_batch_size" => p.finetune_batch_size = num(key, value)?,
            "hidden_width" => p.hidden_width = num(key, value)?,
            "standardize" => p.standardize = flag(key, value)?,
            "use_pretrain" => p.components.pretrain = flag(key, value)?,
            "use_graph" => p.components.graph = flag(key, value)?,
            "use_self_pace" => p.components.self_paced = flag(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) =
            pair.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("no seeds given".into()));
        }
        if let Some(mask) = &self.pipeline.mask {
            if !(mask.rate >= 0.0 && mask.rate < 1.0) {
                return Err(CliError::Config(format!("mask_rate {} is outside [0, 1)", mask.rate)));
            }
        }
        if let DataSource::Synthetic(spec) = &self.data {
            if spec.clusters != self.pipeline.clusters {
                return Err(CliError::Config(format!(
                    "synth_clusters = {} but clusters = {}",
                    spec.clusters, self.pipeline.clusters
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        match &self.data {
            DataSource::Dir(dir) => put("data", dir.display().to_string()),
            DataSource::Synthetic(s) => {
                put("data", "synthetic".into());
                put("synth_clusters", s.clusters.to_string());
                put("synth_n", s.n.to_string());
                put("synth_dims", join(&s.dims));
                put("synth_separation", s.separation.to_string());
                put("synth_seed", s.seed.to_string());
            }
        }
        match &p.mask {
            None => put("mask_mode", "none".into()),
            Some(m) => {
                let mode = match m.mode {
                    MaskMode::PerViewRemoval => "per-view",
                    MaskMode::PairedSubset => "paired",
                };
                put("mask_mode", mode.into());
                put("mask_rate", m.rate.to_string());
                put("mask_seed", m.seed.to_string());
            }
        }
        put("clusters", p.clusters.to_string());
        put("knn", p.knn.to_string());
        put("alpha", p.alpha.to_string());
        put("pretrain_lr", p.pretrain_lr.to_string());
        put("pretrain_epochs", p.pretrain_epochs.to_string());
        put("pretrain_batch_size", p.pretrain_batch_size.to_string());
        let recon = match p.reconstruction {
            Reconstruction::Fused => "fused",
            Reconstruction::PerView => "per-view",
        };
        put("reconstruction", recon.into());
        put("finetune_lr", p.finetune_lr.to_string());
        put("max_outer", p.max_outer.to_string());
        put("max_inner", p.max_inner.to_string());
        put("stop_threshold", p.stop_threshold.to_string());
        put("finetune_batch_size", p.finetune_batch_size.to_string());
        put("hidden_width", p.hidden_width.to_string());
        put("standardize", p.standardize.to_string());
        put("use_pretrain", p.components.pretrain.to_string());
        put("use_graph", p.components.graph.to_string());
        put("use_self_pace", p.components.self_paced.to_string());
        put("seeds", join(&self.seeds));
        put("out", self.out.display().to_string());
        out
    }
}
