//! End-to-end run: rearrange, build graphs, pre-train, fine-tune, evaluate.

use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{MaskSpec, MultiViewDataset};
use crate::error::Error;
use crate::finetune::{run_finetune, FinetuneConfig, FinetuneObserver, FinetuneOutput};
use crate::graph::{build_knn_graph, rearrange};
use crate::metrics::{acc, nmi};
use crate::pretrain::{run_pretrain, MultiViewAutoencoder, PretrainConfig, Reconstruction, DEFAULT_HIDDEN_WIDTH};

/// Components that can be switched off for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub pretrain: bool,
    pub graph: bool,
    pub self_paced: bool,
}

impl Components {
    pub const FULL: Components = Components { pretrain: true, graph: true, self_paced: true };
    pub const NO_PRETRAIN: Components = Components { pretrain: false, ..Components::FULL };
    pub const NO_GRAPH: Components = Components { graph: false, ..Components::FULL };
    pub const NO_SELF_PACE: Components = Components { self_paced: false, ..Components::FULL };
}

impl Default for Components {
    fn default() -> Self {
        Components::FULL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub clusters: usize,
    pub knn: usize,
    pub alpha: f64,
    pub pretrain_lr: f64,
    pub pretrain_epochs: usize,
    pub pretrain_batch_size: usize,
    pub reconstruction: Reconstruction,
    pub finetune_lr: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub stop_threshold: f64,
    pub finetune_batch_size: usize,
    pub hidden_width: usize,
    pub standardize: bool,
    /// Missing views to generate when the input is complete, drawn with seed
    /// `mask.seed ^ run seed`.
    pub mask: Option<MaskSpec>,
    pub components: Components,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            clusters: 2,
            knn: 5,
            alpha: 1e-4,
            pretrain_lr: 1e-3,
            pretrain_epochs: 200,
            pretrain_batch_size: 8,
            reconstruction: Reconstruction::Fused,
            finetune_lr: 1e-3,
            max_outer: 50,
            max_inner: 5,
            stop_threshold: 1e-3,
            finetune_batch_size: 256,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            standardize: true,
            mask: None,
            components: Components::FULL,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.clusters < 2 {
            return Err(Error::Config("at least two clusters are required".into()));
        }
        if self.knn == 0 {
            return Err(Error::Config("knn must be at least 1".into()));
        }
        self.pretrain_config(0).validate()?;
        self.finetune_config(0).validate()
    }

    fn graph_alpha(&self) -> f64 {
        if self.components.graph {
            self.alpha
        } else {
            0.0
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> PretrainConfig {
        PretrainConfig {
            alpha: self.graph_alpha(),
            lr: self.pretrain_lr,
            epochs: if self.components.pretrain { self.pretrain_epochs } else { 0 },
            batch_size: self.pretrain_batch_size,
            hidden_width: self.hidden_width,
            reconstruction: self.reconstruction,
            seed,
        }
    }

    pub fn finetune_config(&self, seed: u64) -> FinetuneConfig {
        FinetuneConfig {
            alpha: self.graph_alpha(),
            lr: self.finetune_lr,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            batch_size: self.finetune_batch_size,
            stop_threshold: self.stop_threshold,
            seed,
            self_paced: self.components.self_paced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Mask,
    Rearrange,
    Graph,
    Pretrain,
    Finetune,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Setup => "setup",
            Stage::Mask => "mask",
            Stage::Rearrange => "rearrange",
            Stage::Graph => "graph",
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub error: Error,
}

trait At<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> At<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|error| PipelineError { stage, error })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// Cluster per sample, in the input order.
    pub assignments: Vec<usize>,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub pretrain_losses: Vec<f64>,
    pub finetune: FinetuneOutput,
    /// Network after fine-tuning.
    pub model: MultiViewAutoencoder,
}

impl PipelineOutcome {
    /// Outer fine-tuning iterations actually run.
    pub fn iterations(&self) -> usize {
        self.finetune.state.t
    }
}

pub fn run_pipeline(ds: &MultiViewDataset, config: &PipelineConfig, seed: u64) -> Result<PipelineOutcome, PipelineError> {
    run_pipeline_observed(ds, config, seed, &mut ())
}

/// Like [`run_pipeline`], reporting each fine-tuning iteration to `observer`.
/// Observed states are in rearranged sample order.
pub fn run_pipeline_observed(
    ds: &MultiViewDataset,
    config: &PipelineConfig,
    seed: u64,
    observer: &mut impl FinetuneObserver,
) -> Result<PipelineOutcome, PipelineError> {
    config.validate().at(Stage::Setup)?;
    let masked = match config.mask {
        Some(spec) if ds.is_complete() => {
            let spec = MaskSpec { seed: spec.seed ^ seed, ..spec };
            ds.make_incomplete(&spec).at(Stage::Mask)?
        }
        _ => ds.clone(),
    };
    let data = if config.standardize { masked.standardized() } else { masked };

    let (arranged, order) = rearrange(&data, config.clusters, seed).at(Stage::Rearrange)?;
    let graph = build_knn_graph(&arranged, config.knn).at(Stage::Graph)?;
    let pre = run_pretrain(&arranged, &graph, config.clusters, &config.pretrain_config(seed)).at(Stage::Pretrain)?;
    let mut model = pre.model;
    let finetune =
        run_finetune(&arranged, &graph, &mut model, &config.finetune_config(seed), observer).at(Stage::Finetune)?;

    let assignments = order.restore(&finetune.state.assignments);
    let (acc, nmi) = match data.labels() {
        Some(truth) => (
            Some(acc(&assignments, truth).at(Stage::Evaluate)?),
            Some(nmi(&assignments, truth).at(Stage::Evaluate)?),
        ),
        None => (None, None),
    };
    Ok(PipelineOutcome { assignments, acc, nmi, pretrain_losses: pre.epoch_losses, finetune, model })
}
