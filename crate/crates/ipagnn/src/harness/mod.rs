//! Training, hyperparameter sweeps, length-stratified evaluation, and
//! attention export.

mod attention;
mod checkpoint;
mod eval;
mod train;

pub use attention::{attention_to_text, dump_attention};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, stored_precision, CheckpointData, CheckpointError,
};
pub use eval::{
    evaluate_checkpoint, evaluate_model, evaluate_with, load_inputs, report_table, BucketReport,
    EvalReport, PredictionRecord,
};
pub use train::{
    load_model_checkpoint, save_model_checkpoint, sweep, train, CellReport, SweepGrid,
    SweepOutcome, TrainOutcome,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::layers::LayerError;
use crate::models::{ModelError, ModelKind};

/// Element type used for parameters and arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn from_name(name: &str) -> Option<Precision> {
        match name {
            "f32" => Some(Precision::F32),
            "f64" => Some(Precision::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite loss at step {step} (examples: {})", example_ids.join(", "))]
    NonFiniteLoss {
        step: usize,
        example_ids: Vec<String>,
    },
    #[error("checkpoint holds a {} model; cannot evaluate it as {}", stored.name(), requested.name())]
    KindMismatch {
        stored: ModelKind,
        requested: ModelKind,
    },
    #[error("{} maintains no soft instruction pointer to export", kind.name())]
    NotAttention { kind: ModelKind },
    #[error("line {line} is not a maskable expression statement")]
    MaskLineIneligible { line: usize },
    #[error(transparent)]
    Parse(#[from] crate::lang::ParseError),
}

/// One full training configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    /// Emit a metrics record every this many steps.
    pub log_every: usize,
    /// Compute validation accuracy every this many steps (0: only at the end).
    pub eval_every: usize,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: usize,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Resume bitwise from a previous checkpoint of the same configuration.
    pub resume: Option<PathBuf>,
    /// Stop once train-set accuracy reaches this value (checked per epoch).
    pub stop_at_train_acc: Option<f64>,
}

impl TrainConfig {
    /// Laptop-scale defaults: H = 64, single precision, three epochs.
    pub fn desk(model: ModelKind, data_dir: PathBuf, out_dir: PathBuf) -> Self {
        TrainConfig {
            model,
            hidden: 64,
            lr: 1e-3,
            batch_size: 32,
            epochs: 3,
            seed: 0,
            precision: Precision::F32,
            max_steps: None,
            log_every: 100,
            eval_every: 0,
            checkpoint_every: 0,
            data_dir,
            out_dir,
            resume: None,
            stop_at_train_acc: None,
        }
    }

    /// Full-scale defaults: H = 200 (the sweep also visits 300).
    pub fn paper(model: ModelKind, data_dir: PathBuf, out_dir: PathBuf) -> Self {
        TrainConfig {
            hidden: 200,
            precision: Precision::F64,
            ..TrainConfig::desk(model, data_dir, out_dir)
        }
    }
}

impl serde::Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ModelKind::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown model kind `{name}`")))
    }
}
