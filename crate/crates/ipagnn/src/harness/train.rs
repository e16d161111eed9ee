//! The training loop: deterministic shuffling, per-example tapes reduced in
//! a fixed order, Adam updates, periodic metrics/checkpoints, and the
//! hyperparameter sweep with validation-based selection.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Element, Tensor};
use crate::layers::{adam_step, AdamState, Params};
use crate::models::{
    expected_param_names, Model, ModelConfig, ModelKind, StepOutput,
};

use super::checkpoint::{load_checkpoint, save_checkpoint, CheckpointData};
use super::eval::{evaluate_model, load_inputs};
use super::{HarnessError, Precision, TrainConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub steps: usize,
    pub examples_seen: usize,
    pub epochs_run: usize,
    pub final_loss: f64,
    /// Exact-match accuracy over the train split, when it was measured.
    pub train_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct MetricsRecord {
    step: usize,
    loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    val_accuracy: Option<f64>,
}

/// Saves model parameters together with optimizer moments and progress
/// counters.
pub fn save_model_checkpoint<E: Element>(
    path: &Path,
    model: &Model<E>,
    opt: Option<&AdamState<E>>,
    meta: &[(String, f64)],
) -> Result<(), HarnessError> {
    let mut tensors: Vec<(String, Tensor<E>)> = model
        .params
        .iter()
        .map(|(name, t)| (name.to_string(), t.clone()))
        .collect();
    let mut all_meta = meta.to_vec();
    if let Some(opt) = opt {
        for (i, (name, _)) in model.params.iter().enumerate() {
            tensors.push((format!("opt.m.{name}"), opt.m[i].clone()));
            tensors.push((format!("opt.v.{name}"), opt.v[i].clone()));
        }
        all_meta.push(("adam.step".into(), opt.step as f64));
        all_meta.push(("adam.lr".into(), opt.lr));
    }
    save_checkpoint(
        path,
        &CheckpointData {
            kind: model.config.kind,
            hidden: model.config.hidden,
            meta: all_meta,
            tensors,
        },
    )?;
    Ok(())
}

/// A restored model plus any stored optimizer state and metadata.
pub type LoadedModel<E> = (Model<E>, Option<AdamState<E>>, Vec<(String, f64)>);

/// Loads a model (optionally re-interpreted as a different kind sharing the
/// same parameter names) plus any stored optimizer state and metadata.
pub fn load_model_checkpoint<E: Element>(
    path: &Path,
    as_kind: Option<ModelKind>,
) -> Result<LoadedModel<E>, HarnessError> {
    let data = load_checkpoint::<E>(path)?;
    let kind = as_kind.unwrap_or(data.kind);
    let mut by_name: std::collections::HashMap<String, Tensor<E>> =
        data.tensors.into_iter().collect();

    let mut params = Params::new();
    for name in expected_param_names(kind) {
        let tensor = by_name.remove(&name).ok_or(HarnessError::KindMismatch {
            stored: data.kind,
            requested: kind,
        })?;
        params.insert(&name, tensor);
    }
    let config = ModelConfig {
        kind,
        hidden: data.hidden,
    };
    let model = Model::from_params(config, params);

    let opt = if data.meta.iter().any(|(k, _)| k == "adam.step") && as_kind.is_none() {
        let lr = data
            .meta
            .iter()
            .find(|(k, _)| k == "adam.lr")
            .map(|(_, v)| *v)
            .unwrap_or(1e-3);
        let mut opt = AdamState::new(lr, &model.params);
        opt.step = data
            .meta
            .iter()
            .find(|(k, _)| k == "adam.step")
            .map(|(_, v)| *v as u64)
            .unwrap_or(0);
        for (i, (name, _)) in model.params.iter().enumerate() {
            if let Some(m) = by_name.remove(&format!("opt.m.{name}")) {
                opt.m[i] = m;
            }
            if let Some(v) = by_name.remove(&format!("opt.v.{name}")) {
                opt.v[i] = v;
            }
        }
        Some(opt)
    } else {
        None
    };
    Ok((model, opt, data.meta))
}

/// Trains per the configuration, dispatching on precision.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome, HarnessError> {
    match cfg.precision {
        Precision::F32 => train_typed::<f32>(cfg),
        Precision::F64 => train_typed::<f64>(cfg),
    }
}

fn epoch_permutation(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + epoch as u64));
    order.shuffle(&mut rng);
    order
}

fn train_typed<E: Element>(cfg: &TrainConfig) -> Result<TrainOutcome, HarnessError> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| HarnessError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let train_inputs = load_inputs(
        &cfg.data_dir.join("train.jsonl"),
        cfg.model.uses_trace(),
    )?;
    let valid_path = cfg.data_dir.join("valid.jsonl");
    let valid_inputs = if cfg.eval_every > 0 && valid_path.exists() {
        load_inputs(&valid_path, cfg.model.uses_trace())?
    } else {
        Vec::new()
    };

    let config = ModelConfig {
        kind: cfg.model,
        hidden: cfg.hidden,
    };
    let (mut model, mut opt, start_epoch, start_batch, mut examples_seen) =
        match &cfg.resume {
            Some(path) => {
                let (model, opt, meta) = load_model_checkpoint::<E>(path, None)?;
                let get = |k: &str| {
                    meta.iter()
                        .find(|(key, _)| key == k)
                        .map(|(_, v)| *v as usize)
                        .unwrap_or(0)
                };
                if model.config.kind != cfg.model {
                    return Err(HarnessError::KindMismatch {
                        stored: model.config.kind,
                        requested: cfg.model,
                    });
                }
                let opt = opt.unwrap_or_else(|| AdamState::new(cfg.lr, &model.params));
                (
                    model,
                    opt,
                    get("train.epoch"),
                    get("train.batch_in_epoch"),
                    get("train.examples_seen"),
                )
            }
            None => {
                let model = Model::<E>::init(config, cfg.seed);
                let opt = AdamState::new(cfg.lr, &model.params);
                (model, opt, 0, 0, 0)
            }
        };

    let metrics_path = cfg.out_dir.join("metrics.jsonl");
    let mut metrics = File::options()
        .create(true)
        .append(true)
        .open(&metrics_path)
        .map_err(|source| HarnessError::Io {
            path: metrics_path.clone(),
            source,
        })?;

    let ckpt_path = cfg.out_dir.join("model.ckpt");
    let mut step = opt.step as usize;
    let mut last_loss = f64::NAN;
    let mut train_accuracy = None;
    let mut epochs_run = start_epoch;
    // Where the next batch would come from, for bitwise-identical resumes.
    let mut position = (start_epoch, start_batch);

    'epochs: for epoch in start_epoch..cfg.epochs {
        let order = epoch_permutation(cfg.seed, epoch, train_inputs.len());
        let skip = if epoch == start_epoch { start_batch } else { 0 };
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate().skip(skip) {
            if let Some(cap) = cfg.max_steps {
                if step >= cap {
                    break 'epochs;
                }
            }
            position = (epoch, batch_no + 1);
            let outputs: Vec<Result<StepOutput<E>, _>> = batch
                .par_iter()
                .map(|&i| model.loss_and_grads(&train_inputs[i]))
                .collect();

            let mut grads: Option<Vec<Tensor<E>>> = None;
            let mut loss_sum = 0.0;
            for (k, out) in outputs.into_iter().enumerate() {
                let out = out.map_err(|_| HarnessError::NonFiniteLoss {
                    step,
                    example_ids: batch
                        .iter()
                        .map(|&i| train_inputs[i].id.clone())
                        .collect(),
                })?;
                let _ = k;
                loss_sum += out.loss;
                match grads.as_mut() {
                    None => grads = Some(out.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&out.grads) {
                            a.add_assign(g);
                        }
                    }
                }
            }
            let mut grads = grads.expect("non-empty batch");
            let scale = E::from_f64(1.0 / batch.len() as f64);
            for g in &mut grads {
                g.scale_assign(scale);
            }
            adam_step(&mut opt, &mut model.params, &grads)?;
            step += 1;
            examples_seen += batch.len();
            last_loss = loss_sum / batch.len() as f64;

            let due_log = cfg.log_every > 0 && step.is_multiple_of(cfg.log_every);
            let due_eval = cfg.eval_every > 0 && step.is_multiple_of(cfg.eval_every);
            if due_log || due_eval {
                let val_accuracy = if due_eval && !valid_inputs.is_empty() {
                    Some(evaluate_model(&model, &valid_inputs)?.overall_accuracy)
                } else {
                    None
                };
                let record = MetricsRecord {
                    step,
                    loss: last_loss,
                    val_accuracy,
                };
                writeln!(metrics, "{}", serde_json::to_string(&record).unwrap()).map_err(
                    |source| HarnessError::Io {
                        path: metrics_path.clone(),
                        source,
                    },
                )?;
            }
            if cfg.checkpoint_every > 0 && step.is_multiple_of(cfg.checkpoint_every) {
                save_progress(
                    &ckpt_path,
                    &model,
                    &opt,
                    epoch,
                    batch_no + 1,
                    examples_seen,
                    cfg,
                )?;
            }
        }
        epochs_run = epoch + 1;
        position = (epoch + 1, 0);
        if let Some(target) = cfg.stop_at_train_acc {
            let report = evaluate_model(&model, &train_inputs)?;
            train_accuracy = Some(report.overall_accuracy);
            if report.overall_accuracy >= target {
                break 'epochs;
            }
        }
    }

    save_progress(
        &ckpt_path,
        &model,
        &opt,
        position.0,
        position.1,
        examples_seen,
        cfg,
    )?;
    let record = MetricsRecord {
        step,
        loss: last_loss,
        val_accuracy: None,
    };
    writeln!(metrics, "{}", serde_json::to_string(&record).unwrap()).map_err(|source| {
        HarnessError::Io {
            path: metrics_path.clone(),
            source,
        }
    })?;

    Ok(TrainOutcome {
        checkpoint: ckpt_path,
        steps: step,
        examples_seen,
        epochs_run,
        final_loss: last_loss,
        train_accuracy,
    })
}

#[allow(clippy::too_many_arguments)]
fn save_progress<E: Element>(
    path: &Path,
    model: &Model<E>,
    opt: &AdamState<E>,
    epoch: usize,
    batch_in_epoch: usize,
    examples_seen: usize,
    cfg: &TrainConfig,
) -> Result<(), HarnessError> {
    save_model_checkpoint(
        path,
        model,
        Some(opt),
        &[
            ("train.epoch".into(), epoch as f64),
            ("train.batch_in_epoch".into(), batch_in_epoch as f64),
            ("train.examples_seen".into(), examples_seen as f64),
            ("train.seed".into(), cfg.seed as f64),
            ("train.batch_size".into(), cfg.batch_size as f64),
        ],
    )
}

/// The hyperparameter grid: every (hidden, lr) pair is trained.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepGrid {
    pub hiddens: Vec<usize>,
    pub lrs: Vec<f64>,
}

impl SweepGrid {
    /// The full sweep: H in {200, 300} and four learning rates.
    pub fn paper() -> Self {
        SweepGrid {
            hiddens: vec![200, 300],
            lrs: vec![3e-3, 1e-3, 3e-4, 1e-4],
        }
    }

    /// Laptop-scale sweep: H = 64 over the same learning rates.
    pub fn desk() -> Self {
        SweepGrid {
            hiddens: vec![64],
            lrs: vec![3e-3, 1e-3, 3e-4, 1e-4],
        }
    }

    pub fn cells(&self) -> Vec<(usize, f64)> {
        let mut cells = Vec::new();
        for &h in &self.hiddens {
            for &lr in &self.lrs {
                cells.push((h, lr));
            }
        }
        cells
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellReport {
    pub hidden: usize,
    pub lr: f64,
    pub val_accuracy: f64,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub cells: Vec<CellReport>,
    pub winner: CellReport,
}

/// Trains every grid cell and selects by validation accuracy; ties take the
/// lower learning rate.
pub fn sweep(base: &TrainConfig, grid: &SweepGrid) -> Result<SweepOutcome, HarnessError> {
    let valid_inputs = load_inputs(
        &base.data_dir.join("valid.jsonl"),
        base.model.uses_trace(),
    )?;
    let mut cells = Vec::new();
    for (hidden, lr) in grid.cells() {
        let mut cfg = base.clone();
        cfg.hidden = hidden;
        cfg.lr = lr;
        cfg.out_dir = base.out_dir.join(format!("cell-h{hidden}-lr{lr}"));
        let outcome = train(&cfg)?;
        let val_accuracy = match cfg.precision {
            Precision::F32 => {
                let (model, _, _) = load_model_checkpoint::<f32>(&outcome.checkpoint, None)?;
                evaluate_model(&model, &valid_inputs)?.overall_accuracy
            }
            Precision::F64 => {
                let (model, _, _) = load_model_checkpoint::<f64>(&outcome.checkpoint, None)?;
                evaluate_model(&model, &valid_inputs)?.overall_accuracy
            }
        };
        cells.push(CellReport {
            hidden,
            lr,
            val_accuracy,
            checkpoint: outcome.checkpoint,
        });
    }
    let winner = cells
        .iter()
        .cloned()
        .reduce(|best, cell| {
            if cell.val_accuracy > best.val_accuracy
                || (cell.val_accuracy == best.val_accuracy && cell.lr < best.lr)
            {
                cell
            } else {
                best
            }
        })
        .expect("grid has at least one cell");
    let outcome = SweepOutcome { cells, winner };
    let report_path = base.out_dir.join("sweep.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&outcome).unwrap(),
    )
    .map_err(|source| HarnessError::Io {
        path: report_path,
        source,
    })?;
    Ok(outcome)
}
