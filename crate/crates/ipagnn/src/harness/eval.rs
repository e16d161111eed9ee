//! Length-stratified exact-match evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Element;
use crate::data::RecordReader;
use crate::models::{Model, ModelError, ModelInput, ModelKind};

use super::train::load_model_checkpoint;
use super::HarnessError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BucketReport {
    pub length: usize,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `sqrt(acc * (1 - acc) / n)`.
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub predicted: u16,
    pub target: u16,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub overall_n: usize,
    pub overall_correct: usize,
    pub overall_accuracy: f64,
    pub overall_std_error: f64,
    pub buckets: Vec<BucketReport>,
    pub predictions: Vec<PredictionRecord>,
}

fn std_error(acc: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (acc * (1.0 - acc) / n as f64).sqrt()
}

/// Loads every record of a file as a prepared input. Non-trace models
/// receive no trace fields at all.
pub fn load_inputs(path: &Path, allow_trace: bool) -> Result<Vec<ModelInput>, HarnessError> {
    let mut inputs = Vec::new();
    for rec in RecordReader::open(path)? {
        let mut rec = rec?;
        if !allow_trace {
            rec.trace = None;
        }
        inputs.push(ModelInput::from_record(&rec, allow_trace));
    }
    Ok(inputs)
}

/// Evaluates an arbitrary predictor, bucketing exact-match accuracy by
/// program length.
pub fn evaluate_with<F>(
    model_name: &str,
    predict: F,
    inputs: &[ModelInput],
) -> Result<EvalReport, HarnessError>
where
    F: Fn(&ModelInput) -> Result<u16, ModelError> + Sync,
{
    let predictions: Vec<PredictionRecord> = inputs
        .par_iter()
        .map(|input| {
            predict(input).map(|predicted| PredictionRecord {
                id: input.id.clone(),
                predicted,
                target: input.target,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut by_length: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (input, pred) in inputs.iter().zip(&predictions) {
        let entry = by_length.entry(input.complexity).or_insert((0, 0));
        entry.0 += 1;
        if pred.predicted == pred.target {
            entry.1 += 1;
        }
    }
    let buckets: Vec<BucketReport> = by_length
        .into_iter()
        .map(|(length, (n, correct))| {
            let accuracy = correct as f64 / n as f64;
            BucketReport {
                length,
                n,
                correct,
                accuracy,
                std_error: std_error(accuracy, n),
            }
        })
        .collect();
    let overall_n: usize = buckets.iter().map(|b| b.n).sum();
    let overall_correct: usize = buckets.iter().map(|b| b.correct).sum();
    let overall_accuracy = if overall_n == 0 {
        0.0
    } else {
        overall_correct as f64 / overall_n as f64
    };
    Ok(EvalReport {
        model: model_name.to_string(),
        overall_n,
        overall_correct,
        overall_accuracy,
        overall_std_error: std_error(overall_accuracy, overall_n),
        buckets,
        predictions,
    })
}

/// Evaluates a model on prepared inputs.
pub fn evaluate_model<E: Element>(
    model: &Model<E>,
    inputs: &[ModelInput],
) -> Result<EvalReport, HarnessError> {
    evaluate_with(model.config.kind.name(), |input| model.predict(input), inputs)
}

/// Loads a checkpoint (optionally re-interpreting its weights as another
/// kind, e.g. evaluating the discrete thread with soft-pointer weights) and
/// evaluates it on a record file.
pub fn evaluate_checkpoint(
    ckpt: &Path,
    test_file: &Path,
    as_kind: Option<ModelKind>,
) -> Result<EvalReport, HarnessError> {
    match super::stored_precision(ckpt)? {
        4 => evaluate_checkpoint_typed::<f32>(ckpt, test_file, as_kind),
        _ => evaluate_checkpoint_typed::<f64>(ckpt, test_file, as_kind),
    }
}

fn evaluate_checkpoint_typed<E: Element>(
    ckpt: &Path,
    test_file: &Path,
    as_kind: Option<ModelKind>,
) -> Result<EvalReport, HarnessError> {
    let (model, _, _) = load_model_checkpoint::<E>(ckpt, as_kind)?;
    let inputs = load_inputs(test_file, model.config.kind.uses_trace())?;
    evaluate_model(&model, &inputs)
}

/// Aligned text table: one row per length bucket plus the overall line.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<10} {:>8} {:>8} {:>10} {:>10}\n", "length", "n", "correct", "accuracy", "stderr"));
    for b in &report.buckets {
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>9.4}% {:>9.4}%\n",
            b.length,
            b.n,
            b.correct,
            100.0 * b.accuracy,
            100.0 * b.std_error
        ));
    }
    out.push_str(&format!(
        "{:<10} {:>8} {:>8} {:>9.4}% {:>9.4}%\n",
        "overall",
        report.overall_n,
        report.overall_correct,
        100.0 * report.overall_accuracy,
        100.0 * report.overall_std_error
    ));
    out
}
