//! Overfits the soft-pointer model on a small fixed set of programs: a
//! quick learnability check that loss falls and train accuracy climbs.
//!
//! ```bash
//! cargo run --release -p ipagnn --example train_overfit
//! ```

use ipagnn::data::{generate_split, SplitSpec};
use ipagnn::harness::{evaluate_model, load_inputs, load_model_checkpoint, train, TrainConfig};
use ipagnn::models::ModelKind;

fn main() {
    let dir = std::env::temp_dir().join("ipagnn-example-overfit");
    let spec = SplitSpec {
        train_count: 96,
        valid_count: 8,
        test_buckets: vec![(12, 8)],
        ..SplitSpec::desk(3)
    };
    generate_split(&spec, &dir).unwrap();

    let mut cfg = TrainConfig::desk(
        ModelKind::IpaGnn,
        dir.clone(),
        dir.join("run"),
    );
    cfg.hidden = 32;
    cfg.lr = 3e-3;
    cfg.epochs = 60;
    cfg.log_every = 30;
    cfg.stop_at_train_acc = Some(0.95);
    let t0 = std::time::Instant::now();
    let outcome = train(&cfg).unwrap();
    println!(
        "stopped after {} epochs / {} steps in {:.1?}; train accuracy {:.1}%",
        outcome.epochs_run,
        outcome.steps,
        t0.elapsed(),
        100.0 * outcome.train_accuracy.unwrap_or(0.0)
    );

    let (model, _, _) = load_model_checkpoint::<f32>(&outcome.checkpoint, None).unwrap();
    let test = load_inputs(&dir.join("test.jsonl"), false).unwrap();
    let report = evaluate_model(&model, &test).unwrap();
    println!(
        "held-out accuracy at length 12: {:.1}% ({} of {})",
        100.0 * report.overall_accuracy,
        report.overall_correct,
        report.overall_n
    );
}
