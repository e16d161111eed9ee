//! Length-stratified evaluation: trains briefly on short programs, then
//! reports exact-match accuracy per held-out length bucket with standard
//! errors, next to the untrained-model baseline.
//!
//! ```bash
//! cargo run --release -p ipagnn --example evaluate_by_length
//! ```

use ipagnn::data::{generate_split, SplitSpec};
use ipagnn::harness::{
    evaluate_model, load_inputs, load_model_checkpoint, report_table, train, TrainConfig,
};
use ipagnn::models::{Model, ModelConfig, ModelKind};

fn main() {
    let dir = std::env::temp_dir().join("ipagnn-example-eval");
    let spec = SplitSpec {
        train_count: 2000,
        valid_count: 200,
        test_buckets: vec![(12, 100), (16, 100), (20, 100)],
        threshold: 8,
        ..SplitSpec::desk(17)
    };
    generate_split(&spec, &dir).unwrap();
    let test = load_inputs(&dir.join("test.jsonl"), false).unwrap();

    let untrained = Model::<f32>::init(
        ModelConfig {
            kind: ModelKind::IpaGnn,
            hidden: 32,
        },
        0,
    );
    println!("untrained baseline:");
    print!("{}", report_table(&evaluate_model(&untrained, &test).unwrap()));

    let mut cfg = TrainConfig::desk(ModelKind::IpaGnn, dir.clone(), dir.join("run"));
    cfg.hidden = 32;
    cfg.lr = 3e-3;
    cfg.epochs = 2;
    let outcome = train(&cfg).unwrap();
    let (model, _, _) = load_model_checkpoint::<f32>(&outcome.checkpoint, None).unwrap();
    println!("\nafter {} steps on lengths 2..=8:", outcome.steps);
    print!("{}", report_table(&evaluate_model(&model, &test).unwrap()));
}
