//! Exports the soft instruction pointer of one program under two initial
//! values as tab-separated matrices, the raw material for intensity plots.
//!
//! ```bash
//! cargo run --release -p ipagnn --example attention_heatmap
//! ```

use ipagnn::harness::{attention_to_text, dump_attention};
use ipagnn::models::{Model, ModelConfig, ModelKind};

const SOURCE: &str = "v0 = 323
if v0 % 10 < 5:
  v0 -= 3
else:
  v0 -= 4
  v0 += 2
  v0 *= 9
if v0 % 10 >= 4:
  if v0 % 10 < 6:
    v0 *= 8
";

fn main() {
    let model = Model::<f64>::init(
        ModelConfig {
            kind: ModelKind::IpaGnn,
            hidden: 16,
        },
        21,
    );
    print!("{SOURCE}");
    for v0 in [323u16, 849] {
        // Mask line 0 so the model sees the same partial program each time;
        // only the pointer dynamics differ through the branch layer weights.
        let matrix = dump_attention(&model, SOURCE, Some(v0), None).unwrap();
        println!("\n=== v0 = {v0} ({} steps x {} nodes) ===", matrix.len(), matrix[0].len());
        print!("{}", attention_to_text(&matrix));
        for (t, row) in matrix.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "mass leak at step {t}");
        }
    }
    println!("\nall rows sum to 1 within 1e-6");
}
