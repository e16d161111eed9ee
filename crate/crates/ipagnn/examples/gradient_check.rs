//! Verifies tape gradients against central differences: a few primitives,
//! the stacked LSTM, and the full soft-pointer model loss at toy size.
//!
//! ```bash
//! cargo run --release -p ipagnn --example gradient_check
//! ```

use ipagnn::autodiff::{grad_check, Tensor};
use ipagnn::data::record_from_program;
use ipagnn::lang::parse;
use ipagnn::models::{Model, ModelConfig, ModelInput, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let a = random(&mut rng, &[5, 7]);
    let b = random(&mut rng, &[7, 4]);
    let report = grad_check(
        |tape, ids| {
            let y = tape.matmul(ids[0], ids[1]);
            let s = tape.tanh(y);
            let sq = tape.mul(s, s);
            tape.sum_all(sq)
        },
        &[a, b],
        1e-5,
    );
    println!("matmul+tanh   max rel error: {:.3e}", report.max_rel_error);

    let x = random(&mut rng, &[3, 6]);
    let report = grad_check(
        |tape, ids| {
            let s = tape.softmax(ids[0]);
            let l = tape.log(s);
            let sq = tape.mul(l, l);
            tape.sum_all(sq)
        },
        &[x],
        1e-5,
    );
    println!("softmax+log   max rel error: {:.3e}", report.max_rel_error);

    // Full model loss on a 5-line program at H = 8.
    let program = parse("v0 = 407\nif v0 % 10 < 3:\n  v0 += 4\nelse:\n  v0 -= 2\n").unwrap();
    let record = record_from_program("demo", &program).unwrap();
    let input = ModelInput::from_record(&record, false);
    let model = Model::<f64>::init(
        ModelConfig {
            kind: ModelKind::IpaGnn,
            hidden: 8,
        },
        5,
    );
    let analytic = model.loss_and_grads(&input).unwrap();
    let mut max_err = 0.0f64;
    let h = 1e-5;
    let names: Vec<String> = model.params.names().to_vec();
    for (pi, name) in names.iter().enumerate() {
        let len = model.params.get(name).len();
        for j in (0..len).step_by(17) {
            // Spot-check every 17th coordinate to keep the demo quick.
            let mut plus = model.clone();
            plus.params.get_mut(name).data_mut()[j] += h;
            let lp = {
                let f = plus.forward(&input, false).unwrap();
                f.tape.value(f.loss).item()
            };
            let mut minus = model.clone();
            minus.params.get_mut(name).data_mut()[j] -= h;
            let lm = {
                let f = minus.forward(&input, false).unwrap();
                f.tape.value(f.loss).item()
            };
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.grads[pi].data()[j];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            max_err = max_err.max(err);
        }
    }
    println!("model loss    max rel error: {max_err:.3e} (spot-checked)");
}
