//! Demonstrates the model-family equivalences numerically under shared
//! weights: saturated soft branches reduce to the discrete thread, the
//! oracle-guided thread reduces to the trace RNN, and on straight-line code
//! the trace RNN is the line-by-line RNN.
//!
//! ```bash
//! cargo run --release -p ipagnn --example model_equivalences
//! ```

use ipagnn::data::make_example;
use ipagnn::lang::Weights;
use ipagnn::models::{
    hard_thread_states, soft_ip_trajectory, thread_state_trajectory, BranchDecider, Model,
    ModelConfig, ModelInput, ModelKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let record = make_example("demo".into(), 9, Weights::default(), 4, &mut rng).unwrap();
    println!("{}", record.source);
    let input = ModelInput::from_record(&record, true);

    // Shared weights across the family.
    let mut ipagnn = Model::<f64>::init(
        ModelConfig {
            kind: ModelKind::IpaGnn,
            hidden: 8,
        },
        1,
    );

    // 1. Saturate the branch layer: the soft pointer follows one path and
    //    matches the discrete thread state for state.
    ipagnn.params.get_mut("branch.w").data_mut().fill(0.0);
    ipagnn
        .params
        .get_mut("branch.b")
        .data_mut()
        .copy_from_slice(&[40.0, -40.0]);
    let hard = Model::transfer_from(ModelKind::HardIpRnn, &ipagnn);
    let traj = soft_ip_trajectory(&ipagnn, &input).unwrap();
    let (visited, states) = hard_thread_states(&hard, &input, BranchDecider::Learned).unwrap();
    let mut worst = 0.0f64;
    for (t, s) in states.iter().enumerate() {
        worst = worst.max(max_abs_diff(&traj.top_hidden[t][visited[t + 1]], s));
    }
    println!("saturated soft pointer vs discrete thread: max state diff {worst:.3e}");

    // 2. Give the thread the oracle's decisions: it matches the trace RNN
    //    step for step while the budget lasts.
    let trace = input.trace.get().unwrap().unwrap().to_vec();
    let (_, hard_states) =
        hard_thread_states(&hard, &input, BranchDecider::Oracle(&trace)).unwrap();
    let trace_model = Model::transfer_from(ModelKind::TraceRnn, &ipagnn);
    let trace_states = thread_state_trajectory(&trace_model, &input, &trace);
    let steps = hard_states.len().min(trace_states.len());
    let mut worst = 0.0f64;
    for t in 0..steps {
        worst = worst.max(max_abs_diff(&hard_states[t], &trace_states[t]));
    }
    println!("oracle-guided thread vs trace RNN:          max state diff {worst:.3e} over {steps} steps");

    // 3. On straight-line code the trace is 0,1,2,...: the trace RNN and the
    //    line-by-line RNN are the same computation.
    let straight = make_example(
        "straight".into(),
        6,
        Weights {
            if_: 0.0,
            if_else: 0.0,
            repeat: 0.0,
            continue_: 0.0,
            break_: 0.0,
            pass: 0.0,
            ..Weights::default()
        },
        4,
        &mut rng,
    )
    .unwrap();
    let sinput = ModelInput::from_record(&straight, true);
    let line = Model::transfer_from(ModelKind::LineByLine, &ipagnn);
    let ft = trace_model.forward(&sinput, false).unwrap();
    let fl = line.forward(&sinput, false).unwrap();
    let diff = max_abs_diff(
        ft.tape.value(ft.logits).data(),
        fl.tape.value(fl.logits).data(),
    );
    println!("straight-line trace RNN vs line-by-line:    logit diff {diff:.3e}");
}
