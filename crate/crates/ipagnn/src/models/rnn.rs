//! The single-thread recurrent models: a line-order RNN that ignores control
//! flow, an RNN over the oracle trace, and the discrete-branch thread that
//! walks the graph with argmax decisions.

use crate::autodiff::{Element, Tape, ValueId};
use crate::layers::{embed_statements, lstm_step, LstmState};

use super::input::ModelInput;
use super::{finish, Forward, Model, ModelError};

/// How the discrete thread resolves two-successor nodes.
#[derive(Clone, Copy)]
pub enum BranchDecider<'a> {
    /// Argmax of the learned branch layer; ties take the true branch.
    Learned,
    /// Follow the given ground-truth trace.
    Oracle(&'a [usize]),
}

fn thread_start<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> (Tape<E>, crate::layers::BoundParams, ValueId, LstmState) {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let emb = embed_statements(&mut tape, &model.params, &bound, &input.tokens);
    let state = LstmState::zeros(&mut tape, 1, model.config.hidden);
    (tape, bound, emb, state)
}

/// Consumes the lines in order, `n_t = t`, ignoring control flow entirely.
pub(super) fn forward_line_by_line<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<Forward<E>, ModelError> {
    let (mut tape, bound, emb, mut state) = thread_start(model, input);
    for node in 0..=input.exit {
        let x = tape.row_gather(emb, vec![node]);
        state = lstm_step(&mut tape, &model.params, &bound, &state, x, model.config.hidden);
    }
    finish(tape, &model.params, bound, state.h2, input, None)
}

/// Top-layer hidden vector after each statement of `nodes`, consumed in
/// order by the thread RNN; used by the equivalence tests.
pub fn thread_state_trajectory<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
    nodes: &[usize],
) -> Vec<Vec<f64>> {
    let (mut tape, bound, emb, mut state) = thread_start(model, input);
    let mut states = Vec::with_capacity(nodes.len());
    for &node in nodes {
        let x = tape.row_gather(emb, vec![node]);
        state = lstm_step(&mut tape, &model.params, &bound, &state, x, model.config.hidden);
        states.push(
            tape.value(state.h2)
                .data()
                .iter()
                .map(|&v| crate::autodiff::Element::to_f64(v))
                .collect(),
        );
    }
    states
}

/// Consumes the statements in ground-truth execution order, one step per
/// trace entry; unbounded by the step budget.
pub(super) fn forward_trace<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<Forward<E>, ModelError> {
    let trace = input.trace.get()?.ok_or(ModelError::MissingTrace)?;
    if trace.last() != Some(&input.exit) {
        return Err(ModelError::BadTrace);
    }
    let trace = trace.to_vec();
    let (mut tape, bound, emb, mut state) = thread_start(model, input);
    for &node in &trace {
        let x = tape.row_gather(emb, vec![node]);
        state = lstm_step(&mut tape, &model.params, &bound, &state, x, model.config.hidden);
    }
    finish(tape, &model.params, bound, state.h2, input, None)
}

/// The discrete instruction-pointer thread: runs exactly the step budget,
/// self-looping (and still updating) once it reaches the exit node.
pub(super) fn forward_hard<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
    decider: BranchDecider<'_>,
) -> Result<Forward<E>, ModelError> {
    let (mut tape, bound, emb, mut state) = thread_start(model, input);
    let h = model.config.hidden;
    let mut node = 0usize;
    for t in 1..=input.step_budget {
        let x = tape.row_gather(emb, vec![node]);
        let next_state = lstm_step(&mut tape, &model.params, &bound, &state, x, h);
        let outs = &input.out_lists[node];
        let next_node = if outs.len() == 2 {
            let slot = match decider {
                BranchDecider::Learned => {
                    let bw = bound.id(&model.params, "branch.w");
                    let bb = bound.id(&model.params, "branch.b");
                    let logits = tape.matmul(next_state.h2, bw);
                    let logits = tape.add_row(logits, bb);
                    let row = tape.value(logits).data();
                    // Strictly greater: a tie takes the true branch.
                    usize::from(row[1] > row[0])
                }
                BranchDecider::Oracle(trace) => {
                    let want = trace.get(t).copied().unwrap_or(input.exit);
                    outs.iter().position(|&d| d == want).unwrap_or(0)
                }
            };
            outs[slot]
        } else {
            outs[0]
        };
        state = next_state;
        node = next_node;
    }
    finish(tape, &model.params, bound, state.h2, input, None)
}

/// Runs the discrete thread with explicit decisions, exposing the visited
/// nodes and the per-step top-layer states; used by equivalence tests.
pub fn hard_thread_states<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
    decider: BranchDecider<'_>,
) -> Result<(Vec<usize>, Vec<Vec<f64>>), ModelError> {
    let (mut tape, bound, emb, mut state) = thread_start(model, input);
    let h = model.config.hidden;
    let mut node = 0usize;
    let mut visited = vec![0usize];
    let mut states = Vec::new();
    for t in 1..=input.step_budget {
        let x = tape.row_gather(emb, vec![node]);
        let next_state = lstm_step(&mut tape, &model.params, &bound, &state, x, h);
        let outs = &input.out_lists[node];
        let next_node = if outs.len() == 2 {
            let slot = match decider {
                BranchDecider::Learned => {
                    let bw = bound.id(&model.params, "branch.w");
                    let bb = bound.id(&model.params, "branch.b");
                    let logits = tape.matmul(next_state.h2, bw);
                    let logits = tape.add_row(logits, bb);
                    let row = tape.value(logits).data();
                    usize::from(row[1] > row[0])
                }
                BranchDecider::Oracle(trace) => {
                    let want = trace.get(t).copied().unwrap_or(input.exit);
                    outs.iter().position(|&d| d == want).unwrap_or(0)
                }
            };
            outs[slot]
        } else {
            outs[0]
        };
        state = next_state;
        node = next_node;
        visited.push(node);
        states.push(
            tape.value(state.h2)
                .data()
                .iter()
                .map(|&v| crate::autodiff::Element::to_f64(v))
                .collect(),
        );
    }
    Ok((visited, states))
}
