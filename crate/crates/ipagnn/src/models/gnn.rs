//! Message-passing models over the bidirectional typed graph: the gated
//! graph network and the control-swapped ablation that keeps the per-node
//! RNN but routes information through typed messages.

use crate::autodiff::{Element, Tape, Tensor, ValueId};
use crate::layers::{embed_statements, gru_update, lstm_step, BoundParams, LstmState, Params};

use super::input::ModelInput;
use super::{finish, Forward, Model, ModelError, MESSAGE_EDGE_GROUPS};

/// Sum of per-edge-type dense messages from `source` states, aggregated at
/// each destination node.
fn typed_messages<E: Element>(
    tape: &mut Tape<E>,
    params: &Params<E>,
    bound: &BoundParams,
    input: &ModelInput,
    source: ValueId,
) -> ValueId {
    let n = input.node_count;
    let h = tape.value(source).cols();
    let mut total = tape.leaf(Tensor::zeros(&[n, h]));
    for ((_, srcs, dsts), group) in input.typed.iter().zip(MESSAGE_EDGE_GROUPS) {
        if srcs.is_empty() {
            continue;
        }
        let w = bound.id(params, &format!("msg.{group}.w"));
        let b = bound.id(params, &format!("msg.{group}.b"));
        let gathered = tape.row_gather(source, srcs.clone());
        let m = tape.matmul(gathered, w);
        let m = tape.add_row(m, b);
        let scattered = tape.row_scatter_add(m, dsts.clone(), n);
        total = tape.add(total, scattered);
    }
    total
}

/// Node states start at the statement embeddings; each round sends typed
/// dense messages over the bidirectional graph and applies the gated update.
/// The head reads the exit node after the step-budget rounds.
pub(super) fn forward_ggnn<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<Forward<E>, ModelError> {
    let params = &model.params;
    let h = model.config.hidden;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let emb = embed_statements(&mut tape, params, &bound, &input.tokens);
    let mut state = emb;
    for _ in 1..=input.step_budget {
        let msg = typed_messages(&mut tape, params, &bound, input, state);
        state = gru_update(&mut tape, params, &bound, state, msg, h);
    }
    let h_final = tape.row_gather(state, vec![input.exit]);
    finish(tape, params, bound, h_final, input, None)
}

/// Keeps the per-node recurrent proposals but replaces pointer routing with
/// message passing: messages are dense functions of the proposals' exposed
/// hidden vectors, and the gated update folds them into the new exposed
/// state while the internal LSTM components advance locally.
pub(super) fn forward_nocontrol<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<Forward<E>, ModelError> {
    let params = &model.params;
    let h = model.config.hidden;
    let n = input.node_count;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let emb = embed_statements(&mut tape, params, &bound, &input.tokens);
    let mut state = LstmState::zeros(&mut tape, n, h);
    for _ in 1..=input.step_budget {
        let proposal = lstm_step(&mut tape, params, &bound, &state, emb, h);
        let msg = typed_messages(&mut tape, params, &bound, input, proposal.h2);
        let mixed = gru_update(&mut tape, params, &bound, proposal.h2, msg, h);
        state = LstmState {
            h1: proposal.h1,
            c1: proposal.c1,
            h2: mixed,
            c2: proposal.c2,
        };
    }
    let h_final = tape.row_gather(state.h2, vec![input.exit]);
    finish(tape, params, bound, h_final, input, None)
}
