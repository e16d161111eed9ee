//! The soft-instruction-pointer forward pass, shared by the full model and
//! its execute-ablated variant.
//!
//! Per step, every node proposes a next state from its own statement; a
//! two-output dense layer turns the proposal into a branch distribution over
//! the node's successors; proposals and probability mass then flow along the
//! forward edges, each edge weighted by (source pointer mass) x (branch
//! probability). Single-successor edges carry weight one, so the exit node's
//! self-loop keeps parked mass under the usual update.

use crate::autodiff::{Element, Tape, Tensor, ValueId};
use crate::layers::{embed_statements, gru_update, lstm_step, LstmState};

use super::input::ModelInput;
use super::{finish, Forward, Model, ModelError};

enum NodeState {
    Lstm(LstmState),
    Single(ValueId),
}

/// Per-step values of a soft-pointer run, for inspection and tests.
#[derive(Clone, Debug, Default)]
pub struct SoftTrajectory {
    /// Pointer distribution per step, rows `t = 0..=T`.
    pub pointers: Vec<Vec<f64>>,
    /// Top-layer hidden matrix (`[N][H]`) after each step `t = 1..=T`.
    pub top_hidden: Vec<Vec<Vec<f64>>>,
}

/// Forward pass for the soft-pointer family. With `gnn_execute` false the
/// per-node update is the two-layer LSTM over the statement embedding and
/// all four recurrent components are routed; with it true the update is a
/// gated transformation of a single state vector initialized from the
/// embeddings.
pub(super) fn forward_soft_ip<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
    want_attention: bool,
    gnn_execute: bool,
) -> Result<Forward<E>, ModelError> {
    forward_soft_ip_recorded(model, input, want_attention, gnn_execute, None)
}

pub(super) fn forward_soft_ip_recorded<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
    want_attention: bool,
    gnn_execute: bool,
    mut recorder: Option<&mut SoftTrajectory>,
) -> Result<Forward<E>, ModelError> {
    let h = model.config.hidden;
    let n = input.node_count;
    let params = &model.params;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let emb = embed_statements(&mut tape, params, &bound, &input.tokens);

    let mut pointer_init = Tensor::zeros(&[n, 1]);
    pointer_init.data_mut()[0] = E::one();
    let mut pointer = tape.leaf(pointer_init);
    let mut state = if gnn_execute {
        NodeState::Single(emb)
    } else {
        NodeState::Lstm(LstmState::zeros(&mut tape, n, h))
    };

    let mut attention = want_attention.then(Vec::new);
    if let Some(rows) = attention.as_mut() {
        rows.push(pointer_row(&tape, pointer));
    }
    if let Some(rec) = recorder.as_deref_mut() {
        rec.pointers.push(pointer_row(&tape, pointer));
    }

    let branch_w = bound.id(params, "branch.w");
    let branch_b = bound.id(params, "branch.b");
    let single_edges = input.edge_src.len() - input.branch_pairs.len();

    for t in 1..=input.step_budget {
        // State proposals per node.
        let (components, branch_input): (Vec<ValueId>, ValueId) = match &state {
            NodeState::Lstm(s) => {
                let next = lstm_step(&mut tape, params, &bound, s, emb, h);
                (next.components().to_vec(), next.h2)
            }
            NodeState::Single(s) => {
                let a = gru_update(&mut tape, params, &bound, *s, emb, h);
                (vec![a], a)
            }
        };

        // Branch decisions: softmax over (true, false) per node; rows of
        // single-successor nodes are computed but never gathered.
        let blogits = tape.matmul(branch_input, branch_w);
        let blogits = tape.add_row(blogits, branch_b);
        let branch_probs = tape.softmax(blogits);
        let edge_weight_parts = if input.branch_pairs.is_empty() {
            tape.leaf(Tensor::filled(&[single_edges, 1], E::one()))
        } else if single_edges == 0 {
            tape.gather_elems(branch_probs, input.branch_pairs.clone())
        } else {
            let branchy = tape.gather_elems(branch_probs, input.branch_pairs.clone());
            let ones = tape.leaf(Tensor::filled(&[single_edges, 1], E::one()));
            tape.concat0(branchy, ones)
        };

        // Edge weights: pointer mass at the source times branch probability.
        let pointer_src = tape.row_gather(pointer, input.edge_src.clone());
        let weights = tape.mul(pointer_src, edge_weight_parts);
        let new_pointer = tape.row_scatter_add(weights, input.edge_dst.clone(), n);

        // Route every state component along the weighted edges.
        let routed: Vec<ValueId> = components
            .iter()
            .map(|&c| {
                let gathered = tape.row_gather(c, input.edge_src.clone());
                let weighted = tape.mul_col(gathered, weights);
                tape.row_scatter_add(weighted, input.edge_dst.clone(), n)
            })
            .collect();
        state = match state {
            NodeState::Lstm(_) => NodeState::Lstm(LstmState::from_components([
                routed[0], routed[1], routed[2], routed[3],
            ])),
            NodeState::Single(_) => NodeState::Single(routed[0]),
        };
        pointer = new_pointer;

        if let Some(node) = tape
            .value(pointer)
            .data()
            .iter()
            .position(|v| !v.is_finite())
        {
            return Err(ModelError::NonFinite { step: t, node });
        }
        if let Some(rows) = attention.as_mut() {
            rows.push(pointer_row(&tape, pointer));
        }
        if let Some(rec) = recorder.as_deref_mut() {
            rec.pointers.push(pointer_row(&tape, pointer));
            let top = match &state {
                NodeState::Lstm(s) => s.h2,
                NodeState::Single(s) => *s,
            };
            let matrix = tape.value(top);
            rec.top_hidden.push(
                (0..matrix.rows())
                    .map(|r| matrix.row(r).iter().map(|&v| Element::to_f64(v)).collect())
                    .collect(),
            );
        }
    }

    let top = match &state {
        NodeState::Lstm(s) => s.h2,
        NodeState::Single(s) => *s,
    };
    let h_final = tape.row_gather(top, vec![input.exit]);
    finish(tape, params, bound, h_final, input, attention)
}

fn pointer_row<E: Element>(tape: &Tape<E>, pointer: ValueId) -> Vec<f64> {
    tape.value(pointer)
        .data()
        .iter()
        .map(|&v| Element::to_f64(v))
        .collect()
}

/// Soft pointer values of a forward pass, one row per step including t = 0.
pub fn attention_matrix<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let fwd = model.forward(input, true)?;
    Ok(fwd.attention.expect("attention requested"))
}

/// Runs the soft-pointer forward pass capturing per-step pointer and state
/// values. Valid for the two soft-pointer kinds.
pub fn soft_ip_trajectory<E: Element>(
    model: &Model<E>,
    input: &ModelInput,
) -> Result<SoftTrajectory, ModelError> {
    let gnn_execute = match model.config.kind {
        super::ModelKind::IpaGnn => false,
        super::ModelKind::NoExecute => true,
        other => panic!("{} has no soft instruction pointer", other.name()),
    };
    let mut traj = SoftTrajectory::default();
    forward_soft_ip_recorded(model, input, false, gnn_execute, Some(&mut traj))?;
    Ok(traj)
}
