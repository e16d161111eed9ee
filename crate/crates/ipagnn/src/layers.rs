//! Neural building blocks shared by every model: the statement embedding,
//! the two-layer LSTM cell, a gated (GRU) update, the output head with its
//! cross-entropy loss, and Adam.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{Element, Tape, Tensor, ValueId};
use crate::lang::{StatementTuple, INDENT_VOCAB, OPERAND_VOCAB, OP_VOCAB, VAR_VOCAB};

/// Number of output classes: the final `v0 mod 1000`.
pub const NUM_CLASSES: usize = 1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayerError {
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGrad { name: String },
    #[error("gradient count {got} does not match parameter count {want}")]
    GradCountMismatch { got: usize, want: usize },
}

/// Named parameter tensors with a stable iteration order.
#[derive(Clone, Debug)]
pub struct Params<E> {
    names: Vec<String>,
    tensors: Vec<Tensor<E>>,
    index: HashMap<String, usize>,
}

impl<E: Element> Default for Params<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> Params<E> {
    pub fn new() -> Self {
        Params {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<E>) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter {name}"
        );
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get(&self, name: &str) -> &Tensor<E> {
        &self.tensors[self.index_of(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<E> {
        let i = self.index_of(name);
        &mut self.tensors[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, i: usize) -> &Tensor<E> {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<E> {
        &mut self.tensors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<E>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    /// Total scalar count across all parameters.
    pub fn value_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Inserts every parameter as a tape leaf, in registry order.
    pub fn bind(&self, tape: &mut Tape<E>) -> BoundParams {
        BoundParams {
            ids: self.tensors.iter().map(|t| tape.leaf(t.clone())).collect(),
        }
    }
}

/// Tape handles for one forward pass over a parameter set.
pub struct BoundParams {
    pub ids: Vec<ValueId>,
}

impl BoundParams {
    pub fn id<E: Element>(&self, params: &Params<E>, name: &str) -> ValueId {
        self.ids[params.index_of(name)]
    }

    /// Gradients in registry order; zeros where a parameter was unused.
    pub fn grads<E: Element>(&self, params: &Params<E>, tape: &Tape<E>) -> Vec<Tensor<E>> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                tape.grad(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(params.tensor(i).shape()))
            })
            .collect()
    }
}

/// Uniform init scaled by the inverse square root of fan-in.
pub fn uniform_init<E: Element>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<E> {
    let scale = 1.0 / (fan_in as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| E::from_f64(rng.random_range(-scale..scale)))
        .collect();
    Tensor::from_vec(shape, data)
}

// ---------------------------------------------------------------------------
// Statement embedding

/// Registers the four token tables (width `H/4` each) and the projection.
pub fn init_embed_params<E: Element>(params: &mut Params<E>, rng: &mut ChaCha8Rng, h: usize) {
    assert!(h.is_multiple_of(4) && h > 0, "hidden width {h} must be a multiple of 4");
    let e = h / 4;
    params.insert("embed.indent", uniform_init(rng, &[INDENT_VOCAB, e], e));
    params.insert("embed.op", uniform_init(rng, &[OP_VOCAB, e], e));
    params.insert("embed.var", uniform_init(rng, &[VAR_VOCAB, e], e));
    params.insert("embed.operand", uniform_init(rng, &[OPERAND_VOCAB, e], e));
    params.insert("embed.proj.w", uniform_init(rng, &[h, h], h));
    params.insert("embed.proj.b", Tensor::zeros(&[h]));
}

/// Embeds every statement tuple: the four field embeddings are concatenated
/// and projected to width `H`. Mask tokens hit their own learned rows.
pub fn embed_statements<E: Element>(
    tape: &mut Tape<E>,
    params: &Params<E>,
    bound: &BoundParams,
    tuples: &[StatementTuple],
) -> ValueId {
    let indent_rows: Vec<usize> = tuples.iter().map(|t| t.indent as usize).collect();
    let op_rows: Vec<usize> = tuples.iter().map(|t| t.op as usize).collect();
    let var_rows: Vec<usize> = tuples.iter().map(|t| t.var as usize).collect();
    let operand_rows: Vec<usize> = tuples.iter().map(|t| t.operand as usize).collect();
    let ind = tape.row_gather(bound.id(params, "embed.indent"), indent_rows);
    let op = tape.row_gather(bound.id(params, "embed.op"), op_rows);
    let var = tape.row_gather(bound.id(params, "embed.var"), var_rows);
    let opr = tape.row_gather(bound.id(params, "embed.operand"), operand_rows);
    let a = tape.concat1(ind, op);
    let b = tape.concat1(var, opr);
    let cat = tape.concat1(a, b);
    let proj = tape.matmul(cat, bound.id(params, "embed.proj.w"));
    tape.add_row(proj, bound.id(params, "embed.proj.b"))
}

// ---------------------------------------------------------------------------
// Two-layer LSTM

/// Per-layer weights over `(input | hidden)` with gate order `i f g o`;
/// the forget-gate bias starts at 1.
pub fn init_lstm_params<E: Element>(params: &mut Params<E>, rng: &mut ChaCha8Rng, h: usize) {
    for layer in 1..=2 {
        params.insert(
            &format!("lstm.l{layer}.w"),
            uniform_init(rng, &[2 * h, 4 * h], 2 * h),
        );
        let mut bias = Tensor::zeros(&[4 * h]);
        for v in &mut bias.data_mut()[h..2 * h] {
            *v = E::one();
        }
        params.insert(&format!("lstm.l{layer}.b"), bias);
    }
}

/// All four recurrent components, each `[N, H]`.
#[derive(Clone, Copy)]
pub struct LstmState {
    pub h1: ValueId,
    pub c1: ValueId,
    pub h2: ValueId,
    pub c2: ValueId,
}

impl LstmState {
    pub fn zeros<E: Element>(tape: &mut Tape<E>, n: usize, h: usize) -> Self {
        LstmState {
            h1: tape.leaf(Tensor::zeros(&[n, h])),
            c1: tape.leaf(Tensor::zeros(&[n, h])),
            h2: tape.leaf(Tensor::zeros(&[n, h])),
            c2: tape.leaf(Tensor::zeros(&[n, h])),
        }
    }

    pub fn components(&self) -> [ValueId; 4] {
        [self.h1, self.c1, self.h2, self.c2]
    }

    pub fn from_components(c: [ValueId; 4]) -> Self {
        LstmState {
            h1: c[0],
            c1: c[1],
            h2: c[2],
            c2: c[3],
        }
    }
}

fn lstm_cell<E: Element>(
    tape: &mut Tape<E>,
    w: ValueId,
    b: ValueId,
    input: ValueId,
    h: ValueId,
    c: ValueId,
    width: usize,
) -> (ValueId, ValueId) {
    let xh = tape.concat1(input, h);
    let z = tape.matmul(xh, w);
    let z = tape.add_row(z, b);
    let i = tape.slice_cols(z, 0, width);
    let i = tape.sigmoid(i);
    let f = tape.slice_cols(z, width, 2 * width);
    let f = tape.sigmoid(f);
    let g = tape.slice_cols(z, 2 * width, 3 * width);
    let g = tape.tanh(g);
    let o = tape.slice_cols(z, 3 * width, 4 * width);
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_new = tape.add(fc, ig);
    let c_act = tape.tanh(c_new);
    let h_new = tape.mul(o, c_act);
    (h_new, c_new)
}

/// Advances the stacked cell one step for every row of `input`. The exposed
/// output is the top-layer hidden vector (`.h2` of the result).
pub fn lstm_step<E: Element>(
    tape: &mut Tape<E>,
    params: &Params<E>,
    bound: &BoundParams,
    state: &LstmState,
    input: ValueId,
    h: usize,
) -> LstmState {
    let (h1, c1) = lstm_cell(
        tape,
        bound.id(params, "lstm.l1.w"),
        bound.id(params, "lstm.l1.b"),
        input,
        state.h1,
        state.c1,
        h,
    );
    let (h2, c2) = lstm_cell(
        tape,
        bound.id(params, "lstm.l2.w"),
        bound.id(params, "lstm.l2.b"),
        h1,
        state.h2,
        state.c2,
        h,
    );
    LstmState { h1, c1, h2, c2 }
}

// ---------------------------------------------------------------------------
// Gated (GRU) update

pub fn init_gru_params<E: Element>(params: &mut Params<E>, rng: &mut ChaCha8Rng, h: usize) {
    params.insert("gru.gates.w", uniform_init(rng, &[2 * h, 2 * h], 2 * h));
    params.insert("gru.gates.b", Tensor::zeros(&[2 * h]));
    params.insert("gru.cand.w", uniform_init(rng, &[2 * h, h], 2 * h));
    params.insert("gru.cand.b", Tensor::zeros(&[h]));
}

/// `out = z*h + (1-z)*candidate`: the update gate at 1 keeps the old state,
/// at 0 takes the candidate.
pub fn gru_update<E: Element>(
    tape: &mut Tape<E>,
    params: &Params<E>,
    bound: &BoundParams,
    h_prev: ValueId,
    message: ValueId,
    h: usize,
) -> ValueId {
    let hm = tape.concat1(h_prev, message);
    let zr = tape.matmul(hm, bound.id(params, "gru.gates.w"));
    let zr = tape.add_row(zr, bound.id(params, "gru.gates.b"));
    let zr = tape.sigmoid(zr);
    let z = tape.slice_cols(zr, 0, h);
    let r = tape.slice_cols(zr, h, 2 * h);
    let rh = tape.mul(r, h_prev);
    let rhm = tape.concat1(rh, message);
    let cand = tape.matmul(rhm, bound.id(params, "gru.cand.w"));
    let cand = tape.add_row(cand, bound.id(params, "gru.cand.b"));
    let cand = tape.tanh(cand);
    let zh = tape.mul(z, h_prev);
    let neg_z = tape.scale(z, -E::one());
    let rows = tape.value(z).rows();
    let ones = tape.leaf(Tensor::filled(&[rows, h], E::one()));
    let one_minus_z = tape.add(ones, neg_z);
    let zc = tape.mul(one_minus_z, cand);
    tape.add(zh, zc)
}

// ---------------------------------------------------------------------------
// Output head and loss

pub fn init_head_params<E: Element>(params: &mut Params<E>, rng: &mut ChaCha8Rng, h: usize) {
    params.insert("head.w", uniform_init(rng, &[h, NUM_CLASSES], h));
    params.insert("head.b", Tensor::zeros(&[NUM_CLASSES]));
}

/// Logits over the 1000 classes from a `[1, H]` final state.
pub fn output_head<E: Element>(
    tape: &mut Tape<E>,
    params: &Params<E>,
    bound: &BoundParams,
    h_final: ValueId,
) -> ValueId {
    let logits = tape.matmul(h_final, bound.id(params, "head.w"));
    tape.add_row(logits, bound.id(params, "head.b"))
}

/// `-log softmax(logits)[label]`, computed through a stable log-softmax.
pub fn xent_loss<E: Element>(tape: &mut Tape<E>, logits: ValueId, label: u16) -> ValueId {
    assert!(
        (label as usize) < NUM_CLASSES,
        "label {label} out of range 0..{NUM_CLASSES}"
    );
    assert_eq!(tape.value(logits).shape(), &[1, NUM_CLASSES]);
    let ls = tape.log_softmax(logits);
    let picked = tape.gather_elems(ls, vec![(0, label as usize)]);
    let s = tape.sum_all(picked);
    tape.scale(s, -E::one())
}

// ---------------------------------------------------------------------------
// Adam

/// Optimizer state; moments are shaped like their parameters.
#[derive(Clone, Debug)]
pub struct AdamState<E> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor<E>>,
    pub v: Vec<Tensor<E>>,
}

impl<E: Element> AdamState<E> {
    pub fn new(lr: f64, params: &Params<E>) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            v: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }
}

/// One bias-corrected update over every parameter.
// Moments, parameters, and gradients are parallel arrays by index.
#[allow(clippy::needless_range_loop)]
pub fn adam_step<E: Element>(
    opt: &mut AdamState<E>,
    params: &mut Params<E>,
    grads: &[Tensor<E>],
) -> Result<(), LayerError> {
    if grads.len() != params.len() {
        return Err(LayerError::GradCountMismatch {
            got: grads.len(),
            want: params.len(),
        });
    }
    opt.step += 1;
    let bc1 = 1.0 - opt.beta1.powi(opt.step as i32);
    let bc2 = 1.0 - opt.beta2.powi(opt.step as i32);
    let (b1, b2) = (E::from_f64(opt.beta1), E::from_f64(opt.beta2));
    let one_minus_b1 = E::from_f64(1.0 - opt.beta1);
    let one_minus_b2 = E::from_f64(1.0 - opt.beta2);
    let lr = E::from_f64(opt.lr);
    let eps = E::from_f64(opt.eps);
    let inv_bc1 = E::from_f64(1.0 / bc1);
    let inv_bc2 = E::from_f64(1.0 / bc2);

    for i in 0..params.len() {
        let g = &grads[i];
        if !g.all_finite() {
            return Err(LayerError::NonFiniteGrad {
                name: params.names()[i].clone(),
            });
        }
        assert_eq!(
            g.shape(),
            params.tensor(i).shape(),
            "gradient shape mismatch for {}",
            params.names()[i]
        );
        let m = opt.m[i].data_mut();
        let v = opt.v[i].data_mut();
        let p = params.tensor_mut(i).data_mut();
        for j in 0..p.len() {
            let gj = g.data()[j];
            m[j] = b1 * m[j] + one_minus_b1 * gj;
            v[j] = b2 * v[j] + one_minus_b2 * gj * gj;
            let m_hat = m[j] * inv_bc1;
            let v_hat = v[j] * inv_bc2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
