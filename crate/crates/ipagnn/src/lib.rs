//! Learning to execute a small imperative language with instruction-pointer
//! attention.
//!
//! The crate covers the full pipeline:
//!
//! - [`lang`] — sample, desugar, render, parse, and tokenize programs of the
//!   restricted grammar (assignments, `v0`-conditioned branches, counted
//!   `while` loops).
//! - [`cfg`] — statement-level control flow graphs, typed edges, and the
//!   per-program step budget that bounds model execution.
//! - [`interp`] — the reference interpreter producing ground-truth targets
//!   and traces.
//! - [`data`] — dataset generation split by program complexity, statement
//!   masking for the partial-execution task, and the JSONL record format.
//! - [`autodiff`] — a minimal tape-based reverse-mode engine over dense
//!   tensors.
//! - [`layers`] — embeddings, the two-layer LSTM cell, a GRU update, output
//!   head, cross-entropy, and Adam.
//! - [`models`] — the IPA-GNN and its six comparison models.
//! - [`harness`] — training, sweeps, length-stratified evaluation, and
//!   attention-matrix export.
//!
//! Each capability has a runnable demo under `examples/`; the `ipagnn` binary
//! exposes the same pipeline as subcommands (`gen`, `run`, `cfg`, `mask`,
//! `train`, `sweep`, `eval`, `attn`).

pub mod autodiff;
pub mod cfg;
pub mod cli;
pub mod data;
pub mod harness;
pub mod interp;
pub mod lang;
pub mod layers;
pub mod models;

pub use lang::{Program, RawProgram, StatementTuple};
