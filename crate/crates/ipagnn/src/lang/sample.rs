//! Weighted random program generation. The sampler fills an exact desugared
//! line budget, so callers control complexity directly; `break`/`continue`
//! are only placed where every later statement stays reachable.

use rand::Rng;
use thiserror::Error;

use super::{AugOp, Cmp, Cond, RawProgram, RawStatement, MAX_INIT, MAX_OPERAND};

/// Relative production weights. Entries set to zero are never sampled.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Weights {
    pub expr: f64,
    pub if_: f64,
    pub if_else: f64,
    pub repeat: f64,
    pub continue_: f64,
    pub break_: f64,
    pub pass: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            expr: 6.0,
            if_: 2.0,
            if_else: 1.0,
            repeat: 2.0,
            continue_: 0.3,
            break_: 0.3,
            pass: 0.3,
        }
    }
}

/// Limits governing one sampled program.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerLimits {
    /// Desugared line count excluding the exit line (the program's
    /// complexity). Must be at least 2: the `v0 = M` line plus one statement.
    pub lines: usize,
    /// Deepest indent level a statement may occupy.
    pub max_depth: usize,
    pub weights: Weights,
    /// Whole-program retries before giving up when the weights cannot fill
    /// the budget.
    pub max_retries: usize,
}

impl SamplerLimits {
    pub fn with_lines(lines: usize) -> Self {
        SamplerLimits {
            lines,
            max_depth: 4,
            weights: Weights::default(),
            max_retries: 64,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("line budget must be at least 2, got {0}")]
    BudgetTooSmall(usize),
    #[error("production weights cannot fill a budget of {lines} lines after {retries} retries")]
    UnattainableLimits { lines: usize, retries: usize },
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Expr,
    Pass,
    Continue,
    Break,
    If,
    IfElse,
    Repeat,
}

struct Ctx<'a, R: Rng> {
    rng: &'a mut R,
    weights: Weights,
    max_depth: usize,
}

/// Samples a program whose desugared complexity equals `limits.lines`
/// exactly. Deterministic in the rng state.
pub fn sample_program(rng: &mut impl Rng, limits: &SamplerLimits) -> Result<RawProgram, SampleError> {
    if limits.lines < 2 {
        return Err(SampleError::BudgetTooSmall(limits.lines));
    }
    let mut ctx = Ctx {
        rng,
        weights: limits.weights,
        max_depth: limits.max_depth,
    };
    for _ in 0..limits.max_retries.max(1) {
        let init = ctx.rng.random_range(0..=MAX_INIT);
        if let Some(body) = sample_block(&mut ctx, limits.lines - 1, 0, false) {
            let program = RawProgram { init, body };
            debug_assert_eq!(program.complexity(), limits.lines);
            return Ok(program);
        }
    }
    Err(SampleError::UnattainableLimits {
        lines: limits.lines,
        retries: limits.max_retries,
    })
}

/// Samples a block consuming exactly `budget` desugared lines, or `None`
/// when no affordable production has positive weight.
fn sample_block<R: Rng>(
    ctx: &mut Ctx<R>,
    budget: usize,
    indent: usize,
    in_loop: bool,
) -> Option<Vec<RawStatement>> {
    debug_assert!(budget >= 1);
    let mut out = Vec::new();
    let mut remaining = budget;
    while remaining > 0 {
        let kind = choose_kind(ctx, remaining, indent, in_loop)?;
        match kind {
            Kind::Expr => {
                out.push(RawStatement::Expr {
                    op: random_aug_op(ctx.rng),
                    operand: ctx.rng.random_range(0..=MAX_OPERAND),
                });
                remaining -= 1;
            }
            Kind::Pass => {
                out.push(RawStatement::Pass);
                remaining -= 1;
            }
            Kind::Continue => {
                out.push(RawStatement::Continue);
                remaining -= 1;
            }
            Kind::Break => {
                out.push(RawStatement::Break);
                remaining -= 1;
            }
            Kind::If => {
                let size = ctx.rng.random_range(2..=remaining);
                let body = sample_block(ctx, size - 1, indent + 1, in_loop)?;
                out.push(RawStatement::If {
                    cond: random_cond(ctx.rng),
                    body,
                });
                remaining -= size;
            }
            Kind::IfElse => {
                let size = ctx.rng.random_range(4..=remaining);
                let is_final = size == remaining;
                let stmt = sample_if_else(ctx, size, indent, in_loop, is_final)?;
                out.push(stmt);
                remaining -= size;
            }
            Kind::Repeat => {
                let size = ctx.rng.random_range(4..=remaining);
                let body = sample_block(ctx, size - 3, indent + 1, true)?;
                out.push(RawStatement::Repeat {
                    count: ctx.rng.random_range(0..=MAX_OPERAND),
                    body,
                });
                remaining -= size;
            }
        }
    }
    Some(out)
}

/// An if/else that is not the last statement of its block must leave at
/// least one arm falling through, otherwise the next statement would be
/// unreachable in the control flow graph.
fn sample_if_else<R: Rng>(
    ctx: &mut Ctx<R>,
    size: usize,
    indent: usize,
    in_loop: bool,
    is_final: bool,
) -> Option<RawStatement> {
    for attempt in 0..8 {
        let then_size = ctx.rng.random_range(1..=size - 3);
        let else_size = size - 2 - then_size;
        let then_body = sample_block(ctx, then_size, indent + 1, in_loop)?;
        let mut else_body = sample_block(ctx, else_size, indent + 1, in_loop)?;
        let cond = random_cond(ctx.rng);
        let falls = super::block_falls_through(&then_body) || super::block_falls_through(&else_body);
        if is_final || falls {
            return Some(RawStatement::IfElse {
                cond,
                then_body,
                else_body,
            });
        }
        if attempt == 7 {
            force_fall_through(&mut else_body);
            return Some(RawStatement::IfElse {
                cond,
                then_body,
                else_body,
            });
        }
    }
    unreachable!()
}

fn force_fall_through(block: &mut [RawStatement]) {
    match block.last_mut() {
        Some(stmt @ (RawStatement::Break | RawStatement::Continue)) => {
            *stmt = RawStatement::Pass;
        }
        Some(RawStatement::IfElse { else_body, .. }) => force_fall_through(else_body),
        _ => {}
    }
}

fn choose_kind<R: Rng>(
    ctx: &mut Ctx<R>,
    remaining: usize,
    indent: usize,
    in_loop: bool,
) -> Option<Kind> {
    let w = ctx.weights;
    let mut candidates: Vec<(Kind, f64)> = vec![(Kind::Expr, w.expr), (Kind::Pass, w.pass)];
    // Jumps only fill the final line of a block so that everything after
    // them stays reachable.
    if in_loop && remaining == 1 {
        candidates.push((Kind::Continue, w.continue_));
        candidates.push((Kind::Break, w.break_));
    }
    if indent < ctx.max_depth {
        if remaining >= 2 {
            candidates.push((Kind::If, w.if_));
        }
        if remaining >= 4 {
            candidates.push((Kind::IfElse, w.if_else));
            candidates.push((Kind::Repeat, w.repeat));
        }
    }
    candidates.retain(|(_, weight)| *weight > 0.0);
    let total: f64 = candidates.iter().map(|(_, w)| *w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut pick = ctx.rng.random_range(0.0..total);
    for (kind, weight) in &candidates {
        if pick < *weight {
            return Some(*kind);
        }
        pick -= *weight;
    }
    Some(candidates.last().unwrap().0)
}

fn random_aug_op(rng: &mut impl Rng) -> AugOp {
    match rng.random_range(0..3) {
        0 => AugOp::Add,
        1 => AugOp::Sub,
        _ => AugOp::Mul,
    }
}

fn random_cond(rng: &mut impl Rng) -> Cond {
    let cmp = match rng.random_range(0..4) {
        0 => Cmp::Gt,
        1 => Cmp::Lt,
        2 => Cmp::Ge,
        _ => Cmp::Le,
    };
    Cond {
        cmp,
        operand: rng.random_range(0..=MAX_OPERAND),
    }
}
