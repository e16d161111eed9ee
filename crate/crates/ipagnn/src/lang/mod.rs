//! The program language: raw grammar statements, desugared line programs,
//! sampling, text round-tripping, and the 4-tuple statement tokenization.
//!
//! A program starts with `v0 = M` and then manipulates `v0` through augmented
//! assignments, `if v0 % 10 O N:` branches, and counted repeat blocks that
//! desugar to `while` loops over a counter variable drawn from `v1..v9`.

mod desugar;
mod sample;
mod text;
mod tokens;

pub use desugar::{desugar, DesugarError};
pub use sample::{sample_program, SampleError, SamplerLimits, Weights};
pub use text::{parse, render, render_line, ParseError};
pub use tokens::{
    op_token_name, tokenize, StatementTuple, INDENT_NONE, INDENT_VOCAB, OPERAND_MASK,
    OPERAND_NONE, OPERAND_VOCAB, OP_MASK, OP_VOCAB, VAR_MASK, VAR_NONE, VAR_VOCAB,
};
pub use tokens::{
    OP_ADD_ASSIGN, OP_ASSIGN, OP_BREAK, OP_CONTINUE, OP_ELSE, OP_EXIT, OP_IF_GE_MOD,
    OP_IF_GT_MOD, OP_IF_LE_MOD, OP_IF_LT_MOD, OP_MUL_ASSIGN, OP_PASS, OP_SUB_ASSIGN,
    OP_WHILE_GT,
};

/// Number of addressable variables (`v0..v9`).
pub const VAR_COUNT: usize = 10;
/// Largest constant allowed in the initial `v0 = M` line.
pub const MAX_INIT: u16 = 999;
/// Largest operand in expressions, conditions, and repeat counts.
pub const MAX_OPERAND: u16 = 9;
/// Deepest indent level representable in the closed token vocabulary.
/// The sampler's default nesting cap (4) stays below this.
pub const MAX_INDENT: usize = 6;

/// A variable `v0..v9`, stored by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u8);

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Augmented assignment operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugOp {
    Add,
    Sub,
    Mul,
}

impl AugOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AugOp::Add => "+=",
            AugOp::Sub => "-=",
            AugOp::Mul => "*=",
        }
    }
}

/// Comparison operators usable in conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Gt,
    Lt,
    Ge,
    Le,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Gt => ">",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
        }
    }
}

/// A branch condition `v0 % 10 <cmp> <operand>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cond {
    pub cmp: Cmp,
    pub operand: u16,
}

/// A statement of the raw (pre-desugaring) grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawStatement {
    /// `v0 += N`, `v0 -= N`, or `v0 *= N`.
    Expr { op: AugOp, operand: u16 },
    If {
        cond: Cond,
        body: Vec<RawStatement>,
    },
    IfElse {
        cond: Cond,
        then_body: Vec<RawStatement>,
        else_body: Vec<RawStatement>,
    },
    /// Runs `body` exactly `count` times once desugared.
    Repeat {
        count: u16,
        body: Vec<RawStatement>,
    },
    Continue,
    Break,
    Pass,
}

impl RawStatement {
    /// Number of lines this statement occupies after desugaring.
    pub fn desugared_lines(&self) -> usize {
        match self {
            RawStatement::Expr { .. }
            | RawStatement::Continue
            | RawStatement::Break
            | RawStatement::Pass => 1,
            RawStatement::If { body, .. } => 1 + block_lines(body),
            RawStatement::IfElse {
                then_body,
                else_body,
                ..
            } => 2 + block_lines(then_body) + block_lines(else_body),
            // counter init + while header + counter decrement + body
            RawStatement::Repeat { body, .. } => 3 + block_lines(body),
        }
    }

    /// Whether execution can continue past this statement to its successor
    /// in the same block. `break`/`continue` never fall through; an
    /// `if`/`else` pair falls through when either arm does.
    pub fn falls_through(&self) -> bool {
        match self {
            RawStatement::Break | RawStatement::Continue => false,
            RawStatement::IfElse {
                then_body,
                else_body,
                ..
            } => block_falls_through(then_body) || block_falls_through(else_body),
            _ => true,
        }
    }
}

pub(crate) fn block_lines(block: &[RawStatement]) -> usize {
    block.iter().map(RawStatement::desugared_lines).sum()
}

pub(crate) fn block_falls_through(block: &[RawStatement]) -> bool {
    block.last().is_none_or(RawStatement::falls_through)
}

/// A whole program of the raw grammar: `v0 = init` followed by a block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawProgram {
    pub init: u16,
    pub body: Vec<RawStatement>,
}

impl RawProgram {
    /// Total desugared line count excluding the trailing exit line; this is
    /// the complexity measure used to split datasets.
    pub fn complexity(&self) -> usize {
        1 + block_lines(&self.body)
    }
}

/// One desugared line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineKind {
    /// `vK = N` (the initial line and repeat-counter initializations).
    Assign { var: Var, value: u16 },
    /// `vK op= N`.
    AugAssign { op: AugOp, var: Var, operand: u16 },
    /// `while vK > N:`.
    While { var: Var, operand: u16 },
    /// `if v0 % 10 O N:`.
    If { cond: Cond },
    Else,
    Break,
    Continue,
    Pass,
    /// The synthetic final line every control path reaches.
    Exit,
}

/// A desugared line with its indent level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Line {
    pub indent: u8,
    pub kind: LineKind,
}

/// A desugared program: dense line numbers `0..=exit_index`, with the exit
/// line last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub lines: Vec<Line>,
}

impl Program {
    pub fn node_count(&self) -> usize {
        self.lines.len()
    }

    pub fn exit_index(&self) -> usize {
        self.lines.len() - 1
    }

    /// Source line count excluding the exit line.
    pub fn complexity(&self) -> usize {
        self.lines.len() - 1
    }

    pub fn line(&self, n: usize) -> &Line {
        &self.lines[n]
    }
}
