//! The closed 4-tuple tokenization: every line maps to
//! (indent, operation, variable, operand) token ids.

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AugOp, Cmp, LineKind, Program, MAX_INDENT};

pub const OP_ASSIGN: u16 = 0;
pub const OP_ADD_ASSIGN: u16 = 1;
pub const OP_SUB_ASSIGN: u16 = 2;
pub const OP_MUL_ASSIGN: u16 = 3;
pub const OP_WHILE_GT: u16 = 4;
pub const OP_IF_GT_MOD: u16 = 5;
pub const OP_IF_LT_MOD: u16 = 6;
pub const OP_IF_GE_MOD: u16 = 7;
pub const OP_IF_LE_MOD: u16 = 8;
pub const OP_ELSE: u16 = 9;
pub const OP_BREAK: u16 = 10;
pub const OP_CONTINUE: u16 = 11;
pub const OP_PASS: u16 = 12;
pub const OP_EXIT: u16 = 13;
pub const OP_MASK: u16 = 14;
/// Size of the operation vocabulary.
pub const OP_VOCAB: usize = 15;

/// Variable tokens: `v0..v9`, then the none and mask sentinels.
pub const VAR_NONE: u16 = 10;
pub const VAR_MASK: u16 = 11;
pub const VAR_VOCAB: usize = 12;

/// Operand tokens: the literal values `0..=999`, then none and mask.
pub const OPERAND_NONE: u16 = 1000;
pub const OPERAND_MASK: u16 = 1001;
pub const OPERAND_VOCAB: usize = 1002;

/// Indent tokens: levels `0..=MAX_INDENT` plus the exit-line sentinel.
pub const INDENT_NONE: u16 = MAX_INDENT as u16 + 1;
pub const INDENT_VOCAB: usize = MAX_INDENT + 2;

/// The per-line token 4-tuple. Serialized as a compact `[i, op, var, operand]`
/// array in record files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatementTuple {
    pub indent: u16,
    pub op: u16,
    pub var: u16,
    pub operand: u16,
}

impl StatementTuple {
    /// True for `=`, `+=`, `-=`, `*=` lines — the statements eligible for
    /// masking in the partial-execution task.
    pub fn is_expression(&self) -> bool {
        matches!(
            self.op,
            OP_ASSIGN | OP_ADD_ASSIGN | OP_SUB_ASSIGN | OP_MUL_ASSIGN
        )
    }

    /// Replaces the op/var/operand fields with mask tokens, keeping indent.
    pub fn masked(&self) -> Self {
        StatementTuple {
            indent: self.indent,
            op: OP_MASK,
            var: VAR_MASK,
            operand: OPERAND_MASK,
        }
    }

    pub fn in_vocab(&self) -> bool {
        (self.indent as usize) < INDENT_VOCAB
            && (self.op as usize) < OP_VOCAB
            && (self.var as usize) < VAR_VOCAB
            && (self.operand as usize) < OPERAND_VOCAB
    }
}

impl Serialize for StatementTuple {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        t.serialize_element(&self.indent)?;
        t.serialize_element(&self.op)?;
        t.serialize_element(&self.var)?;
        t.serialize_element(&self.operand)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for StatementTuple {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TupleVisitor;
        impl<'de> Visitor<'de> for TupleVisitor {
            type Value = StatementTuple;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [indent, op, var, operand] token array")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let indent = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let op = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                let var = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(2, &self))?;
                let operand = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(3, &self))?;
                Ok(StatementTuple {
                    indent,
                    op,
                    var,
                    operand,
                })
            }
        }
        deserializer.deserialize_tuple(4, TupleVisitor)
    }
}

/// Human-readable name of an op token.
pub fn op_token_name(op: u16) -> &'static str {
    match op {
        OP_ASSIGN => "=",
        OP_ADD_ASSIGN => "+=",
        OP_SUB_ASSIGN => "-=",
        OP_MUL_ASSIGN => "*=",
        OP_WHILE_GT => "while >",
        OP_IF_GT_MOD => "if > %",
        OP_IF_LT_MOD => "if < %",
        OP_IF_GE_MOD => "if >= %",
        OP_IF_LE_MOD => "if <= %",
        OP_ELSE => "else",
        OP_BREAK => "break",
        OP_CONTINUE => "continue",
        OP_PASS => "pass",
        OP_EXIT => "EXIT",
        OP_MASK => "MASK",
        _ => "?",
    }
}

fn if_op_token(cmp: Cmp) -> u16 {
    match cmp {
        Cmp::Gt => OP_IF_GT_MOD,
        Cmp::Lt => OP_IF_LT_MOD,
        Cmp::Ge => OP_IF_GE_MOD,
        Cmp::Le => OP_IF_LE_MOD,
    }
}

fn aug_op_token(op: AugOp) -> u16 {
    match op {
        AugOp::Add => OP_ADD_ASSIGN,
        AugOp::Sub => OP_SUB_ASSIGN,
        AugOp::Mul => OP_MUL_ASSIGN,
    }
}

/// Tokenizes every line of a desugared program, exit line included.
pub fn tokenize(p: &Program) -> Vec<StatementTuple> {
    p.lines
        .iter()
        .map(|line| {
            let indent = line.indent as u16;
            match line.kind {
                LineKind::Assign { var, value } => StatementTuple {
                    indent,
                    op: OP_ASSIGN,
                    var: var.0 as u16,
                    operand: value,
                },
                LineKind::AugAssign { op, var, operand } => StatementTuple {
                    indent,
                    op: aug_op_token(op),
                    var: var.0 as u16,
                    operand,
                },
                LineKind::While { var, operand } => StatementTuple {
                    indent,
                    op: OP_WHILE_GT,
                    var: var.0 as u16,
                    operand,
                },
                LineKind::If { cond } => StatementTuple {
                    indent,
                    op: if_op_token(cond.cmp),
                    var: 0,
                    operand: cond.operand,
                },
                LineKind::Else => StatementTuple {
                    indent,
                    op: OP_ELSE,
                    var: VAR_NONE,
                    operand: OPERAND_NONE,
                },
                LineKind::Break => StatementTuple {
                    indent,
                    op: OP_BREAK,
                    var: VAR_NONE,
                    operand: OPERAND_NONE,
                },
                LineKind::Continue => StatementTuple {
                    indent,
                    op: OP_CONTINUE,
                    var: VAR_NONE,
                    operand: OPERAND_NONE,
                },
                LineKind::Pass => StatementTuple {
                    indent,
                    op: OP_PASS,
                    var: VAR_NONE,
                    operand: OPERAND_NONE,
                },
                LineKind::Exit => StatementTuple {
                    indent: INDENT_NONE,
                    op: OP_EXIT,
                    var: VAR_NONE,
                    operand: OPERAND_NONE,
                },
            }
        })
        .collect()
}
