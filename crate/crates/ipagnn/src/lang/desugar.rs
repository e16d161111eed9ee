//! Lowering raw grammar programs to flat line programs. Repeat blocks become
//! a counter initialization, a `while` over the counter, and a leading
//! decrement; an exit line is appended.

use rand::Rng;
use thiserror::Error;

use super::{AugOp, Line, LineKind, Program, RawProgram, RawStatement, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesugarError {
    /// More nested repeats than there are counter variables to hold them.
    /// Sampler limits keep nesting far below this; seeing it means the
    /// limits were bypassed.
    #[error("no unused counter variable available for a repeat nested {depth} deep")]
    CounterExhausted { depth: usize },
}

/// Desugars a raw program. The counter variable for each repeat is chosen
/// uniformly from `v1..v9`, excluding counters still live for enclosing
/// repeats at that point.
pub fn desugar(raw: &RawProgram, rng: &mut impl Rng) -> Result<Program, DesugarError> {
    let mut lines = vec![Line {
        indent: 0,
        kind: LineKind::Assign {
            var: Var(0),
            value: raw.init,
        },
    }];
    let mut live_counters = Vec::new();
    emit_block(&raw.body, 0, &mut live_counters, &mut lines, rng)?;
    lines.push(Line {
        indent: 0,
        kind: LineKind::Exit,
    });
    Ok(Program { lines })
}

fn emit_block(
    block: &[RawStatement],
    indent: u8,
    live_counters: &mut Vec<Var>,
    lines: &mut Vec<Line>,
    rng: &mut impl Rng,
) -> Result<(), DesugarError> {
    for stmt in block {
        match stmt {
            RawStatement::Expr { op, operand } => lines.push(Line {
                indent,
                kind: LineKind::AugAssign {
                    op: *op,
                    var: Var(0),
                    operand: *operand,
                },
            }),
            RawStatement::Pass => lines.push(Line {
                indent,
                kind: LineKind::Pass,
            }),
            RawStatement::Break => lines.push(Line {
                indent,
                kind: LineKind::Break,
            }),
            RawStatement::Continue => lines.push(Line {
                indent,
                kind: LineKind::Continue,
            }),
            RawStatement::If { cond, body } => {
                lines.push(Line {
                    indent,
                    kind: LineKind::If { cond: *cond },
                });
                emit_block(body, indent + 1, live_counters, lines, rng)?;
            }
            RawStatement::IfElse {
                cond,
                then_body,
                else_body,
            } => {
                lines.push(Line {
                    indent,
                    kind: LineKind::If { cond: *cond },
                });
                emit_block(then_body, indent + 1, live_counters, lines, rng)?;
                lines.push(Line {
                    indent,
                    kind: LineKind::Else,
                });
                emit_block(else_body, indent + 1, live_counters, lines, rng)?;
            }
            RawStatement::Repeat { count, body } => {
                let candidates: Vec<Var> = (1..=9)
                    .map(Var)
                    .filter(|v| !live_counters.contains(v))
                    .collect();
                if candidates.is_empty() {
                    return Err(DesugarError::CounterExhausted {
                        depth: live_counters.len(),
                    });
                }
                let counter = candidates[rng.random_range(0..candidates.len())];
                lines.push(Line {
                    indent,
                    kind: LineKind::Assign {
                        var: counter,
                        value: *count,
                    },
                });
                lines.push(Line {
                    indent,
                    kind: LineKind::While {
                        var: counter,
                        operand: 0,
                    },
                });
                lines.push(Line {
                    indent: indent + 1,
                    kind: LineKind::AugAssign {
                        op: AugOp::Sub,
                        var: counter,
                        operand: 1,
                    },
                });
                live_counters.push(counter);
                emit_block(body, indent + 1, live_counters, lines, rng)?;
                live_counters.pop();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{render, Cmp, Cond};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn repeat_becomes_counted_while() {
        let raw = RawProgram {
            init: 100,
            body: vec![RawStatement::Repeat {
                count: 7,
                body: vec![RawStatement::Expr {
                    op: AugOp::Sub,
                    operand: 9,
                }],
            }],
        };
        let p = desugar(&raw, &mut rng(3)).unwrap();
        assert_eq!(p.node_count(), 6);
        let counter = match p.lines[1].kind {
            LineKind::Assign { var, value } => {
                assert_eq!(value, 7);
                var
            }
            other => panic!("expected counter init, got {other:?}"),
        };
        assert!((1..=9).contains(&counter.0));
        assert_eq!(
            p.lines[2].kind,
            LineKind::While {
                var: counter,
                operand: 0
            }
        );
        assert_eq!(
            p.lines[3].kind,
            LineKind::AugAssign {
                op: AugOp::Sub,
                var: counter,
                operand: 1
            }
        );
        assert_eq!(p.lines[3].indent, 1);
        assert_eq!(render(&p).lines().count(), 5);
    }

    #[test]
    fn program_without_repeat_is_unchanged_apart_from_exit() {
        let raw = RawProgram {
            init: 5,
            body: vec![
                RawStatement::Expr {
                    op: AugOp::Add,
                    operand: 3,
                },
                RawStatement::If {
                    cond: Cond {
                        cmp: Cmp::Lt,
                        operand: 4,
                    },
                    body: vec![RawStatement::Pass],
                },
            ],
        };
        let p = desugar(&raw, &mut rng(0)).unwrap();
        assert_eq!(p.node_count(), 5);
        assert_eq!(p.lines[4].kind, LineKind::Exit);
        assert_eq!(p.complexity(), raw.complexity());
    }

    #[test]
    fn nested_repeats_use_distinct_counters() {
        let raw = RawProgram {
            init: 0,
            body: vec![RawStatement::Repeat {
                count: 2,
                body: vec![RawStatement::Repeat {
                    count: 3,
                    body: vec![RawStatement::Expr {
                        op: AugOp::Add,
                        operand: 1,
                    }],
                }],
            }],
        };
        for seed in 0..50 {
            let p = desugar(&raw, &mut rng(seed)).unwrap();
            let counters: Vec<Var> = p
                .lines
                .iter()
                .filter_map(|l| match l.kind {
                    LineKind::While { var, .. } => Some(var),
                    _ => None,
                })
                .collect();
            assert_eq!(counters.len(), 2);
            assert_ne!(counters[0], counters[1], "seed {seed}");
        }
    }

    #[test]
    fn ten_nested_repeats_exhaust_counters() {
        let mut body = vec![RawStatement::Expr {
            op: AugOp::Add,
            operand: 1,
        }];
        for _ in 0..10 {
            body = vec![RawStatement::Repeat { count: 1, body }];
        }
        let raw = RawProgram { init: 0, body };
        let e = desugar(&raw, &mut rng(1)).unwrap_err();
        assert_eq!(e, DesugarError::CounterExhausted { depth: 9 });
    }
}
