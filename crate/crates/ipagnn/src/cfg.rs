//! Statement-level control flow graphs. Each line is a node; successor
//! lists are ordered so index 0 is the true/fallthrough edge and index 1
//! (present only on `if`/`while` lines) is the false edge. The exit node
//! carries a self-loop so bounded model execution always has a step to take.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{LineKind, Program};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    #[error("line {line}: break outside of a loop")]
    BreakOutsideLoop { line: usize },
    #[error("line {line}: continue outside of a loop")]
    ContinueOutsideLoop { line: usize },
}

/// The control flow graph of one desugared program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlFlowGraph {
    out: Vec<Vec<usize>>,
    ins: Vec<Vec<usize>>,
    exit: usize,
}

impl ControlFlowGraph {
    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn exit_index(&self) -> usize {
        self.exit
    }

    /// Ordered successors: `[true_or_fallthrough]` or `[true, false]`.
    pub fn out_list(&self, n: usize) -> &[usize] {
        &self.out[n]
    }

    /// Predecessors in ascending order.
    pub fn in_set(&self, n: usize) -> &[usize] {
        &self.ins[n]
    }

    /// Nodes reachable from node 0, as a bitmap.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &self.out[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen
    }

    /// Forward edges in `(node, slot)` order as `(src, dst, is_true_branch)`.
    pub fn forward_edges(&self) -> Vec<(usize, usize, bool)> {
        let mut edges = Vec::new();
        for (src, outs) in self.out.iter().enumerate() {
            for (slot, &dst) in outs.iter().enumerate() {
                edges.push((src, dst, slot == 0));
            }
        }
        edges
    }
}

/// Builds the graph for a desugared program.
pub fn build_cfg(p: &Program) -> Result<ControlFlowGraph, CfgError> {
    let n = p.node_count();
    let exit = p.exit_index();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    out[exit] = vec![exit];
    wire_block(p, 0, exit, exit, None, &mut out)?;

    let mut ins: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (src, outs) in out.iter().enumerate() {
        for &dst in outs {
            ins[dst].push(src);
        }
    }
    for set in &mut ins {
        set.sort_unstable();
        set.dedup();
    }
    Ok(ControlFlowGraph { out, ins, exit })
}

struct LoopCtx {
    head: usize,
    break_to: usize,
}

/// Returns the first line at or past `start` whose indent is `<=` the indent
/// of `start - 1`'s block, i.e. the end of the block beginning at `start`.
fn block_end(p: &Program, start: usize, indent: u8, limit: usize) -> usize {
    let mut i = start;
    while i < limit && p.line(i).indent > indent {
        i += 1;
    }
    i
}

/// Wires the statements of one block spanning `start..end` (all at the same
/// indent). `follow` is the node control reaches after the block completes.
fn wire_block(
    p: &Program,
    start: usize,
    end: usize,
    follow: usize,
    loop_ctx: Option<&LoopCtx>,
    out: &mut [Vec<usize>],
) -> Result<(), CfgError> {
    let mut i = start;
    while i < end {
        let indent = p.line(i).indent;
        match p.line(i).kind {
            LineKind::Assign { .. }
            | LineKind::AugAssign { .. }
            | LineKind::Pass => {
                let next = if i + 1 < end { i + 1 } else { follow };
                out[i] = vec![next];
                i += 1;
            }
            LineKind::Break => {
                let ctx = loop_ctx.ok_or(CfgError::BreakOutsideLoop { line: i })?;
                out[i] = vec![ctx.break_to];
                i += 1;
            }
            LineKind::Continue => {
                let ctx = loop_ctx.ok_or(CfgError::ContinueOutsideLoop { line: i })?;
                out[i] = vec![ctx.head];
                i += 1;
            }
            LineKind::While { .. } => {
                let body_end = block_end(p, i + 1, indent, end);
                let next = if body_end < end { body_end } else { follow };
                out[i] = vec![i + 1, next];
                let ctx = LoopCtx {
                    head: i,
                    break_to: next,
                };
                wire_block(p, i + 1, body_end, i, Some(&ctx), out)?;
                i = body_end;
            }
            LineKind::If { .. } => {
                let body_end = block_end(p, i + 1, indent, end);
                let has_else = body_end < end
                    && p.line(body_end).indent == indent
                    && p.line(body_end).kind == LineKind::Else;
                if has_else {
                    let else_node = body_end;
                    let else_end = block_end(p, else_node + 1, indent, end);
                    let next = if else_end < end { else_end } else { follow };
                    out[i] = vec![i + 1, else_node];
                    out[else_node] = vec![else_node + 1];
                    wire_block(p, i + 1, body_end, next, loop_ctx, out)?;
                    wire_block(p, else_node + 1, else_end, next, loop_ctx, out)?;
                    i = else_end;
                } else {
                    let next = if body_end < end { body_end } else { follow };
                    out[i] = vec![i + 1, next];
                    wire_block(p, i + 1, body_end, next, loop_ctx, out)?;
                    i = body_end;
                }
            }
            LineKind::Else => {
                // Handled by the matching `if`; reaching one here means the
                // program failed parse-time structure checks.
                unreachable!("dangling else at line {i}");
            }
            LineKind::Exit => {
                i += 1;
            }
        }
    }
    Ok(())
}

/// Edge types over the bidirectional graph used by the GNN family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    TrueForward,
    FalseForward,
    TrueReverse,
    FalseReverse,
}

impl EdgeType {
    pub const ALL: [EdgeType; 4] = [
        EdgeType::TrueForward,
        EdgeType::FalseForward,
        EdgeType::TrueReverse,
        EdgeType::FalseReverse,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypedEdge {
    pub src: usize,
    pub dst: usize,
    pub ty: EdgeType,
}

/// Forward edges (unconditional successors labeled true) plus their
/// reverse transposes.
pub fn typed_edges(g: &ControlFlowGraph) -> Vec<TypedEdge> {
    let forward = g.forward_edges();
    let mut edges = Vec::with_capacity(forward.len() * 2);
    for &(src, dst, is_true) in &forward {
        let ty = if is_true {
            EdgeType::TrueForward
        } else {
            EdgeType::FalseForward
        };
        edges.push(TypedEdge { src, dst, ty });
    }
    for &(src, dst, is_true) in &forward {
        let ty = if is_true {
            EdgeType::TrueReverse
        } else {
            EdgeType::FalseReverse
        };
        edges.push(TypedEdge {
            src: dst,
            dst: src,
            ty,
        });
    }
    edges
}

/// The per-program layer budget: enough steps to traverse every loop body
/// twice, but far fewer than most ground-truth traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepBudget {
    pub total: usize,
    /// Number of enclosing while-loop bodies per line.
    pub loop_nesting: Vec<usize>,
}

/// Computes the step budget: the sum over all nodes of `2^nesting`, plus
/// `2^nesting` again for each while line.
pub fn step_budget(p: &Program, g: &ControlFlowGraph) -> StepBudget {
    debug_assert_eq!(g.node_count(), p.node_count());
    let n = p.node_count();
    let mut nesting = vec![0usize; n];
    for i in 0..n {
        if let LineKind::While { .. } = p.line(i).kind {
            let body_end = block_end(p, i + 1, p.line(i).indent, n);
            for item in nesting.iter_mut().take(body_end).skip(i + 1) {
                *item += 1;
            }
        }
    }
    let mut total = 0usize;
    for (i, &nest) in nesting.iter().enumerate() {
        total += 1 << nest;
        if matches!(p.line(i).kind, LineKind::While { .. }) {
            total += 1 << nest;
        }
    }
    StepBudget {
        total,
        loop_nesting: nesting,
    }
}

/// One line of the adjacency listing emitted by the `cfg` subcommand.
pub fn adjacency_line(g: &ControlFlowGraph, n: usize) -> String {
    let outs = g
        .out_list(n)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let ins = g
        .in_set(n)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let types = match g.out_list(n).len() {
        2 => "true,false",
        _ => "true",
    };
    format!("{n}: out=[{outs}] in=[{ins}] type=[{types}]")
}
