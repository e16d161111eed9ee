//! The reference interpreter: ground-truth execution over the control flow
//! graph, recording every visited node. Values are unbounded integers and
//! reductions use the mathematical (always non-negative) modulus, so the
//! target class stays in `0..=999` even when `v0` goes negative.

use num_bigint::BigInt;
use num_integer::Integer;
use thiserror::Error;

use crate::cfg::ControlFlowGraph;
use crate::lang::{AugOp, Cmp, LineKind, Program, Var, VAR_COUNT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterpError {
    /// The grammar guarantees termination, so hitting the limit signals an
    /// interpreter or graph construction bug.
    #[error("execution exceeded the step limit of {limit}")]
    StepLimitExceeded { limit: usize },
    #[error("line {line}: variable {var} read before assignment")]
    UndefinedVariable { var: Var, line: usize },
}

/// Variable bindings for `v0..v9`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    values: [Option<BigInt>; VAR_COUNT],
}

impl Environment {
    pub fn get(&self, var: Var) -> Option<&BigInt> {
        self.values[var.0 as usize].as_ref()
    }

    pub fn set(&mut self, var: Var, value: BigInt) {
        self.values[var.0 as usize] = Some(value);
    }

    /// Defined variables in index order.
    pub fn defined(&self) -> impl Iterator<Item = (Var, &BigInt)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (Var(i as u8), v)))
    }
}

/// The outcome of running a program to its exit line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionResult {
    pub env: Environment,
    /// Every node the instruction pointer visited, starting at 0 and ending
    /// at the exit node.
    pub trace: Vec<usize>,
    /// Final `v0` reduced to the class label `0..=999`.
    pub target: u16,
}

/// Final `v0` reduced to its class label with the mathematical modulus.
pub fn target_of(v0: &BigInt) -> u16 {
    let m = v0.mod_floor(&BigInt::from(1000));
    let digits = m.to_u64_digits().1;
    digits.first().copied().unwrap_or(0) as u16
}

fn cond_holds(cmp: Cmp, lhs: &BigInt, rhs: &BigInt) -> bool {
    match cmp {
        Cmp::Gt => lhs > rhs,
        Cmp::Lt => lhs < rhs,
        Cmp::Ge => lhs >= rhs,
        Cmp::Le => lhs <= rhs,
    }
}

/// Runs a program over its control flow graph. `step_limit` is a safety net
/// only; `None` applies a generous default.
pub fn execute(
    p: &Program,
    g: &ControlFlowGraph,
    step_limit: Option<usize>,
) -> Result<ExecutionResult, InterpError> {
    let limit = step_limit.unwrap_or(1_000_000);
    let ten = BigInt::from(10);
    let mut env = Environment::default();
    let mut trace = Vec::new();
    let mut node = 0usize;

    loop {
        if trace.len() >= limit {
            return Err(InterpError::StepLimitExceeded { limit });
        }
        trace.push(node);
        let line = p.line(node);
        let next = match line.kind {
            LineKind::Exit => break,
            LineKind::Assign { var, value } => {
                env.set(var, BigInt::from(value));
                g.out_list(node)[0]
            }
            LineKind::AugAssign { op, var, operand } => {
                let current = env
                    .get(var)
                    .ok_or(InterpError::UndefinedVariable { var, line: node })?;
                let rhs = BigInt::from(operand);
                let updated = match op {
                    AugOp::Add => current + rhs,
                    AugOp::Sub => current - rhs,
                    AugOp::Mul => current * rhs,
                };
                env.set(var, updated);
                g.out_list(node)[0]
            }
            LineKind::While { var, operand } => {
                let value = env
                    .get(var)
                    .ok_or(InterpError::UndefinedVariable { var, line: node })?;
                if *value > BigInt::from(operand) {
                    g.out_list(node)[0]
                } else {
                    g.out_list(node)[1]
                }
            }
            LineKind::If { cond } => {
                let v0 = env.get(Var(0)).ok_or(InterpError::UndefinedVariable {
                    var: Var(0),
                    line: node,
                })?;
                let lhs = v0.mod_floor(&ten);
                if cond_holds(cond.cmp, &lhs, &BigInt::from(cond.operand)) {
                    g.out_list(node)[0]
                } else {
                    g.out_list(node)[1]
                }
            }
            LineKind::Else | LineKind::Pass | LineKind::Break | LineKind::Continue => {
                g.out_list(node)[0]
            }
        };
        node = next;
    }

    let target = target_of(env.get(Var(0)).expect("v0 assigned on line 0"));
    Ok(ExecutionResult { env, trace, target })
}
