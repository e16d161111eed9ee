//! Builds the statement-level control flow graph of a program and prints
//! the adjacency listing, typed edges, and the step budget.
//!
//! ```bash
//! cargo run --release -p ipagnn --example control_flow
//! ```

use ipagnn::cfg::{adjacency_line, build_cfg, step_budget, typed_edges};
use ipagnn::lang::parse;

const SOURCE: &str = "v0 = 23
v1 = 6
while v1 > 0:
  v1 -= 1
  if v0 % 10 <= 3:
    v0 += 4
    v0 *= 6
  v0 -= 1
";

fn main() {
    let program = parse(SOURCE).unwrap();
    println!("{SOURCE}");
    let graph = build_cfg(&program).unwrap();
    for n in 0..graph.node_count() {
        println!("{}", adjacency_line(&graph, n));
    }

    println!("\ntyped edges:");
    for e in typed_edges(&graph) {
        println!("  {} -> {}  {:?}", e.src, e.dst, e.ty);
    }

    let budget = step_budget(&program, &graph);
    println!("\nloop nesting per line: {:?}", budget.loop_nesting);
    println!("step budget T = {}", budget.total);
}
