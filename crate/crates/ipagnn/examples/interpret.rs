//! Runs the reference interpreter over a branching program for several
//! initial values, printing the final environment, target class, and the
//! visited-node trace.
//!
//! ```bash
//! cargo run --release -p ipagnn --example interpret
//! ```

use ipagnn::cfg::build_cfg;
use ipagnn::interp::execute;
use ipagnn::lang::{parse, render, LineKind, Var};

const SOURCE: &str = "v0 = 407
if v0 % 10 < 3:
  v0 += 4
else:
  v0 -= 2
";

fn main() {
    for init in [407u16, 412, 999] {
        let mut program = parse(SOURCE).unwrap();
        program.lines[0].kind = LineKind::Assign {
            var: Var(0),
            value: init,
        };
        let graph = build_cfg(&program).unwrap();
        let result = execute(&program, &graph, None).unwrap();
        println!("=== v0 = {init} ===");
        print!("{}", render(&program));
        for (var, value) in result.env.defined() {
            println!("{var} = {value}");
        }
        println!("target = {}", result.target);
        println!(
            "trace  = {}",
            result
                .trace
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
        println!();
    }
}
