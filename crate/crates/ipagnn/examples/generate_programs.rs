//! Samples programs from the weighted grammar at several exact lengths and
//! shows the desugared source next to its token tuples.
//!
//! ```bash
//! cargo run --release -p ipagnn --example generate_programs
//! ```

use ipagnn::lang::{
    desugar, op_token_name, render, sample_program, tokenize, SamplerLimits, Weights,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for lines in [3, 6, 10] {
        let limits = SamplerLimits::with_lines(lines);
        let raw = sample_program(&mut rng, &limits).expect("default weights fill any budget");
        let program = desugar(&raw, &mut rng).expect("nesting is capped");
        println!("=== {lines} lines ===");
        print!("{}", render(&program));
        println!("--- tokens (indent, op, var, operand) ---");
        for (n, t) in tokenize(&program).iter().enumerate() {
            println!(
                "{n:>3}: ({}, {:>8}, {:>4}, {:>4})",
                t.indent,
                op_token_name(t.op),
                t.var,
                t.operand
            );
        }
        println!();
    }

    // Zeroing the control-flow weights yields pure expression chains.
    let straight = SamplerLimits {
        lines: 5,
        weights: Weights {
            if_: 0.0,
            if_else: 0.0,
            repeat: 0.0,
            continue_: 0.0,
            break_: 0.0,
            pass: 0.0,
            ..Weights::default()
        },
        ..SamplerLimits::with_lines(5)
    };
    let raw = sample_program(&mut rng, &straight).unwrap();
    let program = desugar(&raw, &mut rng).unwrap();
    println!("=== straight-line only ===");
    print!("{}", render(&program));
}
