//! Masks one expression statement per record for the partial-execution
//! task, showing which lines are eligible and how the tokens change.
//!
//! ```bash
//! cargo run --release -p ipagnn --example mask_records
//! ```

use ipagnn::data::{make_example, mask_example};
use ipagnn::lang::{op_token_name, Weights};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let record = make_example("demo".into(), 8, Weights::default(), 4, &mut rng).unwrap();
    println!("{}", record.source);
    println!("maskable lines: {:?}", record.maskable_lines());

    let masked = mask_example(&record, &mut rng).unwrap();
    let idx = masked.mask_index.unwrap();
    println!("\nmasked line {idx}; target stays {}", masked.target);
    for (n, (before, after)) in record.tokens.iter().zip(&masked.tokens).enumerate() {
        let marker = if n == idx { "  <- masked" } else { "" };
        println!(
            "{n:>3}: ({}, {:>8}, {:>4}, {:>4})  ->  ({}, {:>8}, {:>4}, {:>4}){marker}",
            before.indent,
            op_token_name(before.op),
            before.var,
            before.operand,
            after.indent,
            op_token_name(after.op),
            after.var,
            after.operand,
        );
    }

    // Masking is uniform over the eligible lines.
    let mut counts = vec![0usize; record.tokens.len()];
    for _ in 0..10_000 {
        let m = mask_example(&record, &mut rng).unwrap();
        counts[m.mask_index.unwrap()] += 1;
    }
    println!("\nchoice counts over 10k maskings: {counts:?}");
}
