//! Generates a small complexity-partitioned dataset (train under the
//! threshold, validation exactly at it, exact-length test buckets above it)
//! and prints the manifest plus a sample record.
//!
//! ```bash
//! cargo run --release -p ipagnn --example build_dataset
//! ```

use ipagnn::data::{generate_split, read_records, SplitSpec};

fn main() {
    let dir = std::env::temp_dir().join("ipagnn-example-dataset");
    let spec = SplitSpec {
        train_count: 500,
        valid_count: 100,
        test_buckets: vec![(20, 50), (30, 50)],
        ..SplitSpec::desk(42)
    };
    let manifest = generate_split(&spec, &dir).unwrap();
    println!(
        "wrote {} train / {} valid / {} test records under {}",
        manifest.train_written,
        manifest.valid_written,
        manifest.test_written,
        dir.display()
    );

    let train = read_records(&dir.join("train.jsonl")).unwrap();
    let longest = train.iter().max_by_key(|r| r.complexity).unwrap();
    println!(
        "\nlongest train record ({} lines, target {}):",
        longest.complexity, longest.target
    );
    print!("{}", longest.source);

    let lengths: std::collections::BTreeMap<usize, usize> =
        train.iter().fold(Default::default(), |mut acc, r| {
            *acc.entry(r.complexity).or_default() += 1;
            acc
        });
    println!("\ntrain length histogram: {lengths:?}");

    let distinct: std::collections::BTreeSet<u16> = train.iter().map(|r| r.target).collect();
    println!("distinct targets in train: {}", distinct.len());
}
