//! Large-scan invariants: text round-tripping, vocabulary closure, graph
//! well-formedness, the step-budget formula against an independent
//! implementation, and dataset-level distribution checks.

use ipagnn::cfg::{build_cfg, step_budget};
use ipagnn::data::{make_example, SplitSpec};
use ipagnn::lang::{
    desugar, parse, render, sample_program, tokenize, LineKind, Program, SamplerLimits, Weights,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[test]
fn ten_thousand_samples_round_trip_through_text() {
    (0..10_000u64).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lines = 2 + (seed % 30) as usize;
        let raw = sample_program(&mut rng, &SamplerLimits::with_lines(lines)).unwrap();
        let program = desugar(&raw, &mut rng).unwrap();
        let text = render(&program);
        let back = parse(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
        assert_eq!(back, program, "seed {seed}");
    });
}

#[test]
fn vocabulary_is_closed_over_sampled_programs() {
    (0..10_000u64).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000_000 + seed);
        let lines = 2 + (seed % 40) as usize;
        let raw = sample_program(&mut rng, &SamplerLimits::with_lines(lines)).unwrap();
        let program = desugar(&raw, &mut rng).unwrap();
        for (n, tuple) in tokenize(&program).iter().enumerate() {
            assert!(tuple.in_vocab(), "seed {seed} line {n}: {tuple:?}");
        }
    });
}

#[test]
fn graphs_are_well_formed_on_a_thousand_samples() {
    (0..1_000u64).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(2_000_000 + seed);
        let lines = 2 + (seed % 60) as usize;
        let raw = sample_program(&mut rng, &SamplerLimits::with_lines(lines)).unwrap();
        let program = desugar(&raw, &mut rng).unwrap();
        let g = build_cfg(&program).unwrap();
        let exit = g.exit_index();
        assert_eq!(g.out_list(exit), &[exit]);
        assert!(g.in_set(exit).contains(&exit));
        for n in 0..g.node_count() {
            let outs = g.out_list(n);
            assert!(!outs.is_empty() && outs.len() <= 2);
            if outs.len() == 2 {
                assert!(matches!(
                    program.line(n).kind,
                    LineKind::If { .. } | LineKind::While { .. }
                ));
            }
            for &m in outs {
                assert!(g.in_set(m).contains(&n), "duality broken at {n}->{m}");
            }
            for &m in g.in_set(n) {
                assert!(g.out_list(m).contains(&n), "duality broken at {m}->{n}");
            }
        }
        assert!(g.reachable().iter().all(|&r| r), "unreachable node, seed {seed}");
    });
}

/// Independent step-budget implementation: walks the indent structure with
/// an explicit stack of open loops instead of precomputed body ranges.
fn budget_oracle(p: &Program) -> usize {
    let mut open_loops: Vec<u8> = Vec::new(); // indents of enclosing whiles
    let mut total = 0usize;
    for line in &p.lines {
        while let Some(&indent) = open_loops.last() {
            if line.indent <= indent && line.kind != LineKind::Exit {
                open_loops.pop();
            } else if line.kind == LineKind::Exit {
                open_loops.clear();
                break;
            } else {
                break;
            }
        }
        let nesting = open_loops.len() as u32;
        total += 1usize << nesting;
        if let LineKind::While { .. } = line.kind {
            total += 1usize << nesting;
            open_loops.push(line.indent);
        }
    }
    total
}

#[test]
fn step_budget_matches_an_independent_recursion_on_a_thousand_samples() {
    for seed in 0..1_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3_000_000 + seed);
        let lines = 2 + (seed % 50) as usize;
        let raw = sample_program(&mut rng, &SamplerLimits::with_lines(lines)).unwrap();
        let program = desugar(&raw, &mut rng).unwrap();
        let g = build_cfg(&program).unwrap();
        let budget = step_budget(&program, &g);
        assert_eq!(budget.total, budget_oracle(&program), "seed {seed}");
        assert!(budget.total >= program.node_count());
    }
}

#[test]
fn train_split_targets_cover_many_classes() {
    // Degenerate samplers would collapse the label space; a healthy split
    // at 100k examples covers far more than 100 of the 1000 classes.
    let spec = SplitSpec::desk(55);
    let classes: std::collections::HashSet<u16> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(4_000_000 + i);
            let lines = rng.random_range(2..=spec.threshold);
            make_example(format!("t{i}"), lines, spec.weights, spec.max_depth, &mut rng)
                .unwrap()
                .target
        })
        .collect();
    assert!(
        classes.len() > 100,
        "only {} distinct target classes",
        classes.len()
    );
}

proptest! {
    #[test]
    fn parsing_arbitrary_text_never_panics(text in "\\PC*") {
        let _ = parse(&text);
    }

    #[test]
    fn parsing_linefeed_text_never_panics(lines in proptest::collection::vec("[ a-z0-9%<>=:+*-]{0,20}", 0..8)) {
        let _ = parse(&lines.join("\n"));
    }

    #[test]
    fn seeded_programs_round_trip(seed in any::<u64>(), lines in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = sample_program(&mut rng, &SamplerLimits::with_lines(lines)).unwrap();
        let program = desugar(&raw, &mut rng).unwrap();
        prop_assert_eq!(parse(&render(&program)).unwrap(), program);
    }

    #[test]
    fn rendered_programs_have_expected_line_count(seed in any::<u64>(), lines in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limits = SamplerLimits { weights: Weights::default(), ..SamplerLimits::with_lines(lines) };
        let raw = sample_program(&mut rng, &limits).unwrap();
        prop_assert_eq!(raw.complexity(), lines);
        let program = desugar(&raw, &mut rng).unwrap();
        prop_assert_eq!(render(&program).lines().count(), lines);
    }
}
