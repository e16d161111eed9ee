//! Prepared per-example inputs: tokens plus the edge index arrays each
//! model family consumes.

use crate::cfg::EdgeType;
use crate::data::{ExampleRecord, TraceField};
use crate::lang::StatementTuple;

/// One example, ready for a forward pass.
#[derive(Clone, Debug)]
pub struct ModelInput {
    pub id: String,
    pub tokens: Vec<StatementTuple>,
    pub node_count: usize,
    pub exit: usize,
    pub step_budget: usize,
    pub target: u16,
    pub complexity: usize,
    pub trace: TraceField,
    /// Ordered successors per node (slot 0 true/fallthrough, slot 1 false).
    pub out_lists: Vec<Vec<usize>>,
    /// Flat forward-edge arrays for soft-instruction-pointer routing:
    /// edges from two-successor nodes first, then single-successor edges.
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    /// `(node, slot)` into the branch-probability matrix for each edge in
    /// the two-successor prefix of `edge_src`/`edge_dst`.
    pub branch_pairs: Vec<(usize, usize)>,
    /// Per edge type: `(sources, destinations)` over the bidirectional graph.
    pub typed: Vec<(EdgeType, Vec<usize>, Vec<usize>)>,
}

impl ModelInput {
    /// Prepares a record. `allow_trace` arms the trace guard; pass it only
    /// for the trace-consuming model.
    pub fn from_record(rec: &ExampleRecord, allow_trace: bool) -> ModelInput {
        let node_count = rec.tokens.len();
        let mut out_lists: Vec<Vec<usize>> = vec![Vec::new(); node_count];
        for &(src, dst, is_true) in &rec.edges {
            if is_true {
                out_lists[src].insert(0, dst);
            } else {
                out_lists[src].push(dst);
            }
        }

        let mut edge_src = Vec::new();
        let mut edge_dst = Vec::new();
        let mut branch_pairs = Vec::new();
        for (n, outs) in out_lists.iter().enumerate() {
            if outs.len() == 2 {
                for (slot, &dst) in outs.iter().enumerate() {
                    edge_src.push(n);
                    edge_dst.push(dst);
                    branch_pairs.push((n, slot));
                }
            }
        }
        for (n, outs) in out_lists.iter().enumerate() {
            if outs.len() == 1 {
                edge_src.push(n);
                edge_dst.push(outs[0]);
            }
        }

        let mut typed: Vec<(EdgeType, Vec<usize>, Vec<usize>)> = EdgeType::ALL
            .into_iter()
            .map(|ty| (ty, Vec::new(), Vec::new()))
            .collect();
        for &(src, dst, is_true) in &rec.edges {
            let (fwd, rev) = if is_true { (0, 2) } else { (1, 3) };
            typed[fwd].1.push(src);
            typed[fwd].2.push(dst);
            typed[rev].1.push(dst);
            typed[rev].2.push(src);
        }

        ModelInput {
            id: rec.id.clone(),
            tokens: rec.tokens.clone(),
            node_count,
            exit: node_count - 1,
            step_budget: rec.step_budget,
            target: rec.target,
            complexity: rec.complexity,
            trace: TraceField::new(rec.trace.clone(), allow_trace),
            out_lists,
            edge_src,
            edge_dst,
            branch_pairs,
            typed,
        }
    }

    /// Total typed-edge count (forward plus reverse).
    pub fn typed_edge_count(&self) -> usize {
        self.typed.iter().map(|(_, srcs, _)| srcs.len()).sum()
    }

    /// True if no node has two successors.
    pub fn is_straight_line(&self) -> bool {
        self.branch_pairs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_example;
    use crate::lang::Weights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edge_arrays_cover_every_forward_edge_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let rec = make_example("t".into(), 12, Weights::default(), 4, &mut rng).unwrap();
            let input = ModelInput::from_record(&rec, false);
            assert_eq!(input.edge_src.len(), rec.edges.len());
            assert_eq!(input.typed_edge_count(), 2 * rec.edges.len());
            let branch_count = input.branch_pairs.len();
            for (i, &(n, slot)) in input.branch_pairs.iter().enumerate() {
                assert_eq!(input.edge_src[i], n);
                assert_eq!(input.out_lists[n][slot], input.edge_dst[i]);
            }
            for i in branch_count..input.edge_src.len() {
                assert_eq!(input.out_lists[input.edge_src[i]].len(), 1);
            }
        }
    }

    #[test]
    fn out_lists_keep_true_edge_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rec = make_example("t".into(), 15, Weights::default(), 4, &mut rng).unwrap();
        let input = ModelInput::from_record(&rec, false);
        for &(src, dst, is_true) in &rec.edges {
            let outs = &input.out_lists[src];
            if outs.len() == 2 {
                if is_true {
                    assert_eq!(outs[0], dst);
                } else {
                    assert_eq!(outs[1], dst);
                }
            }
        }
    }
}
