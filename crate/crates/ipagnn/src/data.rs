//! Dataset construction: example records, complexity-partitioned splits,
//! statement masking for the partial-execution task, and the line-delimited
//! on-disk format (one JSON document per line, unknown keys ignored).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{build_cfg, step_budget, CfgError};
use crate::interp::{execute, InterpError};
use crate::lang::{
    desugar, render, sample_program, tokenize, DesugarError, SampleError, SamplerLimits,
    StatementTuple, Weights,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record schema violation at line {line}: {detail}")]
    Schema { line: usize, detail: String },
    #[error("could not fill test bucket of length {length} within {attempts} attempts")]
    BucketUnfillable { length: usize, attempts: usize },
    #[error("record has no maskable expression statement")]
    NoMaskableLine,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Desugar(#[from] DesugarError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Guarded access to the ground-truth trace. Only the trace-consuming model
/// may read it; everything else fails loudly instead of silently cheating.
#[derive(Clone, Debug)]
pub struct TraceField {
    value: Option<Vec<usize>>,
    allowed: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trace oracle read by a code path that must not see it")]
pub struct TraceAccessError;

impl TraceField {
    pub fn new(value: Option<Vec<usize>>, allowed: bool) -> Self {
        TraceField { value, allowed }
    }

    pub fn get(&self) -> Result<Option<&[usize]>, TraceAccessError> {
        if !self.allowed {
            return Err(TraceAccessError);
        }
        Ok(self.value.as_deref())
    }
}

/// One serialized example. Edges carry `(src, dst, is_true_branch)` for the
/// forward control flow edges; reverse edges are derived by consumers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    /// Original (unmasked) source text; targets always reflect it.
    pub source: String,
    /// Token tuples the models consume; masked in partial-task records.
    pub tokens: Vec<StatementTuple>,
    pub edges: Vec<(usize, usize, bool)>,
    pub step_budget: usize,
    pub complexity: usize,
    pub target: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_index: Option<usize>,
}

impl ExampleRecord {
    /// Indices of statements eligible for masking: expression lines
    /// (assignments and augmented assignments), line 0 included.
    pub fn maskable_lines(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_expression())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn encode_record(rec: &ExampleRecord) -> String {
    serde_json::to_string(rec).expect("record serialization cannot fail")
}

/// Decodes and validates one record line. `line` is 1-based for messages.
pub fn decode_record(text: &str, line: usize) -> Result<ExampleRecord, DataError> {
    let rec: ExampleRecord = serde_json::from_str(text).map_err(|e| DataError::Schema {
        line,
        detail: e.to_string(),
    })?;
    if rec.target > 999 {
        return Err(DataError::Schema {
            line,
            detail: format!("field `target` out of range: {}", rec.target),
        });
    }
    if rec.tokens.is_empty() {
        return Err(DataError::Schema {
            line,
            detail: "field `tokens` must not be empty".into(),
        });
    }
    if rec.complexity != rec.tokens.len() - 1 {
        return Err(DataError::Schema {
            line,
            detail: format!(
                "field `complexity` is {} but the record has {} statement lines",
                rec.complexity,
                rec.tokens.len() - 1
            ),
        });
    }
    if let Some(m) = rec.mask_index {
        if m >= rec.tokens.len() {
            return Err(DataError::Schema {
                line,
                detail: format!("field `mask_index` out of range: {m}"),
            });
        }
    }
    Ok(rec)
}

/// Streaming reader over a record file; one record per line, constant memory.
pub struct RecordReader {
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
}

impl RecordReader {
    pub fn open(path: &Path) -> Result<Self, DataError> {
        let file = File::open(path).map_err(io_err(path))?;
        Ok(RecordReader {
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }
}

impl Iterator for RecordReader {
    type Item = Result<ExampleRecord, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = self.lines.next()?;
        self.line_no += 1;
        Some(match line {
            Ok(text) => decode_record(&text, self.line_no),
            Err(e) => Err(DataError::Io {
                path: PathBuf::from("<stream>"),
                source: e,
            }),
        })
    }
}

/// Reads a whole record file into memory.
pub fn read_records(path: &Path) -> Result<Vec<ExampleRecord>, DataError> {
    RecordReader::open(path)?.collect()
}

/// Builds the record of an existing desugared program: graph, step budget,
/// tokens, and ground-truth execution.
pub fn record_from_program(id: &str, program: &crate::lang::Program) -> Result<ExampleRecord, DataError> {
    let graph = build_cfg(program)?;
    let budget = step_budget(program, &graph);
    let result = execute(program, &graph, None)?;
    Ok(ExampleRecord {
        id: id.to_string(),
        source: render(program),
        tokens: tokenize(program),
        edges: graph.forward_edges(),
        step_budget: budget.total,
        complexity: program.complexity(),
        target: result.target,
        trace: Some(result.trace),
        mask_index: None,
    })
}

/// Builds one record by sampling, desugaring, and executing a program of
/// exactly `lines` statements.
pub fn make_example(
    id: String,
    lines: usize,
    weights: Weights,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ExampleRecord, DataError> {
    let limits = SamplerLimits {
        lines,
        max_depth,
        weights,
        max_retries: 64,
    };
    let raw = sample_program(rng, &limits)?;
    let program = desugar(&raw, rng)?;
    record_from_program(&id, &program)
}

/// Masks one expression statement chosen uniformly at random. The target and
/// graph stay those of the unmasked program.
pub fn mask_example(rec: &ExampleRecord, rng: &mut impl Rng) -> Result<ExampleRecord, DataError> {
    let eligible = rec.maskable_lines();
    if eligible.is_empty() {
        return Err(DataError::NoMaskableLine);
    }
    let chosen = eligible[rng.random_range(0..eligible.len())];
    let mut masked = rec.clone();
    masked.tokens[chosen] = masked.tokens[chosen].masked();
    masked.mask_index = Some(chosen);
    Ok(masked)
}

/// Specification of one dataset: a complexity-bounded train split, a
/// validation split at exactly the threshold complexity, and exact-length
/// test buckets above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    /// The complexity threshold C: train has `c(x) <= C`, test `c(x) > C`.
    pub threshold: usize,
    pub valid_count: usize,
    /// `(program length, example count)` per test bucket.
    pub test_buckets: Vec<(usize, usize)>,
    pub seed: u64,
    /// Mask one expression statement per record (the partial-program task).
    pub masked: bool,
    pub weights: Weights,
    pub max_depth: usize,
}

impl SplitSpec {
    /// Laptop-scale profile: 100k train examples under C = 10, test buckets
    /// of 100 at lengths 20..=100.
    pub fn desk(seed: u64) -> Self {
        SplitSpec {
            train_count: 100_000,
            threshold: 10,
            valid_count: 5_000,
            test_buckets: (2..=10).map(|k| (k * 10, 100)).collect(),
            seed,
            masked: false,
            weights: Weights::default(),
            max_depth: 4,
        }
    }

    /// Full-scale profile: 5M train examples and 500-example buckets.
    pub fn paper(seed: u64) -> Self {
        SplitSpec {
            train_count: 5_000_000,
            threshold: 10,
            valid_count: 5_000,
            test_buckets: (2..=10).map(|k| (k * 10, 500)).collect(),
            seed,
            masked: false,
            weights: Weights::default(),
            max_depth: 4,
        }
    }
}

/// What a generation run wrote, stored alongside the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub spec: SplitSpec,
    pub train_written: usize,
    pub valid_written: usize,
    pub test_written: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-example stream: independent of generation order, so
/// shards can be produced by any number of workers and concatenated.
fn example_rng(seed: u64, split_tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        seed ^ splitmix64(split_tag) ^ splitmix64(index.wrapping_mul(0x9e37_79b9)),
    ))
}

const TRAIN_TAG: u64 = 1;
const VALID_TAG: u64 = 2;
const TEST_TAG: u64 = 3;

fn build_one(
    spec: &SplitSpec,
    tag: u64,
    index: u64,
    id: String,
    lines: Option<usize>,
) -> Result<ExampleRecord, DataError> {
    let mut rng = example_rng(spec.seed, tag, index);
    let lines = match lines {
        Some(l) => l,
        // Train lengths are uniform over 2..=C.
        None => rng.random_range(2..=spec.threshold),
    };
    let attempts = 1000;
    for _ in 0..attempts {
        let rec = make_example(id.clone(), lines, spec.weights, spec.max_depth, &mut rng)?;
        if rec.complexity == lines {
            let rec = if spec.masked {
                mask_example(&rec, &mut rng)?
            } else {
                rec
            };
            return Ok(rec);
        }
    }
    Err(DataError::BucketUnfillable {
        length: lines,
        attempts,
    })
}

fn write_split(
    path: &Path,
    rows: Vec<Result<ExampleRecord, DataError>>,
) -> Result<usize, DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut written = 0;
    for row in rows {
        let rec = row?;
        writeln!(out, "{}", encode_record(&rec)).map_err(io_err(path))?;
        written += 1;
    }
    out.flush().map_err(io_err(path))?;
    Ok(written)
}

/// Generates `train.jsonl`, `valid.jsonl`, `test.jsonl`, and `manifest.json`
/// under `dir`. Deterministic in the spec seed, byte for byte.
pub fn generate_split(spec: &SplitSpec, dir: &Path) -> Result<Manifest, DataError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let train: Vec<_> = (0..spec.train_count)
        .into_par_iter()
        .map(|i| {
            build_one(spec, TRAIN_TAG, i as u64, format!("train-{i:07}"), None)
        })
        .collect();
    let train_written = write_split(&dir.join("train.jsonl"), train)?;

    let valid: Vec<_> = (0..spec.valid_count)
        .into_par_iter()
        .map(|i| {
            build_one(
                spec,
                VALID_TAG,
                i as u64,
                format!("valid-{i:07}"),
                Some(spec.threshold),
            )
        })
        .collect();
    let valid_written = write_split(&dir.join("valid.jsonl"), valid)?;

    let mut test_jobs = Vec::new();
    for &(length, count) in &spec.test_buckets {
        assert!(
            length > spec.threshold,
            "test bucket length {length} is not above the threshold {}",
            spec.threshold
        );
        for k in 0..count {
            test_jobs.push((length, k));
        }
    }
    let test: Vec<_> = test_jobs
        .into_par_iter()
        .enumerate()
        .map(|(i, (length, k))| {
            build_one(
                spec,
                TEST_TAG,
                (length as u64) << 32 | k as u64,
                format!("test-{length:03}-{i:06}"),
                Some(length),
            )
        })
        .collect();
    let test_written = write_split(&dir.join("test.jsonl"), test)?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        train_written,
        valid_written,
        test_written,
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{OP_MASK, OPERAND_MASK, VAR_MASK};

    fn small_spec(seed: u64) -> SplitSpec {
        SplitSpec {
            train_count: 50,
            threshold: 6,
            valid_count: 10,
            test_buckets: vec![(12, 8), (20, 5)],
            seed,
            masked: false,
            weights: Weights::default(),
            max_depth: 4,
        }
    }

    #[test]
    fn records_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = make_example("r-0".into(), 8, Weights::default(), 4, &mut rng).unwrap();
        let back = decode_record(&encode_record(&rec), 1).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rec = make_example("r-1".into(), 5, Weights::default(), 4, &mut rng).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&encode_record(&rec)).unwrap();
        value["future_field"] = serde_json::json!({"a": 1});
        let back = decode_record(&value.to_string(), 1).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn missing_target_is_a_schema_error_naming_the_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rec = make_example("r-2".into(), 5, Weights::default(), 4, &mut rng).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&encode_record(&rec)).unwrap();
        value.as_object_mut().unwrap().remove("target");
        let err = decode_record(&value.to_string(), 7).unwrap_err();
        match err {
            DataError::Schema { line, detail } => {
                assert_eq!(line, 7);
                assert!(detail.contains("target"), "{detail}");
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn masking_replaces_only_the_chosen_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rec = make_example("r-3".into(), 10, Weights::default(), 4, &mut rng).unwrap();
        let masked = mask_example(&rec, &mut rng).unwrap();
        let idx = masked.mask_index.unwrap();
        assert!(rec.tokens[idx].is_expression());
        assert_eq!(masked.tokens[idx].op, OP_MASK);
        assert_eq!(masked.tokens[idx].var, VAR_MASK);
        assert_eq!(masked.tokens[idx].operand, OPERAND_MASK);
        assert_eq!(masked.tokens[idx].indent, rec.tokens[idx].indent);
        assert_eq!(masked.target, rec.target);
        assert_eq!(masked.edges, rec.edges);
        for (i, (a, b)) in rec.tokens.iter().zip(&masked.tokens).enumerate() {
            if i != idx {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn minimal_program_masks_line_zero() {
        // A 2-line program whose second statement is `pass` leaves only the
        // initial assignment eligible.
        let rec = ExampleRecord {
            id: "fixed".into(),
            source: "v0 = 7\npass\n".into(),
            tokens: crate::lang::tokenize(&crate::lang::parse("v0 = 7\npass\n").unwrap()),
            edges: vec![(0, 1, true), (1, 2, true), (2, 2, true)],
            step_budget: 3,
            complexity: 2,
            target: 7,
            trace: None,
            mask_index: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let masked = mask_example(&rec, &mut rng).unwrap();
        assert_eq!(masked.mask_index, Some(0));
    }

    #[test]
    fn split_respects_complexity_partition() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec(11);
        let manifest = generate_split(&spec, dir.path()).unwrap();
        assert_eq!(manifest.train_written, 50);
        assert_eq!(manifest.valid_written, 10);
        assert_eq!(manifest.test_written, 13);

        let train = read_records(&dir.path().join("train.jsonl")).unwrap();
        assert!(train.iter().all(|r| r.complexity <= spec.threshold));
        let valid = read_records(&dir.path().join("valid.jsonl")).unwrap();
        assert!(valid.iter().all(|r| r.complexity == spec.threshold));
        let test = read_records(&dir.path().join("test.jsonl")).unwrap();
        assert!(test.iter().all(|r| r.complexity > spec.threshold));
        let ids: std::collections::HashSet<_> = train
            .iter()
            .chain(&valid)
            .chain(&test)
            .map(|r| r.id.clone())
            .collect();
        assert_eq!(ids.len(), 73, "id collision");
        for r in test {
            assert!(r.complexity == 12 || r.complexity == 20);
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let spec = small_spec(17);
        generate_split(&spec, dir_a.path()).unwrap();
        generate_split(&spec, dir_b.path()).unwrap();
        for name in ["train.jsonl", "valid.jsonl", "test.jsonl"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn masked_split_masks_every_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small_spec(23);
        spec.masked = true;
        generate_split(&spec, dir.path()).unwrap();
        let train = read_records(&dir.path().join("train.jsonl")).unwrap();
        for r in &train {
            let idx = r.mask_index.expect("masked record");
            assert_eq!(r.tokens[idx].op, OP_MASK);
        }
    }

    #[test]
    fn infeasible_weights_fail_bucket_generation() {
        // Only repeat productions (4 lines minimum) can never fill a 3-line
        // body, so no bucket of that shape is fillable.
        let dir = tempfile::tempdir().unwrap();
        let spec = SplitSpec {
            train_count: 1,
            threshold: 4,
            valid_count: 0,
            test_buckets: vec![],
            seed: 1,
            masked: false,
            weights: Weights {
                expr: 0.0,
                if_: 0.0,
                if_else: 0.0,
                repeat: 1.0,
                continue_: 0.0,
                break_: 0.0,
                pass: 0.0,
            },
            max_depth: 4,
        };
        let err = generate_split(&spec, dir.path()).unwrap_err();
        assert!(
            matches!(err, DataError::Sample(_) | DataError::BucketUnfillable { .. }),
            "{err}"
        );
    }

    #[test]
    fn record_without_expressions_cannot_be_masked() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rec = make_example("r".into(), 4, Weights::default(), 4, &mut rng).unwrap();
        // Corrupt the record: wipe every expression token to `pass`.
        for t in rec.tokens.iter_mut() {
            if t.is_expression() {
                t.op = crate::lang::OP_PASS;
            }
        }
        let err = mask_example(&rec, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::NoMaskableLine));
    }

    #[test]
    fn trace_guard_blocks_disallowed_reads() {
        let guarded = TraceField::new(Some(vec![0, 1]), false);
        assert_eq!(guarded.get(), Err(TraceAccessError));
        let open = TraceField::new(Some(vec![0, 1]), true);
        assert_eq!(open.get().unwrap().unwrap(), &[0, 1]);
    }
}
