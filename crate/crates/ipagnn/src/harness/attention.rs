//! Soft-instruction-pointer export for intensity plots.

use crate::autodiff::Element;
use crate::data::record_from_program;
use crate::lang::{parse, LineKind, Var};
use crate::models::{attention_matrix, Model, ModelInput};

use super::HarnessError;

/// Runs a soft-pointer model over a program and returns the pointer matrix,
/// one row per step including the initial distribution. The initial `v0`
/// constant can be overridden, and one expression line may be masked.
pub fn dump_attention<E: Element>(
    model: &Model<E>,
    program_text: &str,
    v0_override: Option<u16>,
    mask_line: Option<usize>,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    if !model.config.kind.has_attention() {
        return Err(HarnessError::NotAttention {
            kind: model.config.kind,
        });
    }
    let mut program = parse(program_text)?;
    if let Some(value) = v0_override {
        program.lines[0].kind = LineKind::Assign {
            var: Var(0),
            value,
        };
    }
    let record = record_from_program("attention", &program)?;
    let mut input = ModelInput::from_record(&record, false);
    if let Some(line) = mask_line {
        if line >= input.tokens.len() || !input.tokens[line].is_expression() {
            return Err(HarnessError::MaskLineIneligible { line });
        }
        input.tokens[line] = input.tokens[line].masked();
    }
    Ok(attention_matrix(model, &input)?)
}

/// Tab-separated text form: a header row of node ids, then one row of
/// pointer values per step.
pub fn attention_to_text(matrix: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if matrix.is_empty() {
        return out;
    }
    out.push('t');
    for n in 0..matrix[0].len() {
        out.push_str(&format!("\t{n}"));
    }
    out.push('\n');
    for (t, row) in matrix.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push_str(&format!("\t{v:.8}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelConfig, ModelKind};

    const TWO_BRANCH: &str = "v0 = 323\nif v0 % 10 < 5:\n  v0 -= 3\nelse:\n  v0 -= 4\n  v0 += 2\n  v0 *= 9\nif v0 % 10 >= 4:\n  if v0 % 10 < 6:\n    v0 *= 8\n";

    #[test]
    fn attention_matrix_shape_covers_all_steps_and_nodes() {
        let model = Model::<f64>::init(
            ModelConfig {
                kind: ModelKind::IpaGnn,
                hidden: 8,
            },
            3,
        );
        // A 10-line program tokenizes to 11 nodes including the exit.
        let matrix = dump_attention(&model, TWO_BRANCH, None, None).unwrap();
        assert_eq!(matrix[0].len(), 11);
        let record = record_from_program("t", &parse(TWO_BRANCH).unwrap()).unwrap();
        assert_eq!(matrix.len(), record.step_budget + 1);
        for row in &matrix {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn override_and_mask_yield_same_shape_different_values() {
        let model = Model::<f64>::init(
            ModelConfig {
                kind: ModelKind::IpaGnn,
                hidden: 8,
            },
            4,
        );
        let a = dump_attention(&model, TWO_BRANCH, Some(323), Some(0)).unwrap();
        let b = dump_attention(&model, TWO_BRANCH, Some(849), Some(0)).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a[0].len(), b[0].len());
        // With line 0 masked the inputs are identical, so the matrices are too.
        assert_eq!(a, b);
        let c = dump_attention(&model, TWO_BRANCH, Some(849), None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn straight_line_attention_is_a_shifted_identity_band() {
        let model = Model::<f64>::init(
            ModelConfig {
                kind: ModelKind::IpaGnn,
                hidden: 8,
            },
            5,
        );
        let matrix = dump_attention(&model, "v0 = 7\nv0 += 2\nv0 *= 3\n", None, None).unwrap();
        for (t, row) in matrix.iter().enumerate() {
            for (n, &v) in row.iter().enumerate() {
                let expect = if n == t.min(row.len() - 1) { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "t={t} n={n}");
            }
        }
    }

    #[test]
    fn non_pointer_models_are_rejected() {
        let model = Model::<f64>::init(
            ModelConfig {
                kind: ModelKind::Ggnn,
                hidden: 8,
            },
            6,
        );
        assert!(matches!(
            dump_attention(&model, "v0 = 1\nv0 += 1\n", None, None),
            Err(HarnessError::NotAttention { .. })
        ));
    }

    #[test]
    fn text_export_has_header_and_row_per_step() {
        let model = Model::<f64>::init(
            ModelConfig {
                kind: ModelKind::IpaGnn,
                hidden: 8,
            },
            7,
        );
        let matrix = dump_attention(&model, "v0 = 1\nv0 += 1\n", None, None).unwrap();
        let text = attention_to_text(&matrix);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t\t0\t1\t2");
        assert_eq!(lines.len(), matrix.len() + 1);
        assert!(lines[1].starts_with("0\t1.00000000\t0.00000000"));
    }
}
