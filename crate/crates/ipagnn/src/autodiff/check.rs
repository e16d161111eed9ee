//! Central-difference gradient verification.

use super::tape::{Tape, ValueId};
use super::tensor::{Element, Tensor};

/// Result of a gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Maximum over all coordinates of
    /// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
    pub max_rel_error: f64,
    /// `(parameter index, coordinate, analytic, numeric)` of the worst case.
    pub worst: (usize, usize, f64, f64),
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Per-coordinate comparison of an analytic gradient against a reference.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

/// Checks the tape's gradients of a scalar function against central
/// differences with step `h`, coordinate by coordinate over every parameter.
///
/// `f` receives a fresh tape and the parameter leaves and must return the
/// scalar loss. Meant to run at `f64`; the perturbation is applied in the
/// element type.
pub fn grad_check<E: Element, F>(mut f: F, params: &[Tensor<E>], h: f64) -> GradCheckReport
where
    F: FnMut(&mut Tape<E>, &[ValueId]) -> ValueId,
{
    let analytic: Vec<Tensor<E>> = {
        let mut tape = Tape::new();
        let ids: Vec<ValueId> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = f(&mut tape, &ids);
        tape.backward(loss).expect("grad_check loss must be scalar");
        ids.iter()
            .zip(params)
            .map(|(&id, p)| {
                tape.grad(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(p.shape()))
            })
            .collect()
    };

    let eval = |f: &mut F, params: &[Tensor<E>]| -> f64 {
        let mut tape = Tape::new();
        let ids: Vec<ValueId> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = f(&mut tape, &ids);
        tape.value(loss).item().to_f64()
    };

    let mut work: Vec<Tensor<E>> = params.to_vec();
    let step = E::from_f64(h);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0, 0.0, 0.0),
    };
    for pi in 0..params.len() {
        for j in 0..params[pi].len() {
            let orig = work[pi].data()[j];
            work[pi].data_mut()[j] = orig + step;
            let plus = eval(&mut f, &work);
            work[pi].data_mut()[j] = orig - step;
            let minus = eval(&mut f, &work);
            work[pi].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi].data()[j].to_f64();
            let err = rel_error(a, numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, j, a, numeric);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let len: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn quadratic_form_gradient_is_tight() {
        // f(x) = sum(x * x): analytic grad 2x.
        let x = Tensor::from_vec(&[4], vec![0.3, -1.2, 2.0, 0.7]);
        let report = grad_check(
            |tape, ids| {
                let sq = tape.mul(ids[0], ids[0]);
                tape.sum_all(sq)
            },
            &[x],
            1e-5,
        );
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    type Case = Box<dyn FnMut(&mut Tape<f64>, &[ValueId]) -> ValueId>;

    #[test]
    fn every_primitive_passes_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&mut rng, &[5, 7]);
        let b = random_tensor(&mut rng, &[7, 4]);
        let c = random_tensor(&mut rng, &[5, 7]);
        let row = random_tensor(&mut rng, &[7]);
        let col = random_tensor(&mut rng, &[5]);

        let cases: Vec<(&str, Case)> = vec![
            ("matmul", Box::new(|t, ids| {
                let y = t.matmul(ids[0], ids[1]);
                t.sum_all(y)
            })),
            ("add", Box::new(|t, ids| {
                let y = t.add(ids[0], ids[2]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("add_row", Box::new(|t, ids| {
                let y = t.add_row(ids[0], ids[3]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("mul", Box::new(|t, ids| {
                let y = t.mul(ids[0], ids[2]);
                t.sum_all(y)
            })),
            ("mul_col", Box::new(|t, ids| {
                let y = t.mul_col(ids[0], ids[4]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("sigmoid", Box::new(|t, ids| {
                let y = t.sigmoid(ids[0]);
                t.sum_all(y)
            })),
            ("tanh", Box::new(|t, ids| {
                let y = t.tanh(ids[0]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("softmax", Box::new(|t, ids| {
                let y = t.softmax(ids[0]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("log_softmax", Box::new(|t, ids| {
                let y = t.log_softmax(ids[0]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("log_of_softmax", Box::new(|t, ids| {
                let s = t.softmax(ids[0]);
                let y = t.log(s);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("scale", Box::new(|t, ids| {
                let y = t.scale(ids[0], -2.5);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("concat0", Box::new(|t, ids| {
                let y = t.concat0(ids[0], ids[2]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("concat1", Box::new(|t, ids| {
                let y = t.concat1(ids[0], ids[2]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("slice_cols", Box::new(|t, ids| {
                let y = t.slice_cols(ids[0], 2, 6);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("row_gather", Box::new(|t, ids| {
                let y = t.row_gather(ids[0], vec![0, 2, 2, 4]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("row_scatter_add", Box::new(|t, ids| {
                let y = t.row_scatter_add(ids[0], vec![1, 0, 1, 2, 0], 3);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("gather_elems", Box::new(|t, ids| {
                let y = t.gather_elems(ids[0], vec![(0, 1), (4, 6), (2, 3)]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("reshape", Box::new(|t, ids| {
                let y = t.reshape(ids[0], &[7, 5]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("sum_axis0", Box::new(|t, ids| {
                let y = t.sum_axis0(ids[0]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
            ("sum_axis1", Box::new(|t, ids| {
                let y = t.sum_axis1(ids[0]);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            })),
        ];

        let params = [a, b, c, row, col];
        for (name, mut case) in cases {
            let report = grad_check(&mut case, &params, 1e-5);
            assert!(
                report.max_rel_error < 1e-6,
                "{name}: rel error {:.3e} at {:?}",
                report.max_rel_error,
                report.worst
            );
        }
    }

    #[test]
    fn two_layer_composition_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w1 = random_tensor(&mut rng, &[6, 5]);
        let w2 = random_tensor(&mut rng, &[5, 3]);
        let x = random_tensor(&mut rng, &[2, 6]);
        let report = grad_check(
            |t, ids| {
                let h = t.matmul(ids[2], ids[0]);
                let h = t.tanh(h);
                let y = t.matmul(h, ids[1]);
                let y = t.sigmoid(y);
                t.sum_all(y)
            },
            &[w1, w2, x],
            1e-5,
        );
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn corrupted_adjoint_fails_the_check() {
        // Negative control: a wrong gradient must be flagged.
        let analytic = [2.0, -3.0, 0.5];
        let wrong: Vec<f64> = analytic.iter().map(|v| v * 1.5).collect();
        assert!(max_relative_error(&wrong, &analytic) > 1e-2);
        assert!(max_relative_error(&analytic, &analytic) < 1e-12);
    }
}
