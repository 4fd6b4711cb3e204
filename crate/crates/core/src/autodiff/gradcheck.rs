use super::{AutodiffError, BoundParams, ParamStore, Result, Tape, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
    /// Evaluate the analytic gradient on a tape with a broken backward rule.
    pub corrupt_backward: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tolerance: 1e-4,
            corrupt_backward: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat entry index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
    pub passed: bool,
}

/// Compares the tape gradient of `loss` against central differences for
/// every scalar entry of every parameter in `params`.
///
/// Relative error per entry is `|a − n| / max(1, |a|, |n|)`.
pub fn grad_check<F, E>(
    params: &ParamStore,
    loss: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport, E>
where
    F: for<'t> Fn(&'t Tape, &BoundParams<'t>) -> Result<Tensor<'t>, E>,
    E: From<AutodiffError>,
{
    let analytic = {
        let tape = if opts.corrupt_backward {
            Tape::with_corrupted_backward()
        } else {
            Tape::new()
        };
        let bound = params.bind(&tape)?;
        let value = loss(&tape, &bound)?;
        let grads = tape.backward(value)?;
        bound.gradients(&grads)
    };

    let eval = |store: &ParamStore| -> Result<f64, E> {
        let tape = Tape::new();
        let bound = store.bind(&tape)?;
        Ok(loss(&tape, &bound)?.item())
    };

    let mut probe = params.clone();
    let mut max_rel_error = 0.0;
    let mut worst = None;
    let mut entries_checked = 0;
    for id in params.ids() {
        for k in 0..params.get(id).len() {
            let original = params.get(id).as_slice()[k];
            probe.get_mut(id).as_mut_slice()[k] = original + opts.epsilon;
            let up = eval(&probe)?;
            probe.get_mut(id).as_mut_slice()[k] = original - opts.epsilon;
            let down = eval(&probe)?;
            probe.get_mut(id).as_mut_slice()[k] = original;

            let numeric = (up - down) / (2.0 * opts.epsilon);
            let a = analytic[id.index()].as_slice()[k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            if rel > max_rel_error || worst.is_none() {
                max_rel_error = f64::max(max_rel_error, rel);
                worst = Some((params.name(id).to_owned(), k));
            }
            entries_checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        entries_checked,
        passed: max_rel_error < opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add(
            "a",
            Matrix::from_fn(3, 2, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.1),
        );
        s.add(
            "b",
            Matrix::from_fn(2, 3, |i, j| 0.1 * (i + j) as f64 - 0.25),
        );
        s
    }

    #[test]
    fn sigmoid_of_sum_passes_tight_tolerance() {
        let opts = GradCheckOptions {
            tolerance: 1e-6,
            ..Default::default()
        };
        let params = store();
        let a = params.find("a").unwrap();
        let b = params.find("b").unwrap();
        let report = grad_check(&params, |_, p| p[a].matmul(p[b])?.sum()?.sigmoid(), opts).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.entries_checked, 12);
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let report = grad_check(
            &store(),
            |tape, _| tape.constant(Matrix::scalar(4.0)),
            GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn corrupted_backward_rule_is_detected() {
        let params = store();
        let a = params.find("a").unwrap();
        let b = params.find("b").unwrap();
        let opts = GradCheckOptions {
            corrupt_backward: true,
            ..Default::default()
        };
        let report =
            grad_check(&params, |_, p| p[a].matmul(p[b])?.sum()?.scale(3.0), opts).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst.unwrap().0, "a");
    }
}
