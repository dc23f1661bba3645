use super::{AutodiffError, Tape, Tensor, Var};

/// Denominator guard in the relative-error formula.
pub const FD_EPSILON: f64 = 1e-8;

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` builds a scalar loss on a fresh tape from parameter leaves (one per
/// entry of `params`, in order). Returns the largest
/// `|analytic - numeric| / (|numeric| + 1e-8)` over every parameter element.
/// `f` must be deterministic; seed anything random before calling.
pub fn finite_difference_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(AutodiffError::InvalidStep(step));
    }

    let eval = |values: &[Tensor]| -> Result<(Tape, Vec<Var>, Var), AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok((tape, vars, loss))
    };

    let (tape, vars, loss) = eval(params)?;
    let grads = tape.gradient(loss)?;

    let mut perturbed: Vec<Tensor> = params.to_vec();
    let mut worst = 0.0f64;
    for (p, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).expect("every param leaf has a gradient");
        for i in 0..params[p].len() {
            let original = params[p].data()[i];

            perturbed[p].data_mut()[i] = original + step;
            let (t, _, l) = eval(&perturbed)?;
            let plus = t.value(l).item();

            perturbed[p].data_mut()[i] = original - step;
            let (t, _, l) = eval(&perturbed)?;
            let minus = t.value(l).item();

            perturbed[p].data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let err = (analytic.data()[i] - numeric).abs() / (numeric.abs() + FD_EPSILON);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_accurate() {
        let err = finite_difference_check(|t, p| t.mul(p[0], p[0]), &[Tensor::scalar(3.0)], 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn linear_is_exact() {
        let w = Tensor::row(vec![0.5, -1.5, 2.0]);
        let err = finite_difference_check(
            |t, p| {
                let s = t.scale(p[0], 3.0)?;
                t.sum(s)
            },
            &[w],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(finite_difference_check(|t, p| t.sum(p[0]), &[Tensor::scalar(1.0)], 0.0).is_err());
    }
}
