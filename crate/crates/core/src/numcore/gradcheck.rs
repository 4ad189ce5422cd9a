use serde::Serialize;

use super::params::{Bound, Params};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub op_name: String,
    pub max_rel_err: f64,
    /// Worst relative error for each parameter tensor.
    pub per_parameter_errors: Vec<(String, f64)>,
    pub passed: bool,
    /// Set when the function could not be evaluated at some probe.
    pub diagnostic: Option<String>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks the tape gradient of the scalar `f` at `point` against central
/// differences `(f(x+h) - f(x-h)) / 2h`, entry by entry.
pub fn grad_check<F>(op_name: &str, f: F, point: &Params, h: f64, tol: f64) -> GradCheckReport
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let fail = |msg: String| GradCheckReport {
        op_name: op_name.to_string(),
        max_rel_err: f64::INFINITY,
        per_parameter_errors: Vec::new(),
        passed: false,
        diagnostic: Some(msg),
    };
    if !(h > 0.0) {
        return fail(format!("step h must be positive, got {h}"));
    }
    let analytic = match analytic_gradients(&f, point) {
        Ok(g) => g,
        Err(e) => return fail(format!("evaluation at the base point failed: {e}")),
    };

    let eval = |p: &Params| -> Result<f64> {
        let mut tape = Tape::new();
        let b = p.bind(&mut tape)?;
        let out = f(&mut tape, &b)?;
        Ok(tape.scalar(out))
    };

    let mut probe = point.clone();
    let mut per = Vec::new();
    let mut max_rel = 0.0f64;
    let names: Vec<String> = point.names().cloned().collect();
    for name in &names {
        let grad = &analytic[name];
        let mut worst = 0.0f64;
        for k in 0..grad.len() {
            let base = point.get(name).expect("bound name").data()[k];
            let mut at = |x: f64| -> Result<f64> {
                probe.get_mut(name).expect("bound name").data_mut()[k] = x;
                let v = eval(&probe);
                probe.get_mut(name).expect("bound name").data_mut()[k] = base;
                v
            };
            let (fp, fm) = match (at(base + h), at(base - h)) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
                (a, b) => {
                    return fail(format!(
                        "non-finite or failed evaluation probing {name}[{k}]: {:?} / {:?}",
                        a.map_err(|e| e.to_string()),
                        b.map_err(|e| e.to_string())
                    ))
                }
            };
            let numeric = (fp - fm) / (2.0 * h);
            worst = worst.max(rel_err(grad.data()[k], numeric));
        }
        max_rel = max_rel.max(worst);
        per.push((name.clone(), worst));
    }
    GradCheckReport {
        op_name: op_name.to_string(),
        max_rel_err: max_rel,
        per_parameter_errors: per,
        passed: max_rel <= tol,
        diagnostic: None,
    }
}

fn analytic_gradients<F>(
    f: &F,
    point: &Params,
) -> Result<std::collections::BTreeMap<String, super::tensor::Tensor>>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let b = point.bind(&mut tape)?;
    let out = f(&mut tape, &b)?;
    let g = tape.backward(out)?;
    Ok(b.gradients(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numcore::Tensor;

    fn point(name: &str, v: Vec<f64>) -> Params {
        let mut p = Params::new();
        p.insert(name, Tensor::vector(v));
        p
    }

    #[test]
    fn quadratic_passes() {
        let p = point("x", vec![1.0, 2.0]);
        let r = grad_check(
            "sum_sq",
            |t, b| {
                let x = b.get("x")?;
                let y = t.mul(x, x)?;
                t.sum(y)
            },
            &p,
            1e-5,
            1e-8,
        );
        assert!(r.passed, "{r:?}");
        assert!(r.max_rel_err <= 1e-8);
    }

    #[test]
    fn constant_passes() {
        let p = point("x", vec![0.3, -0.7]);
        let r = grad_check(
            "const",
            |t, _| t.leaf(Tensor::scalar(4.0)),
            &p,
            1e-5,
            1e-8,
        );
        assert!(r.passed);
        assert_eq!(r.max_rel_err, 0.0);
    }

    #[test]
    fn wrong_gradient_fails() {
        let p = point("x", vec![1.0, 2.0]);
        let r = grad_check(
            "bogus",
            |t, b| {
                let x = b.get("x")?;
                let v = t.value(x).data().iter().map(|v| v * v).sum::<f64>();
                t.fused_scalar(&[x], v, vec![Tensor::vector(vec![1.0, 1.0])])
            },
            &p,
            1e-5,
            1e-4,
        );
        assert!(!r.passed);
    }

    #[test]
    fn non_finite_probe_is_reported_not_panicking() {
        let p = point("x", vec![0.0]);
        let r = grad_check(
            "log",
            |t, b| {
                let x = b.get("x")?;
                let v = t.value(x).data()[0];
                if v < 0.0 {
                    return Err(Error::NonFinite("log of negative".into()));
                }
                t.fused_scalar(&[x], v.sqrt(), vec![Tensor::vector(vec![0.0])])
            },
            &p,
            1e-5,
            1e-4,
        );
        assert!(!r.passed);
        assert!(r.diagnostic.is_some());
    }
}
