use super::{Graph, ParamId, ParamStore, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name, flat index, tape gradient, finite difference.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// Compares tape gradients of `f` against central differences
/// `(f(p + h) - f(p - h)) / 2h` for every scalar of every parameter.
/// Relative error is `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<L>(f: L, store: &mut ParamStore<f64>, h: f64) -> Result<GradCheckReport>
where
    L: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut g = Graph::new(false);
    let loss = f(&mut g, store)?;
    if !g.scalar(loss).is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    store.zero_grads();
    g.backward(loss, store)?;
    let analytic: Vec<(ParamId, Vec<f64>)> = store
        .ids()
        .map(|id| (id, store.grad(id).data.clone()))
        .collect();
    store.zero_grads();

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(false);
        let l = f(&mut g, store)?;
        let v = g.scalar(l);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("loss under perturbation".into()))
        }
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    for (id, grads) in analytic {
        for (j, &a) in grads.iter().enumerate() {
            let orig = store.value(id).data[j];
            store.value_mut(id).data[j] = orig + h;
            let plus = eval(store)?;
            store.value_mut(id).data[j] = orig - h;
            let minus = eval(store)?;
            store.value_mut(id).data[j] = orig;
            let fd = (plus - minus) / (2.0 * h);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                if rel >= report.max_rel_err {
                    report.worst = Some((store.name(id).to_string(), j, a, fd));
                }
            }
        }
    }
    Ok(report)
}
