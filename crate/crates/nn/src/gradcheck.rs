//! Central finite-difference verification of tape gradients (float64).

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Check at most this many evenly spaced coordinates per parameter.
    pub max_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_per_param: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Relative error used throughout: `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient of the scalar returned by `f` against
/// central differences for every (or every sampled) parameter coordinate.
/// `f` must be deterministic (evaluation-mode or fixed dropout stream).
pub fn gradient_check<F>(
    store: &ParamStore<f64>,
    f: F,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss)?;
    let mut analytic = store.clone();
    analytic.zero_grads();
    tape.accumulate_param_grads(&mut analytic);

    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(&mut t, s)?;
        Ok(t.value(l).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut probe = store.clone();
    for id in store.ids() {
        let n = store.get(id).numel();
        let stride = match config.max_per_param {
            Some(k) if k > 0 && n > k => n.div_ceil(k),
            _ => 1,
        };
        let grads = analytic
            .get(id)
            .grad
            .clone()
            .unwrap_or_else(|| vec![0.0; n]);
        for j in (0..n).step_by(stride) {
            let orig = store.get(id).data()[j];
            probe.get_mut(id).data_mut()[j] = orig + config.eps;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[j] = orig - config.eps;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * config.eps);
            let err = relative_error(grads[j], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst_param = store.name(id).to_string();
                report.worst_index = j;
                report.analytic = grads[j];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
