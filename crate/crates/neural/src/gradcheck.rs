//! Central finite-difference gradient checking for `f64` models.

use crate::ParamSet;

/// Worst discrepancy found in one parameter block.
#[derive(Clone, Debug)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps round-off on
/// near-zero gradients from being reported as a relative error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares analytic gradients against central differences with step `h`.
///
/// `backward` must zero the gradients, then accumulate the gradient of the
/// same scalar that `loss` evaluates.
pub fn check_gradients<M: ParamSet<f64>>(
    model: &mut M,
    h: f64,
    loss: impl Fn(&M) -> f64,
    mut backward: impl FnMut(&mut M),
) -> Vec<BlockReport> {
    backward(model);
    let analytic: Vec<(String, Vec<f64>)> = model
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.grad.data().to_vec()))
        .collect();

    let mut reports = Vec::new();
    for (block, (name, grads)) in analytic.iter().enumerate() {
        let mut report = BlockReport {
            name: name.clone(),
            entries: grads.len(),
            max_rel_err: 0.0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.named_params_mut()[block].1.value.data()[i];
            model.named_params_mut()[block].1.value.data_mut()[i] = orig + h;
            let plus = loss(model);
            model.named_params_mut()[block].1.value.data_mut()[i] = orig - h;
            let minus = loss(model);
            model.named_params_mut()[block].1.value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a, numeric);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
        reports.push(report);
    }
    reports
}
