//! Central finite-difference gradient checking.

use super::params::{ParamId, ParamStore};
use super::{NumericsError, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic and numeric derivative.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares reverse-mode gradients of `loss` with central differences of
/// step `h` for every scalar of the selected parameters (all when `only`
/// is `None`).
pub fn check_gradients<F>(
    store: &mut ParamStore,
    only: Option<&[ParamId]>,
    h: f64,
    floor: f64,
    loss: F,
) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var), NumericsError>,
{
    let (tape, out) = loss(store)?;
    let grads = tape.backward(out)?;
    let ids: Vec<ParamId> = match only {
        Some(ids) => ids.to_vec(),
        None => store.ids().collect(),
    };
    let eval = |s: &ParamStore| -> Result<f64, NumericsError> {
        let (tape, out) = loss(s)?;
        Ok(tape.value(out).item())
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for id in ids {
        for i in 0..store.tensor(id).numel() {
            let orig = store.tensor(id).data()[i];
            store.tensor_mut(id).data_mut()[i] = orig + h;
            let up = eval(store)?;
            store.tensor_mut(id).data_mut()[i] = orig - h;
            let down = eval(store)?;
            store.tensor_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[i]);
            let err = relative_error(analytic, numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
