use std::collections::BTreeMap;

use serde::Serialize;

use super::tape::{BackwardMode, NodeId, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denominator floor for the relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coordinate {
    pub parameter: String,
    pub index: usize,
}

/// Outcome of comparing backward gradients against central differences.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_coordinate: Option<Coordinate>,
    pub per_parameter_errors: BTreeMap<String, f64>,
    /// Analytic gradients, keyed like `point`.
    #[serde(skip)]
    pub analytic: BTreeMap<String, Tensor>,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

fn evaluate<F>(
    f: &F,
    point: &[(String, Tensor)],
    track: bool,
) -> Result<(Tape, NodeId, Vec<NodeId>)>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids = point
        .iter()
        .map(|(name, value)| tape.param(name, value.clone(), track))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &ids)?;
    let value = tape.value(out);
    if !value.is_scalar() {
        return Err(Error::NonScalarOutput(value.shape().to_vec()));
    }
    if !value.item().is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    Ok((tape, out, ids))
}

/// Compares the backward gradient of a scalar function of named tensors
/// against central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` at every
/// coordinate.
///
/// `f` receives a fresh tape and the node ids of `point` (registered as
/// trainable parameters, in order) and returns the scalar output node.
pub fn grad_check<F>(f: F, point: &[(String, Tensor)], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(
            "step",
            format!("must be positive, got {step}"),
        ));
    }
    let (mut tape, out, ids) = evaluate(&f, point, true)?;
    tape.backward(out, None, BackwardMode::Standard)?;
    let analytic: Vec<Tensor> = ids
        .iter()
        .zip(point)
        .map(|(&id, (_, v))| {
            tape.grad(id)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(v.shape()))
        })
        .collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_coordinate: None,
        per_parameter_errors: BTreeMap::new(),
        analytic: BTreeMap::new(),
    };
    let mut probe: Vec<(String, Tensor)> = point.to_vec();
    for (p, (name, value)) in point.iter().enumerate() {
        let mut worst = 0.0f64;
        for i in 0..value.len() {
            let original = value.data()[i];
            probe[p].1.data_mut()[i] = original + step;
            let plus = {
                let (t, o, _) = evaluate(&f, &probe, false)?;
                t.value(o).item()
            };
            probe[p].1.data_mut()[i] = original - step;
            let minus = {
                let (t, o, _) = evaluate(&f, &probe, false)?;
                t.value(o).item()
            };
            probe[p].1.data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[p].data()[i], numeric);
            worst = worst.max(err);
            if err > report.max_relative_error || report.worst_coordinate.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst_coordinate = Some(Coordinate {
                    parameter: name.clone(),
                    index: i,
                });
            }
        }
        report.per_parameter_errors.insert(name.clone(), worst);
        report.analytic.insert(name.clone(), analytic[p].clone());
    }
    Ok(report)
}
