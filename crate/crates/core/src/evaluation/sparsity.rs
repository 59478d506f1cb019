use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::AutoEncoder;
use crate::tensor::Tensor;

const CHUNK: usize = 256;

/// Fraction of the features of one instance with `|v| < relative · (max - min)`.
pub fn near_zero_fraction(values: &[f64], relative: f64) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let threshold = relative * (hi - lo);
    values.iter().filter(|v| v.abs() < threshold).count() as f64 / values.len() as f64
}

/// Mean over instances of [`near_zero_fraction`] of the auto-encoder output,
/// and the mean absolute output value.
pub fn output_sparsity(ae: &AutoEncoder, data: &Dataset, relative: f64) -> Result<(f64, f64)> {
    if !(relative >= 0.0) {
        return Err(Error::config(
            "relative",
            format!("must be non-negative, got {relative}"),
        ));
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    let per = data.channels() * data.length();
    let (mut frac, mut abs) = (0.0, 0.0);
    for chunk in rows.chunks(CHUNK) {
        let (x, _) = data.gather(chunk);
        let r = ae.reconstruct(&x)?;
        for inst in r.data().chunks(per) {
            frac += near_zero_fraction(inst, relative);
        }
        abs += r.abs().sum();
    }
    Ok((frac / data.len() as f64, abs / (data.len() * per) as f64))
}

/// [`near_zero_fraction`] averaged over the rows of a `(N, C, T)` tensor.
pub fn input_sparsity(inputs: &Tensor, relative: f64) -> f64 {
    let n = inputs.shape()[0];
    let per = inputs.len() / n;
    inputs
        .data()
        .chunks(per)
        .map(|i| near_zero_fraction(i, relative))
        .sum::<f64>()
        / n as f64
}
