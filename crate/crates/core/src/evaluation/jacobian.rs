use rand::seq::index;

use crate::data::Dataset;
use crate::engine::{BackwardMode, Tape};
use crate::error::{Error, Result};
use crate::models::AutoEncoder;
use crate::rng::{self, STREAM_SAMPLING};
use crate::tensor::Tensor;

/// Rows `outputs` of the Jacobian of `D(E(·))`, summed over the rows of
/// `batch`. Each output coordinate costs one backward pass.
fn jacobian_rows(ae: &AutoEncoder, batch: &Tensor, outputs: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = batch.shape()[0];
    let d = batch.len() / n;
    let mut tape = Tape::new();
    let x = tape.input(batch.clone());
    let (out, _) = ae.forward(&mut tape, x, |_| false, "")?;
    let mut rows = Vec::with_capacity(outputs.len());
    for &o in outputs {
        let mut seed = Tensor::zeros(batch.shape());
        for i in 0..n {
            seed.data_mut()[i * d + o] = 1.0;
        }
        tape.backward(out, Some(seed), BackwardMode::Standard)?;
        let grad = tape.grad(x).expect("input is reachable from the output");
        let mut row = vec![0.0; d];
        for inst in grad.data().chunks(d) {
            for (r, g) in row.iter_mut().zip(inst) {
                *r += g;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn assemble(ae: &AutoEncoder, batch: &Tensor, workers: usize) -> Result<Tensor> {
    let n = batch.shape()[0];
    let d = batch.len() / n;
    let coords: Vec<usize> = (0..d).collect();
    let per = d.div_ceil(workers.max(1));
    let chunks: Vec<&[usize]> = coords.chunks(per).collect();
    let parts = crate::parallel::map(&chunks, workers, |c| jacobian_rows(ae, batch, c))?;
    let data: Vec<f64> = parts
        .into_iter()
        .flatten()
        .flatten()
        .map(|v| v / n as f64)
        .collect();
    Tensor::new(vec![d, d], data)
}

/// `∂(D∘E)(x)/∂x` for one `(C, T)` instance as a `(C·T, C·T)` matrix whose
/// row `o` holds the derivatives of flat output `o`.
pub fn instance_jacobian(ae: &AutoEncoder, x: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::shape(
            "jacobian",
            format!("expected (C, T), got {:?}", x.shape()),
        ));
    }
    assemble(ae, &x.unsqueeze(), 1)
}

/// Mean Jacobian over `sample_count` instances of `data`, drawn without
/// replacement from `seed`. Row computations are spread over `workers`
/// threads; the result does not depend on the worker count.
pub fn average_jacobian(
    ae: &AutoEncoder,
    data: &Dataset,
    sample_count: usize,
    seed: u64,
    workers: usize,
) -> Result<Tensor> {
    if sample_count == 0 || sample_count > data.len() {
        return Err(Error::config(
            "sample_count",
            format!("must lie in 1..={}, got {sample_count}", data.len()),
        ));
    }
    let mut rows = index::sample(
        &mut rng::stream(seed, STREAM_SAMPLING),
        data.len(),
        sample_count,
    )
    .into_vec();
    rows.sort_unstable();
    let (batch, _) = data.gather(&rows);
    assemble(ae, &batch, workers)
}
