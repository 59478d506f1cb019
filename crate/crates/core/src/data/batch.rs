use rand::seq::SliceRandom;

use super::Dataset;
use crate::rng;
use crate::tensor::Tensor;

/// A minibatch with the dataset rows it was drawn from.
#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Row indices grouped into batches; the final short batch is kept.
pub fn batch_indices(n: usize, batch_size: usize, shuffle: bool, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut rng::stream(seed, rng::STREAM_SHUFFLE));
    }
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn batch_iter(
    ds: &Dataset,
    batch_size: usize,
    shuffle: bool,
    seed: u64,
) -> impl Iterator<Item = Batch> + '_ {
    batch_indices(ds.len(), batch_size, shuffle, seed)
        .into_iter()
        .map(move |rows| {
            let (inputs, labels) = ds.gather(&rows);
            Batch {
                inputs,
                labels,
                rows,
            }
        })
}
