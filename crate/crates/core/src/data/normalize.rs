use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetSplits, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel z-normalization statistics, always estimated on a train split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels with zero spread; they pass through unchanged.
    pub passthrough: Vec<bool>,
    pub source: Split,
}

impl NormStats {
    fn estimate(ds: &Dataset) -> NormStats {
        let (c, t) = (ds.channels(), ds.length());
        let mut mean = vec![0.0; c];
        let mut sq = vec![0.0; c];
        for inst in ds.inputs().data().chunks(c * t) {
            for ch in 0..c {
                for &v in &inst[ch * t..(ch + 1) * t] {
                    mean[ch] += v;
                }
            }
        }
        let count = (ds.len() * t) as f64;
        for m in &mut mean {
            *m /= count;
        }
        for inst in ds.inputs().data().chunks(c * t) {
            for ch in 0..c {
                for &v in &inst[ch * t..(ch + 1) * t] {
                    sq[ch] += (v - mean[ch]) * (v - mean[ch]);
                }
            }
        }
        let std: Vec<f64> = sq.iter().map(|s| (s / count).sqrt()).collect();
        let passthrough = std.iter().map(|&s| s <= 1e-12).collect();
        NormStats {
            mean,
            std,
            passthrough,
            source: ds.split(),
        }
    }

    /// Applies the statistics to one `(C, T)` or `(N, C, T)` tensor.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        let t = *x.shape().last().unwrap();
        let c = self.mean.len();
        let mut out = x.clone();
        for (row_index, row) in out.data_mut().chunks_mut(t).enumerate() {
            let ch = row_index % c;
            if self.passthrough[ch] {
                continue;
            }
            for v in row {
                *v = (*v - self.mean[ch]) / self.std[ch];
            }
        }
        out
    }
}

/// Estimates statistics on a train split and normalizes it.
pub fn normalize(train: &Dataset) -> Result<(Dataset, NormStats)> {
    if train.split() != Split::Train {
        return Err(Error::Contract(format!(
            "normalization statistics must come from the train split, got {}",
            train.split()
        )));
    }
    let stats = NormStats::estimate(train);
    let inputs = stats.apply(train.inputs());
    Ok((train.with_inputs(inputs, Some(stats.clone())), stats))
}

/// Normalizes any split with statistics estimated on a train split.
pub fn apply_normalization(ds: &Dataset, stats: &NormStats) -> Result<Dataset> {
    if stats.source != Split::Train {
        return Err(Error::Contract(format!(
            "statistics estimated on the {} split cannot normalize data",
            stats.source
        )));
    }
    if stats.mean.len() != ds.channels() {
        return Err(Error::shape(
            "normalize",
            format!(
                "{} channel statistics for {} channels",
                stats.mean.len(),
                ds.channels()
            ),
        ));
    }
    Ok(ds.with_inputs(stats.apply(ds.inputs()), Some(stats.clone())))
}

/// Normalizes all three splits with train statistics.
pub fn normalize_splits(splits: &DatasetSplits) -> Result<(DatasetSplits, NormStats)> {
    let (train, stats) = normalize(&splits.train)?;
    Ok((
        DatasetSplits {
            train,
            val: apply_normalization(&splits.val, &stats)?,
            test: apply_normalization(&splits.test, &stats)?,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_split, SynthConfig};

    #[test]
    fn train_split_is_standardized() {
        let cfg = SynthConfig {
            train_size: 300,
            seed: 4,
            ..SynthConfig::default()
        };
        let train = synthesize_split(&cfg, Split::Train).unwrap().dataset;
        let (norm, stats) = normalize(&train).unwrap();
        let again = NormStats::estimate(&norm);
        for ch in 0..3 {
            assert!(again.mean[ch].abs() < 1e-6);
            assert!((again.std[ch] - 1.0).abs() < 1e-6);
            assert!(!stats.passthrough[ch]);
        }
    }

    #[test]
    fn constant_channel_passes_through() {
        // channel 0 constant, channel 1 varying
        let mut data = vec![2.5; 2 * 2 * 4];
        data[4..8].copy_from_slice(&[0.0, 1.0, 2.0, 3.0]);
        data[12..16].copy_from_slice(&[4.0, 5.0, 6.0, 7.0]);
        let x = Tensor::new(vec![2, 2, 4], data).unwrap();
        let ds = Dataset::new(x.clone(), vec![0, 1], Split::Train, 2).unwrap();
        let (norm, stats) = normalize(&ds).unwrap();
        assert_eq!(stats.passthrough, vec![true, false]);
        assert_eq!(norm.instance(0).data()[..4], x.data()[..4]);
    }

    #[test]
    fn non_train_statistics_are_rejected() {
        let x = Tensor::new(vec![2, 1, 3], vec![0.0, 1.0, 2.0, 1.0, 2.0, 3.0]).unwrap();
        let test = Dataset::new(x.clone(), vec![0, 1], Split::Test, 2).unwrap();
        assert!(normalize(&test).is_err());
        let forged = NormStats {
            mean: vec![0.0],
            std: vec![1.0],
            passthrough: vec![false],
            source: Split::Test,
        };
        let train = Dataset::new(x, vec![0, 1], Split::Train, 2).unwrap();
        assert!(apply_normalization(&train, &forged).is_err());
    }
}
