use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetSplits, Split};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Generator settings for the point-anomaly dataset.
///
/// Channel 0 is pressure, 1 temperature, 2 torque. Spikes only ever land on
/// channels 1 and above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub length: usize,
    pub channels: usize,
    pub anomaly_rate: f64,
    /// Spike height in units of the instance's channel standard deviation.
    pub spike_magnitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_size: 45_000,
            val_size: 5_000,
            test_size: 10_000,
            length: 50,
            channels: 3,
            anomaly_rate: 0.5,
            spike_magnitude: 6.0,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Default generator with `train_size` training rows and validation and
    /// test splits in the default 1 : 2 proportion to it (train/9, 2·train/9).
    pub fn scaled(train_size: usize, seed: u64) -> Self {
        SynthConfig {
            train_size,
            val_size: (train_size / 9).max(1),
            test_size: (train_size * 2 / 9).max(1),
            seed,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("train_size", self.train_size),
            ("val_size", self.val_size),
            ("test_size", self.test_size),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.length < 2 {
            return Err(Error::config("length", "at least 2 time steps"));
        }
        if self.channels < 2 {
            return Err(Error::config(
                "channels",
                "needs pressure plus at least one spiked channel",
            ));
        }
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 1.0) {
            return Err(Error::config("anomaly_rate", "must lie in (0, 1)"));
        }
        if !(self.spike_magnitude > 0.0 && self.spike_magnitude.is_finite()) {
            return Err(Error::config("spike_magnitude", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be non-negative"));
        }
        Ok(())
    }

    fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_size,
            Split::Val => self.val_size,
            Split::Test => self.test_size,
        }
    }
}

/// One injected spike.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointAnomaly {
    pub channel: usize,
    pub time: usize,
    pub delta: f64,
}

/// A generated split together with its spike-free counterpart.
#[derive(Clone, Debug)]
pub struct SplitSynthesis {
    pub dataset: Dataset,
    pub clean_inputs: Tensor,
}

fn base_channel(rng: &mut rng::Rng, length: usize, noise: &Normal<f64>) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let period = rng.random_range(10.0..=50.0);
            let amplitude = rng.random_range(0.5..1.5);
            let phase = rng.random_range(0.0..2.0 * PI);
            (period, amplitude, phase)
        })
        .collect();
    (0..length)
        .map(|t| {
            let s: f64 = waves
                .iter()
                .map(|&(p, a, ph)| a * (2.0 * PI * t as f64 / p + ph).sin())
                .sum();
            s + noise.sample(rng)
        })
        .collect()
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Generates one split. Each split reads its own ChaCha20 stream.
pub fn synthesize_split(cfg: &SynthConfig, split: Split) -> Result<SplitSynthesis> {
    cfg.validate()?;
    let n = cfg.size(split);
    let split_index = Split::ALL.iter().position(|&s| s == split).unwrap() as u64;
    let mut rng = rng::stream(cfg.seed, rng::STREAM_SYNTH + split_index);
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise std");

    let anomalous_count = ((cfg.anomaly_rate * n as f64).round() as usize).clamp(0, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![0usize; n];
    for &i in &order[..anomalous_count] {
        labels[i] = 1;
    }

    let width = cfg.channels * cfg.length;
    let mut clean = Vec::with_capacity(n * width);
    let mut spiked = Vec::with_capacity(n * width);
    let mut anomalies = Vec::with_capacity(n);
    for &label in &labels {
        let mut instance = Vec::with_capacity(width);
        let mut stds = Vec::with_capacity(cfg.channels);
        for _ in 0..cfg.channels {
            let ch = base_channel(&mut rng, cfg.length, &noise);
            stds.push(std_dev(&ch));
            instance.extend(ch);
        }
        clean.extend_from_slice(&instance);
        let mut spikes = Vec::new();
        if label == 1 {
            let count = rng.random_range(1..=3usize);
            while spikes.len() < count {
                let channel = rng.random_range(1..cfg.channels);
                let time = rng.random_range(0..cfg.length);
                if spikes
                    .iter()
                    .any(|s: &PointAnomaly| s.channel == channel && s.time == time)
                {
                    continue;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let delta = sign * cfg.spike_magnitude * stds[channel];
                instance[channel * cfg.length + time] += delta;
                spikes.push(PointAnomaly {
                    channel,
                    time,
                    delta,
                });
            }
        }
        spiked.extend(instance);
        anomalies.push(spikes);
    }
    let shape = vec![n, cfg.channels, cfg.length];
    let dataset = Dataset::new(Tensor::new(shape.clone(), spiked)?, labels, split, 2)?
        .with_anomalies(anomalies);
    Ok(SplitSynthesis {
        dataset,
        clean_inputs: Tensor::new(shape, clean)?,
    })
}

/// Generates the train, validation and test splits (unnormalized).
pub fn generate_synthetic_anomaly(cfg: &SynthConfig) -> Result<DatasetSplits> {
    Ok(DatasetSplits {
        train: synthesize_split(cfg, Split::Train)?.dataset,
        val: synthesize_split(cfg, Split::Val)?.dataset,
        test: synthesize_split(cfg, Split::Test)?.dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            train_size: 400,
            val_size: 50,
            test_size: 100,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn spikes_touch_one_to_three_non_pressure_coordinates() {
        let s = synthesize_split(&small(), Split::Train).unwrap();
        let ds = &s.dataset;
        for i in 0..ds.len() {
            let diff: Vec<(usize, usize)> = ds
                .instance(i)
                .data()
                .iter()
                .zip(s.clean_inputs.index(i).data())
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(k, _)| (k / ds.length(), k % ds.length()))
                .collect();
            let label = ds.labels()[i];
            assert_eq!(label == 1, !diff.is_empty());
            assert_eq!(ds.anomalies().unwrap()[i].len(), diff.len());
            if label == 1 {
                assert!((1..=3).contains(&diff.len()));
                assert!(diff.iter().all(|&(c, _)| c == 1 || c == 2));
            }
        }
    }

    #[test]
    fn generation_is_reproducible_and_splits_differ() {
        let a = generate_synthetic_anomaly(&small()).unwrap();
        let b = generate_synthetic_anomaly(&small()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_ne!(a.val.instance(0), a.test.instance(0));
    }

    #[test]
    fn class_balance_matches_rate() {
        let cfg = SynthConfig {
            test_size: 10_000,
            ..small()
        };
        let test = synthesize_split(&cfg, Split::Test).unwrap().dataset;
        assert!((test.positive_rate() - 0.5).abs() <= 0.01);
    }

    #[test]
    fn pressure_is_class_independent() {
        let cfg = SynthConfig {
            test_size: 10_000,
            ..small()
        };
        let test = synthesize_split(&cfg, Split::Test).unwrap().dataset;
        let t = test.length();
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..test.len() {
            let x = test.instance(i);
            let mean = x.data()[..t].iter().sum::<f64>() / t as f64;
            groups[test.labels()[i]].push(mean);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let (m0, se0) = stats(&groups[0]);
        let (m1, se1) = stats(&groups[1]);
        let se = (se0 + se1).sqrt();
        assert!((m0 - m1).abs() < 3.0 * se, "{m0} vs {m1}, se {se}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            anomaly_rate: 1.0,
            ..small()
        };
        assert!(generate_synthetic_anomaly(&cfg).is_err());
    }
}
