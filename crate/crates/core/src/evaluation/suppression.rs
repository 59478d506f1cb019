use serde::{Deserialize, Serialize};

use crate::attribution::{attribute_batch, AttributionMap, Method, MethodConfig, Models};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{argmax, Tensor};

pub const DEFAULT_FRACTIONS: [f64; 8] = [0.01, 0.02, 0.05, 0.10, 0.25, 0.50, 0.75, 1.0];

/// Value written into suppressed features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    #[default]
    Zero,
    /// One value per channel, typically the training-split channel mean.
    ChannelMean(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressionConfig {
    /// Kept fractions, strictly increasing in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub fill: Fill,
    /// Evaluate only the first this-many instances.
    pub max_instances: Option<usize>,
    pub batch_size: usize,
    pub workers: usize,
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        SuppressionConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            runs: 5,
            seed: 0,
            fill: Fill::Zero,
            max_instances: None,
            batch_size: 128,
            workers: 1,
        }
    }
}

impl SuppressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.fractions.is_empty() {
            return Err(Error::config(
                "fractions",
                "need at least one keep fraction",
            ));
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::config(
                "fractions",
                "every fraction must lie in (0, 1]",
            ));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("fractions", "must be strictly increasing"));
        }
        Ok(())
    }
}

/// Accuracy of the raw classifier on suppressed inputs, per kept fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionCurve {
    pub method: Method,
    pub keep_fractions: Vec<f64>,
    pub accuracy_mean: Vec<f64>,
    /// Sample standard deviation over runs; zero for a single run.
    pub accuracy_std: Vec<f64>,
    pub run_count: usize,
    /// `per_run[r][f]`: accuracy of run `r` at fraction `f`.
    pub per_run: Vec<Vec<f64>>,
}

/// Flat indices of the `k` largest values, ties broken by ascending index.
pub fn keep_set(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index among equal values
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(k);
    order
}

fn kept_count(len: usize, keep_fraction: f64) -> Result<usize> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::config(
            "keep_fraction",
            format!("must lie in (0, 1], got {keep_fraction}"),
        ));
    }
    Ok(((keep_fraction * len as f64).ceil() as usize).min(len))
}

/// Keeps the `ceil(keep_fraction · C·T)` features of the `(C, T)` instance
/// `x` with the largest `values`; the rest take the fill value.
pub fn suppress_values(
    x: &Tensor,
    values: &Tensor,
    keep_fraction: f64,
    fill: &Fill,
) -> Result<Tensor> {
    if x.shape() != values.shape() || x.rank() != 2 {
        return Err(Error::shape(
            "suppress_input",
            format!("instance {:?} vs map {:?}", x.shape(), values.shape()),
        ));
    }
    let k = kept_count(x.len(), keep_fraction)?;
    let t = x.shape()[1];
    let mut out = match fill {
        Fill::Zero => Tensor::zeros(x.shape()),
        Fill::ChannelMean(means) => {
            if means.len() != x.shape()[0] {
                return Err(Error::shape(
                    "suppress_input",
                    format!("{} fill values for {} channels", means.len(), x.shape()[0]),
                ));
            }
            let data = (0..x.len()).map(|i| means[i / t]).collect();
            Tensor::new(x.shape().to_vec(), data)?
        }
    };
    for i in keep_set(values.data(), k) {
        out.data_mut()[i] = x.data()[i];
    }
    Ok(out)
}

/// Zero-fill suppression guided by an attribution map.
pub fn suppress_input(x: &Tensor, map: &AttributionMap, keep_fraction: f64) -> Result<Tensor> {
    suppress_values(x, &map.values, keep_fraction, &Fill::Zero)
}

/// Mean from the pooled hit count, so equal runs reproduce the single-run
/// accuracy bit for bit; sample standard deviation of the run accuracies.
fn mean_std(hits: &[usize], instances: usize) -> (f64, f64) {
    let runs = hits.len() as f64;
    let mean = hits.iter().sum::<usize>() as f64 / (runs * instances as f64);
    if hits.len() < 2 {
        return (mean, 0.0);
    }
    let var = hits
        .iter()
        .map(|&h| h as f64 / instances as f64 - mean)
        .map(|d| d * d)
        .sum::<f64>()
        / (runs - 1.0);
    (mean, var.sqrt())
}

/// Correct predictions per fraction for one batch of instances.
fn batch_hits(
    models: Models<'_>,
    method: Method,
    inputs: &Tensor,
    labels: &[usize],
    ids: &[u64],
    mcfg: &MethodConfig,
    cfg: &SuppressionConfig,
) -> Result<Vec<usize>> {
    let maps = attribute_batch(method, models, inputs, ids, mcfg)?;
    let k = models.classifier.spec().class_count;
    let mut hits = Vec::with_capacity(cfg.fractions.len());
    for &f in &cfg.fractions {
        let suppressed = maps
            .iter()
            .enumerate()
            .map(|(i, m)| suppress_values(&inputs.index(i), &m.values, f, &cfg.fill))
            .collect::<Result<Vec<_>>>()?;
        let logits = models.classifier.logits(&Tensor::stack(&suppressed)?)?;
        hits.push(
            logits
                .data()
                .chunks(k)
                .zip(labels)
                .filter(|(l, &y)| argmax(l) == y)
                .count(),
        );
    }
    Ok(hits)
}

/// Runs the suppression benchmark for each method over `data`.
///
/// Deterministic methods are attributed once and their accuracy repeated for
/// every run; `random` and `smoothgrad` draw fresh noise per run from
/// `(cfg.seed, run)`.
pub fn suppression_test(
    models: Models<'_>,
    methods: &[Method],
    data: &Dataset,
    cfg: &SuppressionConfig,
    mcfg: &MethodConfig,
) -> Result<Vec<SuppressionCurve>> {
    cfg.validate()?;
    mcfg.validate()?;
    if let Some(m) = methods
        .iter()
        .find(|m| m.needs_autoencoder() && models.autoencoder.is_none())
    {
        return Err(Error::Contract(format!("{m} needs an auto-encoder")));
    }
    let n = cfg.max_instances.map_or(data.len(), |m| m.min(data.len()));
    let rows: Vec<usize> = (0..n).collect();
    let chunks: Vec<&[usize]> = rows.chunks(cfg.batch_size).collect();
    let mut curves = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut per_run: Vec<Vec<usize>> = Vec::with_capacity(cfg.runs);
        for run in 0..cfg.runs {
            if run > 0 && !method.is_stochastic() {
                per_run.push(per_run[0].clone());
                continue;
            }
            let run_cfg = MethodConfig {
                noise_seed: rng::derive(cfg.seed, run as u64),
                ..mcfg.clone()
            };
            let hits = crate::parallel::map(&chunks, cfg.workers, |rows| {
                let (inputs, labels) = data.gather(rows);
                let ids: Vec<u64> = rows.iter().map(|&r| r as u64).collect();
                batch_hits(models, method, &inputs, &labels, &ids, &run_cfg, cfg)
            })?;
            per_run.push(
                (0..cfg.fractions.len())
                    .map(|f| hits.iter().map(|h| h[f]).sum())
                    .collect(),
            );
        }
        let (accuracy_mean, accuracy_std) = (0..cfg.fractions.len())
            .map(|f| mean_std(&per_run.iter().map(|r| r[f]).collect::<Vec<_>>(), n))
            .unzip();
        let per_run = per_run
            .iter()
            .map(|r| r.iter().map(|&h| h as f64 / n as f64).collect())
            .collect();
        curves.push(SuppressionCurve {
            method,
            keep_fractions: cfg.fractions.clone(),
            accuracy_mean,
            accuracy_std,
            run_count: cfg.runs,
            per_run,
        });
    }
    Ok(curves)
}
