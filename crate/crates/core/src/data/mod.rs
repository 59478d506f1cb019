//! Datasets: synthetic generation, CSV ingestion, normalization and batching.

mod batch;
mod csv;
mod normalize;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use batch::{batch_indices, batch_iter, Batch};
pub use csv::{load_csv_dataset, read_csv_file, write_csv_dataset, write_csv_file};
pub use normalize::{apply_normalization, normalize, normalize_splits, NormStats};
pub use synth::{
    generate_synthetic_anomaly, synthesize_split, PointAnomaly, SplitSynthesis, SynthConfig,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Labelled instances of shape `(N, C, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    split: Split,
    class_count: usize,
    normalization: Option<NormStats>,
    /// Injected point anomalies per instance, when known (synthetic data).
    anomalies: Option<Vec<Vec<PointAnomaly>>>,
}

impl Dataset {
    pub fn new(
        inputs: Tensor,
        labels: Vec<usize>,
        split: Split,
        class_count: usize,
    ) -> Result<Self> {
        if inputs.rank() != 3 {
            return Err(Error::shape(
                "dataset",
                format!("inputs must be (N, C, T), got {:?}", inputs.shape()),
            ));
        }
        if labels.len() != inputs.shape()[0] {
            return Err(Error::shape(
                "dataset",
                format!(
                    "{} labels for {} instances",
                    labels.len(),
                    inputs.shape()[0]
                ),
            ));
        }
        if class_count < 2 {
            return Err(Error::config("class_count", "at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::config(
                "labels",
                format!("label {bad} outside [0, {class_count})"),
            ));
        }
        Ok(Dataset {
            inputs,
            labels,
            split,
            class_count,
            normalization: None,
            anomalies: None,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn normalization(&self) -> Option<&NormStats> {
        self.normalization.as_ref()
    }

    pub fn anomalies(&self) -> Option<&[Vec<PointAnomaly>]> {
        self.anomalies.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn length(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Instance `i` as a `(C, T)` tensor.
    pub fn instance(&self, i: usize) -> Tensor {
        self.inputs.index(i)
    }

    /// Inputs and labels for the given rows.
    pub fn gather(&self, rows: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.inputs.select(rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }

    /// The first `n` instances (all of them if `n` exceeds the size).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len()).max(1);
        let rows: Vec<usize> = (0..n).collect();
        let (inputs, labels) = self.gather(&rows);
        Dataset {
            inputs,
            labels,
            split: self.split,
            class_count: self.class_count,
            normalization: self.normalization.clone(),
            anomalies: self.anomalies.as_ref().map(|a| a[..n].to_vec()),
        }
    }

    pub(crate) fn with_anomalies(mut self, anomalies: Vec<Vec<PointAnomaly>>) -> Self {
        self.anomalies = Some(anomalies);
        self
    }

    pub(crate) fn with_inputs(&self, inputs: Tensor, stats: Option<NormStats>) -> Dataset {
        Dataset {
            inputs,
            labels: self.labels.clone(),
            split: self.split,
            class_count: self.class_count,
            normalization: stats,
            anomalies: self.anomalies.clone(),
        }
    }

    /// Fraction of instances with label 1.
    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len() as f64
    }
}

/// Train, validation and test datasets that share a shape.
#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl DatasetSplits {
    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn channels(&self) -> usize {
        self.train.channels()
    }

    pub fn length(&self) -> usize {
        self.train.length()
    }

    pub fn class_count(&self) -> usize {
        self.train.class_count()
    }
}
