//! Optimizers, the four training objectives and saliency-weighted
//! hyperparameters for the sparsity objective.

mod auto;
mod checks;
mod fit;
mod objective;
mod optim;
#[cfg(test)]
mod tests;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use auto::{auto_hyperparams, InstanceWeights};
pub use checks::{objective_checks, OBJECTIVE_STEP};
pub use fit::{
    finetune_instance, finetune_palacio, finetune_tsinsight, reconstruction_mse, train_autoencoder,
    train_classifier,
};
pub use objective::{autoencoder_loss, classifier_loss, finetune_loss, FinetuneObjective};
pub use optim::Optimizer;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Passes over the training split. Zero leaves the model untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Coefficient of the squared L2 penalty on weight tensors.
    pub weight_decay: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        for (field, v) in [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            ));
        }
        for (field, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, format!("must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Fixed γ and β from the config.
    #[default]
    Manual,
    /// Per-instance weights from the classifier's saliency.
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One auto-encoder for the whole training split.
    #[default]
    Dataset,
    /// One auto-encoder fitted to a single test instance.
    Instance,
}

/// How the auto mode turns inverted saliency into a sparsity weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    /// One scalar per instance: the mean of `1 - I(x)`.
    #[default]
    InstanceMean,
    /// `1 - I(x)` applied feature by feature.
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsInsightConfig {
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub mode: WeightMode,
    /// Multiplier of the sparsity term in auto mode.
    pub c: f64,
    pub scope: Scope,
    /// Test-split row explained when `scope` is `instance`.
    pub instance: usize,
    pub instance_steps: usize,
    pub beta_rule: BetaRule,
}

impl Default for TsInsightConfig {
    fn default() -> Self {
        TsInsightConfig {
            gamma: None,
            beta: None,
            mode: WeightMode::Manual,
            c: 10.0,
            scope: Scope::Dataset,
            instance: 0,
            instance_steps: 200,
            beta_rule: BetaRule::InstanceMean,
        }
    }
}

impl TsInsightConfig {
    pub fn manual(gamma: f64, beta: f64) -> Self {
        TsInsightConfig {
            gamma: Some(gamma),
            beta: Some(beta),
            ..Self::default()
        }
    }

    pub fn auto() -> Self {
        TsInsightConfig {
            mode: WeightMode::Auto,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == WeightMode::Manual {
            for (field, v) in [("gamma", self.gamma), ("beta", self.beta)] {
                match v {
                    None => {
                        return Err(Error::config(field, "manual mode needs an explicit value"))
                    }
                    Some(v) if !(v >= 0.0 && v.is_finite()) => {
                        return Err(Error::config(
                            field,
                            format!("must be non-negative, got {v}"),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config(
                "c",
                format!("must be non-negative, got {}", self.c),
            ));
        }
        if self.scope == Scope::Instance && self.instance_steps == 0 {
            return Err(Error::config("instance_steps", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn objective(&self) -> FinetuneObjective {
        match self.mode {
            WeightMode::Manual => FinetuneObjective::Manual {
                gamma: self.gamma.unwrap_or(0.0),
                beta: self.beta.unwrap_or(0.0),
            },
            WeightMode::Auto => FinetuneObjective::Auto {
                c: self.c,
                beta_rule: self.beta_rule,
            },
        }
    }
}

/// Quantity tracked on the validation and test splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    ReconstructionMse,
}

impl Metric {
    fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Metric::Accuracy => candidate > incumbent,
            Metric::ReconstructionMse => candidate < incumbent,
        }
    }
}

/// Outcome of one training job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub objective: String,
    pub metric: Metric,
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    pub step_loss: Vec<f64>,
    /// Validation metric after each epoch.
    pub val_metric: Vec<f64>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub test_metric: f64,
    pub wall_time_secs: f64,
}

impl FitReport {
    /// The report with wall time zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> FitReport {
        FitReport {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a config from TOML (`.toml` extension) or JSON text.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.extension().is_some_and(|e| e == "toml"))
}

pub fn parse_config<T: DeserializeOwned>(text: &str, toml: bool) -> Result<T> {
    if toml {
        Ok(toml::from_str(text)?)
    } else {
        Ok(serde_json::from_str(text)?)
    }
}
