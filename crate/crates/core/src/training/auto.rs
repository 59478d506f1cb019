use super::BetaRule;
use crate::engine::BackwardMode;
use crate::error::{Error, Result};
use crate::models::{LogitTarget, ModelBundle};
use crate::tensor::Tensor;

/// Saliency-derived loss weights for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceWeights {
    /// Min-max scaled saliency `I(x)`, the pointwise reconstruction weight.
    pub gamma: Tensor,
    /// Mean of `1 - I(x)` over the instance's features.
    pub beta: f64,
    /// Saliency was constant: `gamma` is all ones and `beta` is zero.
    pub degenerate: bool,
}

impl InstanceWeights {
    /// Sparsity weight per feature under `rule`.
    pub fn beta_map(&self, rule: BetaRule) -> Tensor {
        match rule {
            BetaRule::InstanceMean => Tensor::full(self.gamma.shape(), self.beta),
            BetaRule::Pointwise if self.degenerate => Tensor::zeros(self.gamma.shape()),
            BetaRule::Pointwise => self.gamma.map(|g| 1.0 - g),
        }
    }
}

/// Weights from `|∂(Σ logits)/∂x|` of the bundle's classifier, one entry per
/// row of a `(N, C, T)` batch.
pub fn auto_hyperparams(bundle: &ModelBundle, batch: &Tensor) -> Result<Vec<InstanceWeights>> {
    if batch.rank() != 3 || batch.shape()[0] == 0 {
        return Err(Error::shape(
            "auto_hyperparams",
            format!("need a nonempty (N, C, T) batch, got {:?}", batch.shape()),
        ));
    }
    let grad = bundle.classifier.input_gradient(
        batch,
        &LogitTarget::AllClasses,
        BackwardMode::Standard,
    )?;
    Ok((0..batch.shape()[0])
        .map(|i| {
            let saliency = grad.index(i).abs();
            let (lo, hi) = (saliency.min(), saliency.max());
            if hi > lo {
                let gamma = saliency.map(|v| (v - lo) / (hi - lo));
                let beta = gamma.data().iter().map(|g| 1.0 - g).sum::<f64>() / gamma.len() as f64;
                InstanceWeights {
                    gamma,
                    beta,
                    degenerate: false,
                }
            } else {
                InstanceWeights {
                    gamma: Tensor::ones(saliency.shape()),
                    beta: 0.0,
                    degenerate: true,
                }
            }
        })
        .collect())
}
