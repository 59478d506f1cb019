use super::auto::auto_hyperparams;
use super::BetaRule;
use crate::data::Batch;
use crate::engine::{NodeId, Tape};
use crate::error::Result;
use crate::models::{AutoEncoder, Classifier, ModelBundle, ParamGroup};
use crate::tensor::Tensor;

/// Regularizer added to the stacked cross-entropy during fine-tuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FinetuneObjective {
    /// Cross-entropy only.
    Palacio,
    /// `γ‖x − r‖² + β‖r‖₁` per instance.
    Manual { gamma: f64, beta: f64 },
    /// `C‖r ⊙ β*‖₁ + ‖(x − r) ⊙ γ*‖²` with saliency-derived weights.
    Auto { c: f64, beta_rule: BetaRule },
}

impl FinetuneObjective {
    pub fn name(&self) -> &'static str {
        match self {
            FinetuneObjective::Palacio => "palacio",
            FinetuneObjective::Manual { .. } => "tsinsight",
            FinetuneObjective::Auto { .. } => "tsinsight_auto",
        }
    }
}

/// `λ Σ ‖W‖²` over trainable weight tensors (biases excluded).
fn weight_penalty(
    tape: &mut Tape,
    bound: &[(String, NodeId)],
    trainable: impl Fn(&str) -> bool,
    lambda: f64,
    loss: NodeId,
) -> Result<NodeId> {
    let mut total = None;
    for (name, id) in bound {
        if name.ends_with("bias") || !trainable(name) {
            continue;
        }
        let sq = tape.l2_norm_sq(*id)?;
        total = Some(match total {
            None => sq,
            Some(acc) => tape.add(acc, sq)?,
        });
    }
    match total {
        Some(t) => {
            let scaled = tape.scale(t, lambda)?;
            tape.add(loss, scaled)
        }
        None => Ok(loss),
    }
}

/// Mean cross-entropy plus weight penalty.
pub fn classifier_loss(
    tape: &mut Tape,
    model: &Classifier,
    batch: &Batch,
    weight_decay: f64,
) -> Result<NodeId> {
    let x = tape.constant(batch.inputs.clone());
    let g = model.forward(tape, x, true, "")?;
    let ce = tape.cross_entropy(g.logits, &batch.labels)?;
    weight_penalty(tape, &g.params, |_| true, weight_decay, ce)
}

/// Mean squared reconstruction error plus weight penalty.
pub fn autoencoder_loss(
    tape: &mut Tape,
    model: &AutoEncoder,
    batch: &Batch,
    weight_decay: f64,
) -> Result<NodeId> {
    let x = tape.constant(batch.inputs.clone());
    let (r, bound) = model.forward(tape, x, |_| true, "")?;
    let mse = tape.mse(r, x)?;
    weight_penalty(tape, &bound, |_| true, weight_decay, mse)
}

/// Stacked cross-entropy, the objective's regularizer averaged over the
/// batch, and the weight penalty on the trainable auto-encoder groups.
pub fn finetune_loss(
    tape: &mut Tape,
    bundle: &ModelBundle,
    batch: &Batch,
    objective: &FinetuneObjective,
    weight_decay: f64,
) -> Result<NodeId> {
    let x = tape.constant(batch.inputs.clone());
    let g = bundle.stacked_forward(tape, x)?;
    let n = batch.labels.len() as f64;
    let mut loss = tape.cross_entropy(g.logits, &batch.labels)?;
    match *objective {
        FinetuneObjective::Palacio => {}
        FinetuneObjective::Manual { gamma, beta } => {
            let diff = tape.sub(x, g.reconstruction)?;
            let rec = tape.l2_norm_sq(diff)?;
            let rec = tape.scale(rec, gamma / n)?;
            let sparse = tape.l1_norm(g.reconstruction)?;
            let sparse = tape.scale(sparse, beta / n)?;
            loss = tape.add(loss, rec)?;
            loss = tape.add(loss, sparse)?;
        }
        FinetuneObjective::Auto { c, beta_rule } => {
            let weights = auto_hyperparams(bundle, &batch.inputs)?;
            let gamma =
                Tensor::stack(&weights.iter().map(|w| w.gamma.clone()).collect::<Vec<_>>())?;
            let beta = Tensor::stack(
                &weights
                    .iter()
                    .map(|w| w.beta_map(beta_rule))
                    .collect::<Vec<_>>(),
            )?;
            let gamma = tape.constant(gamma);
            let beta = tape.constant(beta);
            let diff = tape.sub(x, g.reconstruction)?;
            let weighted = tape.hadamard(diff, gamma)?;
            let rec = tape.l2_norm_sq(weighted)?;
            let rec = tape.scale(rec, 1.0 / n)?;
            let masked = tape.hadamard(g.reconstruction, beta)?;
            let sparse = tape.l1_norm(masked)?;
            let sparse = tape.scale(sparse, c / n)?;
            loss = tape.add(loss, rec)?;
            loss = tape.add(loss, sparse)?;
        }
    }
    let trainable = |name: &str| !bundle.is_frozen(ParamGroup::of_autoencoder_param(name));
    weight_penalty(tape, &g.autoencoder_params, trainable, weight_decay, loss)
}
