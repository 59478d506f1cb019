use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AutoEncoder, Classifier};
use crate::engine::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Classifier,
    Encoder,
    Decoder,
}

impl ParamGroup {
    pub(crate) fn of_autoencoder_param(name: &str) -> ParamGroup {
        if name.starts_with("enc") {
            ParamGroup::Encoder
        } else {
            ParamGroup::Decoder
        }
    }
}

/// Nodes of a stacked forward pass.
#[derive(Clone, Debug)]
pub struct StackedGraph {
    pub reconstruction: NodeId,
    pub logits: NodeId,
    pub autoencoder_params: Vec<(String, NodeId)>,
    pub classifier_params: Vec<(String, NodeId)>,
}

/// Auto-encoder stacked in front of a classifier: `Φ(D(E(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub classifier: Classifier,
    pub autoencoder: AutoEncoder,
    frozen: BTreeSet<ParamGroup>,
}

pub(crate) const AE_PREFIX: &str = "autoencoder.";
pub(crate) const CLF_PREFIX: &str = "classifier.";

impl ModelBundle {
    /// Stacks the models with the classifier frozen.
    pub fn new(classifier: Classifier, autoencoder: AutoEncoder) -> Result<Self> {
        let (c, a) = (classifier.spec(), autoencoder.spec());
        if (c.input_channels, c.sequence_length) != (a.input_channels, a.sequence_length) {
            return Err(Error::shape(
                "stacked_forward",
                format!(
                    "auto-encoder emits ({}, {}) but the classifier expects ({}, {})",
                    a.input_channels, a.sequence_length, c.input_channels, c.sequence_length
                ),
            ));
        }
        Ok(ModelBundle {
            classifier,
            autoencoder,
            frozen: BTreeSet::from([ParamGroup::Classifier]),
        })
    }

    pub fn freeze(&mut self, group: ParamGroup) {
        self.frozen.insert(group);
    }

    pub fn unfreeze(&mut self, group: ParamGroup) {
        self.frozen.remove(&group);
    }

    pub fn is_frozen(&self, group: ParamGroup) -> bool {
        self.frozen.contains(&group)
    }

    pub fn frozen(&self) -> &BTreeSet<ParamGroup> {
        &self.frozen
    }

    /// Records `D(E(x))` and `Φ(D(E(x)))` on one tape. Frozen groups are
    /// registered as non-trainable parameters.
    pub fn stacked_forward(&self, tape: &mut Tape, batch: NodeId) -> Result<StackedGraph> {
        let (reconstruction, autoencoder_params) = self.autoencoder.forward(
            tape,
            batch,
            |name| !self.is_frozen(ParamGroup::of_autoencoder_param(name)),
            AE_PREFIX,
        )?;
        let graph = self.classifier.forward(
            tape,
            reconstruction,
            !self.is_frozen(ParamGroup::Classifier),
            CLF_PREFIX,
        )?;
        Ok(StackedGraph {
            reconstruction,
            logits: graph.logits,
            autoencoder_params,
            classifier_params: graph.params,
        })
    }

    /// `(reconstruction, logits)` for a `(N, C, T)` batch.
    pub fn stacked_values(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let g = self.stacked_forward(&mut tape, x)?;
        Ok((
            tape.value(g.reconstruction).clone(),
            tape.value(g.logits).clone(),
        ))
    }

    /// Accuracy of `Φ(D(E(x)))` over a dataset.
    pub fn accuracy(&self, ds: &crate::data::Dataset) -> Result<f64> {
        let k = self.classifier.spec().class_count;
        super::classifier::accuracy_with(ds, |batch| {
            let (_, logits) = self.stacked_values(batch)?;
            Ok(logits.data().chunks(k).map(crate::tensor::argmax).collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::BackwardMode;
    use crate::models::{AutoEncoderSpec, ClassifierSpec};
    use rand::{Rng, SeedableRng};

    fn random_batch(n: usize, c: usize, t: usize, seed: u64) -> Tensor {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(
            vec![n, c, t],
            (0..n * c * t).map(|_| r.random_range(-2.0..2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_autoencoder_preserves_logits() {
        let clf = Classifier::build(ClassifierSpec::cnn(3, 20, 2), 1).unwrap();
        let bundle = ModelBundle::new(clf.clone(), AutoEncoder::identity(3, 20).unwrap()).unwrap();
        let x = random_batch(4, 3, 20, 2);
        let (_, stacked) = bundle.stacked_values(&x).unwrap();
        assert_eq!(stacked, clf.logits(&x).unwrap());
    }

    #[test]
    fn frozen_classifier_gets_zero_gradient_and_encoder_does_not() {
        let clf = Classifier::build(ClassifierSpec::cnn(3, 20, 2), 1).unwrap();
        let ae = AutoEncoder::build(AutoEncoderSpec::new(3, 20), 4).unwrap();
        let bundle = ModelBundle::new(clf, ae).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(random_batch(4, 3, 20, 3));
        let g = bundle.stacked_forward(&mut tape, x).unwrap();
        let loss = tape.cross_entropy(g.logits, &[0, 1, 1, 0]).unwrap();
        tape.backward(loss, None, BackwardMode::Standard).unwrap();
        for (_, id) in &g.classifier_params {
            assert!(tape.grad(*id).unwrap().data().iter().all(|&v| v == 0.0));
        }
        let enc = tape.param_grad("autoencoder.enc1.weight").unwrap();
        assert!(enc.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let clf = Classifier::build(ClassifierSpec::cnn(3, 20, 2), 1).unwrap();
        let ae = AutoEncoder::build(AutoEncoderSpec::new(3, 24), 4).unwrap();
        assert!(matches!(
            ModelBundle::new(clf, ae),
            Err(Error::Shape { .. })
        ));
    }
}
