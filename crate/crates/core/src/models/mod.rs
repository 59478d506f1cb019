//! Classifier and auto-encoder architectures, their stacked composition and
//! checkpoint persistence.
//!
//! Parameters are kept at `f32`-representable values (initialization and
//! every optimizer step round to `f32`) so that checkpoints, which store a
//! 32-bit blob, reproduce a model exactly.

mod autoencoder;
mod bundle;
mod checkpoint;
mod classifier;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use autoencoder::{AeLayout, AutoEncoder, AutoEncoderSpec};
pub use bundle::{ModelBundle, ParamGroup, StackedGraph};
pub use checkpoint::{
    load_autoencoder, load_checkpoint, load_classifier, save_checkpoint, Model, CHECKPOINT_VERSION,
};
pub use classifier::{
    Classifier, ClassifierGraph, ClassifierSpec, LogitTarget, Variant, CONV_LAST,
};

use crate::engine::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Ordered named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.push((name.into(), value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    /// Replaces a parameter with a same-shaped tensor.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))?;
        if slot.1.shape() != value.shape() {
            return Err(Error::shape(
                "set_param",
                format!("`{name}` is {:?}, got {:?}", slot.1.shape(), value.shape()),
            ));
        }
        slot.1 = value;
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn size(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Registers every parameter on `tape` under `prefix + name`.
    ///
    /// A same-shaped parameter already registered under that name is reused
    /// instead, which lets gradient checks substitute perturbed values.
    pub(crate) fn bind(
        &self,
        tape: &mut Tape,
        prefix: &str,
        trainable: impl Fn(&str) -> bool,
    ) -> Result<Vec<(String, NodeId)>> {
        self.entries
            .iter()
            .map(|(name, value)| {
                let full = format!("{prefix}{name}");
                let id = match tape.param_node(&full) {
                    Some(id) if tape.value(id).shape() == value.shape() => id,
                    _ => tape.param(&full, value.clone(), trainable(name))?,
                };
                Ok((name.clone(), id))
            })
            .collect()
    }

    /// Little-endian `f32` bytes of every parameter, in order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.size() * 4);
        for (_, t) in &self.entries {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// SHA-256 of [`ParamSet::to_le_bytes`], hex encoded.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_le_bytes()))
    }
}

pub(crate) fn node<'a>(bound: &'a [(String, NodeId)], name: &str) -> NodeId {
    bound
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, id)| *id)
        .unwrap_or_else(|| panic!("parameter `{name}` not bound"))
}

/// Glorot-uniform tensor in `±sqrt(6 / (fan_in + fan_out))`, rounded to f32.
pub(crate) fn glorot(r: &mut rng::Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| (r.random_range(-limit..limit) as f32) as f64)
        .collect();
    Tensor::from_parts(shape.to_vec(), data)
}

pub(crate) fn init_rng(seed: u64) -> rng::Rng {
    rng::stream(seed, rng::STREAM_INIT)
}

/// Which fine-tuning objective produced an auto-encoder, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finetuned {
    Palacio,
    Tsinsight,
}
