use serde::{Deserialize, Serialize};

use super::{glorot, init_rng, node, Finetuned, ParamSet};
use crate::engine::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Layer arrangement of the auto-encoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeLayout {
    /// conv + ReLU + max-pool per encoder level; the decoder mirrors it with
    /// nearest upsampling + conv, linear final conv.
    #[default]
    Conv,
    /// Convolutions only: no activations, no resampling. The whole network
    /// is a linear map.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoEncoderSpec {
    pub input_channels: usize,
    pub sequence_length: usize,
    pub encoder_channels: Vec<usize>,
    pub kernel_width: usize,
    pub layout: AeLayout,
}

impl Default for AutoEncoderSpec {
    fn default() -> Self {
        AutoEncoderSpec {
            input_channels: 3,
            sequence_length: 50,
            encoder_channels: vec![16, 8],
            kernel_width: 5,
            layout: AeLayout::Conv,
        }
    }
}

impl AutoEncoderSpec {
    pub fn new(input_channels: usize, sequence_length: usize) -> Self {
        AutoEncoderSpec {
            input_channels,
            sequence_length,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::config("input_channels", "must be positive"));
        }
        if self.sequence_length == 0 {
            return Err(Error::config("sequence_length", "must be positive"));
        }
        if self.kernel_width == 0 {
            return Err(Error::config("kernel_width", "must be positive"));
        }
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return Err(Error::config(
                "encoder_channels",
                "needs at least one non-empty layer",
            ));
        }
        Ok(())
    }

    /// Zero padding appended so every pooling level divides evenly.
    fn padding(&self) -> usize {
        match self.layout {
            AeLayout::Linear => 0,
            AeLayout::Conv => {
                let unit = 1usize << self.encoder_channels.len();
                self.sequence_length.div_ceil(unit) * unit - self.sequence_length
            }
        }
    }

    /// `(name, in, out)` for every conv layer, encoder first.
    fn layers(&self) -> Vec<(String, usize, usize)> {
        let mut layers = Vec::new();
        let mut c_in = self.input_channels;
        for (i, &c) in self.encoder_channels.iter().enumerate() {
            layers.push((format!("enc{}", i + 1), c_in, c));
            c_in = c;
        }
        let mut outs: Vec<usize> = self
            .encoder_channels
            .iter()
            .rev()
            .skip(1)
            .copied()
            .collect();
        outs.push(self.input_channels);
        for (i, c) in outs.into_iter().enumerate() {
            layers.push((format!("dec{}", i + 1), c_in, c));
            c_in = c;
        }
        layers
    }
}

/// Encoder/decoder pair whose output has exactly the input's shape.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoEncoder {
    spec: AutoEncoderSpec,
    params: ParamSet,
    finetuned: Option<Finetuned>,
}

impl AutoEncoder {
    pub fn build(spec: AutoEncoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut r = init_rng(seed);
        let mut params = ParamSet::new();
        let kw = spec.kernel_width;
        for (name, c_in, c_out) in spec.layers() {
            params.push(
                format!("{name}.weight"),
                glorot(&mut r, &[c_out, c_in, kw], c_in * kw, c_out * kw),
            );
            params.push(format!("{name}.bias"), Tensor::zeros(&[c_out]));
        }
        Ok(AutoEncoder {
            spec,
            params,
            finetuned: None,
        })
    }

    /// Linear auto-encoder computing the identity map exactly.
    pub fn identity(channels: usize, length: usize) -> Result<Self> {
        let spec = AutoEncoderSpec {
            input_channels: channels,
            sequence_length: length,
            encoder_channels: vec![channels],
            kernel_width: 1,
            layout: AeLayout::Linear,
        };
        let mut ae = Self::build(spec, 0)?;
        let mut eye = Tensor::zeros(&[channels, channels, 1]);
        for c in 0..channels {
            eye.data_mut()[c * channels + c] = 1.0;
        }
        ae.params.set("enc1.weight", eye.clone())?;
        ae.params.set("dec1.weight", eye)?;
        Ok(ae)
    }

    pub(crate) fn from_parts(
        spec: AutoEncoderSpec,
        params: ParamSet,
        finetuned: Option<Finetuned>,
    ) -> Self {
        AutoEncoder {
            spec,
            params,
            finetuned,
        }
    }

    pub fn spec(&self) -> &AutoEncoderSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn finetuned(&self) -> Option<Finetuned> {
        self.finetuned
    }

    pub fn set_finetuned(&mut self, how: Option<Finetuned>) {
        self.finetuned = how;
    }

    /// Zeroes the final decoder layer so the network outputs zeros.
    pub fn zero_output(&mut self) {
        let last = self.spec.layers().last().unwrap().0.clone();
        for (name, t) in self.params.values_mut() {
            if name.starts_with(&format!("{last}.")) {
                t.data_mut().fill(0.0);
            }
        }
    }

    /// Records `D(E(x))` for a `(N, C, T)` batch node.
    ///
    /// `trainable` decides per parameter name whether it receives gradient.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: NodeId,
        trainable: impl Fn(&str) -> bool,
        prefix: &str,
    ) -> Result<(NodeId, Vec<(String, NodeId)>)> {
        let shape = tape.value(x).shape().to_vec();
        let want = [self.spec.input_channels, self.spec.sequence_length];
        if shape.len() != 3 || shape[1..] != want {
            return Err(Error::shape(
                "autoencoder",
                format!("expected (N, {}, {}), got {shape:?}", want[0], want[1]),
            ));
        }
        let bound = self.params.bind(tape, prefix, trainable)?;
        let conv = self.spec.layout == AeLayout::Conv;
        let pad = self.spec.padding();
        let mut h = x;
        if pad > 0 {
            let zeros = tape.constant(Tensor::zeros(&[shape[0], shape[1], pad]));
            h = tape.concat(&[h, zeros], 2)?;
        }
        let layers = self.spec.layers();
        let depth = self.spec.encoder_channels.len();
        for (i, (name, _, _)) in layers.iter().enumerate() {
            let w = node(&bound, &format!("{name}.weight"));
            let b = node(&bound, &format!("{name}.bias"));
            let decoding = i >= depth;
            if conv && decoding {
                h = tape.upsample1d(h)?;
            }
            h = tape.conv1d(h, w, Some(b))?;
            if conv && i + 1 < layers.len() {
                h = tape.relu(h)?;
            }
            if conv && !decoding {
                h = tape.max_pool1d(h)?;
            }
        }
        if pad > 0 {
            h = tape.slice(h, 2, 0, self.spec.sequence_length)?;
        }
        Ok((h, bound))
    }

    /// `D(E(batch))` without recording gradients.
    pub fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let (out, _) = self.forward(&mut tape, x, |_| false, "")?;
        Ok(tape.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_equals_input_shape() {
        for channels in [1, 3, 10] {
            for length in [50, 8, 13] {
                let ae = AutoEncoder::build(AutoEncoderSpec::new(channels, length), 2).unwrap();
                let out = ae
                    .reconstruct(&Tensor::ones(&[2, channels, length]))
                    .unwrap();
                assert_eq!(out.shape(), &[2, channels, length]);
            }
        }
    }

    #[test]
    fn identity_is_exact() {
        let ae = AutoEncoder::identity(3, 7).unwrap();
        let x = Tensor::new(
            vec![1, 3, 7],
            (0..21).map(|v| v as f64 * 0.37 - 2.0).collect(),
        )
        .unwrap();
        assert_eq!(ae.reconstruct(&x).unwrap(), x);
    }

    #[test]
    fn zero_output_gives_zeros() {
        let mut ae = AutoEncoder::build(AutoEncoderSpec::new(3, 50), 1).unwrap();
        ae.zero_output();
        let out = ae.reconstruct(&Tensor::ones(&[1, 3, 50])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoder_mirrors_encoder() {
        let ae = AutoEncoder::build(AutoEncoderSpec::new(3, 50), 1).unwrap();
        let shapes: Vec<(String, Vec<usize>)> = ae
            .params()
            .iter()
            .filter(|(n, _)| n.ends_with("weight"))
            .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
            .collect();
        assert_eq!(
            shapes,
            vec![
                ("enc1.weight".into(), vec![16, 3, 5]),
                ("enc2.weight".into(), vec![8, 16, 5]),
                ("dec1.weight".into(), vec![16, 8, 5]),
                ("dec2.weight".into(), vec![3, 16, 5]),
            ]
        );
    }
}
