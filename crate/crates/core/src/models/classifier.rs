use std::fmt;

use serde::{Deserialize, Serialize};

use super::{glorot, init_rng, node, ParamSet};
use crate::data::Dataset;
use crate::engine::{BackwardMode, NodeId, Tape};
use crate::error::{Error, Result};
use crate::tensor::{argmax, Tensor};

/// Name of the capturable final convolutional activation.
pub const CONV_LAST: &str = "conv_last";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Cnn,
    Lstm,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Cnn => "cnn",
            Variant::Lstm => "lstm",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub input_channels: usize,
    pub sequence_length: usize,
    pub class_count: usize,
    pub conv_channels: Vec<usize>,
    pub kernel_width: usize,
    pub variant: Variant,
    pub lstm_hidden: usize,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            input_channels: 3,
            sequence_length: 50,
            class_count: 2,
            conv_channels: vec![16, 32, 64],
            kernel_width: 5,
            variant: Variant::Cnn,
            lstm_hidden: 64,
        }
    }
}

impl ClassifierSpec {
    pub fn cnn(input_channels: usize, sequence_length: usize, class_count: usize) -> Self {
        ClassifierSpec {
            input_channels,
            sequence_length,
            class_count,
            ..Self::default()
        }
    }

    pub fn lstm(input_channels: usize, sequence_length: usize, class_count: usize) -> Self {
        ClassifierSpec {
            variant: Variant::Lstm,
            ..Self::cnn(input_channels, sequence_length, class_count)
        }
    }

    fn pool_count(&self) -> usize {
        self.conv_channels.len().min(2)
    }

    /// Sequence length reaching the dense head (pooling floors odd lengths).
    pub fn head_length(&self) -> usize {
        self.sequence_length >> self.pool_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::config("class_count", "at least 2"));
        }
        if self.input_channels == 0 {
            return Err(Error::config("input_channels", "must be positive"));
        }
        if self.sequence_length == 0 {
            return Err(Error::config("sequence_length", "must be positive"));
        }
        match self.variant {
            Variant::Cnn => {
                if self.kernel_width == 0 {
                    return Err(Error::config("kernel_width", "must be positive"));
                }
                if self.conv_channels.contains(&0) {
                    return Err(Error::config("conv_channels", "every layer needs channels"));
                }
                if self.head_length() == 0 {
                    return Err(Error::config(
                        "sequence_length",
                        format!(
                            "{} is too short for {} pooling layers",
                            self.sequence_length,
                            self.pool_count()
                        ),
                    ));
                }
            }
            Variant::Lstm => {
                if self.lstm_hidden == 0 {
                    return Err(Error::config("lstm_hidden", "must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Which logits a gradient is taken of.
#[derive(Clone, Debug, PartialEq)]
pub enum LogitTarget {
    /// Unweighted sum over every class.
    AllClasses,
    /// One class per batch row.
    Classes(Vec<usize>),
}

impl LogitTarget {
    /// Seed gradient for a `(N, K)` logits tensor.
    pub(crate) fn seed(&self, logits: &Tensor) -> Result<Tensor> {
        match self {
            LogitTarget::AllClasses => Ok(Tensor::ones(logits.shape())),
            LogitTarget::Classes(classes) => {
                let [n, k] = *logits.shape() else {
                    return Err(Error::shape(
                        "logit target",
                        format!("{:?}", logits.shape()),
                    ));
                };
                if classes.len() != n || classes.iter().any(|&c| c >= k) {
                    return Err(Error::shape(
                        "logit target",
                        format!("{} classes for logits {:?}", classes.len(), logits.shape()),
                    ));
                }
                let mut seed = Tensor::zeros(&[n, k]);
                for (row, &c) in classes.iter().enumerate() {
                    seed.data_mut()[row * k + c] = 1.0;
                }
                Ok(seed)
            }
        }
    }
}

/// Nodes of one classifier forward pass.
#[derive(Clone, Debug)]
pub struct ClassifierGraph {
    pub logits: NodeId,
    pub conv_last: Option<NodeId>,
    pub params: Vec<(String, NodeId)>,
}

/// A sequence classifier: either conv blocks + dense head or a single LSTM
/// layer + dense head.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    spec: ClassifierSpec,
    params: ParamSet,
}

impl Classifier {
    pub fn build(spec: ClassifierSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut r = init_rng(seed);
        let mut params = ParamSet::new();
        let k = spec.class_count;
        match spec.variant {
            Variant::Cnn => {
                let mut c_in = spec.input_channels;
                let kw = spec.kernel_width;
                for (i, &c_out) in spec.conv_channels.iter().enumerate() {
                    params.push(
                        format!("conv{}.weight", i + 1),
                        glorot(&mut r, &[c_out, c_in, kw], c_in * kw, c_out * kw),
                    );
                    params.push(format!("conv{}.bias", i + 1), Tensor::zeros(&[c_out]));
                    c_in = c_out;
                }
                let features = c_in * spec.head_length();
                params.push("dense.weight", glorot(&mut r, &[k, features], features, k));
                params.push("dense.bias", Tensor::zeros(&[k]));
            }
            Variant::Lstm => {
                let (c, h) = (spec.input_channels, spec.lstm_hidden);
                params.push("lstm.w_input", glorot(&mut r, &[4 * h, c], c, 4 * h));
                params.push("lstm.w_hidden", glorot(&mut r, &[4 * h, h], h, 4 * h));
                let mut bias = Tensor::zeros(&[4 * h]);
                // gate order: input, forget, output, candidate
                bias.data_mut()[h..2 * h].fill(1.0);
                params.push("lstm.bias", bias);
                params.push("dense.weight", glorot(&mut r, &[k, h], h, k));
                params.push("dense.bias", Tensor::zeros(&[k]));
            }
        }
        Ok(Classifier { spec, params })
    }

    pub(crate) fn from_parts(spec: ClassifierSpec, params: ParamSet) -> Self {
        Classifier { spec, params }
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = [self.spec.input_channels, self.spec.sequence_length];
        if shape.len() != 3 || shape[1..] != want {
            return Err(Error::shape(
                "classifier",
                format!("expected (N, {}, {}), got {shape:?}", want[0], want[1]),
            ));
        }
        Ok(())
    }

    /// Records the forward pass of a `(N, C, T)` batch node.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: NodeId,
        trainable: bool,
        prefix: &str,
    ) -> Result<ClassifierGraph> {
        self.check_input(tape.value(x).shape())?;
        let bound = self.params.bind(tape, prefix, |_| trainable)?;
        let p = |name: &str| node(&bound, name);
        let (logits, conv_last) = match self.spec.variant {
            Variant::Cnn => {
                let mut h = x;
                let mut last = None;
                let layers = self.spec.conv_channels.len();
                for i in 0..layers {
                    let w = p(&format!("conv{}.weight", i + 1));
                    let b = p(&format!("conv{}.bias", i + 1));
                    h = tape.conv1d(h, w, Some(b))?;
                    h = tape.relu(h)?;
                    if i + 1 == layers {
                        tape.set_name(h, CONV_LAST)?;
                        last = Some(h);
                    }
                    if i < 2 {
                        h = tape.max_pool1d(h)?;
                    }
                }
                (
                    tape.dense(h, p("dense.weight"), Some(p("dense.bias")))?,
                    last,
                )
            }
            Variant::Lstm => (self.lstm_forward(tape, x, &p)?, None),
        };
        Ok(ClassifierGraph {
            logits,
            conv_last,
            params: bound,
        })
    }

    fn lstm_forward(
        &self,
        tape: &mut Tape,
        x: NodeId,
        p: &dyn Fn(&str) -> NodeId,
    ) -> Result<NodeId> {
        let n = tape.value(x).shape()[0];
        let hidden = self.spec.lstm_hidden;
        let mut h = tape.constant(Tensor::zeros(&[n, hidden]));
        let mut c = tape.constant(Tensor::zeros(&[n, hidden]));
        let (wi, wh, b) = (p("lstm.w_input"), p("lstm.w_hidden"), p("lstm.bias"));
        for t in 0..self.spec.sequence_length {
            let xt = tape.slice(x, 2, t, 1)?;
            let zx = tape.dense(xt, wi, Some(b))?;
            let zh = tape.dense(h, wh, None)?;
            let z = tape.add(zx, zh)?;
            let gate = |tape: &mut Tape, k: usize| tape.slice(z, 1, k * hidden, hidden);
            let i_pre = gate(tape, 0)?;
            let f_pre = gate(tape, 1)?;
            let o_pre = gate(tape, 2)?;
            let g_pre = gate(tape, 3)?;
            let i_gate = tape.sigmoid(i_pre)?;
            let f_gate = tape.sigmoid(f_pre)?;
            let o_gate = tape.sigmoid(o_pre)?;
            let g_cand = tape.tanh(g_pre)?;
            let keep = tape.hadamard(f_gate, c)?;
            let write = tape.hadamard(i_gate, g_cand)?;
            c = tape.add(keep, write)?;
            let squashed = tape.tanh(c)?;
            h = tape.hadamard(o_gate, squashed)?;
        }
        tape.dense(h, p("dense.weight"), Some(p("dense.bias")))
    }

    /// Gradient of the chosen logits with respect to a `(N, C, T)` batch.
    ///
    /// Rows are independent, so one backward pass over the batch yields every
    /// row's own gradient.
    pub fn input_gradient(
        &self,
        batch: &Tensor,
        target: &LogitTarget,
        mode: BackwardMode,
    ) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let g = self.forward(&mut tape, x, false, "")?;
        let seed = target.seed(tape.value(g.logits))?;
        tape.backward(g.logits, Some(seed), mode)?;
        Ok(tape.grad(x).expect("input is reachable").clone())
    }

    /// Logits for a `(N, C, T)` batch.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let g = self.forward(&mut tape, x, false, "")?;
        Ok(tape.value(g.logits).clone())
    }

    /// Predicted class per row of a `(N, C, T)` batch.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok(logits
            .data()
            .chunks(self.spec.class_count)
            .map(argmax)
            .collect())
    }

    /// Accuracy over a whole dataset, evaluated in chunks.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        accuracy_with(ds, |batch| self.predict(batch))
    }
}

pub(crate) fn accuracy_with(
    ds: &Dataset,
    mut predict: impl FnMut(&Tensor) -> Result<Vec<usize>>,
) -> Result<f64> {
    const CHUNK: usize = 256;
    let mut correct = 0usize;
    let rows: Vec<usize> = (0..ds.len()).collect();
    for chunk in rows.chunks(CHUNK) {
        let (x, y) = ds.gather(chunk);
        let pred = predict(&x)?;
        correct += pred.iter().zip(&y).filter(|(a, b)| a == b).count();
    }
    Ok(correct as f64 / ds.len() as f64)
}
