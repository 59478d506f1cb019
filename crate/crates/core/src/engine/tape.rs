use std::collections::HashMap;

use super::kernels;
use super::op::{Attrs, OpKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How ReLU nodes propagate gradient during [`Tape::backward`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackwardMode {
    #[default]
    Standard,
    /// ReLU passes `g * 1[x > 0] * 1[g > 0]`; every other kind is unchanged.
    Guided,
}

#[derive(Clone, Debug, PartialEq)]
enum Source {
    Constant,
    Input,
    Parameter {
        trainable: bool,
    },
    Op {
        kind: OpKind,
        inputs: Vec<NodeId>,
        attrs: Attrs,
    },
}

#[derive(Clone, Debug)]
struct Node {
    source: Source,
    value: Tensor,
    requires_grad: bool,
}

/// A layer's forward activation together with its gradient, if backward ran.
#[derive(Clone, Debug)]
pub struct Capture {
    pub activation: Tensor,
    pub gradient: Option<Tensor>,
}

/// Records a computation in topological order and runs reverse-mode
/// differentiation over it.
///
/// Leaves are constants (no gradient), inputs (gradient wanted) or named
/// parameters. A tape is single-writer; distinct tapes are independent.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    names: HashMap<String, NodeId>,
    params: Vec<(String, NodeId)>,
    grads: Option<Vec<Option<Tensor>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, source: Source, value: Tensor, requires_grad: bool) -> NodeId {
        self.grads = None;
        self.nodes.push(Node {
            source,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Source::Constant, value, false)
    }

    /// A leaf whose gradient is wanted (an attribution target, for example).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Source::Input, value, true)
    }

    /// A named parameter leaf. Frozen parameters (`trainable == false`) get a
    /// zero gradient buffer and block no propagation elsewhere.
    pub fn param(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<NodeId> {
        if self.params.iter().any(|(n, _)| n == name) {
            return Err(Error::Contract(format!(
                "parameter `{name}` registered twice on one tape"
            )));
        }
        let id = self.push(Source::Parameter { trainable }, value, trainable);
        self.params.push((name.to_string(), id));
        Ok(id)
    }

    /// Registers `id` under `name` in the layer registry used by [`Tape::capture`].
    pub fn set_name(&mut self, id: NodeId, name: &str) -> Result<()> {
        self.check(id)?;
        self.names.insert(name.to_string(), id);
        Ok(())
    }

    pub fn named(&self, name: &str) -> Option<NodeId> {
        self.names.get(name).copied()
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::NotOnTape(id.0))
        }
    }

    /// Records one primitive and returns its node.
    pub fn apply(&mut self, kind: OpKind, inputs: &[NodeId], attrs: Attrs) -> Result<NodeId> {
        for &id in inputs {
            self.check(id)?;
        }
        let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let out = kernels::forward(kind, &values, &attrs)?;
        if !out.all_finite() {
            return Err(Error::NonFinite(kind.name().to_string()));
        }
        let requires_grad = inputs.iter().any(|id| self.nodes[id.0].requires_grad);
        Ok(self.push(
            Source::Op {
                kind,
                inputs: inputs.to_vec(),
                attrs,
            },
            out,
            requires_grad,
        ))
    }

    /// Same as [`Tape::apply`] but takes the kind by name.
    pub fn apply_named(&mut self, kind: &str, inputs: &[NodeId], attrs: Attrs) -> Result<NodeId> {
        let kind: OpKind = kind.parse()?;
        self.apply(kind, inputs, attrs)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Node of the parameter registered under `name`, if any.
    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
    }

    /// Parameters registered on this tape, in registration order.
    pub fn params(&self) -> &[(String, NodeId)] {
        &self.params
    }

    /// Runs reverse-mode differentiation from `output`.
    ///
    /// A scalar-shaped output is seeded with 1; anything else needs an
    /// explicit `seed` of the same shape. Afterwards every node that
    /// `output` depends on holds a gradient buffer shaped like its value.
    pub fn backward(
        &mut self,
        output: NodeId,
        seed: Option<Tensor>,
        mode: BackwardMode,
    ) -> Result<()> {
        self.check(output)?;
        let out_shape = self.nodes[output.0].value.shape().to_vec();
        let seed = match seed {
            Some(s) if s.shape() == out_shape.as_slice() => s,
            Some(s) => {
                return Err(Error::shape(
                    "backward",
                    format!("seed {:?} vs output {:?}", s.shape(), out_shape),
                ))
            }
            None if out_shape.iter().all(|&d| d == 1) => Tensor::ones(&out_shape),
            None => return Err(Error::NonScalarOutput(out_shape)),
        };

        let count = output.0 + 1;
        let mut reachable = vec![false; count];
        reachable[output.0] = true;
        for i in (0..count).rev() {
            if !reachable[i] {
                continue;
            }
            if let Source::Op { inputs, .. } = &self.nodes[i].source {
                for id in inputs {
                    reachable[id.0] = true;
                }
            }
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);
        let guided = mode == BackwardMode::Guided;
        for i in (0..count).rev() {
            let node = &self.nodes[i];
            if !reachable[i] || !node.requires_grad {
                continue;
            }
            let Source::Op {
                kind,
                inputs,
                attrs,
            } = &node.source
            else {
                continue;
            };
            let Some(g) = grads[i].take() else {
                continue;
            };
            let needs: Vec<bool> = inputs
                .iter()
                .map(|id| self.nodes[id.0].requires_grad)
                .collect();
            let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
            let input_grads =
                kernels::backward(*kind, &values, &node.value, attrs, &g, &needs, guided);
            for ((id, need), ig) in inputs.iter().zip(&needs).zip(input_grads) {
                if !need {
                    continue;
                }
                let Some(ig) = ig else { continue };
                match &mut grads[id.0] {
                    Some(acc) => {
                        for (a, v) in acc.data_mut().iter_mut().zip(ig.data()) {
                            *a += v;
                        }
                    }
                    slot @ None => *slot = Some(ig),
                }
            }
            grads[i] = Some(g);
        }
        for i in 0..count {
            if reachable[i] && grads[i].is_none() {
                grads[i] = Some(Tensor::zeros(self.nodes[i].value.shape()));
            }
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Gradient of the last backward pass at `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.as_ref()?.get(id.0)?.as_ref()
    }

    pub fn param_grad(&self, name: &str) -> Option<&Tensor> {
        let (_, id) = self.params.iter().find(|(n, _)| n == name)?;
        self.grad(*id)
    }

    /// Activation and gradient of a named layer.
    pub fn capture(&self, name: &str) -> Result<Capture> {
        let id = self
            .named(name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))?;
        Ok(Capture {
            activation: self.value(id).clone(),
            gradient: self.grad(id).cloned(),
        })
    }

    /// Recomputes every operation node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.source {
                Source::Op {
                    kind,
                    inputs,
                    attrs,
                } => {
                    let args: Vec<&Tensor> = inputs.iter().map(|id| &values[id.0]).collect();
                    kernels::forward(*kind, &args, attrs)?
                }
                _ => node.value.clone(),
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Values currently cached on the tape, in node order.
    pub fn cached_values(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.value)
    }

    // Convenience wrappers over `apply`.

    pub fn conv1d(&mut self, x: NodeId, kernel: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        let mut inputs = vec![x, kernel];
        inputs.extend(bias);
        self.apply(OpKind::Conv1d, &inputs, Attrs::None)
    }

    pub fn dense(&mut self, x: NodeId, weight: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        self.apply(OpKind::Dense, &inputs, Attrs::None)
    }

    pub fn unary(&mut self, kind: OpKind, x: NodeId) -> Result<NodeId> {
        self.apply(kind, &[x], Attrs::None)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Relu, x)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Tanh, x)
    }

    pub fn max_pool1d(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::MaxPool1d, x)
    }

    pub fn upsample1d(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::NearestUpsample1d, x)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b], Attrs::None)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Hadamard, &[a, b], Attrs::None)
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        self.apply(OpKind::ScalarMul, &[x], Attrs::Scalar(s))
    }

    /// `a - b`, composed from `scalar_mul` and `add`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let neg = self.scale(b, -1.0)?;
        self.add(a, neg)
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Sum, x)
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Mean, x)
    }

    pub fn l1_norm(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::L1Norm, x)
    }

    pub fn l2_norm_sq(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::L2NormSq, x)
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(OpKind::Softmax, x)
    }

    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        self.apply(
            OpKind::CrossEntropy,
            &[logits],
            Attrs::Targets(targets.to_vec()),
        )
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mse, &[a, b], Attrs::None)
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(OpKind::Concat, parts, Attrs::Axis(axis))
    }

    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.apply(OpKind::Slice, &[x], Attrs::Slice { axis, start, len })
    }
}
