use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The closed set of differentiable primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Conv1d,
    Dense,
    Relu,
    Sigmoid,
    Tanh,
    MaxPool1d,
    NearestUpsample1d,
    Add,
    Hadamard,
    ScalarMul,
    Sum,
    Mean,
    Abs,
    Square,
    Softmax,
    CrossEntropy,
    Mse,
    L1Norm,
    L2NormSq,
    Concat,
    Slice,
}

impl OpKind {
    pub const ALL: [OpKind; 21] = [
        OpKind::Conv1d,
        OpKind::Dense,
        OpKind::Relu,
        OpKind::Sigmoid,
        OpKind::Tanh,
        OpKind::MaxPool1d,
        OpKind::NearestUpsample1d,
        OpKind::Add,
        OpKind::Hadamard,
        OpKind::ScalarMul,
        OpKind::Sum,
        OpKind::Mean,
        OpKind::Abs,
        OpKind::Square,
        OpKind::Softmax,
        OpKind::CrossEntropy,
        OpKind::Mse,
        OpKind::L1Norm,
        OpKind::L2NormSq,
        OpKind::Concat,
        OpKind::Slice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Conv1d => "conv1d",
            OpKind::Dense => "dense",
            OpKind::Relu => "relu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::MaxPool1d => "max_pool1d",
            OpKind::NearestUpsample1d => "nearest_upsample1d",
            OpKind::Add => "add",
            OpKind::Hadamard => "hadamard",
            OpKind::ScalarMul => "scalar_mul",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Abs => "abs",
            OpKind::Square => "square",
            OpKind::Softmax => "softmax",
            OpKind::CrossEntropy => "cross_entropy",
            OpKind::Mse => "mse",
            OpKind::L1Norm => "l1_norm",
            OpKind::L2NormSq => "l2_norm_sq",
            OpKind::Concat => "concat",
            OpKind::Slice => "slice",
        }
    }

    pub fn is_elementwise_unary(self) -> bool {
        matches!(
            self,
            OpKind::Relu | OpKind::Sigmoid | OpKind::Tanh | OpKind::Abs | OpKind::Square
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownOp(s.to_string()))
    }
}

/// Per-kind attributes. Kinds that take none use [`Attrs::None`].
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Attrs {
    #[default]
    None,
    /// Multiplier for `scalar_mul`.
    Scalar(f64),
    /// Class indices for `cross_entropy`, one per batch row.
    Targets(Vec<usize>),
    /// Axis for `concat`.
    Axis(usize),
    /// Contiguous range along one axis for `slice`.
    Slice {
        axis: usize,
        start: usize,
        len: usize,
    },
}
