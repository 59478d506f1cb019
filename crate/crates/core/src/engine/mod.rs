//! Reverse-mode automatic differentiation over a closed set of primitives.
//!
//! Values are recorded on a [`Tape`] in topological order; [`Tape::backward`]
//! walks it in reverse, optionally in guided mode where ReLU nodes drop
//! negative gradient. [`grad_check`] is the central-difference oracle used to
//! validate every gradient in the crate.

pub mod cases;
mod gradcheck;
mod kernels;
mod op;
mod tape;

pub use gradcheck::{
    grad_check, relative_error, Coordinate, GradCheckReport, RELATIVE_ERROR_FLOOR,
};
pub use op::{Attrs, OpKind};
pub use tape::{BackwardMode, Capture, NodeId, Tape};

#[cfg(test)]
mod tests;
