pub mod attribution;
pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod parallel;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
