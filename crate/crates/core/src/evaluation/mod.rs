//! Suppression benchmark for attribution maps, output sparsity and spectral
//! analysis of an auto-encoder's average Jacobian.

mod export;
mod jacobian;
mod sparsity;
mod spectrum;
mod suppression;

pub use export::{write_curves, write_histogram_csv, write_spectrum_csv};
pub use jacobian::{average_jacobian, instance_jacobian};
pub use sparsity::{input_sparsity, near_zero_fraction, output_sparsity};
pub use spectrum::{histogram, singular_spectrum, Histogram, SpectrumReport, MAX_SWEEPS};
pub use suppression::{
    keep_set, suppress_input, suppress_values, suppression_test, Fill, SuppressionConfig,
    SuppressionCurve, DEFAULT_FRACTIONS,
};

use crate::attribution::Method;
use crate::error::Result;

/// Parses every name before anything runs, so one typo fails the whole list.
pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>> {
    names.iter().map(|n| n.as_ref().trim().parse()).collect()
}
