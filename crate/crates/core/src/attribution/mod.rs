//! Per-feature importance maps for a classifier's decision, one method per
//! technique in the benchmark.
//!
//! Every map is non-negative, finite and shaped like the `(C, T)` instance.
//! Methods work on `(N, C, T)` batches; stochastic methods seed one generator
//! per instance from `(noise_seed, instance id)`, so maps do not depend on
//! how instances are batched.

mod export;
mod methods;
#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AutoEncoder, Classifier, ModelBundle};
use crate::tensor::Tensor;

pub use export::{write_map, write_map_csv, MapSidecar};
pub use methods::integrated_gradients;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    Random,
    InputMagnitude,
    Gradient,
    GradientXInput,
    IntegratedGradients,
    SmoothGrad,
    GradCam,
    GuidedGradCam,
    GuidedBackprop,
    Occlusion,
    Tsinsight,
    Palacio,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::None,
        Method::Random,
        Method::InputMagnitude,
        Method::Gradient,
        Method::GradientXInput,
        Method::IntegratedGradients,
        Method::SmoothGrad,
        Method::GradCam,
        Method::GuidedGradCam,
        Method::GuidedBackprop,
        Method::Occlusion,
        Method::Tsinsight,
        Method::Palacio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Random => "random",
            Method::InputMagnitude => "input_magnitude",
            Method::Gradient => "gradient",
            Method::GradientXInput => "gradient_x_input",
            Method::IntegratedGradients => "integrated_gradients",
            Method::SmoothGrad => "smoothgrad",
            Method::GradCam => "gradcam",
            Method::GuidedGradCam => "guided_gradcam",
            Method::GuidedBackprop => "guided_backprop",
            Method::Occlusion => "occlusion",
            Method::Tsinsight => "tsinsight",
            Method::Palacio => "palacio",
        }
    }

    /// Class whose evidence the map explains.
    pub fn target(self) -> Target {
        match self {
            Method::GradCam
            | Method::GuidedGradCam
            | Method::GuidedBackprop
            | Method::Occlusion => Target::PredictedClass,
            _ => Target::AllClasses,
        }
    }

    /// Whether the method draws random numbers.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Random | Method::SmoothGrad)
    }

    /// Whether the method reads the `conv_last` activation.
    pub fn needs_conv_layer(self) -> bool {
        matches!(self, Method::GradCam | Method::GuidedGradCam)
    }

    pub fn needs_autoencoder(self) -> bool {
        matches!(self, Method::Tsinsight | Method::Palacio)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    AllClasses,
    PredictedClass,
}

/// Value written into occluded windows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionFill {
    #[default]
    Zero,
    /// The instance's own channel mean.
    ChannelMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub ig_steps: usize,
    pub sg_samples: usize,
    pub occlusion_width: usize,
    pub noise_seed: u64,
    /// Overrides the SmoothGrad noise scale `sqrt(2 / (max - min))`.
    pub sg_sigma: Option<f64>,
    /// Computes the SmoothGrad range per channel instead of per instance.
    pub sg_per_channel: bool,
    pub occlusion_fill: OcclusionFill,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            ig_steps: 100,
            sg_samples: 100,
            occlusion_width: 3,
            noise_seed: 0,
            sg_sigma: None,
            sg_per_channel: false,
            occlusion_fill: OcclusionFill::Zero,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("ig_steps", self.ig_steps),
            ("sg_samples", self.sg_samples),
            ("occlusion_width", self.occlusion_width),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if let Some(s) = self.sg_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config(
                    "sg_sigma",
                    format!("must be non-negative, got {s}"),
                ));
            }
        }
        Ok(())
    }
}

/// Non-negative importance per feature of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub values: Tensor,
    pub method: Method,
    pub target: Target,
    /// Set when the inputs were unsuitable but a map was still produced.
    pub warning: Option<String>,
}

/// The models an attribution may consult.
#[derive(Clone, Copy, Debug)]
pub struct Models<'a> {
    pub classifier: &'a Classifier,
    pub autoencoder: Option<&'a AutoEncoder>,
}

impl<'a> Models<'a> {
    pub fn classifier(classifier: &'a Classifier) -> Self {
        Models {
            classifier,
            autoencoder: None,
        }
    }
}

impl<'a> From<&'a ModelBundle> for Models<'a> {
    fn from(bundle: &'a ModelBundle) -> Self {
        Models {
            classifier: &bundle.classifier,
            autoencoder: Some(&bundle.autoencoder),
        }
    }
}

/// Maps for every row of a `(N, C, T)` batch. `ids` name the rows for the
/// per-instance random streams and must have one entry per row.
pub fn attribute_batch(
    method: Method,
    models: Models<'_>,
    batch: &Tensor,
    ids: &[u64],
    cfg: &MethodConfig,
) -> Result<Vec<AttributionMap>> {
    cfg.validate()?;
    let spec = models.classifier.spec();
    if batch.rank() != 3 || batch.shape()[1..] != [spec.input_channels, spec.sequence_length] {
        return Err(Error::shape(
            method.name(),
            format!(
                "expected (N, {}, {}), got {:?}",
                spec.input_channels,
                spec.sequence_length,
                batch.shape()
            ),
        ));
    }
    if ids.len() != batch.shape()[0] {
        return Err(Error::Contract(format!(
            "{} ids for {} rows",
            ids.len(),
            batch.shape()[0]
        )));
    }
    let (values, warning) = methods::compute(method, models, batch, ids, cfg)?;
    let maps: Vec<AttributionMap> = (0..batch.shape()[0])
        .map(|i| AttributionMap {
            values: values.index(i),
            method,
            target: method.target(),
            warning: warning.clone(),
        })
        .collect();
    debug_assert!(maps
        .iter()
        .all(|m| m.values.all_finite() && m.values.min() >= 0.0));
    Ok(maps)
}

/// Map for one `(C, T)` instance, using instance id 0.
pub fn attribute(
    method: Method,
    models: Models<'_>,
    x: &Tensor,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    if x.rank() != 2 {
        return Err(Error::shape(
            method.name(),
            format!("expected (C, T), got {:?}", x.shape()),
        ));
    }
    let mut maps = attribute_batch(method, models, &x.unsqueeze(), &[0], cfg)?;
    Ok(maps.remove(0))
}
