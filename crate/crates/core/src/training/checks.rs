use super::{autoencoder_loss, classifier_loss, finetune_loss, BetaRule, FinetuneObjective};
use crate::data::{generate_synthetic_anomaly, normalize_splits, Batch, SynthConfig};
use crate::engine::{grad_check, GradCheckReport, NodeId, Tape};
use crate::error::Result;
use crate::models::{
    AutoEncoder, AutoEncoderSpec, Classifier, ClassifierSpec, ModelBundle, ParamSet,
};
use crate::tensor::Tensor;

/// Finite-difference step used by [`objective_checks`].
pub const OBJECTIVE_STEP: f64 = 1e-6;

// zero biases leave dead units exactly on the ReLU kink
fn jitter_biases(params: &mut ParamSet) {
    for (i, (_, t)) in params.values_mut().enumerate() {
        if t.rank() == 1 {
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v = 0.05 + 0.013 * ((i * 7 + j * 3) % 5) as f64;
            }
        }
    }
}

fn point(params: &ParamSet, prefix: &str) -> Vec<(String, Tensor)> {
    params
        .iter()
        .map(|(n, t)| (format!("{prefix}{n}"), t.clone()))
        .collect()
}

/// Central-difference checks of every training objective on small models
/// and a four-row synthetic batch.
pub fn objective_checks(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let synth = SynthConfig {
        train_size: 8,
        val_size: 4,
        test_size: 4,
        length: 16,
        seed,
        ..SynthConfig::default()
    };
    let (data, _) = normalize_splits(&generate_synthetic_anomaly(&synth)?)?;
    let rows = vec![0, 1, 2, 3];
    let (inputs, labels) = data.train.gather(&rows);
    let batch = Batch {
        inputs,
        labels,
        rows,
    };

    let clf_spec = ClassifierSpec {
        conv_channels: vec![4, 6],
        kernel_width: 3,
        ..ClassifierSpec::cnn(3, 16, 2)
    };
    let ae_spec = AutoEncoderSpec {
        encoder_channels: vec![4, 2],
        kernel_width: 3,
        ..AutoEncoderSpec::new(3, 16)
    };
    let mut clf = Classifier::build(clf_spec, seed)?;
    jitter_biases(clf.params_mut());
    let mut ae = AutoEncoder::build(ae_spec, seed.wrapping_add(1))?;
    jitter_biases(ae.params_mut());

    let mut out = Vec::new();
    let report = grad_check(
        |tape: &mut Tape, _: &[NodeId]| classifier_loss(tape, &clf, &batch, 0.01),
        &point(clf.params(), ""),
        OBJECTIVE_STEP,
    )?;
    out.push(("classifier".to_string(), report));
    let report = grad_check(
        |tape: &mut Tape, _: &[NodeId]| autoencoder_loss(tape, &ae, &batch, 0.01),
        &point(ae.params(), ""),
        OBJECTIVE_STEP,
    )?;
    out.push(("autoencoder".to_string(), report));

    let bundle = ModelBundle::new(clf, ae)?;
    for (name, objective) in [
        ("palacio", FinetuneObjective::Palacio),
        (
            "tsinsight",
            FinetuneObjective::Manual {
                gamma: 0.7,
                beta: 0.05,
            },
        ),
        (
            "tsinsight_auto",
            FinetuneObjective::Auto {
                c: 10.0,
                beta_rule: BetaRule::InstanceMean,
            },
        ),
        (
            "tsinsight_auto_pointwise",
            FinetuneObjective::Auto {
                c: 10.0,
                beta_rule: BetaRule::Pointwise,
            },
        ),
    ] {
        let report = grad_check(
            |tape: &mut Tape, _: &[NodeId]| finetune_loss(tape, &bundle, &batch, &objective, 0.01),
            &point(bundle.autoencoder.params(), "autoencoder."),
            OBJECTIVE_STEP,
        )?;
        out.push((name.to_string(), report));
    }
    Ok(out)
}
