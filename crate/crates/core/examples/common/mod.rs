//! Pipeline steps shared by the examples.
#![allow(dead_code)]

use std::time::Instant;

use tsinsight::data::{generate_synthetic_anomaly, normalize_splits, DatasetSplits, SynthConfig};
use tsinsight::models::{AutoEncoder, AutoEncoderSpec, Classifier, ClassifierSpec, ModelBundle};
use tsinsight::training::{
    finetune_palacio, finetune_tsinsight, train_autoencoder, train_classifier, TrainConfig,
    TsInsightConfig,
};
use tsinsight::Result;

/// Normalized synthetic anomaly splits with `train_size` training rows.
pub fn synthetic(train_size: usize, seed: u64) -> Result<DatasetSplits> {
    let t = Instant::now();
    let (splits, _) = normalize_splits(&generate_synthetic_anomaly(&SynthConfig::scaled(
        train_size, seed,
    ))?)?;
    eprintln!(
        "data: {}/{}/{} rows, {:.1}s",
        splits.train.len(),
        splits.val.len(),
        splits.test.len(),
        t.elapsed().as_secs_f64()
    );
    Ok(splits)
}

pub fn train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

pub fn classifier(
    data: &DatasetSplits,
    spec: ClassifierSpec,
    epochs: usize,
    seed: u64,
) -> Result<Classifier> {
    let mut model = Classifier::build(spec, seed)?;
    let report = train_classifier(&mut model, data, &train_cfg(epochs, seed))?;
    eprintln!(
        "classifier ({}): test accuracy {:.4}, {:.1}s",
        model.variant(),
        report.test_metric,
        report.wall_time_secs
    );
    Ok(model)
}

pub fn cnn(data: &DatasetSplits, epochs: usize, seed: u64) -> Result<Classifier> {
    classifier(
        data,
        ClassifierSpec::cnn(data.channels(), data.length(), data.class_count()),
        epochs,
        seed,
    )
}

pub fn autoencoder(data: &DatasetSplits, epochs: usize, seed: u64) -> Result<AutoEncoder> {
    let mut model = AutoEncoder::build(AutoEncoderSpec::new(data.channels(), data.length()), seed)?;
    let report = train_autoencoder(&mut model, data, &train_cfg(epochs, seed))?;
    eprintln!(
        "auto-encoder: test MSE {:.4}, {:.1}s",
        report.test_metric, report.wall_time_secs
    );
    Ok(model)
}

/// Stacks clones of the models and fine-tunes the auto-encoder with the
/// given weights.
pub fn tsinsight(
    clf: &Classifier,
    ae: &AutoEncoder,
    data: &DatasetSplits,
    ts: &TsInsightConfig,
    epochs: usize,
    seed: u64,
) -> Result<ModelBundle> {
    let mut bundle = ModelBundle::new(clf.clone(), ae.clone())?;
    let report = finetune_tsinsight(&mut bundle, data, &train_cfg(epochs, seed), ts)?;
    eprintln!(
        "tsinsight: stacked test accuracy {:.4}, {:.1}s",
        report.test_metric, report.wall_time_secs
    );
    Ok(bundle)
}

pub fn palacio(
    clf: &Classifier,
    ae: &AutoEncoder,
    data: &DatasetSplits,
    epochs: usize,
    seed: u64,
) -> Result<ModelBundle> {
    let mut bundle = ModelBundle::new(clf.clone(), ae.clone())?;
    let report = finetune_palacio(&mut bundle, data, &train_cfg(epochs, seed))?;
    eprintln!(
        "palacio: stacked test accuracy {:.4}, {:.1}s",
        report.test_metric, report.wall_time_secs
    );
    Ok(bundle)
}
