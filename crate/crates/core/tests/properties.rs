//! Training properties checked on trained models at reduced scale.

use std::sync::OnceLock;

use tsinsight::data::{generate_synthetic_anomaly, normalize_splits, DatasetSplits, SynthConfig};
use tsinsight::models::{AutoEncoder, AutoEncoderSpec, Classifier, ClassifierSpec, ModelBundle};
use tsinsight::training::{
    auto_hyperparams, finetune_tsinsight, train_autoencoder, train_classifier, TrainConfig,
    TsInsightConfig,
};
use tsinsight::Tensor;

struct Fixture {
    data: DatasetSplits,
    clf: Classifier,
    ae: AutoEncoder,
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 1,
        ..TrainConfig::default()
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let data =
            normalize_splits(&generate_synthetic_anomaly(&SynthConfig::scaled(4500, 1)).unwrap())
                .unwrap()
                .0;
        let mut clf = Classifier::build(ClassifierSpec::cnn(3, 50, 2), 1).unwrap();
        train_classifier(&mut clf, &data, &cfg(8)).unwrap();
        let mut ae = AutoEncoder::build(AutoEncoderSpec::new(3, 50), 1).unwrap();
        train_autoencoder(&mut ae, &data, &cfg(8)).unwrap();
        Fixture { data, clf, ae }
    })
}

/// Bundle fine-tuned with γ = 1 and the given β, with the mean absolute
/// auto-encoder output over the test split.
fn finetuned(beta: f64, tc: &TrainConfig) -> (ModelBundle, f64) {
    let f = fixture();
    let mut bundle = ModelBundle::new(f.clf.clone(), f.ae.clone()).unwrap();
    finetune_tsinsight(
        &mut bundle,
        &f.data,
        tc,
        &TsInsightConfig::manual(1.0, beta),
    )
    .unwrap();
    let mean_abs = bundle
        .autoencoder
        .reconstruct(f.data.test.inputs())
        .unwrap()
        .abs()
        .mean();
    (bundle, mean_abs)
}

#[test]
fn larger_beta_never_grows_the_output() {
    let norms: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&b| finetuned(b, &cfg(4)).1)
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
}

#[test]
fn huge_beta_silences_the_output() {
    let f = fixture();
    // the best-validation epoch is the first one, so it needs enough steps
    let tc = TrainConfig {
        batch_size: 8,
        ..cfg(1)
    };
    let (bundle, mean_abs) = finetuned(10.0, &tc);
    assert!(mean_abs < 0.01, "{mean_abs}");
    let positive = f.data.test.positive_rate();
    let majority = positive.max(1.0 - positive);
    let acc = bundle.accuracy(&f.data.test).unwrap();
    assert!(
        (acc - majority).abs() < 0.05,
        "accuracy {acc}, majority rate {majority}"
    );
    assert!(acc < f.clf.accuracy(&f.data.test).unwrap() - 0.2);
}

/// `|∂(Σ logits)/∂x|` by central differences, one feature at a time.
fn numeric_saliency(clf: &Classifier, x: &Tensor) -> Vec<f64> {
    let f = |v: &Tensor| clf.logits(&v.unsqueeze()).unwrap().sum();
    let h = 1e-5;
    (0..x.len())
        .map(|i| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up.data_mut()[i] += h;
            down.data_mut()[i] -= h;
            ((f(&up) - f(&down)) / (2.0 * h)).abs()
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// The spike position takes γ* = 1 on most single-spike rows; on every row
/// γ* peaks where the finite-difference saliency does.
#[test]
fn spike_receives_the_largest_reconstruction_weight() {
    let f = fixture();
    let test = &f.data.test;
    let anomalies = test.anomalies().unwrap();
    let predicted = f.clf.predict(test.inputs()).unwrap();
    let rows: Vec<usize> = (0..test.len())
        .filter(|&i| anomalies[i].len() == 1 && predicted[i] == 1)
        .take(40)
        .collect();
    assert_eq!(rows.len(), 40);
    let bundle = ModelBundle::new(f.clf.clone(), f.ae.clone()).unwrap();
    let weights = auto_hyperparams(&bundle, &test.inputs().select(&rows)).unwrap();
    let mut on_spike = 0;
    for (w, &row) in weights.iter().zip(&rows) {
        let spike = anomalies[row][0];
        let at = spike.channel * test.length() + spike.time;
        let peak = argmax(&numeric_saliency(&f.clf, &test.instance(row)));
        assert_eq!(argmax(w.gamma.data()), peak, "row {row}");
        assert_eq!(w.gamma.data()[peak], 1.0);
        on_spike += usize::from(peak == at);
    }
    assert!(
        2 * on_spike > rows.len(),
        "spike holds the maximum on {on_spike} of {} rows",
        rows.len()
    );
}
