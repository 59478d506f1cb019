use super::*;
use crate::data::{
    generate_synthetic_anomaly, normalize_splits, Dataset, DatasetSplits, Split, SynthConfig,
};
use crate::models::{
    AutoEncoder, AutoEncoderSpec, Classifier, ClassifierSpec, ModelBundle, ParamGroup,
};
use crate::tensor::Tensor;

fn small_data(seed: u64) -> DatasetSplits {
    let cfg = SynthConfig {
        train_size: 96,
        val_size: 32,
        test_size: 32,
        length: 16,
        seed,
        ..SynthConfig::default()
    };
    normalize_splits(&generate_synthetic_anomaly(&cfg).unwrap())
        .unwrap()
        .0
}

fn small_classifier(seed: u64) -> Classifier {
    let spec = ClassifierSpec {
        conv_channels: vec![4, 6],
        kernel_width: 3,
        ..ClassifierSpec::cnn(3, 16, 2)
    };
    Classifier::build(spec, seed).unwrap()
}

fn small_autoencoder(seed: u64) -> AutoEncoder {
    let spec = AutoEncoderSpec {
        encoder_channels: vec![4, 2],
        kernel_width: 3,
        ..AutoEncoderSpec::new(3, 16)
    };
    AutoEncoder::build(spec, seed).unwrap()
}

fn quick_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate: 3e-3,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn small_bundle() -> ModelBundle {
    ModelBundle::new(small_classifier(1), small_autoencoder(2)).unwrap()
}

#[test]
fn adam_with_zero_gradient_is_a_no_op() {
    let clf = small_classifier(3);
    let mut params = clf.params().clone();
    let mut opt = Optimizer::new(&TrainConfig::default(), &params);
    let zeros: Vec<Tensor> = params
        .iter()
        .map(|(_, t)| Tensor::zeros(t.shape()))
        .collect();
    for _ in 0..3 {
        opt.step(&mut params, &zeros).unwrap();
    }
    assert_eq!(&params, clf.params());
}

#[test]
fn sgd_moves_against_the_gradient() {
    let mut params = crate::models::ParamSet::new();
    params.push("w", Tensor::vector(&[1.0, -1.0]));
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.5,
        ..TrainConfig::default()
    };
    let mut opt = Optimizer::new(&cfg, &params);
    opt.step(&mut params, &[Tensor::vector(&[1.0, 2.0])])
        .unwrap();
    assert_eq!(params.get("w").unwrap().data(), &[0.5, -2.0]);
}

#[test]
fn every_objective_passes_grad_check() {
    let reports = objective_checks(4).unwrap();
    assert_eq!(reports.len(), 6);
    for (name, report) in reports {
        assert!(report.max_relative_error < 1e-4, "{name} {report:?}");
    }
}

#[test]
fn zero_weights_reproduce_palacio_step_for_step() {
    let data = small_data(2);
    let cfg = quick_cfg(2);
    let mut a = small_bundle();
    let mut b = small_bundle();
    let pal = finetune_palacio(&mut a, &data, &cfg).unwrap();
    let ts = finetune_tsinsight(&mut b, &data, &cfg, &TsInsightConfig::manual(0.0, 0.0)).unwrap();
    assert_eq!(pal.step_loss, ts.step_loss);
    assert_eq!(a.autoencoder.params(), b.autoencoder.params());
}

#[test]
fn training_is_deterministic() {
    let data = small_data(3);
    let cfg = quick_cfg(2);
    let mut a = small_classifier(7);
    let mut b = small_classifier(7);
    let ra = train_classifier(&mut a, &data, &cfg).unwrap();
    let rb = train_classifier(&mut b, &data, &cfg).unwrap();
    assert_eq!(ra.without_timing(), rb.without_timing());
    assert_eq!(a, b);

    let mut a = small_autoencoder(7);
    let mut b = small_autoencoder(7);
    let ra = train_autoencoder(&mut a, &data, &cfg).unwrap();
    let rb = train_autoencoder(&mut b, &data, &cfg).unwrap();
    assert_eq!(ra.without_timing(), rb.without_timing());
    assert!(ra.train_loss.iter().all(|l| l.is_finite()));
}

#[test]
fn single_sample_is_memorized() {
    let data = small_data(4);
    let one = DatasetSplits {
        train: data.train.head(1),
        val: data.val.head(1),
        test: data.test.head(1),
    };
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 1,
        weight_decay: 0.0,
        ..TrainConfig::default()
    };
    let mut clf = small_classifier(8);
    let report = train_classifier(&mut clf, &one, &cfg).unwrap();
    assert!(
        *report.step_loss.last().unwrap() < 1e-3,
        "{:?}",
        report.step_loss.last()
    );
}

#[test]
fn zero_data_autoencoder_learns_zero() {
    let zeros = |split| Dataset::new(Tensor::zeros(&[16, 3, 16]), vec![0; 16], split, 2).unwrap();
    let data = DatasetSplits {
        train: zeros(Split::Train),
        val: zeros(Split::Val),
        test: zeros(Split::Test),
    };
    let mut ae = small_autoencoder(9);
    for (_, t) in ae.params_mut().values_mut() {
        if t.rank() == 1 {
            t.data_mut().fill(0.3);
        }
    }
    let before = reconstruction_mse(&ae, &data.test).unwrap();
    let report = train_autoencoder(&mut ae, &data, &quick_cfg(200)).unwrap();
    assert!(before > 0.01);
    assert!(report.test_metric < 1e-3, "{}", report.test_metric);
}

#[test]
fn finetuning_leaves_the_classifier_untouched() {
    let data = small_data(5);
    let mut bundle = small_bundle();
    let before = bundle.classifier.clone();
    finetune_tsinsight(
        &mut bundle,
        &data,
        &quick_cfg(1),
        &TsInsightConfig::manual(1.0, 0.01),
    )
    .unwrap();
    assert_eq!(bundle.classifier, before);
    finetune_palacio(&mut bundle, &data, &quick_cfg(1)).unwrap();
    assert_eq!(bundle.classifier, before);
}

#[test]
fn unfrozen_classifier_is_rejected() {
    let data = small_data(5);
    let mut bundle = small_bundle();
    bundle.unfreeze(ParamGroup::Classifier);
    assert!(matches!(
        finetune_palacio(&mut bundle, &data, &quick_cfg(1)),
        Err(Error::Contract(_))
    ));
    let ts = TsInsightConfig::manual(1.0, 0.0);
    assert!(matches!(
        finetune_tsinsight(&mut bundle, &data, &quick_cfg(1), &ts),
        Err(Error::Contract(_))
    ));
}

#[test]
fn zero_epochs_change_nothing() {
    let data = small_data(6);
    let mut bundle = small_bundle();
    let before = bundle.clone();
    let report = finetune_palacio(&mut bundle, &data, &quick_cfg(0)).unwrap();
    assert_eq!(bundle, before);
    assert!(report.train_loss.is_empty());
}

#[test]
fn divergence_restores_parameters() {
    let data = small_data(7);
    let mut clf = small_classifier(10);
    let before = clf.clone();
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 1e300,
        ..quick_cfg(1)
    };
    let err = train_classifier(&mut clf, &data, &cfg).unwrap_err();
    assert!(
        matches!(err, Error::NonFiniteLoss { epoch: 0, .. }),
        "{err}"
    );
    assert_eq!(clf, before);
}

#[test]
fn auto_weights_lie_in_unit_range() {
    let data = small_data(8);
    let bundle = small_bundle();
    let weights = auto_hyperparams(&bundle, &data.test.gather(&[0, 1, 2, 3]).0).unwrap();
    assert_eq!(weights.len(), 4);
    for w in &weights {
        assert!(!w.degenerate);
        assert!(w.gamma.data().iter().all(|&g| (0.0..=1.0).contains(&g)));
        assert_eq!(w.gamma.max(), 1.0);
        let mean = w.gamma.data().iter().map(|g| 1.0 - g).sum::<f64>() / w.gamma.len() as f64;
        assert!((w.beta - mean).abs() < 1e-12);
    }
}

#[test]
fn uniform_saliency_triggers_the_degenerate_rule() {
    let mut bundle = small_bundle();
    for (_, t) in bundle.classifier.params_mut().values_mut() {
        t.data_mut().fill(0.0);
    }
    let weights = auto_hyperparams(&bundle, &Tensor::ones(&[2, 3, 16])).unwrap();
    for w in weights {
        assert!(w.degenerate);
        assert_eq!(w.beta, 0.0);
        assert!(w.gamma.data().iter().all(|&g| g == 1.0));
        assert!(w
            .beta_map(BetaRule::Pointwise)
            .data()
            .iter()
            .all(|&b| b == 0.0));
    }
    assert!(auto_hyperparams(&small_bundle(), &Tensor::ones(&[3, 16])).is_err());
}

#[test]
fn instance_scope_fits_one_row() {
    let data = small_data(9);
    let mut bundle = small_bundle();
    let ts = TsInsightConfig {
        scope: Scope::Instance,
        instance: 3,
        instance_steps: 20,
        ..TsInsightConfig::manual(1.0, 0.01)
    };
    let report = finetune_tsinsight(&mut bundle, &data, &quick_cfg(1), &ts).unwrap();
    assert_eq!(report.step_loss.len(), 20);
    assert!(report.test_metric == 0.0 || report.test_metric == 1.0);
    let auto = TsInsightConfig {
        scope: Scope::Instance,
        instance_steps: 5,
        ..TsInsightConfig::auto()
    };
    finetune_tsinsight(&mut bundle, &data, &quick_cfg(1), &auto).unwrap();
}

#[test]
fn configs_validate_and_parse() {
    assert!(TsInsightConfig::default().validate().is_err());
    assert!(TsInsightConfig::auto().validate().is_ok());
    assert!(TsInsightConfig::manual(-1.0, 0.0).validate().is_err());
    let bad = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig { .. })));

    let cfg: TrainConfig = parse_config("epochs = 3\noptimizer = \"sgd\"\n", true).unwrap();
    assert_eq!(
        (cfg.epochs, cfg.optimizer, cfg.batch_size),
        (3, OptimizerKind::Sgd, 32)
    );
    let ts: TsInsightConfig = parse_config(r#"{"gamma": 1.0, "beta": 0.001}"#, false).unwrap();
    assert_eq!(ts, TsInsightConfig::manual(1.0, 0.001));
    assert!(parse_config::<TrainConfig>(r#"{"epoch": 3}"#, false).is_err());
}

#[test]
fn report_serializes() {
    let data = small_data(10);
    let mut clf = small_classifier(1);
    let report = train_classifier(&mut clf, &data, &quick_cfg(1)).unwrap();
    let back: FitReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}
