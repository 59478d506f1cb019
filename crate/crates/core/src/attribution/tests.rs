use super::*;
use crate::engine::{BackwardMode, Tape};
use crate::models::{AutoEncoderSpec, ClassifierSpec, Finetuned, LogitTarget};
use rand::{Rng, SeedableRng};

fn linear(channels: usize, length: usize, weights: &[f64]) -> Classifier {
    let spec = ClassifierSpec {
        conv_channels: vec![],
        ..ClassifierSpec::cnn(channels, length, 2)
    };
    let mut clf = Classifier::build(spec, 0).unwrap();
    let f = channels * length;
    let mut w = vec![0.0; 2 * f];
    w[..f].copy_from_slice(weights);
    clf.params_mut()
        .set("dense.weight", Tensor::new(vec![2, f], w).unwrap())
        .unwrap();
    clf
}

fn small_cnn(seed: u64) -> Classifier {
    let spec = ClassifierSpec {
        conv_channels: vec![4, 6],
        kernel_width: 3,
        ..ClassifierSpec::cnn(2, 10, 2)
    };
    let mut clf = Classifier::build(spec, seed).unwrap();
    for (_, t) in clf.params_mut().values_mut() {
        if t.rank() == 1 {
            t.data_mut().fill(0.07);
        }
    }
    clf
}

fn random_input(c: usize, t: usize, seed: u64) -> Tensor {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![c, t],
        (0..c * t).map(|_| r.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

fn values(method: Method, clf: &Classifier, x: &Tensor, cfg: &MethodConfig) -> Tensor {
    attribute(method, Models::classifier(clf), x, cfg)
        .unwrap()
        .values
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!(matches!(
        "deeplift".parse::<Method>(),
        Err(Error::UnknownMethod(_))
    ));
}

#[test]
fn trivial_methods() {
    let clf = linear(1, 2, &[2.0, -1.0]);
    let x = Tensor::new(vec![1, 2], vec![-3.0, 1.0]).unwrap();
    let cfg = MethodConfig::default();
    assert_eq!(
        values(Method::InputMagnitude, &clf, &x, &cfg).data(),
        &[3.0, 1.0]
    );
    assert_eq!(values(Method::None, &clf, &x, &cfg).data(), &[1.0, 1.0]);
    let a = values(Method::Random, &clf, &x, &cfg);
    assert_eq!(a, values(Method::Random, &clf, &x, &cfg));
    assert!(a.data().iter().all(|v| (0.0..1.0).contains(v)));
    let other = MethodConfig {
        noise_seed: 1,
        ..cfg
    };
    assert_ne!(a, values(Method::Random, &clf, &x, &other));
}

#[test]
fn gradient_of_a_linear_model() {
    let clf = linear(1, 2, &[2.0, -1.0]);
    let x = Tensor::new(vec![1, 2], vec![0.5, 4.0]).unwrap();
    let cfg = MethodConfig::default();
    assert_eq!(values(Method::Gradient, &clf, &x, &cfg).data(), &[2.0, 1.0]);
    assert_eq!(
        values(Method::GradientXInput, &clf, &x, &cfg).data(),
        &[1.0, 4.0]
    );
    let zero = Tensor::zeros(&[1, 2]);
    assert_eq!(
        values(Method::GradientXInput, &clf, &zero, &cfg).data(),
        &[0.0, 0.0]
    );
}

#[test]
fn gradient_matches_finite_differences() {
    let clf = small_cnn(1);
    let x = random_input(2, 10, 2);
    let map = values(Method::Gradient, &clf, &x, &MethodConfig::default());
    let f = |x: &Tensor| clf.logits(&x.unsqueeze()).unwrap().sum();
    let h = 1e-6;
    for i in 0..x.len() {
        let mut up = x.clone();
        let mut down = x.clone();
        up.data_mut()[i] += h;
        down.data_mut()[i] -= h;
        let numeric = ((f(&up) - f(&down)) / (2.0 * h)).abs();
        let err = crate::engine::relative_error(map.data()[i], numeric);
        assert!(err < 1e-3, "feature {i}: {} vs {numeric}", map.data()[i]);
    }
}

#[test]
fn integrated_gradients_is_exact_on_linear_models() {
    let w = [0.5, -1.5, 2.0, 0.25];
    let clf = linear(2, 2, &w);
    let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -3.0, 0.5]).unwrap();
    for steps in [1, 7, 100] {
        let cfg = MethodConfig {
            ig_steps: steps,
            ..MethodConfig::default()
        };
        let ig = values(Method::IntegratedGradients, &clf, &x, &cfg);
        for ((v, wi), xi) in ig.data().iter().zip(w).zip(x.data()) {
            assert!((v - (wi * xi).abs()).abs() < 1e-12);
        }
    }
    let zero = values(
        Method::IntegratedGradients,
        &clf,
        &Tensor::zeros(&[2, 2]),
        &MethodConfig::default(),
    );
    assert!(zero.data().iter().all(|&v| v == 0.0));
}

#[test]
fn integrated_gradients_is_complete() {
    let clf = small_cnn(3);
    let x = random_input(2, 10, 4).unsqueeze();
    let ig = integrated_gradients(&clf, &x, 300).unwrap();
    let f = |x: &Tensor| clf.logits(x).unwrap().sum();
    let gap = f(&x) - f(&Tensor::zeros(x.shape()));
    assert!(
        (ig.sum() - gap).abs() <= 0.01 * gap.abs(),
        "{} vs {gap}",
        ig.sum()
    );
}

#[test]
fn smoothgrad_without_noise_is_the_gradient() {
    let clf = small_cnn(5);
    let x = random_input(2, 10, 6);
    let cfg = MethodConfig {
        sg_sigma: Some(0.0),
        sg_samples: 7,
        ..MethodConfig::default()
    };
    assert_eq!(
        values(Method::SmoothGrad, &clf, &x, &cfg),
        values(Method::Gradient, &clf, &x, &cfg)
    );
    let constant = Tensor::full(&[2, 10], 0.4);
    let cfg = MethodConfig::default();
    assert_eq!(
        values(Method::SmoothGrad, &clf, &constant, &cfg),
        values(Method::Gradient, &clf, &constant, &cfg)
    );
}

#[test]
fn smoothgrad_is_seeded_and_batch_independent() {
    let clf = small_cnn(5);
    let cfg = MethodConfig {
        sg_samples: 1,
        ..MethodConfig::default()
    };
    let a = random_input(2, 10, 7);
    let b = random_input(2, 10, 8);
    let batch = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
    let both = attribute_batch(
        Method::SmoothGrad,
        Models::classifier(&clf),
        &batch,
        &[0, 1],
        &cfg,
    )
    .unwrap();
    let alone = attribute_batch(
        Method::SmoothGrad,
        Models::classifier(&clf),
        &b.unsqueeze(),
        &[1],
        &cfg,
    )
    .unwrap();
    assert_eq!(both[1].values, alone[0].values);
    assert_eq!(both[0].values, values(Method::SmoothGrad, &clf, &a, &cfg));
    assert_ne!(both[0].values, values(Method::Gradient, &clf, &a, &cfg));
}

#[test]
fn smoothgrad_on_a_linear_model_recovers_the_weights() {
    let w = [0.5, -1.5, 2.0, 0.25];
    let clf = linear(2, 2, &w);
    let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -3.0, 0.5]).unwrap();
    let map = values(Method::SmoothGrad, &clf, &x, &MethodConfig::default());
    for (v, wi) in map.data().iter().zip(w) {
        assert!((v - wi.abs()).abs() < 1e-9);
    }
}

#[test]
fn gradcam_matches_a_hand_computation() {
    // one conv channel of width 3, pooled once, dense head over 4 positions
    let spec = ClassifierSpec {
        conv_channels: vec![1],
        kernel_width: 3,
        ..ClassifierSpec::cnn(1, 8, 2)
    };
    let mut clf = Classifier::build(spec, 0).unwrap();
    let kernel = [0.5, 1.0, -0.25];
    let head = [1.0, -0.5, 0.75, 0.2, -1.0, 0.3, 0.1, 0.4];
    clf.params_mut()
        .set(
            "conv1.weight",
            Tensor::new(vec![1, 1, 3], kernel.to_vec()).unwrap(),
        )
        .unwrap();
    clf.params_mut()
        .set("conv1.bias", Tensor::vector(&[0.1]))
        .unwrap();
    clf.params_mut()
        .set(
            "dense.weight",
            Tensor::new(vec![2, 4], head.to_vec()).unwrap(),
        )
        .unwrap();
    let x = [0.3, -1.2, 2.0, 0.7, -0.4, 1.5, -2.2, 0.9];

    let padded: Vec<f64> = std::iter::once(0.0)
        .chain(x)
        .chain(std::iter::once(0.0))
        .collect();
    let a: Vec<f64> = (0..8)
        .map(|t| (0..3).map(|j| kernel[j] * padded[t + j]).sum::<f64>() + 0.1)
        .map(|v: f64| v.max(0.0))
        .collect();
    let pooled: Vec<(usize, f64)> = (0..4)
        .map(|p| {
            if a[2 * p + 1] > a[2 * p] {
                (2 * p + 1, a[2 * p + 1])
            } else {
                (2 * p, a[2 * p])
            }
        })
        .collect();
    let logit = |k: usize| {
        pooled
            .iter()
            .enumerate()
            .map(|(p, (_, v))| head[k * 4 + p] * v)
            .sum::<f64>()
    };
    let class = usize::from(logit(1) > logit(0));
    let mut grad = [0.0; 8];
    for (p, (t, _)) in pooled.iter().enumerate() {
        grad[*t] = head[class * 4 + p];
    }
    let w = grad.iter().sum::<f64>() / 8.0;
    let expected: Vec<f64> = a.iter().map(|v| (w * v).max(0.0)).collect();

    let xt = Tensor::new(vec![1, 8], x.to_vec()).unwrap();
    let map = values(Method::GradCam, &clf, &xt, &MethodConfig::default());
    for (got, want) in map.data().iter().zip(&expected) {
        assert!(
            (got - want).abs() < 1e-12,
            "{:?} vs {expected:?}",
            map.data()
        );
    }
}

#[test]
fn gradcam_is_zero_when_every_weight_is_non_positive() {
    let spec = ClassifierSpec {
        conv_channels: vec![3],
        kernel_width: 3,
        ..ClassifierSpec::cnn(2, 10, 2)
    };
    let mut clf = Classifier::build(spec, 2).unwrap();
    // a negative head makes every channel weight ≤ 0 for either class
    let w = clf.params().get("dense.weight").unwrap().map(|v| -v.abs());
    clf.params_mut().set("dense.weight", w).unwrap();
    let map = values(
        Method::GradCam,
        &clf,
        &random_input(2, 10, 3),
        &MethodConfig::default(),
    );
    assert!(map.data().iter().all(|&v| v == 0.0));
}

#[test]
fn guided_gradcam_is_the_product() {
    let clf = small_cnn(6);
    let x = random_input(2, 10, 9);
    let cfg = MethodConfig::default();
    let cam = values(Method::GradCam, &clf, &x, &cfg);
    let guided = values(Method::GuidedBackprop, &clf, &x, &cfg);
    let both = values(Method::GuidedGradCam, &clf, &x, &cfg);
    assert!(cam.max() > 0.0 && guided.max() > 0.0);
    let bound = cam.max() * guided.max();
    for ((p, c), g) in both.data().iter().zip(cam.data()).zip(guided.data()) {
        assert_eq!(*p, c * g);
        assert!(*p <= bound);
    }

    let mut tape = Tape::new();
    let xi = tape.input(x.unsqueeze());
    let g = clf.forward(&mut tape, xi, false, "").unwrap();
    let class = tape.value(g.logits).argmax();
    let direct = clf
        .input_gradient(
            &x.unsqueeze(),
            &LogitTarget::Classes(vec![class]),
            BackwardMode::Guided,
        )
        .unwrap();
    assert_eq!(guided.data(), direct.abs().data());
}

#[test]
fn cam_methods_reject_lstm() {
    let clf = Classifier::build(ClassifierSpec::lstm(2, 6, 2), 0).unwrap();
    let x = random_input(2, 6, 1);
    for m in [Method::GradCam, Method::GuidedGradCam] {
        let err = attribute(m, Models::classifier(&clf), &x, &MethodConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVariant { .. }), "{err}");
        assert!(err.to_string().contains("lstm"), "{err}");
    }
    assert!(attribute(
        Method::GuidedBackprop,
        Models::classifier(&clf),
        &x,
        &MethodConfig::default()
    )
    .is_ok());
}

/// Independent double loop: mask, classify one instance, compare confidence.
fn occlusion_oracle(clf: &Classifier, x: &Tensor, width: usize) -> Vec<f64> {
    let (c, t) = (x.shape()[0], x.shape()[1]);
    let confidence = |v: &Tensor| {
        let l = clf.logits(&v.unsqueeze()).unwrap();
        let m = l.max();
        let z: f64 = l.data().iter().map(|a| (a - m).exp()).sum();
        l.data()
            .iter()
            .map(|a| (a - m).exp() / z)
            .collect::<Vec<f64>>()
    };
    let base = confidence(x);
    let class = if base[1] > base[0] { 1 } else { 0 };
    let mut out = vec![0.0; c * t];
    for ch in 0..c {
        for pos in 0..t {
            let mut m = x.clone();
            for off in 0..width {
                let q = pos as isize + off as isize - ((width - 1) / 2) as isize;
                if q >= 0 && (q as usize) < t {
                    m.data_mut()[ch * t + q as usize] = 0.0;
                }
            }
            out[ch * t + pos] = (base[class] - confidence(&m)[class]).abs();
        }
    }
    out
}

#[test]
fn occlusion_matches_the_brute_force_oracle() {
    let clf = small_cnn(7);
    for seed in 0..3 {
        let x = random_input(2, 10, seed);
        for width in [1, 3, 4] {
            let cfg = MethodConfig {
                occlusion_width: width,
                ..MethodConfig::default()
            };
            assert_eq!(
                values(Method::Occlusion, &clf, &x, &cfg).data(),
                occlusion_oracle(&clf, &x, width)
            );
        }
    }
}

#[test]
fn occlusion_ignores_unused_channels_and_zero_input() {
    let mut w = vec![0.0; 2 * 5];
    for (i, v) in w.iter_mut().enumerate().skip(5) {
        *v = 0.3 * i as f64 - 2.0;
    }
    let clf = linear(2, 5, &w);
    let x = random_input(2, 5, 3);
    let map = values(Method::Occlusion, &clf, &x, &MethodConfig::default());
    assert!(map.data()[..5].iter().all(|&v| v == 0.0));
    assert!(map.data()[5..].iter().any(|&v| v > 0.0));
    let zero = values(
        Method::Occlusion,
        &small_cnn(1),
        &Tensor::zeros(&[2, 10]),
        &MethodConfig::default(),
    );
    assert!(zero.data().iter().all(|&v| v == 0.0));
}

#[test]
fn autoencoder_maps() {
    for channels in [1, 3, 10] {
        let clf = Classifier::build(ClassifierSpec::cnn(channels, 50, 2), 0).unwrap();
        let ae = AutoEncoder::build(AutoEncoderSpec::new(channels, 50), 0).unwrap();
        let bundle = ModelBundle::new(clf, ae).unwrap();
        let x = random_input(channels, 50, 2);
        let map = attribute(
            Method::Tsinsight,
            (&bundle).into(),
            &x,
            &MethodConfig::default(),
        )
        .unwrap();
        assert_eq!(map.values.shape(), &[channels, 50]);
        assert!(map.warning.is_some());
    }
    let clf = Classifier::build(ClassifierSpec::cnn(3, 50, 2), 0).unwrap();
    let mut ae = AutoEncoder::build(AutoEncoderSpec::new(3, 50), 0).unwrap();
    ae.zero_output();
    ae.set_finetuned(Some(Finetuned::Palacio));
    let bundle = ModelBundle::new(clf.clone(), ae).unwrap();
    let map = attribute(
        Method::Palacio,
        (&bundle).into(),
        &random_input(3, 50, 1),
        &MethodConfig::default(),
    )
    .unwrap();
    assert!(map.values.data().iter().all(|&v| v == 0.0));
    assert!(map.warning.is_none());
    let missing = attribute(
        Method::Palacio,
        Models::classifier(&clf),
        &random_input(3, 50, 1),
        &MethodConfig::default(),
    );
    assert!(matches!(missing, Err(Error::Contract(_))));
}

#[test]
fn every_map_is_non_negative_and_shaped() {
    let clf = small_cnn(8);
    let ae = AutoEncoder::build(
        AutoEncoderSpec {
            encoder_channels: vec![4],
            ..AutoEncoderSpec::new(2, 10)
        },
        1,
    )
    .unwrap();
    let bundle = ModelBundle::new(clf, ae).unwrap();
    let cfg = MethodConfig {
        ig_steps: 5,
        sg_samples: 5,
        ..MethodConfig::default()
    };
    let batch = Tensor::stack(&[random_input(2, 10, 1), random_input(2, 10, 2)]).unwrap();
    for m in Method::ALL {
        let maps = attribute_batch(m, (&bundle).into(), &batch, &[4, 5], &cfg).unwrap();
        for map in maps {
            assert_eq!(map.values.shape(), &[2, 10], "{m}");
            assert!(map.values.all_finite() && map.values.min() >= 0.0, "{m}");
            assert_eq!(map.target, m.target());
        }
    }
}

#[test]
fn shape_and_config_errors() {
    let clf = small_cnn(1);
    let bad = attribute(
        Method::Gradient,
        Models::classifier(&clf),
        &Tensor::zeros(&[3, 10]),
        &MethodConfig::default(),
    );
    assert!(matches!(bad, Err(Error::Shape { .. })));
    let cfg = MethodConfig {
        ig_steps: 0,
        ..MethodConfig::default()
    };
    let bad = attribute(
        Method::IntegratedGradients,
        Models::classifier(&clf),
        &Tensor::zeros(&[2, 10]),
        &cfg,
    );
    assert!(matches!(bad, Err(Error::InvalidConfig { .. })));
}

#[test]
fn maps_export_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maps/gradient.csv");
    let map = AttributionMap {
        values: Tensor::new(vec![2, 3], vec![0.0, 0.5, 1.0, 2.0, 0.25, 3.0]).unwrap(),
        method: Method::Gradient,
        target: Target::AllClasses,
        warning: None,
    };
    write_map(&map, &MethodConfig::default(), "abc", &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "0,0.5,1\n2,0.25,3\n"
    );
    let side: MapSidecar =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(side.method, Method::Gradient);
    assert_eq!(side.model_checksum, "abc");
}
