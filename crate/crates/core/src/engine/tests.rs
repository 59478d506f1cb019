use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cases::{named, primitive_case, random_tensor};
use super::*;
use crate::error::Error;
use crate::tensor::Tensor;

#[test]
fn relu_example() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(&[-1.0, 0.0, 2.0]));
    let y = tape.relu(x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
}

#[test]
fn conv1d_same_padding_example() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::ones(&[1, 5]));
    let k = tape.constant(Tensor::ones(&[1, 1, 3]));
    let y = tape.conv1d(x, k, None).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 5]);
    assert_eq!(tape.value(y).data(), &[2.0, 3.0, 3.0, 3.0, 2.0]);
}

#[test]
fn l1_norm_example() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(&[1.0, -2.0, 3.0]));
    let y = tape.l1_norm(x).unwrap();
    assert_eq!(tape.value(y).item(), 6.0);
}

#[test]
fn quadratic_gradient() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(&[1.0, 2.0, 3.0]));
    let sq = tape.hadamard(x, x).unwrap();
    let y = tape.sum(sq).unwrap();
    tape.backward(y, None, BackwardMode::Standard).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
}

#[test]
fn guided_relu_masks_both_ways() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(&[-1.0, 2.0]));
    let y = tape.relu(x).unwrap();
    tape.backward(y, Some(Tensor::vector(&[5.0, -5.0])), BackwardMode::Guided)
        .unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0, 0.0]);

    // standard mode keeps the negative gradient at the active unit
    tape.backward(
        y,
        Some(Tensor::vector(&[5.0, -5.0])),
        BackwardMode::Standard,
    )
    .unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0, -5.0]);
}

#[test]
fn shape_mismatch_names_kind_and_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[3, 2]));
    let err = tape.add(a, b).unwrap_err().to_string();
    assert!(err.contains("add"), "{err}");
    assert!(err.contains("[2, 3]") && err.contains("[3, 2]"), "{err}");

    let k = tape.constant(Tensor::zeros(&[4, 5, 3]));
    let err = tape.conv1d(a, k, None).unwrap_err().to_string();
    assert!(err.contains("conv1d") && err.contains("[4, 5, 3]"), "{err}");
}

#[test]
fn unknown_kind_is_rejected() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2]));
    assert!(matches!(
        tape.apply_named("softplus", &[a], Attrs::None),
        Err(Error::UnknownOp(_))
    ));
}

#[test]
fn backward_contract_errors() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::zeros(&[2]));
    let r = tape.relu(a).unwrap();
    assert!(matches!(
        tape.backward(r, None, BackwardMode::Standard),
        Err(Error::NonScalarOutput(_))
    ));
    let mut other = Tape::new();
    let foreign = {
        let x = other.constant(Tensor::zeros(&[1]));
        let y = other.relu(x).unwrap();
        other.relu(y).unwrap()
    };
    assert!(matches!(
        tape.backward(foreign, None, BackwardMode::Standard),
        Err(Error::NotOnTape(_))
    ));
}

#[test]
fn capture_contract() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::vector(&[1.0, -1.0]));
    let h = tape.relu(x).unwrap();
    tape.set_name(h, "layer").unwrap();
    let s = tape.sum(h).unwrap();
    let before = tape.capture("layer").unwrap();
    assert_eq!(before.activation.data(), &[1.0, 0.0]);
    assert!(before.gradient.is_none());
    assert!(matches!(
        tape.capture("nonexistent"),
        Err(Error::UnknownLayer(_))
    ));
    tape.backward(s, None, BackwardMode::Standard).unwrap();
    let after = tape.capture("layer").unwrap();
    assert_eq!(after.gradient.unwrap().data(), &[1.0, 1.0]);
}

#[test]
fn reachable_nodes_get_gradient_buffers() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::vector(&[1.0, 2.0]));
    let w = tape.param("w", Tensor::vector(&[3.0, 4.0]), false).unwrap();
    let x = tape.input(Tensor::vector(&[0.5, 0.5]));
    let a = tape.hadamard(c, w).unwrap();
    let b = tape.hadamard(a, x).unwrap();
    let s = tape.sum(b).unwrap();
    tape.backward(s, None, BackwardMode::Standard).unwrap();
    for id in [c, w, x, a, b, s] {
        let g = tape.grad(id).expect("gradient buffer");
        assert_eq!(g.shape(), tape.value(id).shape());
    }
    assert_eq!(tape.param_grad("w").unwrap().data(), &[0.0, 0.0]);
    assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 8.0]);
}

fn three_layer_conv(tape: &mut Tape, ids: &[NodeId]) -> crate::error::Result<NodeId> {
    let x = ids[0];
    let mut h = tape.conv1d(x, ids[1], Some(ids[2]))?;
    h = tape.relu(h)?;
    h = tape.max_pool1d(h)?;
    h = tape.conv1d(h, ids[3], Some(ids[4]))?;
    h = tape.tanh(h)?;
    h = tape.upsample1d(h)?;
    h = tape.conv1d(h, ids[5], None)?;
    let logits = tape.dense(h, ids[6], Some(ids[7]))?;
    tape.cross_entropy(logits, &[1, 0])
}

#[test]
fn random_conv_net_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let point = named(vec![
        random_tensor(&mut rng, &[2, 3, 8], false),
        random_tensor(&mut rng, &[4, 3, 3], false),
        random_tensor(&mut rng, &[4], false),
        random_tensor(&mut rng, &[5, 4, 5], false),
        random_tensor(&mut rng, &[5], false),
        random_tensor(&mut rng, &[2, 5, 3], false),
        random_tensor(&mut rng, &[3, 16], false),
        random_tensor(&mut rng, &[3], false),
    ]);
    let report = grad_check(three_layer_conv, &point, 1e-5).unwrap();
    assert!(
        report.max_relative_error < 1e-4,
        "{:?} {}",
        report.worst_coordinate,
        report.max_relative_error
    );
}

#[test]
fn forward_is_deterministic_and_replayable() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let point = named(vec![
        random_tensor(&mut rng, &[2, 3, 8], false),
        random_tensor(&mut rng, &[4, 3, 3], false),
        random_tensor(&mut rng, &[4], false),
        random_tensor(&mut rng, &[5, 4, 5], false),
        random_tensor(&mut rng, &[5], false),
        random_tensor(&mut rng, &[2, 5, 3], false),
        random_tensor(&mut rng, &[3, 16], false),
        random_tensor(&mut rng, &[3], false),
    ]);
    let build = || {
        let mut tape = Tape::new();
        let ids: Vec<_> = point
            .iter()
            .map(|(n, v)| tape.param(n, v.clone(), true).unwrap())
            .collect();
        three_layer_conv(&mut tape, &ids).unwrap();
        tape
    };
    let a = build();
    let b = build();
    let va: Vec<_> = a.cached_values().cloned().collect();
    let vb: Vec<_> = b.cached_values().cloned().collect();
    assert_eq!(va, vb);
    assert_eq!(a.replay().unwrap(), va);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_primitive_matches_central_differences(
        kind_index in 0usize..OpKind::ALL.len(),
        dims in prop::collection::vec(1usize..=16, 5),
        seed in any::<u64>(),
    ) {
        let kind = OpKind::ALL[kind_index];
        let (point, f) = primitive_case(kind, &dims, seed);
        let report = grad_check(f, &point, 1e-5).unwrap();
        prop_assert!(
            report.max_relative_error < 1e-4,
            "{kind}: {} at {:?}",
            report.max_relative_error,
            report.worst_coordinate
        );
    }

    #[test]
    fn guided_equals_standard_without_relu(seed in any::<u64>(), t in 2usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[2, t], false);
        let k = random_tensor(&mut rng, &[3, 2, 3], false);
        let run = |mode| {
            let mut tape = Tape::new();
            let xi = tape.input(x.clone());
            let ki = tape.constant(k.clone());
            let h = tape.conv1d(xi, ki, None).unwrap();
            let h = tape.tanh(h).unwrap();
            let h = tape.max_pool1d(h).unwrap();
            let h = tape.sigmoid(h).unwrap();
            let s = tape.sum(h).unwrap();
            tape.backward(s, None, mode).unwrap();
            tape.grad(xi).unwrap().clone()
        };
        prop_assert_eq!(run(BackwardMode::Standard), run(BackwardMode::Guided));
    }
}

#[test]
fn fixed_size_primitive_suite_passes() {
    let reports = cases::primitive_checks(11).unwrap();
    assert_eq!(reports.len(), OpKind::ALL.len());
    for (kind, r) in reports {
        assert!(
            r.max_relative_error < 1e-4,
            "{kind}: {}",
            r.max_relative_error
        );
    }
}
