//! Small scalar objectives that exercise one primitive each, used to check
//! backward rules against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{grad_check, Attrs, GradCheckReport, NodeId, OpKind, Tape};
use crate::error::Result;
use crate::tensor::Tensor;

/// Scalar function of the nodes registered for a check point.
pub type Objective = Box<dyn Fn(&mut Tape, &[NodeId]) -> Result<NodeId> + Send + Sync>;

/// Finite-difference step used by [`primitive_checks`].
pub const CHECK_STEP: f64 = 1e-5;

pub(crate) fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], away_from_zero: bool) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            if away_from_zero {
                let mag: f64 = rng.random_range(0.05..1.0);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub(crate) fn named(items: Vec<Tensor>) -> Vec<(String, Tensor)> {
    items
        .into_iter()
        .enumerate()
        .map(|(i, t)| (format!("p{i}"), t))
        .collect()
}

/// Reduces any node to a scalar through a fixed random weighting.
pub(crate) fn weighted_sum(tape: &mut Tape, x: NodeId, seed: u64) -> Result<NodeId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let w = random_tensor(&mut rng, tape.value(x).shape(), false);
    let w = tape.constant(w);
    let h = tape.hadamard(x, w)?;
    tape.sum(h)
}

/// Builds a scalar objective exercising a single primitive.
pub fn primitive_case(
    kind: OpKind,
    dims: &[usize],
    seed: u64,
) -> (Vec<(String, Tensor)>, Objective) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = |i: usize| dims[i % dims.len()];
    let kinked = matches!(kind, OpKind::Relu | OpKind::Abs | OpKind::L1Norm);
    match kind {
        OpKind::Conv1d => {
            let (n, cin, t, cout, k) = (d(0).min(4), d(1), d(2), d(3), 1 + 2 * (d(4) % 3));
            let p = named(vec![
                random_tensor(&mut rng, &[n, cin, t], false),
                random_tensor(&mut rng, &[cout, cin, k], false),
                random_tensor(&mut rng, &[cout], false),
            ]);
            (
                p,
                Box::new(move |tape, ids| {
                    let y = tape.conv1d(ids[0], ids[1], Some(ids[2]))?;
                    weighted_sum(tape, y, seed)
                }),
            )
        }
        OpKind::Dense => {
            let (n, f1, f2, o) = (d(0), d(1), d(2).min(4), d(3));
            let p = named(vec![
                random_tensor(&mut rng, &[n, f1, f2], false),
                random_tensor(&mut rng, &[o, f1 * f2], false),
                random_tensor(&mut rng, &[o], false),
            ]);
            (
                p,
                Box::new(move |tape, ids| {
                    let y = tape.dense(ids[0], ids[1], Some(ids[2]))?;
                    weighted_sum(tape, y, seed)
                }),
            )
        }
        OpKind::MaxPool1d => {
            let (a, t) = (d(0), 2 * d(1));
            let mut x = random_tensor(&mut rng, &[a, t], false);
            // keep pairs apart so no tie sits inside the probe step
            for pair in x.data_mut().chunks_mut(2) {
                if pair.len() == 2 && (pair[0] - pair[1]).abs() < 0.01 {
                    pair[1] = pair[0] + 0.05;
                }
            }
            (
                named(vec![x]),
                Box::new(move |tape, ids| {
                    let y = tape.max_pool1d(ids[0])?;
                    weighted_sum(tape, y, seed)
                }),
            )
        }
        OpKind::Add | OpKind::Hadamard | OpKind::Mse => {
            let shape = [d(0), d(1)];
            let p = named(vec![
                random_tensor(&mut rng, &shape, false),
                random_tensor(&mut rng, &shape, false),
            ]);
            (
                p,
                Box::new(move |tape, ids| {
                    let y = tape.apply(kind, &[ids[0], ids[1]], Attrs::None)?;
                    if kind == OpKind::Mse {
                        Ok(y)
                    } else {
                        weighted_sum(tape, y, seed)
                    }
                }),
            )
        }
        OpKind::ScalarMul => (
            named(vec![random_tensor(&mut rng, &[d(0), d(1)], false)]),
            Box::new(move |tape, ids| {
                let y = tape.scale(ids[0], -1.7)?;
                weighted_sum(tape, y, seed)
            }),
        ),
        OpKind::CrossEntropy => {
            let (n, k) = (d(0), d(1).max(2));
            let targets: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % k).collect();
            (
                named(vec![random_tensor(&mut rng, &[n, k], false)]),
                Box::new(move |tape, ids| tape.cross_entropy(ids[0], &targets)),
            )
        }
        OpKind::Concat => {
            let (a, b1, b2, c) = (d(0), d(1), d(2), d(3));
            let p = named(vec![
                random_tensor(&mut rng, &[a, b1, c], false),
                random_tensor(&mut rng, &[a, b2, c], false),
            ]);
            (
                p,
                Box::new(move |tape, ids| {
                    let y = tape.concat(&[ids[0], ids[1]], 1)?;
                    weighted_sum(tape, y, seed)
                }),
            )
        }
        OpKind::Slice => {
            let (a, b, c) = (d(0), d(1), d(2));
            let start = b / 3;
            let len = (b - start).max(1);
            (
                named(vec![random_tensor(&mut rng, &[a, b, c], false)]),
                Box::new(move |tape, ids| {
                    let y = tape.slice(ids[0], 1, start, len)?;
                    weighted_sum(tape, y, seed)
                }),
            )
        }
        OpKind::Sum | OpKind::Mean | OpKind::L1Norm | OpKind::L2NormSq => (
            named(vec![random_tensor(&mut rng, &[d(0), d(1)], kinked)]),
            Box::new(move |tape, ids| {
                let w = tape.constant(Tensor::full(tape.value(ids[0]).shape(), 0.9));
                let y = tape.hadamard(ids[0], w)?;
                tape.unary(kind, y)
            }),
        ),
        _ => (
            named(vec![random_tensor(&mut rng, &[d(0), d(1)], kinked)]),
            Box::new(move |tape, ids| {
                let y = tape.unary(kind, ids[0])?;
                weighted_sum(tape, y, seed)
            }),
        ),
    }
}

/// One check per primitive at fixed small sizes.
pub fn primitive_checks(seed: u64) -> Result<Vec<(OpKind, GradCheckReport)>> {
    OpKind::ALL
        .into_iter()
        .map(|kind| {
            let (point, f) = primitive_case(kind, &[3, 4, 5, 2, 1], seed);
            Ok((kind, grad_check(f, &point, CHECK_STEP)?))
        })
        .collect()
}
