//! Forward values and vector-Jacobian products of every primitive.

use super::op::{Attrs, OpKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `c = a * b + beta * c` for row/column-strided operands.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let reach = |r: usize, rs: usize, cols: usize, cs: usize| (r - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(reach(m, rsa, k, csa) < a.len(), "gemm: lhs out of bounds");
        assert!(reach(k, rsb, n, csb) < b.len(), "gemm: rhs out of bounds");
    }
    assert!(
        reach(m, rsc, n, csc) < c.len(),
        "gemm: output out of bounds"
    );
    // SAFETY: every index touched lies within the slices, checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn mismatch(kind: OpKind, a: &[usize], b: &[usize]) -> Error {
    Error::shape(kind.name(), format!("{a:?} vs {b:?}"))
}

fn arity(kind: OpKind, n: usize, allowed: &[usize]) -> Result<()> {
    if allowed.contains(&n) {
        Ok(())
    } else {
        Err(Error::shape(
            kind.name(),
            format!("expected {allowed:?} inputs, got {n}"),
        ))
    }
}

/// Splits a conv/dense operand into `(batch, rest)`; unbatched inputs get batch 1.
struct ConvDims {
    batch: usize,
    c_in: usize,
    len: usize,
    c_out: usize,
    width: usize,
    batched: bool,
}

fn conv_dims(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<ConvDims> {
    let kind = OpKind::Conv1d;
    let (batch, c_in, len, batched) = match *x.shape() {
        [c, t] => (1, c, t, false),
        [n, c, t] => (n, c, t, true),
        _ => return Err(mismatch(kind, x.shape(), w.shape())),
    };
    let [c_out, wc_in, width] = *w.shape() else {
        return Err(mismatch(kind, x.shape(), w.shape()));
    };
    if wc_in != c_in {
        return Err(mismatch(kind, x.shape(), w.shape()));
    }
    if let Some(b) = b {
        if b.shape() != [c_out] {
            return Err(mismatch(kind, w.shape(), b.shape()));
        }
    }
    Ok(ConvDims {
        batch,
        c_in,
        len,
        c_out,
        width,
        batched,
    })
}

/// Unfolds one `(c_in, len)` signal into `(c_in * width, len)` columns with
/// "same" zero padding; the left pad is `(width - 1) / 2`.
fn im2col(x: &[f64], d: &ConvDims, cols: &mut [f64]) {
    let pad = (d.width - 1) / 2;
    for ci in 0..d.c_in {
        let row_in = &x[ci * d.len..(ci + 1) * d.len];
        for k in 0..d.width {
            let row = &mut cols[(ci * d.width + k) * d.len..(ci * d.width + k + 1) * d.len];
            for (t, out) in row.iter_mut().enumerate() {
                let src = t as isize + k as isize - pad as isize;
                *out = if src >= 0 && (src as usize) < d.len {
                    row_in[src as usize]
                } else {
                    0.0
                };
            }
        }
    }
}

fn col2im(cols: &[f64], d: &ConvDims, dx: &mut [f64]) {
    let pad = (d.width - 1) / 2;
    for ci in 0..d.c_in {
        for k in 0..d.width {
            let row = &cols[(ci * d.width + k) * d.len..(ci * d.width + k + 1) * d.len];
            for (t, &v) in row.iter().enumerate() {
                let src = t as isize + k as isize - pad as isize;
                if src >= 0 && (src as usize) < d.len {
                    dx[ci * d.len + src as usize] += v;
                }
            }
        }
    }
}

fn conv1d_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let d = conv_dims(x, w, b)?;
    let rows = d.c_in * d.width;
    let mut cols = vec![0.0; rows * d.len];
    let mut out = vec![0.0; d.batch * d.c_out * d.len];
    for n in 0..d.batch {
        im2col(
            &x.data()[n * d.c_in * d.len..(n + 1) * d.c_in * d.len],
            &d,
            &mut cols,
        );
        let o = &mut out[n * d.c_out * d.len..(n + 1) * d.c_out * d.len];
        if let Some(b) = b {
            for (co, chunk) in o.chunks_mut(d.len).enumerate() {
                chunk.fill(b.data()[co]);
            }
        }
        gemm(
            d.c_out,
            rows,
            d.len,
            w.data(),
            (rows, 1),
            &cols,
            (d.len, 1),
            if b.is_some() { 1.0 } else { 0.0 },
            o,
            (d.len, 1),
        );
    }
    let shape = if d.batched {
        vec![d.batch, d.c_out, d.len]
    } else {
        vec![d.c_out, d.len]
    };
    Ok(Tensor::from_parts(shape, out))
}

fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    has_bias: bool,
    g: &Tensor,
    needs: &[bool],
) -> Vec<Option<Tensor>> {
    let d = conv_dims(x, w, None).expect("shapes validated in forward");
    let rows = d.c_in * d.width;
    let mut cols = vec![0.0; rows * d.len];
    let mut dcols = vec![0.0; rows * d.len];
    let mut dx = needs[0].then(|| vec![0.0; x.len()]);
    let mut dw = needs[1].then(|| vec![0.0; w.len()]);
    let mut db = (has_bias && needs[2]).then(|| vec![0.0; d.c_out]);
    for n in 0..d.batch {
        let gn = &g.data()[n * d.c_out * d.len..(n + 1) * d.c_out * d.len];
        if let Some(dw) = dw.as_mut() {
            im2col(
                &x.data()[n * d.c_in * d.len..(n + 1) * d.c_in * d.len],
                &d,
                &mut cols,
            );
            gemm(
                d.c_out,
                d.len,
                rows,
                gn,
                (d.len, 1),
                &cols,
                (1, d.len),
                1.0,
                dw,
                (rows, 1),
            );
        }
        if let Some(dx) = dx.as_mut() {
            gemm(
                rows,
                d.c_out,
                d.len,
                w.data(),
                (1, rows),
                gn,
                (d.len, 1),
                0.0,
                &mut dcols,
                (d.len, 1),
            );
            col2im(
                &dcols,
                &d,
                &mut dx[n * d.c_in * d.len..(n + 1) * d.c_in * d.len],
            );
        }
        if let Some(db) = db.as_mut() {
            for (co, chunk) in gn.chunks(d.len).enumerate() {
                db[co] += chunk.iter().sum::<f64>();
            }
        }
    }
    let mut grads = vec![
        dx.map(|v| Tensor::from_parts(x.shape().to_vec(), v)),
        dw.map(|v| Tensor::from_parts(w.shape().to_vec(), v)),
    ];
    if has_bias {
        grads.push(db.map(|v| Tensor::from_parts(vec![d.c_out], v)));
    }
    grads
}

/// `(rows, features, batched)` view of a dense input.
fn dense_dims(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<(usize, usize, usize, bool)> {
    let kind = OpKind::Dense;
    let [out, feat] = *w.shape() else {
        return Err(mismatch(kind, x.shape(), w.shape()));
    };
    let (rows, xf, batched) = if x.rank() == 1 {
        (1, x.shape()[0], false)
    } else {
        (x.shape()[0], x.shape()[1..].iter().product(), true)
    };
    if xf != feat {
        return Err(mismatch(kind, x.shape(), w.shape()));
    }
    if let Some(b) = b {
        if b.shape() != [out] {
            return Err(mismatch(kind, w.shape(), b.shape()));
        }
    }
    Ok((rows, feat, out, batched))
}

fn dense_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (rows, feat, out_dim, batched) = dense_dims(x, w, b)?;
    let mut out = vec![0.0; rows * out_dim];
    if let Some(b) = b {
        for row in out.chunks_mut(out_dim) {
            row.copy_from_slice(b.data());
        }
    }
    gemm(
        rows,
        feat,
        out_dim,
        x.data(),
        (feat, 1),
        w.data(),
        (1, feat),
        if b.is_some() { 1.0 } else { 0.0 },
        &mut out,
        (out_dim, 1),
    );
    let shape = if batched {
        vec![rows, out_dim]
    } else {
        vec![out_dim]
    };
    Ok(Tensor::from_parts(shape, out))
}

fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    has_bias: bool,
    g: &Tensor,
    needs: &[bool],
) -> Vec<Option<Tensor>> {
    let (rows, feat, out_dim, _) = dense_dims(x, w, None).expect("validated in forward");
    let dx = needs[0].then(|| {
        let mut dx = vec![0.0; rows * feat];
        gemm(
            rows,
            out_dim,
            feat,
            g.data(),
            (out_dim, 1),
            w.data(),
            (feat, 1),
            0.0,
            &mut dx,
            (feat, 1),
        );
        Tensor::from_parts(x.shape().to_vec(), dx)
    });
    let dw = needs[1].then(|| {
        let mut dw = vec![0.0; out_dim * feat];
        gemm(
            out_dim,
            rows,
            feat,
            g.data(),
            (1, out_dim),
            x.data(),
            (feat, 1),
            0.0,
            &mut dw,
            (feat, 1),
        );
        Tensor::from_parts(w.shape().to_vec(), dw)
    });
    let mut grads = vec![dx, dw];
    if has_bias {
        grads.push(needs[2].then(|| {
            let mut db = vec![0.0; out_dim];
            for row in g.data().chunks(out_dim) {
                for (acc, v) in db.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            Tensor::from_parts(vec![out_dim], db)
        }));
    }
    grads
}

fn last_axis(kind: OpKind, x: &Tensor) -> usize {
    let _ = kind;
    *x.shape().last().expect("tensors have rank >= 1")
}

fn max_pool_forward(x: &Tensor) -> Result<Tensor> {
    let t = last_axis(OpKind::MaxPool1d, x);
    if t < 2 {
        return Err(Error::shape(
            "max_pool1d",
            format!("last axis must be at least 2, got {:?}", x.shape()),
        ));
    }
    let half = t / 2;
    let outer = x.len() / t;
    let mut out = Vec::with_capacity(outer * half);
    for row in x.data().chunks(t) {
        for j in 0..half {
            out.push(row[2 * j].max(row[2 * j + 1]));
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = half;
    Ok(Tensor::from_parts(shape, out))
}

fn max_pool_backward(x: &Tensor, g: &Tensor) -> Tensor {
    let t = last_axis(OpKind::MaxPool1d, x);
    let half = t / 2;
    let mut dx = vec![0.0; x.len()];
    for (r, (row, grow)) in x.data().chunks(t).zip(g.data().chunks(half)).enumerate() {
        for j in 0..half {
            // ties route the gradient to the first element
            let src = if row[2 * j] >= row[2 * j + 1] {
                2 * j
            } else {
                2 * j + 1
            };
            dx[r * t + src] += grow[j];
        }
    }
    Tensor::from_parts(x.shape().to_vec(), dx)
}

fn upsample_forward(x: &Tensor) -> Tensor {
    let t = last_axis(OpKind::NearestUpsample1d, x);
    let mut out = Vec::with_capacity(x.len() * 2);
    for row in x.data().chunks(t) {
        for &v in row {
            out.push(v);
            out.push(v);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = 2 * t;
    Tensor::from_parts(shape, out)
}

fn upsample_backward(x: &Tensor, g: &Tensor) -> Tensor {
    let data = g.data().chunks(2).map(|p| p[0] + p[1]).collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let k = last_axis(OpKind::Softmax, x);
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

fn ce_dims(logits: &Tensor, targets: &[usize]) -> Result<(usize, usize)> {
    let (rows, k) = match *logits.shape() {
        [k] => (1, k),
        [n, k] => (n, k),
        _ => {
            return Err(Error::shape(
                "cross_entropy",
                format!("logits must be (K) or (N, K), got {:?}", logits.shape()),
            ))
        }
    };
    if targets.len() != rows {
        return Err(Error::shape(
            "cross_entropy",
            format!("{:?} vs {} targets", logits.shape(), targets.len()),
        ));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::Attrs {
            kind: "cross_entropy",
            detail: format!("target {bad} out of range for {k} classes"),
        });
    }
    Ok((rows, k))
}

fn cross_entropy_forward(logits: &Tensor, targets: &[usize]) -> Result<Tensor> {
    let (rows, k) = ce_dims(logits, targets)?;
    let mut total = 0.0;
    for (row, &y) in logits.data().chunks(k).zip(targets) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(Tensor::scalar(total / rows as f64))
}

fn cross_entropy_backward(logits: &Tensor, targets: &[usize], g: f64) -> Tensor {
    let (rows, k) = ce_dims(logits, targets).expect("validated in forward");
    let mut probs = softmax_rows(logits);
    let scale = g / rows as f64;
    for (row, &y) in probs.data_mut().chunks_mut(k).zip(targets) {
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    probs
}

/// `(outer, axis_len, inner)` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn concat_forward(inputs: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = inputs[0];
    if axis >= first.rank() {
        return Err(Error::Attrs {
            kind: "concat",
            detail: format!("axis {axis} out of range for {:?}", first.shape()),
        });
    }
    for t in &inputs[1..] {
        let ok = t.rank() == first.rank()
            && t.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !ok {
            return Err(mismatch(OpKind::Concat, first.shape(), t.shape()));
        }
    }
    let total: usize = inputs.iter().map(|t| t.shape()[axis]).sum();
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    let (outer, _, inner) = split_axis(&shape, axis);
    let mut out = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for t in inputs {
            let block = t.shape()[axis] * inner;
            out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
        }
    }
    Ok(Tensor::from_parts(shape, out))
}

fn concat_backward(inputs: &[&Tensor], axis: usize, g: &Tensor) -> Vec<Tensor> {
    let (outer, total, inner) = split_axis(g.shape(), axis);
    let mut grads: Vec<Vec<f64>> = inputs.iter().map(|t| Vec::with_capacity(t.len())).collect();
    for o in 0..outer {
        let mut offset = o * total * inner;
        for (t, dst) in inputs.iter().zip(grads.iter_mut()) {
            let block = t.shape()[axis] * inner;
            dst.extend_from_slice(&g.data()[offset..offset + block]);
            offset += block;
        }
    }
    grads
        .into_iter()
        .zip(inputs)
        .map(|(d, t)| Tensor::from_parts(t.shape().to_vec(), d))
        .collect()
}

fn slice_check(x: &Tensor, axis: usize, start: usize, len: usize) -> Result<()> {
    if axis >= x.rank() || len == 0 || start + len > x.shape()[axis] {
        return Err(Error::Attrs {
            kind: "slice",
            detail: format!(
                "range {start}..{} on axis {axis} invalid for {:?}",
                start + len,
                x.shape()
            ),
        });
    }
    Ok(())
}

fn slice_forward(x: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    slice_check(x, axis, start, len)?;
    let (outer, n, inner) = split_axis(x.shape(), axis);
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * n * inner + start * inner;
        out.extend_from_slice(&x.data()[base..base + len * inner]);
    }
    let mut shape = x.shape().to_vec();
    shape[axis] = len;
    Ok(Tensor::from_parts(shape, out))
}

fn slice_backward(x: &Tensor, axis: usize, start: usize, len: usize, g: &Tensor) -> Tensor {
    let (outer, n, inner) = split_axis(x.shape(), axis);
    let mut dx = vec![0.0; x.len()];
    for o in 0..outer {
        let base = o * n * inner + start * inner;
        dx[base..base + len * inner]
            .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
    }
    Tensor::from_parts(x.shape().to_vec(), dx)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn same_shape(kind: OpKind, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        Err(mismatch(kind, a.shape(), b.shape()))
    } else {
        Ok(())
    }
}

fn expect_attrs_none(kind: OpKind, attrs: &Attrs) -> Result<()> {
    if *attrs != Attrs::None {
        return Err(Error::Attrs {
            kind: kind.name(),
            detail: format!("takes no attributes, got {attrs:?}"),
        });
    }
    Ok(())
}

/// Evaluates one primitive.
pub(crate) fn forward(kind: OpKind, inputs: &[&Tensor], attrs: &Attrs) -> Result<Tensor> {
    use OpKind::*;
    match kind {
        Conv1d | Dense => {
            arity(kind, inputs.len(), &[2, 3])?;
            expect_attrs_none(kind, attrs)?;
            let bias = inputs.get(2).copied();
            if kind == Conv1d {
                conv1d_forward(inputs[0], inputs[1], bias)
            } else {
                dense_forward(inputs[0], inputs[1], bias)
            }
        }
        Relu | Sigmoid | Tanh | Abs | Square => {
            arity(kind, inputs.len(), &[1])?;
            expect_attrs_none(kind, attrs)?;
            let f: fn(f64) -> f64 = match kind {
                Relu => |v| if v > 0.0 { v } else { 0.0 },
                Sigmoid => |v| {
                    if v >= 0.0 {
                        1.0 / (1.0 + (-v).exp())
                    } else {
                        let e = v.exp();
                        e / (1.0 + e)
                    }
                },
                Tanh => f64::tanh,
                Abs => f64::abs,
                _ => |v| v * v,
            };
            Ok(inputs[0].map(f))
        }
        MaxPool1d => {
            arity(kind, inputs.len(), &[1])?;
            expect_attrs_none(kind, attrs)?;
            max_pool_forward(inputs[0])
        }
        NearestUpsample1d => {
            arity(kind, inputs.len(), &[1])?;
            expect_attrs_none(kind, attrs)?;
            Ok(upsample_forward(inputs[0]))
        }
        Add | Hadamard => {
            arity(kind, inputs.len(), &[2])?;
            expect_attrs_none(kind, attrs)?;
            same_shape(kind, inputs[0], inputs[1])?;
            if kind == Add {
                inputs[0].zip_map(inputs[1], |a, b| a + b)
            } else {
                inputs[0].zip_map(inputs[1], |a, b| a * b)
            }
        }
        ScalarMul => {
            arity(kind, inputs.len(), &[1])?;
            let Attrs::Scalar(s) = *attrs else {
                return Err(Error::Attrs {
                    kind: kind.name(),
                    detail: "requires Attrs::Scalar".into(),
                });
            };
            Ok(inputs[0].map(|v| v * s))
        }
        Sum | Mean | L1Norm | L2NormSq => {
            arity(kind, inputs.len(), &[1])?;
            expect_attrs_none(kind, attrs)?;
            let x = inputs[0];
            let v = match kind {
                Sum => x.sum(),
                Mean => x.mean(),
                L1Norm => x.data().iter().map(|v| v.abs()).sum(),
                _ => x.data().iter().map(|v| v * v).sum(),
            };
            Ok(Tensor::scalar(v))
        }
        Softmax => {
            arity(kind, inputs.len(), &[1])?;
            expect_attrs_none(kind, attrs)?;
            Ok(softmax_rows(inputs[0]))
        }
        CrossEntropy => {
            arity(kind, inputs.len(), &[1])?;
            let Attrs::Targets(targets) = attrs else {
                return Err(Error::Attrs {
                    kind: kind.name(),
                    detail: "requires Attrs::Targets".into(),
                });
            };
            cross_entropy_forward(inputs[0], targets)
        }
        Mse => {
            arity(kind, inputs.len(), &[2])?;
            expect_attrs_none(kind, attrs)?;
            same_shape(kind, inputs[0], inputs[1])?;
            let n = inputs[0].len() as f64;
            let s: f64 = inputs[0]
                .data()
                .iter()
                .zip(inputs[1].data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(Tensor::scalar(s / n))
        }
        Concat => {
            if inputs.is_empty() {
                return Err(Error::shape(kind.name(), "needs at least one input"));
            }
            let Attrs::Axis(axis) = *attrs else {
                return Err(Error::Attrs {
                    kind: kind.name(),
                    detail: "requires Attrs::Axis".into(),
                });
            };
            concat_forward(inputs, axis)
        }
        Slice => {
            arity(kind, inputs.len(), &[1])?;
            let Attrs::Slice { axis, start, len } = *attrs else {
                return Err(Error::Attrs {
                    kind: kind.name(),
                    detail: "requires Attrs::Slice".into(),
                });
            };
            slice_forward(inputs[0], axis, start, len)
        }
    }
}

/// Vector-Jacobian product: gradients for each input flagged in `needs`.
///
/// With `guided` set, ReLU additionally discards negative incoming gradient.
pub(crate) fn backward(
    kind: OpKind,
    inputs: &[&Tensor],
    output: &Tensor,
    attrs: &Attrs,
    g: &Tensor,
    needs: &[bool],
    guided: bool,
) -> Vec<Option<Tensor>> {
    use OpKind::*;
    let unary = |f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<Option<Tensor>> {
        let x = inputs[0];
        let data = x
            .data()
            .iter()
            .zip(output.data())
            .zip(g.data())
            .map(|((&xv, &yv), &gv)| f(xv, yv, gv))
            .collect();
        vec![Some(Tensor::from_parts(x.shape().to_vec(), data))]
    };
    let scalar_seed = || g.item();
    match kind {
        Conv1d => conv1d_backward(inputs[0], inputs[1], inputs.len() == 3, g, needs),
        Dense => dense_backward(inputs[0], inputs[1], inputs.len() == 3, g, needs),
        Relu => {
            if guided {
                unary(&|x, _, g| if x > 0.0 && g > 0.0 { g } else { 0.0 })
            } else {
                unary(&|x, _, g| if x > 0.0 { g } else { 0.0 })
            }
        }
        Sigmoid => unary(&|_, y, g| g * y * (1.0 - y)),
        Tanh => unary(&|_, y, g| g * (1.0 - y * y)),
        Abs => unary(&|x, _, g| g * sign(x)),
        Square => unary(&|x, _, g| 2.0 * x * g),
        MaxPool1d => vec![Some(max_pool_backward(inputs[0], g))],
        NearestUpsample1d => vec![Some(upsample_backward(inputs[0], g))],
        Add => vec![needs[0].then(|| g.clone()), needs[1].then(|| g.clone())],
        Hadamard => vec![
            needs[0].then(|| inputs[1].zip_map(g, |b, g| b * g).unwrap()),
            needs[1].then(|| inputs[0].zip_map(g, |a, g| a * g).unwrap()),
        ],
        ScalarMul => {
            let Attrs::Scalar(s) = *attrs else {
                unreachable!()
            };
            vec![Some(g.map(|v| v * s))]
        }
        Sum => vec![Some(Tensor::full(inputs[0].shape(), scalar_seed()))],
        Mean => {
            let x = inputs[0];
            vec![Some(Tensor::full(
                x.shape(),
                scalar_seed() / x.len() as f64,
            ))]
        }
        L1Norm => {
            let s = scalar_seed();
            vec![Some(inputs[0].map(|v| s * sign(v)))]
        }
        L2NormSq => {
            let s = scalar_seed();
            vec![Some(inputs[0].map(|v| 2.0 * s * v))]
        }
        Softmax => {
            let k = last_axis(kind, output);
            let mut dx = Vec::with_capacity(output.len());
            for (y, gr) in output.data().chunks(k).zip(g.data().chunks(k)) {
                let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                dx.extend(y.iter().zip(gr).map(|(yv, gv)| yv * (gv - dot)));
            }
            vec![Some(Tensor::from_parts(output.shape().to_vec(), dx))]
        }
        CrossEntropy => {
            let Attrs::Targets(targets) = attrs else {
                unreachable!()
            };
            vec![Some(cross_entropy_backward(
                inputs[0],
                targets,
                scalar_seed(),
            ))]
        }
        Mse => {
            let scale = 2.0 * scalar_seed() / inputs[0].len() as f64;
            let da = inputs[0]
                .zip_map(inputs[1], |a, b| scale * (a - b))
                .unwrap();
            vec![
                needs[0].then(|| da.clone()),
                needs[1].then(|| da.map(|v| -v)),
            ]
        }
        Concat => {
            let Attrs::Axis(axis) = *attrs else {
                unreachable!()
            };
            concat_backward(inputs, axis, g)
                .into_iter()
                .map(Some)
                .collect()
        }
        Slice => {
            let Attrs::Slice { axis, start, len } = *attrs else {
                unreachable!()
            };
            vec![Some(slice_backward(inputs[0], axis, start, len, g))]
        }
    }
}
