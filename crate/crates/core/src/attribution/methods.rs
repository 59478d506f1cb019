use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Method, MethodConfig, Models, OcclusionFill};
use crate::engine::{BackwardMode, Tape};
use crate::error::{Error, Result};
use crate::models::{Classifier, Finetuned, LogitTarget, Variant, CONV_LAST};
use crate::rng;
use crate::tensor::{argmax, Tensor};

pub(super) fn compute(
    method: Method,
    models: Models<'_>,
    batch: &Tensor,
    ids: &[u64],
    cfg: &MethodConfig,
) -> Result<(Tensor, Option<String>)> {
    let clf = models.classifier;
    if method.needs_conv_layer() && clf.variant() == Variant::Lstm {
        return Err(Error::UnsupportedVariant {
            method: method.name().into(),
            variant: "lstm".into(),
        });
    }
    let values = match method {
        Method::None => Tensor::ones(batch.shape()),
        Method::Random => random(batch.shape(), ids, cfg.noise_seed),
        Method::InputMagnitude => batch.abs(),
        Method::Gradient => summed_gradient(clf, batch)?.abs(),
        Method::GradientXInput => {
            summed_gradient(clf, batch)?.zip_map(batch, |g, x| (g * x).abs())?
        }
        Method::IntegratedGradients => integrated_gradients(clf, batch, cfg.ig_steps)?.abs(),
        Method::SmoothGrad => smoothgrad(clf, batch, ids, cfg)?.abs(),
        Method::GradCam => gradcam(clf, batch)?,
        Method::GuidedBackprop => guided_backprop(clf, batch)?.abs(),
        Method::GuidedGradCam => {
            gradcam(clf, batch)?.zip_map(&guided_backprop(clf, batch)?, |a, b| (a * b).abs())?
        }
        Method::Occlusion => occlusion(clf, batch, cfg)?,
        Method::Tsinsight | Method::Palacio => {
            let ae = models.autoencoder.ok_or_else(|| {
                Error::Contract(format!("{method} attribution needs an auto-encoder"))
            })?;
            let want = if method == Method::Tsinsight {
                Finetuned::Tsinsight
            } else {
                Finetuned::Palacio
            };
            let warning = (ae.finetuned() != Some(want))
                .then(|| format!("auto-encoder was not fine-tuned with the {method} objective"));
            return Ok((ae.reconstruct(batch)?.abs(), warning));
        }
    };
    Ok((values, None))
}

fn instance_rng(seed: u64, id: u64) -> rng::Rng {
    rng::stream(rng::derive(seed, id), rng::STREAM_ATTRIBUTION)
}

fn random(shape: &[usize], ids: &[u64], seed: u64) -> Tensor {
    let per: usize = shape[1..].iter().product();
    let mut data = Vec::with_capacity(per * ids.len());
    for &id in ids {
        let mut r = instance_rng(seed, id);
        data.extend((0..per).map(|_| r.random::<f64>()));
    }
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

fn summed_gradient(clf: &Classifier, batch: &Tensor) -> Result<Tensor> {
    clf.input_gradient(batch, &LogitTarget::AllClasses, BackwardMode::Standard)
}

/// Signed integrated gradients `x ⊙ (1/m) Σ_k ∇F(k/m · x)` of the summed
/// logits `F`, zero baseline, for a `(N, C, T)` batch.
pub fn integrated_gradients(clf: &Classifier, batch: &Tensor, steps: usize) -> Result<Tensor> {
    let mut total = Tensor::zeros(batch.shape());
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        let g = summed_gradient(clf, &batch.map(|v| alpha * v))?;
        for (t, gi) in total.data_mut().iter_mut().zip(g.data()) {
            *t += gi;
        }
    }
    total.zip_map(batch, |g, x| x * g / steps as f64)
}

/// Per-feature noise scale for one `(C, T)` instance.
fn noise_scale(x: &[f64], channels: usize, cfg: &MethodConfig) -> Vec<f64> {
    if let Some(s) = cfg.sg_sigma {
        return vec![s; x.len()];
    }
    let sigma = |part: &[f64]| {
        let (lo, hi) = part
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        // constant input: the variance rule is undefined, use no noise
        if hi > lo {
            (2.0 / (hi - lo)).sqrt()
        } else {
            0.0
        }
    };
    if cfg.sg_per_channel {
        let t = x.len() / channels;
        x.chunks(t)
            .flat_map(|ch| std::iter::repeat_n(sigma(ch), t))
            .collect()
    } else {
        vec![sigma(x); x.len()]
    }
}

/// Mean gradient over noisy copies `x + ε`, `ε ~ N(0, σ²)`. Instances whose
/// noise scale is zero get the plain gradient.
fn smoothgrad(clf: &Classifier, batch: &Tensor, ids: &[u64], cfg: &MethodConfig) -> Result<Tensor> {
    let n = batch.shape()[0];
    let per = batch.len() / n;
    let channels = batch.shape()[1];
    let scales: Vec<Vec<f64>> = batch
        .data()
        .chunks(per)
        .map(|x| noise_scale(x, channels, cfg))
        .collect();
    let plain = summed_gradient(clf, batch)?;
    let noisy: Vec<usize> = (0..n)
        .filter(|&i| scales[i].iter().any(|&s| s > 0.0))
        .collect();
    if noisy.is_empty() {
        return Ok(plain);
    }
    let base = batch.select(&noisy);
    let mut rngs: Vec<rng::Rng> = noisy
        .iter()
        .map(|&i| instance_rng(cfg.noise_seed, ids[i]))
        .collect();
    let mut total = vec![0.0; noisy.len() * per];
    for _ in 0..cfg.sg_samples {
        let mut sample = base.clone();
        for (j, row) in sample.data_mut().chunks_mut(per).enumerate() {
            let scale = &scales[noisy[j]];
            for (v, s) in row.iter_mut().zip(scale) {
                let e: f64 = StandardNormal.sample(&mut rngs[j]);
                *v += s * e;
            }
        }
        let g = summed_gradient(clf, &sample)?;
        for (t, gi) in total.iter_mut().zip(g.data()) {
            *t += gi;
        }
    }
    let mut out = plain;
    for (j, &i) in noisy.iter().enumerate() {
        for (o, t) in out.data_mut()[i * per..(i + 1) * per]
            .iter_mut()
            .zip(&total[j * per..(j + 1) * per])
        {
            *o = t / cfg.sg_samples as f64;
        }
    }
    Ok(out)
}

/// Class-activation map over `conv_last`: channel weights are the time mean
/// of the predicted logit's gradient, the map is `ReLU(Σ_c w_c A_c)`
/// nearest-upsampled to the input length and repeated over input channels.
fn gradcam(clf: &Classifier, batch: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    // an input leaf, so gradient reaches the frozen network's activations
    let x = tape.input(batch.clone());
    let g = clf.forward(&mut tape, x, false, "")?;
    let logits = tape.value(g.logits).clone();
    let k = logits.shape()[1];
    let classes: Vec<usize> = logits.data().chunks(k).map(argmax).collect();
    let seed = LogitTarget::Classes(classes).seed(&logits)?;
    tape.backward(g.logits, Some(seed), BackwardMode::Standard)?;
    let cap = tape.capture(CONV_LAST)?;
    let grad = cap.gradient.expect("conv_last feeds the logits");
    let [n, ch, tl] = *cap.activation.shape() else {
        unreachable!("conv activations are (N, C, T)")
    };
    let (c_in, t) = (batch.shape()[1], batch.shape()[2]);
    let mut out = Tensor::zeros(batch.shape());
    for i in 0..n {
        let mut cam = vec![0.0; tl];
        for c in 0..ch {
            let off = (i * ch + c) * tl;
            let w = grad.data()[off..off + tl].iter().sum::<f64>() / tl as f64;
            for (m, a) in cam.iter_mut().zip(&cap.activation.data()[off..off + tl]) {
                *m += w * a;
            }
        }
        let row = &mut out.data_mut()[i * c_in * t..(i + 1) * c_in * t];
        for (pos, v) in row.iter_mut().enumerate() {
            let src = (pos % t) * tl / t;
            *v = cam[src].max(0.0);
        }
    }
    Ok(out)
}

/// Guided-mode gradient of the predicted logit.
fn guided_backprop(clf: &Classifier, batch: &Tensor) -> Result<Tensor> {
    let classes = clf.predict(batch)?;
    clf.input_gradient(batch, &LogitTarget::Classes(classes), BackwardMode::Guided)
}

fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Drop in predicted-class confidence when a window centred on each feature
/// is masked, as an absolute value.
fn occlusion(clf: &Classifier, batch: &Tensor, cfg: &MethodConfig) -> Result<Tensor> {
    let (n, c, t) = (batch.shape()[0], batch.shape()[1], batch.shape()[2]);
    let k = clf.spec().class_count;
    let width = cfg.occlusion_width;
    let half = (width - 1) / 2;
    let base_logits = clf.logits(batch)?;
    let mut out = Tensor::zeros(batch.shape());
    for i in 0..n {
        let x = batch.index(i);
        let base = softmax_row(&base_logits.data()[i * k..(i + 1) * k]);
        let class = argmax(&base);
        let mut masked = Vec::with_capacity(c * t);
        for ch in 0..c {
            let row = &x.data()[ch * t..(ch + 1) * t];
            let fill = match cfg.occlusion_fill {
                OcclusionFill::Zero => 0.0,
                OcclusionFill::ChannelMean => row.iter().sum::<f64>() / t as f64,
            };
            for pos in 0..t {
                let mut copy = x.clone();
                let start = pos.saturating_sub(half);
                let end = (pos + width - half).min(t);
                copy.data_mut()[ch * t + start..ch * t + end].fill(fill);
                masked.push(copy);
            }
        }
        let logits = clf.logits(&Tensor::stack(&masked)?)?;
        for (j, l) in logits.data().chunks(k).enumerate() {
            out.data_mut()[i * c * t + j] = (base[class] - softmax_row(l)[class]).abs();
        }
    }
    Ok(out)
}
