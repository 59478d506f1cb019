use std::time::Instant;

use super::objective::{autoencoder_loss, classifier_loss, finetune_loss, FinetuneObjective};
use super::{FitReport, Metric, Optimizer, Scope, TrainConfig, TsInsightConfig};
use crate::data::{batch_iter, Batch, Dataset, DatasetSplits};
use crate::engine::{BackwardMode, NodeId, Tape};
use crate::error::{Error, Result};
use crate::models::{AutoEncoder, Classifier, Finetuned, ModelBundle, ParamGroup, ParamSet};
use crate::rng;
use crate::tensor::Tensor;

/// One model being optimized: how to score a batch, which parameters move,
/// and how to judge a split.
trait Job {
    fn name(&self) -> String;
    fn metric(&self) -> Metric;
    fn loss(&self, tape: &mut Tape, batch: &Batch) -> Result<NodeId>;
    /// Tape name of a parameter in [`Job::params`].
    fn tape_name(&self, name: &str) -> String;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn evaluate(&self, ds: &Dataset) -> Result<f64>;
}

struct ClassifierJob<'a> {
    model: &'a mut Classifier,
    weight_decay: f64,
}

impl Job for ClassifierJob<'_> {
    fn name(&self) -> String {
        "classifier".into()
    }
    fn metric(&self) -> Metric {
        Metric::Accuracy
    }
    fn loss(&self, tape: &mut Tape, batch: &Batch) -> Result<NodeId> {
        classifier_loss(tape, self.model, batch, self.weight_decay)
    }
    fn tape_name(&self, name: &str) -> String {
        name.to_string()
    }
    fn params(&self) -> &ParamSet {
        self.model.params()
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        self.model.params_mut()
    }
    fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        self.model.accuracy(ds)
    }
}

struct AutoEncoderJob<'a> {
    model: &'a mut AutoEncoder,
    weight_decay: f64,
}

impl Job for AutoEncoderJob<'_> {
    fn name(&self) -> String {
        "autoencoder".into()
    }
    fn metric(&self) -> Metric {
        Metric::ReconstructionMse
    }
    fn loss(&self, tape: &mut Tape, batch: &Batch) -> Result<NodeId> {
        autoencoder_loss(tape, self.model, batch, self.weight_decay)
    }
    fn tape_name(&self, name: &str) -> String {
        name.to_string()
    }
    fn params(&self) -> &ParamSet {
        self.model.params()
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        self.model.params_mut()
    }
    fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        reconstruction_mse(self.model, ds)
    }
}

struct FinetuneJob<'a> {
    bundle: &'a mut ModelBundle,
    objective: FinetuneObjective,
    weight_decay: f64,
}

impl Job for FinetuneJob<'_> {
    fn name(&self) -> String {
        self.objective.name().into()
    }
    fn metric(&self) -> Metric {
        Metric::Accuracy
    }
    fn loss(&self, tape: &mut Tape, batch: &Batch) -> Result<NodeId> {
        finetune_loss(tape, self.bundle, batch, &self.objective, self.weight_decay)
    }
    fn tape_name(&self, name: &str) -> String {
        format!("autoencoder.{name}")
    }
    fn params(&self) -> &ParamSet {
        self.bundle.autoencoder.params()
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        self.bundle.autoencoder.params_mut()
    }
    fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        self.bundle.accuracy(ds)
    }
}

/// Mean squared error of `D(E(x))` against `x` over a dataset.
pub fn reconstruction_mse(model: &AutoEncoder, ds: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for batch in batch_iter(ds, 256, false, 0) {
        let r = model.reconstruct(&batch.inputs)?;
        total += r
            .data()
            .iter()
            .zip(batch.inputs.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / ds.inputs().len() as f64)
}

/// Scores one batch and returns `(loss, gradients in parameter order)`.
fn batch_gradients(job: &dyn Job, batch: &Batch) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let loss = job.loss(&mut tape, batch)?;
    let value = tape.value(loss).item();
    tape.backward(loss, None, BackwardMode::Standard)?;
    let grads = job
        .params()
        .iter()
        .map(|(name, t)| {
            tape.param_grad(&job.tape_name(name))
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.shape()))
        })
        .collect();
    Ok((value, grads))
}

/// One optimizer step; any non-finite loss or parameter is reported as
/// [`Error::NonFiniteLoss`] with the parameters left as they were.
fn step(
    job: &mut dyn Job,
    opt: &mut Optimizer,
    batch: &Batch,
    epoch: usize,
    at: usize,
) -> Result<f64> {
    let non_finite = || Error::NonFiniteLoss { epoch, step: at };
    let (loss, grads) = match batch_gradients(job, batch) {
        Err(Error::NonFinite(_)) => return Err(non_finite()),
        other => other?,
    };
    if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
        return Err(non_finite());
    }
    let before = job.params().clone();
    opt.step(job.params_mut(), &grads)?;
    if job.params().iter().any(|(_, t)| !t.all_finite()) {
        *job.params_mut() = before;
        return Err(non_finite());
    }
    Ok(loss)
}

/// Fixed-epoch minibatch training keeping the best-validation parameters.
fn fit(job: &mut dyn Job, data: &DatasetSplits, cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    let started = Instant::now();
    let metric = job.metric();
    let mut opt = Optimizer::new(cfg, job.params());
    let mut report = FitReport {
        objective: job.name(),
        metric,
        train_loss: Vec::new(),
        step_loss: Vec::new(),
        val_metric: Vec::new(),
        best_epoch: None,
        test_metric: f64::NAN,
        wall_time_secs: 0.0,
    };
    let mut best: Option<(f64, ParamSet)> = None;
    let initial = job.params().clone();
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let mut count = 0;
        for batch in batch_iter(
            &data.train,
            cfg.batch_size,
            true,
            rng::derive(cfg.seed, epoch as u64),
        ) {
            match step(job, &mut opt, &batch, epoch, count) {
                Ok(loss) => {
                    report.step_loss.push(loss);
                    sum += loss;
                    count += 1;
                }
                Err(e) => {
                    // fall back to the best parameters seen, or the start
                    *job.params_mut() = best.map(|(_, p)| p).unwrap_or(initial);
                    return Err(e);
                }
            }
        }
        report.train_loss.push(sum / count as f64);
        let val = job.evaluate(&data.val)?;
        report.val_metric.push(val);
        if best.as_ref().is_none_or(|(b, _)| metric.improves(val, *b)) {
            best = Some((val, job.params().clone()));
            report.best_epoch = Some(epoch);
        }
    }
    if let Some((_, params)) = best {
        *job.params_mut() = params;
    }
    report.test_metric = job.evaluate(&data.test)?;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Minimizes mean cross-entropy plus `λ Σ ‖W‖²`.
pub fn train_classifier(
    model: &mut Classifier,
    data: &DatasetSplits,
    cfg: &TrainConfig,
) -> Result<FitReport> {
    check_shape(
        "train_classifier",
        model.spec().input_channels,
        model.spec().sequence_length,
        data,
    )?;
    if data.class_count() != model.spec().class_count {
        return Err(Error::shape(
            "train_classifier",
            format!(
                "{} classes in data, {} in the model",
                data.class_count(),
                model.spec().class_count
            ),
        ));
    }
    fit(
        &mut ClassifierJob {
            model,
            weight_decay: cfg.weight_decay,
        },
        data,
        cfg,
    )
}

/// Minimizes mean squared reconstruction error plus `λ Σ ‖W‖²`.
pub fn train_autoencoder(
    model: &mut AutoEncoder,
    data: &DatasetSplits,
    cfg: &TrainConfig,
) -> Result<FitReport> {
    check_shape(
        "train_autoencoder",
        model.spec().input_channels,
        model.spec().sequence_length,
        data,
    )?;
    fit(
        &mut AutoEncoderJob {
            model,
            weight_decay: cfg.weight_decay,
        },
        data,
        cfg,
    )
}

fn check_shape(
    op: &'static str,
    channels: usize,
    length: usize,
    data: &DatasetSplits,
) -> Result<()> {
    if (data.channels(), data.length()) != (channels, length) {
        return Err(Error::shape(
            op,
            format!(
                "data is ({}, {}), model expects ({channels}, {length})",
                data.channels(),
                data.length()
            ),
        ));
    }
    Ok(())
}

fn check_bundle(op: &'static str, bundle: &ModelBundle, data: &DatasetSplits) -> Result<()> {
    if !bundle.is_frozen(ParamGroup::Classifier) {
        return Err(Error::Contract(format!(
            "{op} requires a frozen classifier"
        )));
    }
    let spec = bundle.classifier.spec();
    check_shape(op, spec.input_channels, spec.sequence_length, data)
}

/// Fine-tunes the auto-encoder through the frozen classifier on
/// cross-entropy alone.
pub fn finetune_palacio(
    bundle: &mut ModelBundle,
    data: &DatasetSplits,
    cfg: &TrainConfig,
) -> Result<FitReport> {
    check_bundle("finetune_palacio", bundle, data)?;
    let report = fit(
        &mut FinetuneJob {
            bundle,
            objective: FinetuneObjective::Palacio,
            weight_decay: cfg.weight_decay,
        },
        data,
        cfg,
    )?;
    if cfg.epochs > 0 {
        bundle.autoencoder.set_finetuned(Some(Finetuned::Palacio));
    }
    Ok(report)
}

/// Fine-tunes the auto-encoder with the reconstruction and sparsity terms,
/// over the training split or, with `scope = instance`, a single test row.
pub fn finetune_tsinsight(
    bundle: &mut ModelBundle,
    data: &DatasetSplits,
    cfg: &TrainConfig,
    ts: &TsInsightConfig,
) -> Result<FitReport> {
    ts.validate()?;
    check_bundle("finetune_tsinsight", bundle, data)?;
    if ts.scope == Scope::Instance {
        if ts.instance >= data.test.len() {
            return Err(Error::config(
                "instance",
                format!(
                    "row {} outside a test split of {}",
                    ts.instance,
                    data.test.len()
                ),
            ));
        }
        let x = data.test.instance(ts.instance);
        let label = data.test.labels()[ts.instance];
        return finetune_instance(bundle, &x, label, cfg, ts);
    }
    let report = fit(
        &mut FinetuneJob {
            bundle,
            objective: ts.objective(),
            weight_decay: cfg.weight_decay,
        },
        data,
        cfg,
    )?;
    if cfg.epochs > 0 {
        bundle.autoencoder.set_finetuned(Some(Finetuned::Tsinsight));
    }
    Ok(report)
}

/// Runs `ts.instance_steps` optimizer steps on one `(C, T)` instance. The
/// report's test metric is whether the stacked model still predicts `label`.
pub fn finetune_instance(
    bundle: &mut ModelBundle,
    x: &Tensor,
    label: usize,
    cfg: &TrainConfig,
    ts: &TsInsightConfig,
) -> Result<FitReport> {
    ts.validate()?;
    cfg.validate()?;
    if !bundle.is_frozen(ParamGroup::Classifier) {
        return Err(Error::Contract(
            "finetune_instance requires a frozen classifier".into(),
        ));
    }
    let started = Instant::now();
    let batch = Batch {
        inputs: x.unsqueeze(),
        labels: vec![label],
        rows: vec![0],
    };
    let objective = ts.objective();
    let mut job = FinetuneJob {
        bundle,
        objective,
        weight_decay: cfg.weight_decay,
    };
    let initial = job.params().clone();
    let mut opt = Optimizer::new(cfg, job.params());
    let mut losses = Vec::with_capacity(ts.instance_steps);
    for at in 0..ts.instance_steps {
        match step(&mut job, &mut opt, &batch, 0, at) {
            Ok(loss) => losses.push(loss),
            Err(e) => {
                *job.params_mut() = initial;
                return Err(e);
            }
        }
    }
    let (_, logits) = job.bundle.stacked_values(&batch.inputs)?;
    let hit = f64::from(u8::from(logits.argmax() == label));
    bundle.autoencoder.set_finetuned(Some(Finetuned::Tsinsight));
    Ok(FitReport {
        objective: format!("{}_instance", objective.name()),
        metric: Metric::Accuracy,
        train_loss: vec![losses.iter().sum::<f64>() / losses.len() as f64],
        step_loss: losses,
        val_metric: Vec::new(),
        best_epoch: None,
        test_metric: hit,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
