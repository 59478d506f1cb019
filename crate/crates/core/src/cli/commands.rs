use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{flag, Layers};
use super::manifest::{Outputs, RunManifest};
use super::{
    Command, FillArg, MethodFlags, ObjectiveArg, ScopeArg, SplitArg, TrainFlags, VariantArg,
};
use crate::attribution::{attribute_batch, write_map, Method, MethodConfig, Models};
use crate::data::{
    generate_synthetic_anomaly, load_csv_dataset, normalize_splits, write_csv_dataset,
    DatasetSplits, Split, SynthConfig,
};
use crate::engine::cases::primitive_checks;
use crate::engine::GradCheckReport;
use crate::error::{Error, Result};
use crate::evaluation::{
    average_jacobian, histogram, parse_methods, singular_spectrum, suppression_test, write_curves,
    write_histogram_csv, write_spectrum_csv, Fill, SuppressionConfig,
};
use crate::models::{
    load_autoencoder, load_classifier, save_checkpoint, AutoEncoder, AutoEncoderSpec, Classifier,
    ClassifierSpec, Model, ModelBundle, Variant,
};
use crate::training::{
    finetune_palacio, finetune_tsinsight, objective_checks, train_autoencoder, train_classifier,
    FitReport, Scope, TrainConfig, TsInsightConfig, WeightMode,
};

/// Grad-check pass threshold on the relative error.
const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub sample_count: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            sample_count: 256,
            bins: 50,
            seed: 0,
        }
    }
}

pub fn execute(cmd: &Command, manifest: &mut RunManifest, out: &mut Outputs) -> Result<()> {
    let common = cmd.common();
    let layers = Layers::load(common.config.as_deref(), common.seed)?;
    if let Some(c) = &common.config {
        manifest.record_input(c)?;
    }
    match cmd {
        Command::GenSynth {
            train_size,
            val_size,
            test_size,
            length,
            anomaly_rate,
            spike_magnitude,
            ..
        } => {
            let cfg: SynthConfig = layers.section(
                "synth",
                Some("seed"),
                vec![
                    ("train_size", flag(*train_size)),
                    ("val_size", flag(*val_size)),
                    ("test_size", flag(*test_size)),
                    ("length", flag(*length)),
                    ("anomaly_rate", flag(*anomaly_rate)),
                    ("spike_magnitude", flag(*spike_magnitude)),
                ],
            )?;
            manifest.record_config("synth", &cfg)?;
            manifest.seeds.insert("synth".into(), cfg.seed);
            let splits = generate_synthetic_anomaly(&cfg)?;
            write_csv_dataset(&splits, out.root())?;
            for split in Split::ALL {
                out.path(&format!("{split}.csv"));
            }
            manifest.summarize("positive_rate_train", splits.train.positive_rate());
            Ok(())
        }
        Command::TrainClassifier {
            data,
            variant,
            train,
            ..
        } => {
            let splits = load_data(data, manifest)?;
            let mut spec: ClassifierSpec = layers.section(
                "classifier",
                None,
                vec![(
                    "variant",
                    flag(variant.map(|v| match v {
                        VariantArg::Cnn => Variant::Cnn,
                        VariantArg::Lstm => Variant::Lstm,
                    })),
                )],
            )?;
            spec.input_channels = splits.channels();
            spec.sequence_length = splits.length();
            spec.class_count = splits.class_count();
            let cfg = train_config(&layers, "classifier_training", train)?;
            manifest.record_config("classifier", &spec)?;
            manifest.record_config("classifier_training", &cfg)?;
            manifest
                .seeds
                .insert("classifier_training".into(), cfg.seed);
            let mut model = Classifier::build(spec, cfg.seed)?;
            let report = train_classifier(&mut model, &splits, &cfg)?;
            save_checkpoint(&Model::Classifier(model), &out.checkpoint("classifier"))?;
            write_report(&report, manifest, out)
        }
        Command::TrainAe { data, train, .. } => {
            let splits = load_data(data, manifest)?;
            let mut spec: AutoEncoderSpec = layers.section("autoencoder", None, vec![])?;
            spec.input_channels = splits.channels();
            spec.sequence_length = splits.length();
            let cfg = train_config(&layers, "autoencoder_training", train)?;
            manifest.record_config("autoencoder", &spec)?;
            manifest.record_config("autoencoder_training", &cfg)?;
            manifest
                .seeds
                .insert("autoencoder_training".into(), cfg.seed);
            let mut model = AutoEncoder::build(spec, cfg.seed)?;
            let report = train_autoencoder(&mut model, &splits, &cfg)?;
            save_checkpoint(&Model::AutoEncoder(model), &out.checkpoint("autoencoder"))?;
            write_report(&report, manifest, out)
        }
        Command::Finetune {
            data,
            classifier,
            autoencoder,
            objective,
            scope,
            auto_hyper,
            gamma,
            beta,
            c,
            instance,
            instance_steps,
            train,
            ..
        } => {
            let splits = load_data(data, manifest)?;
            let clf = load_model_input(classifier, manifest, load_classifier)?;
            let ae = load_model_input(autoencoder, manifest, load_autoencoder)?;
            let cfg = train_config(&layers, "finetune_training", train)?;
            manifest.record_config("finetune_training", &cfg)?;
            manifest.seeds.insert("finetune_training".into(), cfg.seed);
            let mut bundle = ModelBundle::new(clf, ae)?;
            let report = match objective {
                ObjectiveArg::Palacio => finetune_palacio(&mut bundle, &splits, &cfg)?,
                ObjectiveArg::Tsinsight => {
                    let ts: TsInsightConfig = layers.section(
                        "tsinsight",
                        None,
                        vec![
                            ("gamma", flag(*gamma)),
                            ("beta", flag(*beta)),
                            ("c", flag(*c)),
                            ("instance", flag(*instance)),
                            ("instance_steps", flag(*instance_steps)),
                            (
                                "scope",
                                flag(scope.map(|s| match s {
                                    ScopeArg::Dataset => Scope::Dataset,
                                    ScopeArg::Instance => Scope::Instance,
                                })),
                            ),
                            ("mode", flag(auto_hyper.then_some(WeightMode::Auto))),
                        ],
                    )?;
                    let ts = TsInsightConfig {
                        gamma: ts.gamma.or((ts.mode == WeightMode::Manual).then_some(1.0)),
                        beta: ts.beta.or((ts.mode == WeightMode::Manual).then_some(0.001)),
                        ..ts
                    };
                    manifest.record_config("tsinsight", &ts)?;
                    let report = finetune_tsinsight(&mut bundle, &splits, &cfg, &ts)?;
                    if ts.scope == Scope::Instance {
                        let x = splits.test.inputs().index(ts.instance).unsqueeze();
                        let map = attribute_batch(
                            Method::Tsinsight,
                            Models::from(&bundle),
                            &x,
                            &[ts.instance as u64],
                            &MethodConfig::default(),
                        )?
                        .remove(0);
                        let checksum = bundle.classifier.params().checksum();
                        let path = out.path("map.csv");
                        out.files.push("map.json".into());
                        write_map(&map, &MethodConfig::default(), &checksum, &path)?;
                    }
                    report
                }
            };
            save_checkpoint(
                &Model::AutoEncoder(bundle.autoencoder.clone()),
                &out.checkpoint("autoencoder"),
            )?;
            manifest.summarize("stacked_test_accuracy", bundle.accuracy(&splits.test)?);
            write_report(&report, manifest, out)
        }
        Command::Attribute {
            data,
            classifier,
            autoencoder,
            method,
            split,
            index,
            count,
            method_flags,
            ..
        } => {
            let method: Method = method.parse()?;
            let splits = load_data(data, manifest)?;
            let clf = load_model_input(classifier, manifest, load_classifier)?;
            let ae = autoencoder
                .as_ref()
                .map(|p| load_model_input(p, manifest, load_autoencoder))
                .transpose()?;
            if method.needs_autoencoder() && ae.is_none() {
                return Err(Error::Contract(format!("{method} needs --autoencoder")));
            }
            let mcfg = method_config(&layers, method_flags)?;
            manifest.record_config("method", &mcfg)?;
            manifest.seeds.insert("method".into(), mcfg.noise_seed);
            let ds = splits.get(split_of(*split));
            if *count == 0 || index + count > ds.len() {
                return Err(Error::config(
                    "index",
                    format!(
                        "rows {index}..{} exceed the {} rows of the split",
                        index + count,
                        ds.len()
                    ),
                ));
            }
            let rows: Vec<usize> = (*index..index + count).collect();
            let (batch, _) = ds.gather(&rows);
            let ids: Vec<u64> = rows.iter().map(|&r| r as u64).collect();
            let models = Models {
                classifier: &clf,
                autoencoder: ae.as_ref(),
            };
            let maps = attribute_batch(method, models, &batch, &ids, &mcfg)?;
            let checksum = clf.params().checksum();
            for (row, map) in rows.iter().zip(&maps) {
                let stem = format!("maps/{method}_{}_{row}", split_of(*split));
                let path = out.path(&format!("{stem}.csv"));
                out.files.push(format!("{stem}.json"));
                write_map(map, &mcfg, &checksum, &path)?;
            }
            Ok(())
        }
        Command::SuppressEval {
            data,
            classifier,
            autoencoder,
            palacio_autoencoder,
            methods,
            fractions,
            runs,
            max_instances,
            fill,
            method_flags,
            common,
        } => {
            let methods = parse_methods(methods)?;
            let needs = |m: Method| methods.contains(&m);
            if needs(Method::Tsinsight) && autoencoder.is_none() {
                return Err(Error::Contract("tsinsight needs --autoencoder".into()));
            }
            if needs(Method::Palacio) && palacio_autoencoder.is_none() {
                return Err(Error::Contract(
                    "palacio needs --palacio-autoencoder".into(),
                ));
            }
            let mut cfg: SuppressionConfig = layers.section(
                "suppression",
                Some("seed"),
                vec![
                    ("fractions", flag(fractions.clone())),
                    ("runs", flag(*runs)),
                    ("max_instances", flag(*max_instances)),
                    ("workers", Some(Value::from(common.workers))),
                ],
            )?;
            let mcfg = method_config(&layers, method_flags)?;
            cfg.validate()?;
            mcfg.validate()?;
            let splits = load_data(data, manifest)?;
            if *fill == Some(FillArg::Mean) {
                cfg.fill = Fill::ChannelMean(channel_means(&splits));
            } else if *fill == Some(FillArg::Zero) {
                cfg.fill = Fill::Zero;
            }
            let clf = load_model_input(classifier, manifest, load_classifier)?;
            let ts_ae = autoencoder
                .as_ref()
                .map(|p| load_model_input(p, manifest, load_autoencoder))
                .transpose()?;
            let pal_ae = palacio_autoencoder
                .as_ref()
                .map(|p| load_model_input(p, manifest, load_autoencoder))
                .transpose()?;
            manifest.record_config("suppression", &cfg)?;
            manifest.record_config("method", &mcfg)?;
            manifest.seeds.insert("suppression".into(), cfg.seed);
            let mut curves = Vec::with_capacity(methods.len());
            for &m in &methods {
                let ae = match m {
                    Method::Palacio => pal_ae.as_ref(),
                    _ => ts_ae.as_ref(),
                };
                let models = Models {
                    classifier: &clf,
                    autoencoder: ae,
                };
                curves.extend(suppression_test(models, &[m], &splits.test, &cfg, &mcfg)?);
            }
            let n = cfg
                .max_instances
                .map_or(splits.test.len(), |m| m.min(splits.test.len()));
            manifest.summarize("unsuppressed_accuracy", clf.accuracy(&splits.test.head(n))?);
            write_curves(&curves, &out.path("curves.csv"))?;
            out.files.push("curves.json".into());
            Ok(())
        }
        Command::Spectrum {
            data,
            autoencoder,
            sample_count,
            bins,
            common,
        } => {
            let cfg: SpectrumConfig = layers.section(
                "spectrum",
                Some("seed"),
                vec![("sample_count", flag(*sample_count)), ("bins", flag(*bins))],
            )?;
            manifest.record_config("spectrum", &cfg)?;
            manifest.seeds.insert("spectrum".into(), cfg.seed);
            let splits = load_data(data, manifest)?;
            let ae = load_model_input(autoencoder, manifest, load_autoencoder)?;
            let jac = average_jacobian(
                &ae,
                &splits.test,
                cfg.sample_count,
                cfg.seed,
                common.workers,
            )?;
            let mut report = singular_spectrum(&jac)?;
            report.sample_count = cfg.sample_count;
            manifest.summarize("singular_values_below_1e-2", report.count_below(1e-2));
            manifest.summarize("converged", report.converged);
            write_spectrum_csv(&report, &out.path("spectrum.csv"))?;
            out.files.push("spectrum.json".into());
            write_histogram_csv(
                &histogram(&report.singular_values, cfg.bins)?,
                &out.path("histogram.csv"),
            )
        }
        Command::GradCheck { .. } => {
            let seed = layers.global_seed().unwrap_or(0);
            manifest.seeds.insert("grad_check".into(), seed);
            let mut rows: Vec<(String, GradCheckReport)> = primitive_checks(seed)?
                .into_iter()
                .map(|(k, r)| (format!("primitive:{k}"), r))
                .collect();
            rows.extend(
                objective_checks(seed)?
                    .into_iter()
                    .map(|(k, r)| (format!("objective:{k}"), r)),
            );
            let mut text =
                String::from("check,max_relative_error,worst_parameter,worst_index,pass\n");
            let mut failed = Vec::new();
            for (name, r) in &rows {
                let pass = r.max_relative_error < GRAD_TOLERANCE;
                if !pass {
                    failed.push(name.clone());
                }
                let (p, i) = r
                    .worst_coordinate
                    .as_ref()
                    .map_or((String::new(), String::new()), |c| {
                        (c.parameter.clone(), c.index.to_string())
                    });
                writeln!(text, "{name},{},{p},{i},{pass}", r.max_relative_error).unwrap();
            }
            let path = out.path("grad_check.csv");
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            manifest.summarize("checks", rows.len());
            manifest.summarize("failed", &failed);
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::CheckFailed(format!(
                    "relative error at or above {GRAD_TOLERANCE} in {}",
                    failed.join(", ")
                )))
            }
        }
    }
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    }
}

/// Loads a CSV dataset directory and z-normalizes it with train statistics.
fn load_data(dir: &Path, manifest: &mut RunManifest) -> Result<DatasetSplits> {
    for split in Split::ALL {
        manifest.record_input(&dir.join(format!("{split}.csv")))?;
    }
    Ok(normalize_splits(&load_csv_dataset(dir)?)?.0)
}

fn load_model_input<T>(
    path: &Path,
    manifest: &mut RunManifest,
    load: fn(&Path) -> Result<T>,
) -> Result<T> {
    let model = load(path)?;
    manifest.record_input(path)?;
    manifest.record_input(&path.with_extension("bin"))?;
    Ok(model)
}

fn train_config(layers: &Layers, section: &str, f: &TrainFlags) -> Result<TrainConfig> {
    let cfg: TrainConfig = layers.section(
        section,
        Some("seed"),
        vec![
            ("epochs", flag(f.epochs)),
            ("batch_size", flag(f.batch_size)),
            ("learning_rate", flag(f.learning_rate)),
            ("weight_decay", flag(f.weight_decay)),
        ],
    )?;
    cfg.validate()?;
    Ok(cfg)
}

fn method_config(layers: &Layers, f: &MethodFlags) -> Result<MethodConfig> {
    let cfg: MethodConfig = layers.section(
        "method",
        Some("noise_seed"),
        vec![
            ("ig_steps", flag(f.ig_steps)),
            ("sg_samples", flag(f.sg_samples)),
            ("sg_sigma", flag(f.sg_sigma)),
            ("occlusion_width", flag(f.occlusion_width)),
        ],
    )?;
    cfg.validate()?;
    Ok(cfg)
}

fn channel_means(splits: &DatasetSplits) -> Vec<f64> {
    let train = &splits.train;
    let (c, t) = (train.channels(), train.length());
    let mut sums = vec![0.0; c];
    for (i, v) in train.inputs().data().iter().enumerate() {
        sums[(i / t) % c] += v;
    }
    sums.iter().map(|s| s / (train.len() * t) as f64).collect()
}

fn write_report(report: &FitReport, manifest: &mut RunManifest, out: &mut Outputs) -> Result<()> {
    let path = out.path("report.json");
    std::fs::write(&path, report.without_timing().to_json()?).map_err(|e| Error::io(&path, e))?;
    let mut text = String::from("epoch,train_loss,val_metric\n");
    for (i, (l, v)) in report.train_loss.iter().zip(&report.val_metric).enumerate() {
        writeln!(text, "{},{l},{v}", i + 1).unwrap();
    }
    let path = out.path("history.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    manifest.summarize("test_metric", report.test_metric);
    manifest.summarize("best_epoch", report.best_epoch);
    manifest.summarize("train_wall_time_secs", report.wall_time_secs);
    Ok(())
}
