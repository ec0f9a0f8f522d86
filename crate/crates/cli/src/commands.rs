use std::fs;
use std::path::Path;

use lenet_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use lenet_core::curves::{curves_csv, parse_curves_csv, render_svg};
use lenet_core::data::{
    gen_synthetic_tree, load_dataset, read_pgm, to_model_input, Dataset, Split,
};
use lenet_core::metrics::{binarize, ConfusionMatrix, MetricMode, MetricReport};
use lenet_core::{evaluate, train_with_observer, EpochRecord, Error, LeNetModel, LossKind};
use serde::{Deserialize, Serialize};

use crate::config::{positive_indices, Overrides, RunConfig};
use crate::error::CliError;
use crate::{EvaluateArgs, ExportArgs, GenArgs, PredictArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.lnck";
pub const CURVES_CSV: &str = "curves.csv";
pub const CURVES_SVG: &str = "curves.svg";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_ECHO: &str = "config.echo.json";

/// Contents of `metrics.json`: one evaluation pass in all three metric views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub split: Split,
    pub samples: usize,
    pub loss_kind: String,
    pub loss: f64,
    pub class_names: Vec<String>,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_name: String,
    pub class_index: usize,
    pub probs: Vec<f64>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e).into())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn metrics_file(
    model: &LeNetModel,
    ds: &Dataset,
    loss: &LossKind,
    positive: &[usize],
    mode: MetricMode,
) -> Result<MetricsFile, CliError> {
    let eval = evaluate(model, ds, loss)?;
    let report = MetricReport::build(&eval.confusion, positive, Some(&ds.class_names), mode)?;
    Ok(MetricsFile {
        split: ds.split,
        samples: ds.len(),
        loss_kind: loss.name().to_string(),
        loss: eval.mean_loss,
        class_names: ds.class_names.clone(),
        report,
    })
}

fn load_splits(root: &Path) -> Result<(Dataset, Dataset), CliError> {
    let tr = load_dataset(root, Split::Train)?;
    let va = load_dataset(root, Split::Validation)?;
    if tr.class_names != va.class_names {
        return Err(CliError::data(format!(
            "train classes {:?} differ from validation classes {:?}",
            tr.class_names, va.class_names
        )));
    }
    if tr.num_classes() < 2 {
        return Err(CliError::data(format!(
            "need at least 2 classes, found {:?}",
            tr.class_names
        )));
    }
    Ok((tr, va))
}

pub fn cmd_train(args: TrainArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = RunConfig::load(
        args.config.as_deref(),
        Overrides {
            data: args.data,
            out: args.out,
            seed: args.seed,
            loss: args.loss,
            gamma: args.gamma,
            epochs: args.epochs,
            learning_rate: args.lr,
            batch_size: args.batch_size,
            threads,
        },
    )?;
    cfg.validate()?;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::config("no dataset root: pass --data or set \"data\""))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::config("no output directory: pass --out or set \"out\""))?;
    if out.exists() && !out.is_dir() {
        return Err(CliError::config(format!(
            "{} is not a directory",
            out.display()
        )));
    }

    let (tr, va) = load_splits(&data)?;
    let k = tr.num_classes();
    let train_cfg = cfg.train_config(&tr.labels(), k)?;
    if train_cfg.batch_size > tr.len() {
        return Err(CliError::config(format!(
            "batch_size {} exceeds the {} training samples",
            train_cfg.batch_size,
            tr.len()
        )));
    }
    let positive = positive_indices(cfg.positive_classes.as_deref(), &tr.class_names)?;
    // Rejects an empty or all-class positive set before anything is written.
    binarize(&ConfusionMatrix::new(k), &positive)?;

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join(CONFIG_ECHO), to_json(&cfg))?;

    log::info!(
        "training on {} samples ({} validation), {} classes {:?}",
        tr.len(),
        va.len(),
        k,
        tr.class_names
    );
    let mut model = LeNetModel::init(k, train_cfg.seed)?;
    let mut records: Vec<EpochRecord> = Vec::new();
    let result = train_with_observer(&mut model, &tr, &va, &train_cfg, |r| {
        records.push(r.clone())
    });

    let ckpt = Checkpoint {
        model,
        class_names: tr.class_names.clone(),
        config: Some(train_cfg.clone()),
        final_record: records.last().cloned(),
    };
    save_checkpoint(&out.join(CHECKPOINT_FILE), &ckpt)?;
    // Render from the CSV text so export-curves reproduces the same SVG.
    let csv = curves_csv(&records);
    let plotted = if records.is_empty() {
        Vec::new()
    } else {
        parse_curves_csv(&csv)?
    };
    write(&out.join(CURVES_CSV), &csv)?;
    write(&out.join(CURVES_SVG), render_svg(&plotted))?;
    result?;

    let metrics = metrics_file(
        &ckpt.model,
        &va,
        &train_cfg.loss,
        &positive,
        cfg.metrics_mode,
    )?;
    write(&out.join(METRICS_FILE), to_json(&metrics))?;
    if let Some(last) = records.last() {
        log::info!(
            "done: train acc {:.4}, val acc {:.4}; artifacts in {}",
            last.train_acc,
            last.val_acc,
            out.display()
        );
    }
    Ok(())
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(
        args.config.as_deref(),
        Overrides {
            data: args.data,
            ..Overrides::default()
        },
    )?;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::config("no dataset root: pass --data or set \"data\""))?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let ds = load_dataset(&data, args.split)?;
    if !ckpt.class_names.is_empty() && ckpt.class_names != ds.class_names {
        return Err(CliError::data(format!(
            "checkpoint classes {:?} differ from dataset classes {:?}",
            ckpt.class_names, ds.class_names
        )));
    }
    if ds.num_classes() != ckpt.model.num_classes() {
        return Err(CliError::data(format!(
            "checkpoint has {} classes, dataset has {}",
            ckpt.model.num_classes(),
            ds.num_classes()
        )));
    }
    let loss = ckpt
        .config
        .as_ref()
        .map(|c| c.loss.clone())
        .unwrap_or(LossKind::CrossEntropy);
    let positive = positive_indices(cfg.positive_classes.as_deref(), &ds.class_names)?;
    let metrics = metrics_file(&ckpt.model, &ds, &loss, &positive, cfg.metrics_mode)?;
    print!("{}", to_json(&metrics));
    Ok(())
}

pub fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let img = read_pgm(&args.image)?;
    let x = to_model_input(&img)?.into_reshape(&[1, 1, 32, 32])?;
    let (probs, _) = ckpt.model.forward(&x)?;
    let class_index = probs.argmax_rows()?[0];
    let class_name = ckpt
        .class_names
        .get(class_index)
        .cloned()
        .unwrap_or_else(|| class_index.to_string());
    let out = Prediction {
        class_name,
        class_index,
        probs: probs.into_data(),
    };
    print!("{}", to_json(&out));
    Ok(())
}

pub fn cmd_gen_synthetic(args: GenArgs) -> Result<(), CliError> {
    if args.n_per_class == 0 {
        return Err(CliError::config("n_per_class must be at least 1"));
    }
    gen_synthetic_tree(&args.out, args.n_per_class, args.seed)?;
    log::info!(
        "wrote {} per class to {}",
        args.n_per_class,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_export_curves(args: ExportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.curves)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.curves.display())))?;
    let records = parse_curves_csv(&text)?;
    write(&args.out, render_svg(&records))
}
