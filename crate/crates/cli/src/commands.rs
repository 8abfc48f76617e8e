use std::fmt::Write as _;
use std::path::Path;

use bearing_pinn::config::{ExperimentConfig, SynthesisConfig, DATA_STREAM, TARGET_STREAM};
use bearing_pinn::dataio::{class_counts, mix_seed, write_segments, FaultClass, SignalSegment};
use bearing_pinn::eval::{grid_search, independent_t_test, write_grid_csv, EvalReport, RunSummary, SIGNIFICANCE_LEVEL};
use bearing_pinn::geometry::OperatingCondition;
use bearing_pinn::model::export_embeddings as write_embeddings;
use bearing_pinn::pipeline::{fit, resume, FitResult, TrainedModel};
use bearing_pinn::transfer::{finetune as adapt, zero_shot_eval};
use bearing_pinn::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::rundir::RunDir;
use crate::Failure;

type Outcome = Result<(), Failure>;

fn required<'a, T>(value: &'a Option<T>, field: &str, why: &str) -> Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| Failure::Core(Error::config(field, why)))
}

fn counts_json(segments: &[SignalSegment]) -> Value {
    let c = class_counts(segments.iter().map(|s| &s.label));
    let mut m = serde_json::Map::new();
    for class in FaultClass::ALL {
        m.insert(class.name().to_string(), json!(c[class.index()]));
    }
    Value::Object(m)
}

fn synthesize(
    cfg: &ExperimentConfig,
    synth: &SynthesisConfig,
    condition: &OperatingCondition,
    seed: u64,
    section: &str,
) -> Result<Vec<SignalSegment>, Failure> {
    let spec = synth.corpus_spec(cfg.geometry()?, condition, cfg.data.window, seed);
    spec.generate()
        .map_err(|e| Failure::Core(Error::config(format!("{section}.synthesis"), e.to_string())))
}

pub fn generate(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let synth = required(&cfg.data.synthesis, "data.synthesis", "generate needs a synthesis section")?;
    let mut jobs = vec![(
        "source",
        "segments.bseg",
        synthesize(cfg, synth, &cfg.model.condition, mix_seed(cfg.seed, DATA_STREAM), "data")?,
    )];
    if let Some(t) = &cfg.tl.target {
        if let Some(ts) = &t.synthesis {
            let segs = synthesize(cfg, ts, &t.condition, mix_seed(cfg.seed, TARGET_STREAM), "tl.target")?;
            jobs.push(("target", "target_segments.bseg", segs));
        }
    }
    let mut files = Vec::new();
    let mut text = String::new();
    for (role, name, segments) in &jobs {
        let path = dir.file(name);
        write_segments(segments, &path)?;
        let bytes = std::fs::read(&path).map_err(|e| Failure::Core(Error::Io { path: path.clone(), source: e }))?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        let first = &segments[0];
        let counts = counts_json(segments);
        writeln!(text, "{role}: {name}, {} records, counts {counts}", segments.len()).unwrap();
        files.push(json!({
            "role": role,
            "file": name,
            "records": segments.len(),
            "counts": counts,
            "condition": first.condition,
            "window": first.window_len(),
            "sample_rate_hz": first.sample_rate_hz,
            "sha256": digest,
        }));
    }
    let manifest = json!({ "command": "generate", "seed": cfg.seed, "files": files });
    let body = serde_json::to_string_pretty(&manifest).expect("JSON values always serialize");
    dir.write("manifest.json", &(body + "\n"))?;
    dir.report(&manifest, &text)
}

fn report_text(title: &str, cfg: &ExperimentConfig, report: &EvalReport) -> String {
    format!("{title}\nseed: {}\n\n{}", cfg.seed, report.to_text())
}

fn fit_json(cfg: &ExperimentConfig, r: &FitResult) -> Value {
    json!({
        "command": "train",
        "seed": cfg.seed,
        "resumed_from": cfg.resume,
        "epochs_run": r.outcome.history.len(),
        "best_epoch": r.outcome.best_epoch,
        "stopped_early": r.outcome.stopped_early,
        "validation_accuracy": r.validation_accuracy,
        "loss": r.model.meta.loss,
        "trainable_parameters": r.model.net.store().trainable_parameter_count(),
        "test": r.test,
    })
}

pub fn train(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let corpus = cfg.source_corpus()?;
    let split = cfg.split_for(&corpus, cfg.data.split)?;
    let result = match &cfg.resume {
        Some(path) => resume(&TrainedModel::load(path, Some(&cfg.arch()))?, &corpus, &split, &cfg.train)?,
        None => fit(&corpus, &split, &cfg.fit_spec()?)?,
    };
    result.model.save(&dir.file("model.ckpt"))?;
    result.outcome.write_curve_csv(&dir.file("training_curve.csv"))?;
    dir.report(&fit_json(cfg, &result), &report_text("train: test split", cfg, &result.test))
}

fn load_source(cfg: &ExperimentConfig) -> Result<TrainedModel, Failure> {
    let path = required(&cfg.tl.source_checkpoint, "tl.source_checkpoint", "a source checkpoint is required")?;
    Ok(TrainedModel::load(path, Some(&cfg.arch()))?)
}

pub fn zero_shot(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let source = load_source(cfg)?;
    let target = cfg.target_corpus()?;
    let split = cfg.split_for(&target, cfg.target()?.split)?;
    let report = zero_shot_eval(&source, &target, &split.test)?;
    let json = json!({
        "command": "zero-shot",
        "seed": cfg.seed,
        "source_condition": source.meta.condition.label,
        "target_condition": target.condition.label,
        "test": report,
    });
    dir.report(&json, &report_text("zero-shot: target test split", cfg, &report))
}

pub fn finetune(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let strategy = *required(&cfg.tl.strategy, "tl.strategy", "a strategy is required (tsft|las|hfr)")?;
    let source = load_source(cfg)?;
    let target = cfg.target_corpus()?;
    let split = cfg.split_for(&target, cfg.target()?.split)?;
    let r = adapt(&source, &target, &split, strategy, &cfg.train, cfg.seed)?;
    r.model.save(&dir.file("model.ckpt"))?;
    r.outcome.write_curve_csv(&dir.file("training_curve.csv"))?;
    let json = json!({
        "command": "finetune",
        "seed": cfg.seed,
        "strategy": strategy,
        "trainable_parameters": r.trainable_parameters,
        "trainable": r.plan.trainable().collect::<Vec<_>>(),
        "frozen": r.plan.frozen().collect::<Vec<_>>(),
        "reinitialized": r.plan.reinit,
        "epochs_run": r.outcome.history.len(),
        "best_epoch": r.outcome.best_epoch,
        "test": r.report,
    });
    let title = format!("finetune ({strategy}): target test split, {} trainable parameters", r.trainable_parameters);
    dir.report(&json, &report_text(&title, cfg, &r.report))
}

pub fn gridsearch(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let corpus = cfg.source_corpus()?;
    let rows = grid_search(&corpus, &cfg.fit_spec()?, &cfg.grid_spec(), cfg.grid.jobs)?;
    write_grid_csv(&rows, &dir.file("grid_results.csv"))?;
    let mut text = String::from("split   lambda  pct   fold  val_acc  test_acc  test_f1\n");
    for r in &rows {
        writeln!(
            text,
            "{:<7} {:<7} {:<5} {:<5} {:<8.4} {:<9.4} {:.4}{}",
            r.split,
            r.lambda,
            r.threshold_pct,
            r.fold,
            r.val_acc,
            r.test_acc,
            r.test_f1,
            r.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default()
        )
        .unwrap();
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let json = json!({ "command": "gridsearch", "seed": cfg.seed, "cells": rows.len(), "failed": failed, "rows": rows });
    dir.report(&json, &text)
}

fn read_values(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Core(Error::Io { path: path.to_path_buf(), source: e }))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Failure::Core(Error::Parse {
                record: i + 1,
                message: format!("{}: `{line}` is not a number", path.display()),
            })
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn ttest(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let a_path = required(&cfg.eval.a, "eval.a", "first accuracy file is required")?;
    let b_path = required(&cfg.eval.b, "eval.b", "second accuracy file is required")?;
    let (a, b) = (read_values(a_path)?, read_values(b_path)?);
    let test = independent_t_test(&a, &b)?;
    let sa = RunSummary::new(a, Vec::new(), cfg.eval.alpha)?;
    let sb = RunSummary::new(b, Vec::new(), cfg.eval.alpha)?;
    let json = json!({
        "command": "ttest",
        "significance_level": SIGNIFICANCE_LEVEL,
        "a": { "file": a_path, "summary": sa },
        "b": { "file": b_path, "summary": sb },
        "test": test,
    });
    let level = (1.0 - cfg.eval.alpha) * 100.0;
    let text = format!(
        "a: mean {:.4} ± {:.4} ({level:.0}% CI, n={})\nb: mean {:.4} ± {:.4} ({level:.0}% CI, n={})\n\
         Welch t = {:.4}, df = {:.2}, p = {:.3e}\n{}\n",
        sa.mean,
        sa.ci_halfwidth,
        sa.values.len(),
        sb.mean,
        sb.ci_halfwidth,
        sb.values.len(),
        test.t_statistic,
        test.degrees_of_freedom,
        test.p_value,
        if test.significant {
            format!("statistically significant (p < {SIGNIFICANCE_LEVEL})")
        } else {
            format!("not significant at p < {SIGNIFICANCE_LEVEL}")
        }
    );
    dir.report(&json, &text)
}

pub fn export_embeddings(cfg: &ExperimentConfig, dir: &RunDir) -> Outcome {
    let path = required(&cfg.eval.checkpoint, "eval.checkpoint", "a model checkpoint is required")?;
    let model = TrainedModel::load(path, Some(&cfg.arch()))?;
    let corpus = cfg.source_corpus()?;
    let data = model.prepare(&corpus)?;
    let rows = data.indices.iter().zip(&data.inputs).map(|(&i, x)| {
        let seg = &corpus.segments[i];
        (i, seg.label, seg.condition.as_str(), x)
    });
    let n = write_embeddings(&model.net, rows, &dir.file("embeddings.csv"))?;
    let width = model.net.fusion_width();
    let json = json!({ "command": "export-embeddings", "rows": n, "width": width, "checkpoint": path });
    dir.report(&json, &format!("embeddings.csv: {n} rows × {width} fusion features\n"))
}
