use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{make_folds, make_split, mix_seed, DatasetSplit, SplitRatios};
use crate::error::{Error, Result};
use crate::pipeline::{fit, Corpus, FitSpec};

pub const GRID_CSV_HEADER: &str =
    "split,lambda,threshold_pct,fold,val_acc,test_acc,test_f1,auc_healthy,auc_inner,auc_outer,wall_s";

/// λ × threshold-percentile grid evaluated under each train/test split with
/// k-fold cross-validation inside the training part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub splits: Vec<SplitRatios>,
    pub folds: usize,
    pub master_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambdas: vec![0.05, 0.2, 1.0],
            percentiles: vec![5.0, 10.0, 15.0],
            splits: vec![
                SplitRatios::train_test(0.8, 0.2),
                SplitRatios::train_test(0.7, 0.3),
                SplitRatios::train_test(0.6, 0.4),
            ],
            folds: 5,
            master_seed: 0,
        }
    }
}

fn split_label(r: &SplitRatios) -> String {
    format!("{:.0}/{:.0}", r.train * 100.0, r.test * 100.0)
}

/// Outcome of one grid cell: the fold with the best validation accuracy and
/// its test metrics. `error` is set (and metrics are NaN) if the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCellResult {
    pub split: String,
    pub lambda: f64,
    pub threshold_pct: f64,
    pub fold: usize,
    pub val_acc: f64,
    pub test_acc: f64,
    pub test_f1: f64,
    pub auc: [Option<f64>; 3],
    pub wall_s: f64,
    pub error: Option<String>,
}

impl GridCellResult {
    /// CSV row. `wall_s` is last so the deterministic prefix can be compared.
    pub fn csv_row(&self) -> String {
        let auc = |a: Option<f64>| a.map_or("NaN".to_string(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.split,
            self.lambda,
            self.threshold_pct,
            self.fold,
            self.val_acc,
            self.test_acc,
            self.test_f1,
            auc(self.auc[0]),
            auc(self.auc[1]),
            auc(self.auc[2]),
            self.wall_s
        )
    }
}

struct FoldRun {
    val_acc: f64,
    test_acc: f64,
    test_f1: f64,
    auc: [Option<f64>; 3],
}

/// Runs every cell with `jobs` worker threads. Results depend only on the
/// corpus, `base` and `grid`, never on `jobs` or scheduling. Rows come back
/// grouped by split and ranked by test accuracy within each split.
pub fn grid_search(corpus: &Corpus, base: &FitSpec, grid: &GridSpec, jobs: usize) -> Result<Vec<GridCellResult>> {
    if grid.lambdas.is_empty() || grid.percentiles.is_empty() || grid.splits.is_empty() {
        return Err(Error::config("grid", "every grid axis needs at least one value"));
    }
    let labels = corpus.labels();
    let mut plans: Vec<(DatasetSplit, Vec<Vec<usize>>)> = Vec::new();
    for (s, ratios) in grid.splits.iter().enumerate() {
        let split = make_split(&labels, *ratios, mix_seed(grid.master_seed, s as u64))?;
        let folds = make_folds(&split.train, &labels, grid.folds, mix_seed(grid.master_seed, 1000 + s as u64))?;
        plans.push((split, folds));
    }
    let mut cells = Vec::new();
    for s in 0..grid.splits.len() {
        for &lambda in &grid.lambdas {
            for &pct in &grid.percentiles {
                cells.push((s, lambda, pct));
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..grid.folds).map(move |f| (c, f))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let runs: Vec<(Result<FoldRun>, f64)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, f)| {
                let start = Instant::now();
                let (s, lambda, pct) = cells[c];
                let (split, folds) = &plans[s];
                let fold_split = DatasetSplit {
                    train: folds
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != f)
                        .flat_map(|(_, idx)| idx.iter().copied())
                        .collect(),
                    validation: folds[f].clone(),
                    test: split.test.clone(),
                    seed: split.seed,
                };
                let mut spec = base.clone();
                spec.loss.lambda = lambda;
                spec.loss.threshold_percentile = pct;
                spec.seed = mix_seed(mix_seed(grid.master_seed, c as u64), f as u64);
                let run = fit(corpus, &fold_split, &spec).map(|r| FoldRun {
                    val_acc: r.validation_accuracy.unwrap_or(f64::NAN),
                    test_acc: r.test.accuracy,
                    test_f1: r.test.f1,
                    auc: [r.test.auc[0], r.test.auc[1], r.test.auc[2]],
                });
                (run, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(cells.len());
    for (c, &(s, lambda, threshold_pct)) in cells.iter().enumerate() {
        let fold_runs = &runs[c * grid.folds..(c + 1) * grid.folds];
        let wall_s = fold_runs.iter().map(|(_, w)| w).sum();
        let mut best: Option<(usize, &FoldRun)> = None;
        let mut error = None;
        for (f, (run, _)) in fold_runs.iter().enumerate() {
            match run {
                Ok(r) if best.is_none_or(|(_, b)| r.val_acc > b.val_acc) => best = Some((f, r)),
                Ok(_) => {}
                Err(e) => error = Some(format!("fold {f}: {e}")),
            }
        }
        let row = match best {
            Some((fold, r)) if error.is_none() => GridCellResult {
                split: split_label(&grid.splits[s]),
                lambda,
                threshold_pct,
                fold,
                val_acc: r.val_acc,
                test_acc: r.test_acc,
                test_f1: r.test_f1,
                auc: r.auc,
                wall_s,
                error: None,
            },
            _ => GridCellResult {
                split: split_label(&grid.splits[s]),
                lambda,
                threshold_pct,
                fold: 0,
                val_acc: f64::NAN,
                test_acc: f64::NAN,
                test_f1: f64::NAN,
                auc: [None; 3],
                wall_s,
                error: error.or_else(|| Some("no fold completed".into())),
            },
        };
        rows.push((s, row));
    }
    rows.sort_by(|(sa, a), (sb, b)| sa.cmp(sb).then(b.test_acc.total_cmp(&a.test_acc)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_grid_csv(rows: &[GridCellResult], path: &Path) -> Result<()> {
    let mut s = String::from(GRID_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
