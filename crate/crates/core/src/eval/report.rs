use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{compute_metrics, mean_ci, roc_auc, ConfusionMatrix};
use crate::dataio::FaultClass;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest AUC per class; `None` when a class is missing from the set.
    pub auc: Vec<Option<f64>>,
    pub zero_division: bool,
    /// Fault predictions whose characteristic amplitude sits below threshold.
    pub sub_threshold_faults: usize,
    pub n_samples: usize,
    pub ci_halfwidth: f64,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
}

impl EvalReport {
    pub fn from_predictions(
        labels: &[usize],
        probabilities: &[Vec<f64>],
        sub_threshold_faults: usize,
        seed: u64,
    ) -> Result<Self> {
        let predicted: Vec<usize> = probabilities.iter().map(|p| crate::model::argmax(p)).collect();
        let confusion = ConfusionMatrix::from_predictions(FaultClass::COUNT, labels, &predicted)?;
        let m = compute_metrics(&confusion)?;
        Ok(Self {
            accuracy: m.accuracy,
            precision: m.macro_precision,
            recall: m.macro_recall,
            f1: m.macro_f1,
            auc: roc_auc(probabilities, labels, FaultClass::COUNT)?,
            zero_division: m.zero_division,
            sub_threshold_faults,
            n_samples: labels.len(),
            confusion,
            ci_halfwidth: 0.0,
            n_runs: 1,
            seeds: vec![seed],
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let auc = |a: Option<f64>| a.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "samples          {}", self.n_samples);
        let _ = writeln!(s, "accuracy         {:.4}", self.accuracy);
        let _ = writeln!(s, "precision (macro) {:.4}", self.precision);
        let _ = writeln!(s, "recall (macro)   {:.4}", self.recall);
        let _ = writeln!(s, "f1 (macro)       {:.4}", self.f1);
        for (c, a) in FaultClass::ALL.iter().zip(&self.auc) {
            let _ = writeln!(s, "auc {:<12} {}", c.name(), auc(*a));
        }
        let _ = writeln!(s, "sub-threshold fault predictions {}", self.sub_threshold_faults);
        let _ = writeln!(s, "confusion (rows true, cols predicted):");
        for (c, row) in FaultClass::ALL.iter().zip(self.confusion.rows()) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            let _ = writeln!(s, "  {:<12}{}", c.name(), cells.join(""));
        }
        s
    }
}

/// A metric measured over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub alpha: f64,
}

impl RunSummary {
    pub fn new(values: Vec<f64>, seeds: Vec<u64>, alpha: f64) -> Result<Self> {
        let (mean, ci_halfwidth) = if values.len() >= 2 {
            mean_ci(&values, alpha)?
        } else {
            (values.iter().sum::<f64>() / values.len().max(1) as f64, 0.0)
        };
        Ok(Self {
            values,
            seeds,
            mean,
            ci_halfwidth,
            alpha,
        })
    }
}
