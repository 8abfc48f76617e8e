use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![truth.len()],
                actual: vec![predicted.len()],
            });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        for label in [truth, predicted] {
            if label >= self.classes {
                return Err(Error::InvalidLabel {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest counts per class and their unweighted (macro) means.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("empty confusion matrix".into()));
    }
    let k = cm.classes();
    let mut zero_division = false;
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let fp = (0..k).map(|t| cm.get(t, c)).sum::<u64>() - tp;
            let fn_ = (0..k).map(|p| cm.get(c, p)).sum::<u64>() - tp;
            let tn = total - tp - fp - fn_;
            let precision = ratio(tp, tp + fp, &mut zero_division);
            let recall = ratio(tp, tp + fn_, &mut zero_division);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                zero_division = true;
                0.0
            };
            ClassMetrics { tp, fp, fn_, tn, precision, recall, f1 }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        zero_division,
    })
}

/// Area under the ROC curve by trapezoidal integration over every distinct
/// score threshold. Tied scores move the curve diagonally, which equals
/// counting tied positive/negative pairs as one half.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![scores.len()],
            actual: vec![positive.len()],
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!("{n_pos} positives and {n_neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (n_pos as f64 * n_neg as f64))
}

/// One-vs-rest AUC per class; `None` where a class is absent or universal.
pub fn roc_auc(probabilities: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Vec<Option<f64>>> {
    if probabilities.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len()],
            actual: vec![probabilities.len()],
        });
    }
    (0..classes)
        .map(|c| {
            let scores: Vec<f64> = probabilities
                .iter()
                .map(|p| p.get(c).copied().ok_or_else(|| Error::InvalidShape("score row too short".into())))
                .collect::<Result<_>>()?;
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            match binary_auc(&scores, &pos) {
                Ok(a) => Ok(Some(a)),
                Err(Error::UndefinedAuc(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}
