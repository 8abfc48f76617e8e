use serde::{Deserialize, Serialize};

use super::PhysicsFeatures;
use crate::dataio::FaultClass;
use crate::dsp::percentile_threshold;
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, softmax_rows, Tensor};

/// How the penalty decides which class was predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Piecewise penalty on the argmax class. Contributes to the loss value
    /// only; it has no gradient with respect to the parameters.
    HardArgmax,
    /// Each class's hinge weighted by its softmax probability, so the penalty
    /// is differentiable and steers training.
    SoftProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsLossConfig {
    pub lambda: f64,
    pub t_bpfo: f64,
    pub t_bpfi: f64,
    pub threshold_percentile: f64,
    pub gating: PenaltyMode,
}

impl Default for PhysicsLossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            t_bpfo: 0.0,
            t_bpfi: 0.0,
            threshold_percentile: 10.0,
            gating: PenaltyMode::SoftProbability,
        }
    }
}

impl PhysicsLossConfig {
    /// Sets both thresholds to the configured percentile of the given
    /// (normalized, training-split) amplitudes, each over its own frequency.
    pub fn fit_thresholds(&mut self, train: &[PhysicsFeatures]) -> Result<()> {
        let outer: Vec<f64> = train.iter().map(|f| f.a_bpfo).collect();
        let inner: Vec<f64> = train.iter().map(|f| f.a_bpfi).collect();
        self.t_bpfo = percentile_threshold(&outer, self.threshold_percentile)?;
        self.t_bpfi = percentile_threshold(&inner, self.threshold_percentile)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.t_bpfo >= 0.0 && self.t_bpfi >= 0.0) {
            return Err(Error::InvalidInput("thresholds must be nonnegative".into()));
        }
        Ok(())
    }

    /// Hinge terms `[healthy, inner, outer]`: how far each class's
    /// characteristic amplitude falls short of its threshold.
    fn shortfalls(&self, feats: &PhysicsFeatures) -> [f64; 3] {
        [
            0.0,
            (self.t_bpfi - feats.a_bpfi).max(0.0),
            (self.t_bpfo - feats.a_bpfo).max(0.0),
        ]
    }
}

/// The piecewise penalty on a predicted class.
pub fn hard_penalty(pred: FaultClass, feats: &PhysicsFeatures, cfg: &PhysicsLossConfig) -> f64 {
    match pred {
        FaultClass::OuterFault if feats.a_bpfo < cfg.t_bpfo => cfg.t_bpfo - feats.a_bpfo,
        FaultClass::InnerFault if feats.a_bpfi < cfg.t_bpfi => cfg.t_bpfi - feats.a_bpfi,
        _ => 0.0,
    }
}

pub fn soft_penalty(probs: &[f64], feats: &PhysicsFeatures, cfg: &PhysicsLossConfig) -> f64 {
    let s = cfg.shortfalls(feats);
    probs.iter().zip(s).map(|(p, h)| p * h).sum()
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Penalty for one sample under `cfg.gating`.
pub fn physics_penalty(probs: &[f64], feats: &PhysicsFeatures, cfg: &PhysicsLossConfig) -> f64 {
    match cfg.gating {
        PenaltyMode::HardArgmax => {
            let pred = FaultClass::from_index(argmax(probs)).unwrap_or(FaultClass::Healthy);
            hard_penalty(pred, feats, cfg)
        }
        PenaltyMode::SoftProbability => soft_penalty(probs, feats, cfg),
    }
}

/// A fault prediction whose characteristic amplitude is below threshold.
pub fn is_sub_threshold_fault(pred: FaultClass, feats: &PhysicsFeatures, cfg: &PhysicsLossConfig) -> bool {
    hard_penalty(pred, feats, cfg) > 0.0
}

#[derive(Debug, Clone)]
pub struct PhysicsLoss {
    pub total: f64,
    pub cross_entropy: f64,
    pub mean_penalty: f64,
    /// d total / d logits, `[N × 3]`.
    pub grad: Tensor,
}

/// `CE + λ · mean(P_i)` over a batch.
pub fn physics_informed_loss(
    logits: &Tensor,
    labels: &[usize],
    feats: &[PhysicsFeatures],
    cfg: &PhysicsLossConfig,
) -> Result<PhysicsLoss> {
    let (cross_entropy, mut grad) = softmax_cross_entropy(logits, labels)?;
    let n = labels.len();
    if feats.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![feats.len()],
        });
    }
    if logits.shape()[1] != FaultClass::COUNT {
        return Err(Error::ShapeMismatch {
            expected: vec![n, FaultClass::COUNT],
            actual: logits.shape().to_vec(),
        });
    }
    let probs = softmax_rows(logits)?;
    let mut penalty_sum = 0.0;
    for (i, f) in feats.iter().enumerate() {
        let p = probs.row(i);
        penalty_sum += physics_penalty(p, f, cfg);
        if cfg.gating == PenaltyMode::SoftProbability && cfg.lambda != 0.0 {
            // d(Σ_k p_k h_k)/dz_j = p_j (h_j − Σ_k p_k h_k)
            let h = cfg.shortfalls(f);
            let mean: f64 = p.iter().zip(h).map(|(a, b)| a * b).sum();
            let scale = cfg.lambda / n as f64;
            for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
                *g += scale * p[j] * (h[j] - mean);
            }
        }
    }
    let mean_penalty = penalty_sum / n as f64;
    Ok(PhysicsLoss {
        total: cross_entropy + cfg.lambda * mean_penalty,
        cross_entropy,
        mean_penalty,
        grad,
    })
}
