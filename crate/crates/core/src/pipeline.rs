//! Split-aware preprocessing, the training loop and evaluation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{mix_seed, standardize, ChannelStats, DatasetSplit, FaultClass, SignalSegment};
use crate::dsp::BandpassSpec;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::geometry::{BearingGeometry, OperatingCondition};
use crate::model::{
    extract_physics_features, is_sub_threshold_fault, physics_informed_loss,
    ArchConfig, ModelInput, MultimodalNet, PhysicsFeatures, PhysicsLossConfig, PhysicsNormalizer,
};
use crate::nn::{softmax_rows, Adam, Checkpoint, EarlyStopping};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    /// Zero skips optimization entirely (evaluate-only resume).
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 32,
            patience: 10,
            max_epochs: crate::nn::MAX_EPOCHS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Segments recorded under one operating condition, with their raw physics
/// features.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub segments: Vec<SignalSegment>,
    pub features: Vec<PhysicsFeatures>,
    pub condition: OperatingCondition,
}

impl Corpus {
    pub fn new(
        segments: Vec<SignalSegment>,
        geometry: &BearingGeometry,
        condition: &OperatingCondition,
        band: &BandpassSpec,
    ) -> Result<Self> {
        let features = segments
            .par_iter()
            .map(|s| extract_physics_features(s, geometry, condition, band))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            segments,
            features,
            condition: condition.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn labels(&self) -> Vec<FaultClass> {
        self.segments.iter().map(|s| s.label).collect()
    }
}

/// Standardization and feature scaling fitted on a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub stats: ChannelStats,
    pub normalizer: PhysicsNormalizer,
}

/// Network-ready inputs with labels and normalized physics features.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub indices: Vec<usize>,
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<usize>,
    pub features: Vec<PhysicsFeatures>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl Preprocessor {
    pub fn fit(corpus: &Corpus, train: &[usize]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidInput("empty training split".into()));
        }
        Ok(Self {
            stats: ChannelStats::from_segments(train.iter().map(|&i| &corpus.segments[i]))?,
            normalizer: PhysicsNormalizer::fit(train.iter().map(|&i| &corpus.features[i])),
        })
    }

    pub fn prepare(&self, corpus: &Corpus, indices: &[usize]) -> Result<Prepared> {
        let mut out = Prepared {
            indices: indices.to_vec(),
            inputs: Vec::with_capacity(indices.len()),
            labels: Vec::with_capacity(indices.len()),
            features: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            let seg = corpus
                .segments
                .get(i)
                .ok_or_else(|| Error::InvalidInput(format!("segment index {i} out of range")))?;
            let feats = self.normalizer.apply(&corpus.features[i]);
            out.inputs.push(ModelInput::new(&standardize(seg, &self.stats)?, &feats));
            out.labels.push(seg.label.index());
            out.features.push(feats);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_cross_entropy: f64,
    pub train_penalty: f64,
    /// Monitored loss: validation when a validation split exists, else training.
    pub monitor_loss: f64,
    pub monitor_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("epoch,train_loss,train_ce,train_penalty,monitor_loss,monitor_accuracy\n");
        for r in &self.history {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_cross_entropy, r.train_penalty, r.monitor_loss, r.monitor_accuracy
            ));
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

const EVAL_BATCH: usize = 64;

/// Mean loss and accuracy over a prepared set; records nothing.
pub fn measure(net: &MultimodalNet, data: &Prepared, loss: &PhysicsLossConfig) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let (mut total, mut correct) = (0.0, 0usize);
    for start in (0..data.len()).step_by(EVAL_BATCH) {
        let end = (start + EVAL_BATCH).min(data.len());
        let batch: Vec<&ModelInput> = data.inputs[start..end].iter().collect();
        let logits = net.logits(&batch)?;
        let l = physics_informed_loss(&logits, &data.labels[start..end], &data.features[start..end], loss)?;
        total += l.total * (end - start) as f64;
        for (i, &y) in data.labels[start..end].iter().enumerate() {
            if crate::model::argmax(logits.row(i)) == y {
                correct += 1;
            }
        }
    }
    Ok((total / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Mini-batch Adam with early stopping on the monitored loss. The weights of
/// the best epoch are restored before returning.
pub fn train_network(
    net: &mut MultimodalNet,
    train: &Prepared,
    validation: Option<&Prepared>,
    loss: &PhysicsLossConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    let validation = validation.filter(|v| !v.is_empty());
    let adam = Adam::with_lr(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.max_epochs);
    let mut best = net.store().values();
    let mut history = Vec::new();

    while !stopper.should_stop() {
        let epoch = history.len() + 1;
        order.shuffle(&mut rng);
        let (mut sum, mut sum_ce, mut sum_pen) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&ModelInput> = chunk.iter().map(|&i| &train.inputs[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let feats: Vec<PhysicsFeatures> = chunk.iter().map(|&i| train.features[i]).collect();
            let logits = net.forward_batch(&batch)?;
            let l = physics_informed_loss(&logits, &labels, &feats, loss)?;
            if !l.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {b} (cross-entropy {}, penalty {})",
                    l.cross_entropy, l.mean_penalty
                )));
            }
            let grads = net.backward(&l.grad)?;
            if !grads.is_finite() {
                return Err(Error::Numerical(format!("non-finite gradient at epoch {epoch}, batch {b}")));
            }
            adam.step(net.store_mut(), &grads)?;
            let w = chunk.len() as f64;
            sum += l.total * w;
            sum_ce += l.cross_entropy * w;
            sum_pen += l.mean_penalty * w;
        }
        let n = train.len() as f64;
        let (monitor_loss, monitor_accuracy) = measure(net, validation.unwrap_or(train), loss)?;
        if !monitor_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite monitored loss at epoch {epoch}")));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: sum / n,
            train_cross_entropy: sum_ce / n,
            train_penalty: sum_pen / n,
            monitor_loss,
            monitor_accuracy,
        });
        if stopper.observe(monitor_loss) {
            best = net.store().values();
        }
    }
    net.store_mut().restore_values(best)?;
    Ok(TrainOutcome {
        best_epoch: stopper.best_epoch(),
        stopped_early: history.len() < cfg.max_epochs,
        history,
    })
}

/// Per-sample class probabilities.
pub fn predict_all(net: &MultimodalNet, data: &Prepared) -> Result<Vec<Vec<f64>>> {
    let mut probs = Vec::with_capacity(data.len());
    for start in (0..data.len()).step_by(EVAL_BATCH) {
        let end = (start + EVAL_BATCH).min(data.len());
        let batch: Vec<&ModelInput> = data.inputs[start..end].iter().collect();
        let logits = net.logits(&batch)?;
        let p = softmax_rows(&logits)?;
        probs.extend((0..p.shape()[0]).map(|i| p.row(i).to_vec()));
    }
    Ok(probs)
}

pub fn evaluate(net: &MultimodalNet, data: &Prepared, loss: &PhysicsLossConfig, seed: u64) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty set".into()));
    }
    let probs = predict_all(net, data)?;
    let violations = probs
        .iter()
        .zip(&data.features)
        .filter(|(p, f)| {
            let pred = FaultClass::from_index(crate::model::argmax(p)).unwrap_or(FaultClass::Healthy);
            is_sub_threshold_fault(pred, f, loss)
        })
        .count();
    EvalReport::from_predictions(&data.labels, &probs, violations, seed)
}

/// Everything needed to apply a trained network to new segments.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: MultimodalNet,
    pub meta: ModelMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch: ArchConfig,
    pub preprocessor: Preprocessor,
    pub loss: PhysicsLossConfig,
    pub train: TrainConfig,
    pub geometry: BearingGeometry,
    pub condition: OperatingCondition,
    pub band: BandpassSpec,
    pub seed: u64,
    pub test_report: Option<EvalReport>,
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let metadata = serde_json::to_string(&self.meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Checkpoint {
            arch_hash: self.meta.arch.hash(),
            metadata,
            store: self.net.store().clone(),
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let meta: ModelMeta =
            serde_json::from_str(&ckpt.metadata).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if meta.arch.hash() != ckpt.arch_hash {
            return Err(Error::Checkpoint(format!(
                "architecture hash mismatch: metadata {} vs header {}",
                meta.arch.hash(),
                ckpt.arch_hash
            )));
        }
        let mut net = MultimodalNet::new(&meta.arch)?;
        net.load_store(ckpt.store)?;
        Ok(Self { net, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path, expected_arch: Option<&ArchConfig>) -> Result<Self> {
        let hash = expected_arch.map(ArchConfig::hash);
        Self::from_checkpoint(Checkpoint::load(path, hash.as_deref())?)
    }

    /// Applies the stored preprocessing to every segment of `corpus`.
    pub fn prepare(&self, corpus: &Corpus) -> Result<Prepared> {
        let all: Vec<usize> = (0..corpus.len()).collect();
        self.meta.preprocessor.prepare(corpus, &all)
    }

    pub fn evaluate(&self, data: &Prepared) -> Result<EvalReport> {
        evaluate(&self.net, data, &self.meta.loss, self.meta.seed)
    }
}

/// Settings for one end-to-end training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub arch: ArchConfig,
    pub loss: PhysicsLossConfig,
    pub train: TrainConfig,
    pub geometry: BearingGeometry,
    pub band: BandpassSpec,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: TrainedModel,
    pub outcome: TrainOutcome,
    pub test: EvalReport,
    pub validation_accuracy: Option<f64>,
}

/// Seed stream for initialization, derived from the run seed.
pub const INIT_STREAM: u64 = 1;
/// Seed stream for batch shuffling.
pub const SHUFFLE_STREAM: u64 = 2;

/// Continues training a saved model on `split` with its stored preprocessing,
/// thresholds and optimizer moments, then re-evaluates on the test split.
/// With `train.max_epochs == 0` the weights are untouched.
pub fn resume(model: &TrainedModel, corpus: &Corpus, split: &DatasetSplit, train: &TrainConfig) -> Result<FitResult> {
    let mut model = model.clone();
    let pre = model.meta.preprocessor;
    let train_set = pre.prepare(corpus, &split.train)?;
    let validation = pre.prepare(corpus, &split.validation)?;
    let test = pre.prepare(corpus, &split.test)?;
    let loss = model.meta.loss;
    let seed = model.meta.seed;
    let outcome = train_network(
        &mut model.net,
        &train_set,
        Some(&validation),
        &loss,
        train,
        mix_seed(seed, SHUFFLE_STREAM ^ 0x5245),
    )?;
    let validation_accuracy = if validation.is_empty() {
        None
    } else {
        Some(measure(&model.net, &validation, &loss)?.1)
    };
    let report = evaluate(&model.net, &test, &loss, seed)?;
    model.meta.train = *train;
    model.meta.test_report = Some(report.clone());
    Ok(FitResult {
        model,
        outcome,
        test: report,
        validation_accuracy,
    })
}

/// Fit preprocessing and thresholds on the training split, train with early
/// stopping on the validation split, then evaluate on the test split.
pub fn fit(corpus: &Corpus, split: &DatasetSplit, spec: &FitSpec) -> Result<FitResult> {
    let pre = Preprocessor::fit(corpus, &split.train)?;
    let train = pre.prepare(corpus, &split.train)?;
    let validation = pre.prepare(corpus, &split.validation)?;
    let test = pre.prepare(corpus, &split.test)?;
    let mut loss = spec.loss;
    loss.fit_thresholds(&train.features)?;
    let arch = spec.arch.clone().with_seed(mix_seed(spec.seed, INIT_STREAM));
    let mut net = MultimodalNet::new(&arch)?;
    let outcome = train_network(
        &mut net,
        &train,
        Some(&validation),
        &loss,
        &spec.train,
        mix_seed(spec.seed, SHUFFLE_STREAM),
    )?;
    let validation_accuracy = if validation.is_empty() {
        None
    } else {
        Some(measure(&net, &validation, &loss)?.1)
    };
    let report = evaluate(&net, &test, &loss, spec.seed)?;
    let model = TrainedModel {
        net,
        meta: ModelMeta {
            arch,
            preprocessor: pre,
            loss,
            train: spec.train,
            geometry: spec.geometry,
            condition: corpus.condition.clone(),
            band: spec.band,
            seed: spec.seed,
            test_report: Some(report.clone()),
        },
    };
    Ok(FitResult {
        model,
        outcome,
        test: report,
        validation_accuracy,
    })
}
