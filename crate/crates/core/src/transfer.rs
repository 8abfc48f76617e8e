//! Transfer-learning strategies as freeze plans, plus fine-tuning and
//! zero-shot evaluation of a source model on a target condition.
//!
//! | strategy | trainable                              | head reinit |
//! |----------|----------------------------------------|-------------|
//! | `tsft`   | fusion head                            | no          |
//! | `las`    | everything except each branch's `conv0`| no          |
//! | `hfr`    | fusion head                            | final layer |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{mix_seed, DatasetSplit};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::model::{ArchConfig, MultimodalNet, HEAD};
use crate::nn::{Layer, Sequential};
use crate::pipeline::{evaluate, train_network, Corpus, TrainConfig, TrainOutcome, TrainedModel, SHUFFLE_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TlStrategy {
    Tsft,
    Las,
    Hfr,
}

impl TlStrategy {
    pub const ALL: [TlStrategy; 3] = [TlStrategy::Tsft, TlStrategy::Las, TlStrategy::Hfr];

    pub fn name(self) -> &'static str {
        match self {
            TlStrategy::Tsft => "tsft",
            TlStrategy::Las => "las",
            TlStrategy::Hfr => "hfr",
        }
    }

    pub fn reinit_head(self) -> bool {
        self == TlStrategy::Hfr
    }
}

impl fmt::Display for TlStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TlStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsft" => Ok(TlStrategy::Tsft),
            "las" => Ok(TlStrategy::Las),
            "hfr" => Ok(TlStrategy::Hfr),
            other => Err(Error::config("tl.strategy", format!("unknown strategy `{other}` (tsft|las|hfr)"))),
        }
    }
}

/// Trainable flag for every parameter tensor, in store order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezePlan {
    pub strategy: TlStrategy,
    pub entries: Vec<(String, bool)>,
    /// Tensors re-initialized before fine-tuning.
    pub reinit: Vec<String>,
}

impl FreezePlan {
    pub fn is_trainable(&self, name: &str) -> Option<bool> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }

    pub fn trainable(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|(_, t)| *t).map(|(n, _)| n.as_str())
    }

    pub fn frozen(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|(_, t)| !*t).map(|(n, _)| n.as_str())
    }

    /// Sets every tensor's flag. Names must match the store one-to-one.
    pub fn apply(&self, net: &mut MultimodalNet) -> Result<()> {
        if self.entries.len() != net.store().len() {
            return Err(Error::Plan(format!(
                "plan lists {} tensors, model has {}",
                self.entries.len(),
                net.store().len()
            )));
        }
        for (name, trainable) in &self.entries {
            net.store_mut().set_trainable(name, *trainable)?;
        }
        Ok(())
    }
}

fn first_conv_params(stack: &Sequential, net: &MultimodalNet) -> Vec<String> {
    stack
        .layers()
        .iter()
        .find(|l| matches!(l, Layer::Conv1d { .. }))
        .map(|l| l.params().into_iter().map(|id| net.store().get(id).name.clone()).collect())
        .unwrap_or_default()
}

/// Freeze plan for `strategy` on the topology of `arch`.
pub fn build_freeze_plan(arch: &ArchConfig, strategy: TlStrategy) -> Result<FreezePlan> {
    let net = MultimodalNet::new(arch)?;
    plan_for(&net, strategy)
}

fn plan_for(net: &MultimodalNet, strategy: TlStrategy) -> Result<FreezePlan> {
    let head_prefix = format!("{HEAD}.");
    let first_convs: Vec<String> = (0..3).flat_map(|c| first_conv_params(net.signal_branch(c), net)).collect();
    let entries = net
        .store()
        .iter()
        .map(|p| {
            let trainable = match strategy {
                TlStrategy::Tsft | TlStrategy::Hfr => p.name.starts_with(&head_prefix),
                TlStrategy::Las => !first_convs.contains(&p.name),
            };
            (p.name.clone(), trainable)
        })
        .collect();
    let reinit = if strategy.reinit_head() {
        net.final_classifier()
    } else {
        Vec::new()
    };
    Ok(FreezePlan {
        strategy,
        entries,
        reinit,
    })
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    pub model: TrainedModel,
    pub plan: FreezePlan,
    pub trainable_parameters: usize,
    pub outcome: TrainOutcome,
    pub report: EvalReport,
}

/// Adapts `source` to a target corpus. Source preprocessing is kept; loss
/// thresholds are refitted on the target training split; optimizer moments
/// start fresh. Only tensors the plan marks trainable change.
pub fn finetune(
    source: &TrainedModel,
    target: &Corpus,
    split: &DatasetSplit,
    strategy: TlStrategy,
    train: &TrainConfig,
    seed: u64,
) -> Result<FinetuneResult> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InvalidInput("target split has an empty train or test part".into()));
    }
    let mut model = source.clone();
    let plan = plan_for(&model.net, strategy)?;
    plan.apply(&mut model.net)?;
    model.net.store_mut().reset_optimizer();
    if strategy.reinit_head() {
        model.net.reinit_final_classifier(mix_seed(seed, 0x4F52))?;
    }
    let pre = model.meta.preprocessor;
    let train_set = pre.prepare(target, &split.train)?;
    let validation = pre.prepare(target, &split.validation)?;
    let test = pre.prepare(target, &split.test)?;
    let mut loss = model.meta.loss;
    loss.fit_thresholds(&train_set.features)?;
    let outcome = train_network(
        &mut model.net,
        &train_set,
        Some(&validation),
        &loss,
        train,
        mix_seed(seed, SHUFFLE_STREAM),
    )?;
    let report = evaluate(&model.net, &test, &loss, seed)?;
    model.meta.loss = loss;
    model.meta.train = *train;
    model.meta.condition = target.condition.clone();
    model.meta.seed = seed;
    model.meta.test_report = Some(report.clone());
    Ok(FinetuneResult {
        trainable_parameters: model.net.store().trainable_parameter_count(),
        model,
        plan,
        outcome,
        report,
    })
}

/// Evaluates `source` unchanged on the listed target segments, using the
/// source model's standardization, normalization and thresholds.
pub fn zero_shot_eval(source: &TrainedModel, target: &Corpus, indices: &[usize]) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("empty target set".into()));
    }
    let data = source.meta.preprocessor.prepare(target, indices)?;
    source.evaluate(&data)
}
