//! Experiment configuration as a TOML document.
//!
//! Every table except `model.geometry` has defaults. All randomness derives
//! from the top-level `seed`. Relative paths resolve against the working
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{
    make_split, mix_seed, DatasetSplit, read_segments, segment_stream, CorpusSpec, FaultClass, Recording, SignalSegment, SplitRatios,
    DEFAULT_CURRENT_NOISE_STD,
};
use crate::dsp::BandpassSpec;
use crate::error::{Error, Result};
use crate::eval::GridSpec;
use crate::geometry::{BearingGeometry, OperatingCondition};
use crate::model::{ArchConfig, PenaltyMode, PhysicsLossConfig};
use crate::pipeline::{Corpus, FitSpec, TrainConfig};
use crate::transfer::TlStrategy;

/// Seed streams derived from the master seed.
pub const DATA_STREAM: u64 = 0xDA7A;
pub const TARGET_STREAM: u64 = 0x7A26;
pub const SPLIT_STREAM: u64 = 0x5917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Checkpoint whose training `train` continues.
    #[serde(default)]
    pub resume: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub tl: TlConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub window: usize,
    pub stride: usize,
    pub split: SplitRatios,
    /// Pre-segmented corpus file; takes precedence over the other sources.
    pub segments: Option<PathBuf>,
    /// Raw three-channel CSV recordings, one fault class each.
    pub recordings: Vec<RecordingSource>,
    pub synthesis: Option<SynthesisConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            window: 10_000,
            stride: 5_000,
            split: SplitRatios::new(0.6, 0.2, 0.2),
            segments: None,
            recordings: Vec::new(),
            synthesis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingSource {
    pub path: PathBuf,
    pub class: FaultClass,
    pub sample_rate_hz: f64,
}

/// Generator settings; geometry and operating condition come from the
/// enclosing model or target section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub impact_decay_s: f64,
    pub snr_db: f64,
    pub jitter_pct: f64,
    pub current_noise_std: f64,
    pub healthy_interference: bool,
    pub per_class: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let d = CorpusSpec::desk();
        Self {
            sample_rate_hz: d.sample_rate_hz,
            carrier_hz: d.carrier_hz,
            impact_decay_s: d.impact_decay_s,
            snr_db: d.snr_db,
            jitter_pct: d.jitter_pct,
            current_noise_std: DEFAULT_CURRENT_NOISE_STD,
            healthy_interference: false,
            per_class: d.per_class,
        }
    }
}

impl SynthesisConfig {
    pub fn corpus_spec(
        &self,
        geometry: BearingGeometry,
        condition: &OperatingCondition,
        window: usize,
        seed: u64,
    ) -> CorpusSpec {
        CorpusSpec {
            geometry,
            condition: condition.clone(),
            sample_rate_hz: self.sample_rate_hz,
            carrier_hz: self.carrier_hz,
            impact_decay_s: self.impact_decay_s,
            snr_db: self.snr_db,
            jitter_pct: self.jitter_pct,
            current_noise_std: self.current_noise_std,
            healthy_interference: self.healthy_interference,
            per_class: self.per_class,
            window,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda: f64,
    pub threshold_percentile: f64,
    pub gating: PenaltyMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        let d = PhysicsLossConfig::default();
        Self {
            lambda: d.lambda,
            threshold_percentile: d.threshold_percentile,
            gating: d.gating,
        }
    }
}

impl LossConfig {
    pub fn physics(&self) -> PhysicsLossConfig {
        PhysicsLossConfig {
            lambda: self.lambda,
            threshold_percentile: self.threshold_percentile,
            gating: self.gating,
            ..PhysicsLossConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub geometry: Option<BearingGeometry>,
    pub condition: OperatingCondition,
    pub band: BandpassSpec,
    pub loss: LossConfig,
    /// Defaults to the desk architecture at `data.window`.
    pub arch: Option<ArchConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            condition: OperatingCondition::paderborn_baseline(),
            band: BandpassSpec::default(),
            loss: LossConfig::default(),
            arch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub condition: OperatingCondition,
    #[serde(default)]
    pub segments: Option<PathBuf>,
    #[serde(default)]
    pub recordings: Vec<RecordingSource>,
    #[serde(default)]
    pub synthesis: Option<SynthesisConfig>,
    #[serde(default = "default_split")]
    pub split: SplitRatios,
}

fn default_split() -> SplitRatios {
    SplitRatios::new(0.6, 0.2, 0.2)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlConfig {
    pub strategy: Option<TlStrategy>,
    pub source_checkpoint: Option<PathBuf>,
    pub target: Option<TargetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub alpha: f64,
    pub n_runs: usize,
    /// Accuracy files compared by the t-test, one value per line.
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    /// Model whose fusion vectors are exported.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_runs: 10,
            a: None,
            b: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub splits: Vec<SplitRatios>,
    pub folds: usize,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            lambdas: g.lambdas,
            percentiles: g.percentiles,
            splits: g.splits,
            folds: g.folds,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            Error::config(field_of(&message).unwrap_or_else(|| "<document>".into()), message)
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    pub fn geometry(&self) -> Result<BearingGeometry> {
        let g = self
            .model
            .geometry
            .ok_or_else(|| Error::config("model.geometry", "required field is missing"))?;
        g.validate().map_err(|e| Error::config("model.geometry", e.to_string()))?;
        Ok(g)
    }

    pub fn arch(&self) -> ArchConfig {
        self.model.arch.clone().unwrap_or_else(|| ArchConfig::desk(self.data.window))
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            lambdas: self.grid.lambdas.clone(),
            percentiles: self.grid.percentiles.clone(),
            splits: self.grid.splits.clone(),
            folds: self.grid.folds,
            master_seed: self.seed,
        }
    }

    pub fn fit_spec(&self) -> Result<FitSpec> {
        Ok(FitSpec {
            arch: self.arch(),
            loss: self.model.loss.physics(),
            train: self.train,
            geometry: self.geometry()?,
            band: self.model.band,
            seed: self.seed,
        })
    }

    /// Checks fields shared by every command.
    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.model
            .condition
            .validate()
            .map_err(|e| Error::config("model.condition", e.to_string()))?;
        if self.data.window == 0 || self.data.stride == 0 {
            return Err(Error::config("data.window", "window and stride must be positive"));
        }
        let arch = self.arch();
        if arch.window_len != self.data.window {
            return Err(Error::config(
                "model.arch.window_len",
                format!("{} differs from data.window {}", arch.window_len, self.data.window),
            ));
        }
        let l = &self.model.loss;
        if !(l.lambda >= 0.0 && l.lambda.is_finite()) {
            return Err(Error::config("model.loss.lambda", "must be nonnegative"));
        }
        if !(l.threshold_percentile > 0.0 && l.threshold_percentile < 100.0) {
            return Err(Error::config("model.loss.threshold_percentile", "must lie in (0, 100)"));
        }
        self.train.validate()?;
        if !(self.eval.alpha > 0.0 && self.eval.alpha < 1.0) {
            return Err(Error::config("eval.alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Segments of the source corpus, from whichever data source is set.
    pub fn source_segments(&self) -> Result<Vec<SignalSegment>> {
        let geometry = self.geometry()?;
        load_segments(
            self.data.segments.as_deref(),
            &self.data.recordings,
            self.data.synthesis.as_ref(),
            &self.model.condition,
            geometry,
            self.data.window,
            self.data.stride,
            mix_seed(self.seed, DATA_STREAM),
            "data",
        )
    }

    pub fn source_corpus(&self) -> Result<Corpus> {
        let segments = self.source_segments()?;
        check_sample_rate(&segments, &self.model.band, "data")?;
        Corpus::new(segments, &self.geometry()?, &self.model.condition, &self.model.band)
    }

    /// Stratified split of a corpus under the master seed.
    pub fn split_for(&self, corpus: &Corpus, ratios: SplitRatios) -> Result<DatasetSplit> {
        make_split(&corpus.labels(), ratios, mix_seed(self.seed, SPLIT_STREAM))
    }

    pub fn target(&self) -> Result<&TargetConfig> {
        self.tl
            .target
            .as_ref()
            .ok_or_else(|| Error::config("tl.target", "a target section is required"))
    }

    pub fn target_segments(&self) -> Result<Vec<SignalSegment>> {
        let t = self.target()?;
        load_segments(
            t.segments.as_deref(),
            &t.recordings,
            t.synthesis.as_ref(),
            &t.condition,
            self.geometry()?,
            self.data.window,
            self.data.stride,
            mix_seed(self.seed, TARGET_STREAM),
            "tl.target",
        )
    }

    pub fn target_corpus(&self) -> Result<Corpus> {
        let t = self.target()?;
        let segments = self.target_segments()?;
        check_sample_rate(&segments, &self.model.band, "tl.target")?;
        Corpus::new(segments, &self.geometry()?, &t.condition, &self.model.band)
    }
}

/// The key named in a serde message such as "missing field `geometry`".
fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

fn check_sample_rate(segments: &[SignalSegment], band: &BandpassSpec, section: &str) -> Result<()> {
    if let Some(seg) = segments.first() {
        band.validate(seg.sample_rate_hz)
            .map_err(|e| Error::config("model.band", format!("{e} (sample rate of {section})")))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn load_segments(
    segments: Option<&Path>,
    recordings: &[RecordingSource],
    synthesis: Option<&SynthesisConfig>,
    condition: &OperatingCondition,
    geometry: BearingGeometry,
    window: usize,
    stride: usize,
    seed: u64,
    section: &str,
) -> Result<Vec<SignalSegment>> {
    if let Some(path) = segments {
        let file = read_segments(path)?;
        if file.condition != condition.label {
            return Err(Error::config(
                format!("{section}.segments"),
                format!(
                    "file was recorded under `{}` but the configured condition is `{}`",
                    file.condition, condition.label
                ),
            ));
        }
        return Ok(file.segments);
    }
    if !recordings.is_empty() {
        let mut out = Vec::new();
        for r in recordings {
            let rec = Recording::read_csv(&r.path, r.sample_rate_hz)?;
            out.extend(segment_stream(&rec, window, stride, r.class, &condition.label)?);
        }
        return Ok(out);
    }
    if let Some(s) = synthesis {
        let spec = s.corpus_spec(geometry, condition, window, seed);
        return spec
            .generate()
            .map_err(|e| Error::config(format!("{section}.synthesis"), e.to_string()));
    }
    Err(Error::config(section, "set one of `segments`, `recordings` or `synthesis`"))
}
