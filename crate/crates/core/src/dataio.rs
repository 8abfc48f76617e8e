//! Segments, standardization, stratified splitting, the segment file format
//! and the synthetic bearing-signal generator.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bpfi, bpfo, shaft_frequency, BearingGeometry, OperatingCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultClass {
    #[serde(rename = "healthy")]
    Healthy,
    #[serde(rename = "inner", alias = "inner_fault")]
    InnerFault,
    #[serde(rename = "outer", alias = "outer_fault")]
    OuterFault,
}

impl FaultClass {
    pub const ALL: [FaultClass; 3] = [FaultClass::Healthy, FaultClass::InnerFault, FaultClass::OuterFault];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::Healthy => "healthy",
            FaultClass::InnerFault => "inner",
            FaultClass::OuterFault => "outer",
        }
    }
}

impl std::fmt::Display for FaultClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FaultClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "healthy" | "normal" => Ok(FaultClass::Healthy),
            "inner" | "inner_fault" | "innerfault" => Ok(FaultClass::InnerFault),
            "outer" | "outer_fault" | "outerfault" => Ok(FaultClass::OuterFault),
            other => Err(Error::InvalidInput(format!("unknown fault class `{other}`"))),
        }
    }
}

/// Channel order used by statistics and files.
pub const CHANNELS: [&str; 3] = ["vibration", "current_a", "current_b"];

/// One fixed-length window of vibration and two motor-current channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSegment {
    pub vibration: Vec<f32>,
    pub current_a: Vec<f32>,
    pub current_b: Vec<f32>,
    pub label: FaultClass,
    /// Operating-condition label, e.g. `N15_M07_F10`.
    pub condition: String,
    pub sample_rate_hz: f64,
}

impl SignalSegment {
    pub fn new(
        vibration: Vec<f32>,
        current_a: Vec<f32>,
        current_b: Vec<f32>,
        label: FaultClass,
        condition: impl Into<String>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let seg = Self {
            vibration,
            current_a,
            current_b,
            label,
            condition: condition.into(),
            sample_rate_hz,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vibration.len();
        if n == 0 || self.current_a.len() != n || self.current_b.len() != n {
            return Err(Error::InvalidInput(format!(
                "channel lengths differ or are empty: {} / {} / {}",
                n,
                self.current_a.len(),
                self.current_b.len()
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.vibration.len()
    }

    pub fn channel(&self, idx: usize) -> &[f32] {
        match idx {
            0 => &self.vibration,
            1 => &self.current_a,
            _ => &self.current_b,
        }
    }

    fn channel_mut(&mut self, idx: usize) -> &mut Vec<f32> {
        match idx {
            0 => &mut self.vibration,
            1 => &mut self.current_a,
            _ => &mut self.current_b,
        }
    }

    pub fn vibration_f64(&self) -> Vec<f64> {
        self.vibration.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Continuous multichannel recording prior to windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub vibration: Vec<f32>,
    pub current_a: Vec<f32>,
    pub current_b: Vec<f32>,
    pub sample_rate_hz: f64,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.vibration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vibration.is_empty()
    }

    /// Reads a CSV with columns `vib,ia,ib`, one row per sample. A header row
    /// is skipped if its first field is not numeric.
    pub fn read_csv(path: &Path, sample_rate_hz: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rec = Recording {
            vibration: Vec::new(),
            current_a: Vec::new(),
            current_b: Vec::new(),
            sample_rate_hz,
        };
        for (row, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if row == 0 && fields[0].parse::<f32>().is_err() {
                continue;
            }
            if fields.len() != 3 {
                return Err(Error::Parse {
                    record: row,
                    message: format!("expected 3 columns, found {}", fields.len()),
                });
            }
            let mut vals = [0f32; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse().map_err(|_| Error::Parse {
                    record: row,
                    message: format!("not a number: `{f}`"),
                })?;
            }
            rec.vibration.push(vals[0]);
            rec.current_a.push(vals[1]);
            rec.current_b.push(vals[2]);
        }
        Ok(rec)
    }
}

/// Sliding-window segmentation: segment `i` covers `[i·stride, i·stride + window)`.
pub fn segment_stream(
    raw: &Recording,
    window: usize,
    stride: usize,
    label: FaultClass,
    condition: &str,
) -> Result<Vec<SignalSegment>> {
    let len = raw.len();
    if raw.current_a.len() != len || raw.current_b.len() != len {
        return Err(Error::InvalidInput("recording channels differ in length".into()));
    }
    if window == 0 || stride == 0 {
        return Err(Error::InvalidInput("window and stride must be positive".into()));
    }
    if window > len {
        return Err(Error::InvalidInput(format!(
            "window {window} exceeds recording length {len}"
        )));
    }
    let count = (len - window) / stride + 1;
    (0..count)
        .map(|i| {
            let r = i * stride..i * stride + window;
            SignalSegment::new(
                raw.vibration[r.clone()].to_vec(),
                raw.current_a[r.clone()].to_vec(),
                raw.current_b[r].to_vec(),
                label,
                condition,
                raw.sample_rate_hz,
            )
        })
        .collect()
}

/// Per-channel mean and (population) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    pub fn from_segments<'a>(segments: impl IntoIterator<Item = &'a SignalSegment>) -> Result<Self> {
        let mut sum = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        let mut n = 0usize;
        let segs: Vec<&SignalSegment> = segments.into_iter().collect();
        for seg in &segs {
            for (c, s) in sum.iter_mut().enumerate() {
                *s += seg.channel(c).iter().map(|&v| f64::from(v)).sum::<f64>();
            }
            n += seg.window_len();
        }
        if n == 0 {
            return Err(Error::InvalidInput("no samples to compute statistics".into()));
        }
        let mean = sum.map(|s| s / n as f64);
        for seg in &segs {
            for (c, q) in sq.iter_mut().enumerate() {
                *q += seg
                    .channel(c)
                    .iter()
                    .map(|&v| (f64::from(v) - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        let std = sq.map(|q| (q / n as f64).sqrt());
        let stats = Self { mean, std };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        for (c, s) in self.std.iter().enumerate() {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::ConstantChannel {
                    channel: CHANNELS[c].to_string(),
                });
            }
        }
        Ok(())
    }
}

/// `(x − μ) / σ` per channel.
pub fn standardize(seg: &SignalSegment, stats: &ChannelStats) -> Result<SignalSegment> {
    stats.validate()?;
    let mut out = seg.clone();
    for c in 0..3 {
        let (mu, sigma) = (stats.mean[c], stats.std[c]);
        for v in out.channel_mut(c).iter_mut() {
            *v = ((f64::from(*v) - mu) / sigma) as f32;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    #[serde(default)]
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }

    /// Two-way train/test split with no validation part.
    pub fn train_test(train: f64, test: f64) -> Self {
        Self::new(train, 0.0, test)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.train <= 0.0 || self.test <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "split ratios must be nonnegative with positive train and test: {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("split ratios {parts:?} do not sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

fn by_class(indices: impl IntoIterator<Item = usize>, labels: &[FaultClass]) -> BTreeMap<FaultClass, Vec<usize>> {
    let mut groups: BTreeMap<FaultClass, Vec<usize>> = BTreeMap::new();
    for i in indices {
        groups.entry(labels[i]).or_default().push(i);
    }
    groups
}

/// Stratified train/validation/test split. Per class, the test and validation
/// counts are `round(n · ratio)` and the remainder trains.
pub fn make_split(labels: &[FaultClass], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    let parts = if ratios.validation > 0.0 { 3 } else { 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (class, mut idx) in by_class(0..labels.len(), labels) {
        let n = idx.len();
        if n < parts {
            return Err(Error::Stratification(format!(
                "class {class} has {n} segments, fewer than {parts} parts"
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = ((n as f64 * ratios.test).round() as usize).clamp(1, n - 1);
        let n_val = if parts == 3 {
            ((n as f64 * ratios.validation).round() as usize).clamp(1, n - n_test - 1)
        } else {
            0
        };
        split.test.extend_from_slice(&idx[..n_test]);
        split.validation.extend_from_slice(&idx[n_test..n_test + n_val]);
        split.train.extend_from_slice(&idx[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified k-fold partition of `train_indices` (global indices into `labels`).
pub fn make_folds(train_indices: &[usize], labels: &[FaultClass], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    if let Some(&bad) = train_indices.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::InvalidInput(format!("index {bad} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (class, mut idx) in by_class(train_indices.iter().copied(), labels) {
        if idx.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} segments, fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.iter().enumerate() {
            folds[(offset + j) % k].push(*i);
        }
        offset = (offset + idx.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Parameters of the synthetic bearing-signal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub class: FaultClass,
    pub geometry: BearingGeometry,
    pub condition: OperatingCondition,
    pub sample_rate_hz: f64,
    /// Structural resonance excited by each impact.
    pub carrier_hz: f64,
    pub impact_decay_s: f64,
    pub snr_db: f64,
    /// Uniform timing jitter of each impact, in percent of the impact period.
    pub jitter_pct: f64,
    /// Standard deviation of additive noise on both current channels.
    #[serde(default = "default_current_noise")]
    pub current_noise_std: f64,
    /// Healthy segments carry aperiodic impulsive interference.
    #[serde(default)]
    pub healthy_interference: bool,
    pub seed: u64,
}

fn default_current_noise() -> f64 {
    DEFAULT_CURRENT_NOISE_STD
}

/// Mains frequency of the motor supply.
pub const MAINS_HZ: f64 = 50.0;
const SIDEBAND_AMPLITUDE: f64 = 0.08;
pub const DEFAULT_CURRENT_NOISE_STD: f64 = 0.1;

impl SynthesisSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.condition.validate()?;
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidSpec("sample_rate_hz must be positive".into()));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz < nyquist) {
            return Err(Error::InvalidSpec(format!(
                "carrier {} Hz must lie in (0, {nyquist})",
                self.carrier_hz
            )));
        }
        if !(self.impact_decay_s > 0.0) {
            return Err(Error::InvalidSpec("impact_decay_s must be positive".into()));
        }
        if !(0.0..10.0).contains(&self.jitter_pct) {
            return Err(Error::InvalidSpec(format!(
                "jitter_pct {} outside [0, 10)",
                self.jitter_pct
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidSpec("snr_db must be finite".into()));
        }
        if !(self.current_noise_std >= 0.0 && self.current_noise_std.is_finite()) {
            return Err(Error::InvalidSpec("current_noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent per-segment seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exponentially decaying resonance bursts repeating at `rate_hz` with jitter.
/// `amplitude(t_k)` scales the burst starting at `t_k`.
fn impact_train<R: Rng>(
    rng: &mut R,
    n: usize,
    fs: f64,
    rate_hz: f64,
    spec: &SynthesisSpec,
    amplitude: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let period = 1.0 / rate_hz;
    let tau = spec.impact_decay_s;
    let reach = (8.0 * tau * fs).ceil() as usize;
    let duration = n as f64 / fs;
    let jitter = spec.jitter_pct / 100.0 * period;
    let mut out = vec![0.0; n];
    let mut t_nominal = -rng.random::<f64>() * period;
    while t_nominal < -8.0 * tau {
        t_nominal += period;
    }
    while t_nominal < duration {
        let t_k = t_nominal + if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
        let a = amplitude(t_k);
        let first = (t_k * fs).ceil().max(0.0) as usize;
        for (i, o) in out.iter_mut().enumerate().skip(first).take(reach) {
            let dt = i as f64 / fs - t_k;
            *o += a * (-dt / tau).exp() * (2.0 * PI * spec.carrier_hz * dt).sin();
        }
        t_nominal += period;
    }
    out
}

/// Resonance bursts at Poisson arrival times with mean rate `rate_hz`:
/// impulsive, but without a line at any defect frequency.
fn random_impacts<R: Rng>(rng: &mut R, n: usize, fs: f64, rate_hz: f64, spec: &SynthesisSpec) -> Vec<f64> {
    let tau = spec.impact_decay_s;
    let reach = (8.0 * tau * fs).ceil() as usize;
    let duration = n as f64 / fs;
    let mut out = vec![0.0; n];
    let mut t = -8.0 * tau;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / rate_hz;
        if t >= duration {
            break;
        }
        let first = (t * fs).ceil().max(0.0) as usize;
        for (i, o) in out.iter_mut().enumerate().skip(first).take(reach) {
            let dt = i as f64 / fs - t;
            *o += (-dt / tau).exp() * (2.0 * PI * spec.carrier_hz * dt).sin();
        }
    }
    out
}

fn synthesize_one(spec: &SynthesisSpec, window: usize, index: usize) -> Result<SignalSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, index as u64));
    let fs = spec.sample_rate_hz;
    let f_r = shaft_frequency(&spec.condition)?;
    let f_outer = bpfo(&spec.geometry, f_r)?;
    let f_inner = bpfi(&spec.geometry, f_r)?;
    let shaft_phase = rng.random::<f64>() * 2.0 * PI;

    let impacts = match spec.class {
        FaultClass::Healthy if spec.healthy_interference => random_impacts(&mut rng, window, fs, f_outer, spec),
        FaultClass::Healthy => {
            // Reference train only sets the noise scale; it is not added.
            impact_train(&mut rng, window, fs, f_outer, spec, |_| 1.0)
        }
        FaultClass::OuterFault => impact_train(&mut rng, window, fs, f_outer, spec, |_| 1.0),
        FaultClass::InnerFault => impact_train(&mut rng, window, fs, f_inner, spec, |t| {
            // the defect rotates with the shaft through the load zone
            0.7 + 0.3 * (2.0 * PI * f_r * t + shaft_phase).cos()
        }),
    };
    let power = impacts.iter().map(|v| v * v).sum::<f64>() / window as f64;
    let noise_std = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    let shaft_amp = power.sqrt();
    let with_impacts = spec.class != FaultClass::Healthy || spec.healthy_interference;

    let mut vibration = Vec::with_capacity(window);
    for (i, imp) in impacts.iter().enumerate() {
        let t = i as f64 / fs;
        let noise: f64 = rng.sample(StandardNormal);
        let v = shaft_amp * (2.0 * PI * f_r * t + shaft_phase).sin()
            + noise_std * noise
            + if with_impacts { *imp } else { 0.0 };
        vibration.push(v as f32);
    }

    let fault_hz = match spec.class {
        FaultClass::Healthy => None,
        FaultClass::InnerFault => Some(f_inner),
        FaultClass::OuterFault => Some(f_outer),
    };
    let mains_phase = rng.random::<f64>() * 2.0 * PI;
    let mut current = |offset: f64| -> Vec<f32> {
        (0..window)
            .map(|i| {
                let t = i as f64 / fs;
                let base = 2.0 * PI * MAINS_HZ * t + mains_phase + offset;
                // Eccentricity sidebands at f_r exist in every class.
                let mut v = base.cos()
                    + 0.5 * SIDEBAND_AMPLITUDE
                        * ((base + 2.0 * PI * f_r * t).cos() + (base - 2.0 * PI * f_r * t).cos());
                if let Some(f) = fault_hz {
                    v += SIDEBAND_AMPLITUDE
                        * ((base + 2.0 * PI * f * t).cos() + (base - 2.0 * PI * f * t).cos());
                }
                let noise: f64 = rng.sample(StandardNormal);
                (v + spec.current_noise_std * noise) as f32
            })
            .collect()
    };
    let current_a = current(0.0);
    let current_b = current(-2.0 * PI / 3.0);

    SignalSegment::new(
        vibration,
        current_a,
        current_b,
        spec.class,
        spec.condition.label.clone(),
        fs,
    )
}

/// Generates `n_segments` windows of the class described by `spec`.
/// Segment `i` depends only on `(spec, i)`.
pub fn synthesize(spec: &SynthesisSpec, n_segments: usize, window: usize) -> Result<Vec<SignalSegment>> {
    spec.validate()?;
    if window < 2 {
        return Err(Error::InvalidSpec(format!("window {window} too short")));
    }
    (0..n_segments).map(|i| synthesize_one(spec, window, i)).collect()
}

const SEGMENT_MAGIC: &[u8; 4] = b"BSEG";
const SEGMENT_VERSION: u16 = 1;

/// Contents of a segment file: shared header fields plus records.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFile {
    pub window_len: usize,
    pub sample_rate_hz: f64,
    pub condition: String,
    pub segments: Vec<SignalSegment>,
}

fn encode_segments(
    segments: &[SignalSegment],
    window_len: usize,
    sample_rate_hz: f64,
    condition: &str,
) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(16 + segments.len() * (1 + 12 * window_len));
    buf.extend_from_slice(SEGMENT_MAGIC);
    buf.extend_from_slice(&SEGMENT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(window_len as u32).to_le_bytes());
    buf.extend_from_slice(&sample_rate_hz.to_le_bytes());
    buf.extend_from_slice(&(condition.len() as u32).to_le_bytes());
    buf.extend_from_slice(condition.as_bytes());
    for (i, seg) in segments.iter().enumerate() {
        if seg.window_len() != window_len
            || seg.sample_rate_hz != sample_rate_hz
            || seg.condition != condition
        {
            return Err(Error::InvalidInput(format!(
                "segment {i} does not share the file's window, sample rate and condition"
            )));
        }
        seg.validate()?;
        buf.push(seg.label.index() as u8);
        for c in 0..3 {
            for v in seg.channel(c) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

/// Writes segments that share window length, sample rate and condition.
pub fn write_segments(segments: &[SignalSegment], path: &Path) -> Result<()> {
    let first = segments.first().ok_or_else(|| {
        Error::InvalidInput("use write_segment_file to write an empty corpus".into())
    })?;
    write_segment_file(
        &SegmentFile {
            window_len: first.window_len(),
            sample_rate_hz: first.sample_rate_hz,
            condition: first.condition.clone(),
            segments: segments.to_vec(),
        },
        path,
    )
}

pub fn write_segment_file(file: &SegmentFile, path: &Path) -> Result<()> {
    let bytes = encode_segments(&file.segments, file.window_len, file.sample_rate_hz, &file.condition)?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn read_segments(path: &Path) -> Result<SegmentFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_segments(&bytes)
}

pub fn decode_segments(bytes: &[u8]) -> Result<SegmentFile> {
    let header_err = |m: &str| Error::Parse {
        record: 0,
        message: format!("header: {m}"),
    };
    if bytes.len() < 22 || &bytes[..4] != SEGMENT_MAGIC {
        return Err(header_err("missing BSEG magic or truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SEGMENT_VERSION {
        return Err(header_err(&format!("unsupported version {version}")));
    }
    let window_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let sample_rate_hz = f64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let label_len = u32::from_le_bytes(bytes[18..22].try_into().unwrap()) as usize;
    if window_len == 0 || !(sample_rate_hz > 0.0) {
        return Err(header_err("window length and sample rate must be positive"));
    }
    let body_start = 22 + label_len;
    if bytes.len() < body_start {
        return Err(header_err("truncated condition label"));
    }
    let condition = std::str::from_utf8(&bytes[22..body_start])
        .map_err(|_| header_err("condition label is not UTF-8"))?
        .to_string();

    let record_len = 1 + 12 * window_len;
    let body = &bytes[body_start..];
    if !body.len().is_multiple_of(record_len) {
        return Err(Error::Parse {
            record: body.len() / record_len,
            message: format!(
                "truncated record ({} trailing bytes, record size {record_len})",
                body.len() % record_len
            ),
        });
    }
    let segments = body
        .chunks_exact(record_len)
        .enumerate()
        .map(|(i, rec)| {
            let label = FaultClass::from_index(rec[0] as usize).ok_or_else(|| Error::Parse {
                record: i,
                message: format!("unknown label code {}", rec[0]),
            })?;
            let mut chans = (0..3).map(|c| {
                rec[1 + c * 4 * window_len..1 + (c + 1) * 4 * window_len]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect::<Vec<f32>>()
            });
            Ok(SignalSegment {
                vibration: chans.next().unwrap(),
                current_a: chans.next().unwrap(),
                current_b: chans.next().unwrap(),
                label,
                condition: condition.clone(),
                sample_rate_hz,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentFile {
        window_len,
        sample_rate_hz,
        condition,
        segments,
    })
}

/// A balanced three-class synthetic corpus under one operating condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub geometry: BearingGeometry,
    pub condition: OperatingCondition,
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub impact_decay_s: f64,
    pub snr_db: f64,
    pub jitter_pct: f64,
    #[serde(default = "default_current_noise")]
    pub current_noise_std: f64,
    #[serde(default)]
    pub healthy_interference: bool,
    pub per_class: usize,
    pub window: usize,
    pub seed: u64,
}

impl CorpusSpec {
    /// 300 segments per class of 2048 samples at 8192 Hz and 1500 rpm.
    pub fn desk() -> Self {
        Self {
            geometry: BearingGeometry::paderborn_6203(),
            condition: OperatingCondition::paderborn_baseline(),
            sample_rate_hz: 8192.0,
            carrier_hz: 2000.0,
            impact_decay_s: 0.003,
            snr_db: 10.0,
            jitter_pct: 2.0,
            current_noise_std: DEFAULT_CURRENT_NOISE_STD,
            healthy_interference: false,
            per_class: 300,
            window: 2048,
            seed: 0,
        }
    }

    pub fn class_spec(&self, class: FaultClass) -> SynthesisSpec {
        SynthesisSpec {
            class,
            geometry: self.geometry,
            condition: self.condition.clone(),
            sample_rate_hz: self.sample_rate_hz,
            carrier_hz: self.carrier_hz,
            impact_decay_s: self.impact_decay_s,
            snr_db: self.snr_db,
            jitter_pct: self.jitter_pct,
            current_noise_std: self.current_noise_std,
            healthy_interference: self.healthy_interference,
            seed: mix_seed(self.seed, 0xC1A5 + class.index() as u64),
        }
    }

    /// Segments ordered by class, `per_class` each.
    pub fn generate(&self) -> Result<Vec<SignalSegment>> {
        if self.per_class == 0 {
            return Err(Error::InvalidSpec("per_class must be positive".into()));
        }
        let mut out = Vec::with_capacity(3 * self.per_class);
        for class in FaultClass::ALL {
            out.extend(synthesize(&self.class_spec(class), self.per_class, self.window)?);
        }
        Ok(out)
    }
}

pub fn class_counts<'a>(labels: impl IntoIterator<Item = &'a FaultClass>) -> [usize; 3] {
    let mut counts = [0; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recording(len: usize) -> Recording {
        let ramp: Vec<f32> = (0..len).map(|i| i as f32).collect();
        Recording {
            vibration: ramp.clone(),
            current_a: ramp.clone(),
            current_b: ramp,
            sample_rate_hz: 1000.0,
        }
    }

    #[test]
    fn sliding_windows() {
        let segs = segment_stream(&recording(25_000), 10_000, 5_000, FaultClass::Healthy, "c").unwrap();
        assert_eq!(segs.len(), 4);
        let starts: Vec<f32> = segs.iter().map(|s| s.vibration[0]).collect();
        assert_eq!(starts, vec![0.0, 5000.0, 10000.0, 15000.0]);
        assert_eq!(segment_stream(&recording(100), 100, 7, FaultClass::Healthy, "c").unwrap().len(), 1);
        let tiled = segment_stream(&recording(300), 100, 100, FaultClass::Healthy, "c").unwrap();
        assert_eq!(tiled.len(), 3);
        assert_eq!(tiled[1].vibration[0], 100.0);
        assert!(segment_stream(&recording(99), 100, 1, FaultClass::Healthy, "c").is_err());
    }

    fn seg(v: Vec<f32>) -> SignalSegment {
        SignalSegment::new(v.clone(), v.clone(), v, FaultClass::Healthy, "c", 100.0).unwrap()
    }

    #[test]
    fn standardize_with_own_stats() {
        let s = seg(vec![1.0, 2.0, 3.0]);
        let stats = ChannelStats::from_segments([&s]).unwrap();
        let z = standardize(&s, &stats).unwrap();
        let vals: Vec<f64> = z.vibration.iter().map(|&v| f64::from(v)).collect();
        let mean = vals.iter().sum::<f64>() / 3.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-7);
        assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_stats_leave_segment_unchanged() {
        let s = seg(vec![-0.5, 0.25, 1.0]);
        assert_eq!(standardize(&s, &ChannelStats::identity()).unwrap(), s);
    }

    #[test]
    fn constant_channel_is_named() {
        let mut s = seg(vec![1.0, 2.0, 3.0]);
        s.current_b = vec![4.0; 3];
        match ChannelStats::from_segments([&s]) {
            Err(Error::ConstantChannel { channel }) => assert_eq!(channel, "current_b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn labels_from_counts(counts: &[usize]) -> Vec<FaultClass> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(FaultClass::from_index(c).unwrap(), n))
            .collect()
    }

    #[test]
    fn split_reproduces_paderborn_test_counts() {
        let labels = labels_from_counts(&[4929, 9037, 9858]);
        let split = make_split(&labels, SplitRatios::train_test(0.8, 0.2), 3).unwrap();
        let test = class_counts(split.test.iter().map(|&i| &labels[i]));
        assert_eq!(test, [986, 1807, 1972]);
        let train = class_counts(split.train.iter().map(|&i| &labels[i]));
        assert_eq!(train, [3943, 7230, 7886]);
        let split = make_split(&labels, SplitRatios::train_test(0.7, 0.3), 3).unwrap();
        assert_eq!(class_counts(split.test.iter().map(|&i| &labels[i])), [1479, 2711, 2957]);
        let split = make_split(&labels, SplitRatios::train_test(0.6, 0.4), 3).unwrap();
        assert_eq!(class_counts(split.test.iter().map(|&i| &labels[i])), [1972, 3615, 3943]);
    }

    #[test]
    fn ten_items_sixty_twenty_twenty() {
        let labels = vec![FaultClass::OuterFault; 10];
        let split = make_split(&labels, SplitRatios::new(0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (6, 2, 2));
        assert_eq!(split, make_split(&labels, SplitRatios::new(0.6, 0.2, 0.2), 1).unwrap());
    }

    #[test]
    fn split_errors() {
        let labels = vec![FaultClass::Healthy, FaultClass::Healthy, FaultClass::InnerFault];
        assert!(matches!(
            make_split(&labels, SplitRatios::new(0.6, 0.2, 0.2), 0),
            Err(Error::Stratification(_))
        ));
        assert!(make_split(&labels, SplitRatios::new(0.6, 0.2, 0.1), 0).is_err());
    }

    #[test]
    fn folds_balanced() {
        let labels = labels_from_counts(&[50, 50]);
        let idx: Vec<usize> = (0..100).collect();
        let folds = make_folds(&idx, &labels, 5, 9).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 20);
            assert_eq!(class_counts(f.iter().map(|&i| &labels[i])), [10, 10, 0]);
        }
        assert_eq!(folds, make_folds(&idx, &labels, 5, 9).unwrap());
        let small = labels_from_counts(&[3, 10]);
        assert!(matches!(
            make_folds(&(0..13).collect::<Vec<_>>(), &small, 5, 0),
            Err(Error::Stratification(_))
        ));
    }

    fn spec(class: FaultClass) -> SynthesisSpec {
        SynthesisSpec {
            class,
            geometry: BearingGeometry::paderborn_6203(),
            condition: OperatingCondition::new(1500.0, 0.7, 1000.0, "N15_M07_F10"),
            sample_rate_hz: 8192.0,
            carrier_hz: 2000.0,
            impact_decay_s: 0.0015,
            snr_db: 10.0,
            jitter_pct: 2.0,
            current_noise_std: DEFAULT_CURRENT_NOISE_STD,
            healthy_interference: false,
            seed: 11,
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_validated() {
        let a = synthesize(&spec(FaultClass::InnerFault), 3, 512).unwrap();
        let b = synthesize(&spec(FaultClass::InnerFault), 3, 512).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let mut bad = spec(FaultClass::OuterFault);
        bad.carrier_hz = 5000.0;
        assert!(matches!(synthesize(&bad, 1, 512), Err(Error::InvalidSpec(_))));
        bad.carrier_hz = 2000.0;
        bad.jitter_pct = 12.0;
        assert!(synthesize(&bad, 1, 512).is_err());
    }

    #[test]
    fn segment_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bseg");
        let segs = synthesize(&spec(FaultClass::OuterFault), 4, 256).unwrap();
        write_segments(&segs, &path).unwrap();
        let back = read_segments(&path).unwrap();
        assert_eq!(back.segments, segs);
        assert_eq!(back.condition, "N15_M07_F10");

        let bytes = std::fs::read(&path).unwrap();
        match decode_segments(&bytes[..bytes.len() - 10]) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let mut corrupt = bytes.clone();
        let header = 22 + "N15_M07_F10".len();
        corrupt[header] = 7;
        assert!(matches!(decode_segments(&corrupt), Err(Error::Parse { record: 0, .. })));
        assert!(decode_segments(b"XXXX").is_err());

        let empty = dir.path().join("e.bseg");
        write_segment_file(
            &SegmentFile {
                window_len: 256,
                sample_rate_hz: 8192.0,
                condition: "x".into(),
                segments: vec![],
            },
            &empty,
        )
        .unwrap();
        assert!(read_segments(&empty).unwrap().segments.is_empty());
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "vib,ia,ib\n1,2,3\n4,5,6\n").unwrap();
        let rec = Recording::read_csv(&path, 100.0).unwrap();
        assert_eq!(rec.vibration, vec![1.0, 4.0]);
        assert_eq!(rec.current_b, vec![3.0, 6.0]);
        std::fs::write(&path, "1,2\n").unwrap();
        assert!(matches!(Recording::read_csv(&path, 100.0), Err(Error::Parse { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn split_partitions_and_stratifies(
            counts in prop::collection::vec(5usize..60, 3),
            seed in any::<u64>(),
        ) {
            let labels = labels_from_counts(&counts);
            let ratios = SplitRatios::new(0.6, 0.2, 0.2);
            let split = make_split(&labels, ratios, seed).unwrap();
            let mut all: Vec<usize> = split.train.iter().chain(&split.validation).chain(&split.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for (part, r) in [(&split.train, 0.6), (&split.validation, 0.2), (&split.test, 0.2)] {
                let got = class_counts(part.iter().map(|&i| &labels[i]));
                for c in 0..3 {
                    prop_assert!((got[c] as f64 - counts[c] as f64 * r).abs() <= 1.0);
                }
            }
            prop_assert_eq!(&split, &make_split(&labels, ratios, seed).unwrap());
        }

        #[test]
        fn folds_partition(counts in prop::collection::vec(5usize..40, 3), k in 2usize..6, seed in any::<u64>()) {
            let labels = labels_from_counts(&counts);
            let idx: Vec<usize> = (0..labels.len()).collect();
            let folds = make_folds(&idx, &labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, idx);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for c in 0..3 {
                let per: Vec<usize> = folds.iter().map(|f| class_counts(f.iter().map(|&i| &labels[i]))[c]).collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn standardize_idempotent_under_fixed_stats(vals in prop::collection::vec(-100.0f32..100.0, 3..40)) {
            let s = seg(vals);
            prop_assume!(ChannelStats::from_segments([&s]).is_ok());
            let stats = ChannelStats::from_segments([&s]).unwrap();
            let once = standardize(&s, &stats).unwrap();
            let twice = standardize(&s, &stats).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
