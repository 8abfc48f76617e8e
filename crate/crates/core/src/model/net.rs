use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PhysicsFeatures;
use crate::dataio::{FaultClass, SignalSegment, CHANNELS};
use crate::error::{Error, Result};
use crate::nn::{softmax, xavier_init, Gradients, Layer, LayerSpec, ParamStore, Sequential, Tensor, Trace};

pub const PHYSICS_BRANCH: &str = "physics";
pub const HEAD: &str = "head";

/// Layer stacks for the four branches and the fusion head. The same signal
/// stack is instantiated once per channel with independent weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub window_len: usize,
    pub signal_branch: Vec<LayerSpec>,
    pub physics_branch: Vec<LayerSpec>,
    /// Maps the fused vector to class logits; must end in `Dense { units: 3 }`.
    pub head: Vec<LayerSpec>,
    pub seed: u64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::desk(2048)
    }
}

impl ArchConfig {
    /// Roughly 100k parameters at a 2048-sample window.
    pub fn desk(window_len: usize) -> Self {
        Self {
            window_len,
            signal_branch: vec![
                LayerSpec::Conv1d { out_channels: 8, kernel: 16, stride: 4 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { size: 4, stride: None },
                LayerSpec::Conv1d { out_channels: 16, kernel: 8, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { size: 4, stride: None },
                LayerSpec::Flatten,
            ],
            physics_branch: vec![LayerSpec::Dense { units: 8 }, LayerSpec::Relu],
            head: vec![
                LayerSpec::Dense { units: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: FaultClass::COUNT },
            ],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// SHA-256 over the canonical JSON of the layer topology. The seed is
    /// excluded: differently seeded nets share a checkpoint layout.
    pub fn hash(&self) -> String {
        let topology = serde_json::json!({
            "window_len": self.window_len,
            "signal_branch": self.signal_branch,
            "physics_branch": self.physics_branch,
            "head": self.head,
        });
        let digest = Sha256::digest(topology.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One model input: standardized channels in [`CHANNELS`] order plus
/// normalized physics features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub signals: [Tensor; 3],
    pub physics: Tensor,
}

impl ModelInput {
    pub fn new(seg: &SignalSegment, feats: &PhysicsFeatures) -> Self {
        let signals = [0, 1, 2].map(|c| {
            let x: Vec<f64> = seg.channel(c).iter().map(|&v| f64::from(v)).collect();
            Tensor::signal(&x)
        });
        Self {
            signals,
            physics: Tensor::vector(feats.as_array().to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: [f64; 3],
    pub fused: Vec<f64>,
}

impl Prediction {
    pub fn class(&self) -> FaultClass {
        FaultClass::from_index(super::argmax(&self.probabilities)).unwrap_or(FaultClass::Healthy)
    }
}

#[derive(Debug, Clone)]
struct SampleTrace {
    signals: [Trace; 3],
    physics: Trace,
    head: Trace,
}

/// Late-fusion classifier: three convolutional signal branches and a dense
/// physics branch, concatenated and passed through the head.
#[derive(Debug, Clone)]
pub struct MultimodalNet {
    arch: ArchConfig,
    store: ParamStore,
    signals: [Sequential; 3],
    physics: Sequential,
    head: Sequential,
    widths: [usize; 4],
    tape: Vec<SampleTrace>,
}

fn flat_width(stack: &Sequential, name: &str) -> Result<usize> {
    match stack.output_shape() {
        [w] => Ok(*w),
        other => Err(Error::InvalidShape(format!("{name} branch must end flat, got {other:?}"))),
    }
}

impl MultimodalNet {
    pub fn new(arch: &ArchConfig) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(arch.seed);
        let mut build = |specs: &[LayerSpec], shape: &[usize], prefix: &str| {
            Sequential::build(specs, shape, &mut store, prefix, &mut rng)
        };
        let signal_shape = [1, arch.window_len];
        let s0 = build(&arch.signal_branch, &signal_shape, CHANNELS[0])?;
        let s1 = build(&arch.signal_branch, &signal_shape, CHANNELS[1])?;
        let s2 = build(&arch.signal_branch, &signal_shape, CHANNELS[2])?;
        let physics = build(&arch.physics_branch, &[2], PHYSICS_BRANCH)?;
        let widths = [
            flat_width(&s0, CHANNELS[0])?,
            flat_width(&s1, CHANNELS[1])?,
            flat_width(&s2, CHANNELS[2])?,
            flat_width(&physics, PHYSICS_BRANCH)?,
        ];
        let head = build(&arch.head, &[widths.iter().sum()], HEAD)?;
        match arch.head.last() {
            Some(LayerSpec::Dense { units }) if *units == FaultClass::COUNT => {}
            _ => {
                return Err(Error::InvalidShape(format!(
                    "head must end in a dense layer with {} units",
                    FaultClass::COUNT
                )))
            }
        }
        Ok(Self {
            arch: arch.clone(),
            store,
            signals: [s0, s1, s2],
            physics,
            head,
            widths,
            tape: Vec::new(),
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Replaces all parameters (and optimizer state) with a loaded store of
    /// identical layout.
    pub fn load_store(&mut self, store: ParamStore) -> Result<()> {
        let same_layout = store.len() == self.store.len()
            && store
                .iter()
                .zip(self.store.iter())
                .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape());
        if !same_layout {
            return Err(Error::Checkpoint("parameter layout differs from architecture".into()));
        }
        self.store = store;
        self.tape.clear();
        Ok(())
    }

    /// Branch output widths: vibration, current_a, current_b, physics.
    pub fn branch_widths(&self) -> [usize; 4] {
        self.widths
    }

    pub fn fusion_width(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn signal_branch(&self, channel: usize) -> &Sequential {
        &self.signals[channel]
    }

    pub fn physics_branch(&self) -> &Sequential {
        &self.physics
    }

    pub fn head(&self) -> &Sequential {
        &self.head
    }

    /// Parameter names of the head's last dense layer.
    pub fn final_classifier(&self) -> Vec<String> {
        let last = self
            .head
            .layers()
            .iter()
            .rposition(|l| matches!(l, Layer::Dense { .. }))
            .expect("head ends in a dense layer");
        self.head.layers()[last]
            .params()
            .into_iter()
            .map(|id| self.store.get(id).name.clone())
            .collect()
    }

    /// Fresh Xavier weights and zero bias for the final classifier, with its
    /// optimizer moments cleared.
    pub fn reinit_final_classifier(&mut self, seed: u64) -> Result<()> {
        for (k, name) in self.final_classifier().iter().enumerate() {
            let id = self.store.id_of(name).expect("classifier tensor registered");
            let p = self.store.get_mut(id);
            let shape = p.value.shape().to_vec();
            p.value = if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else {
                xavier_init(&shape, seed.wrapping_add(k as u64))?
            };
            p.m.fill(0.0);
            p.v.fill(0.0);
        }
        Ok(())
    }

    fn forward_sample(&self, x: &ModelInput) -> Result<(Tensor, Vec<f64>, SampleTrace)> {
        let mut fused = Vec::with_capacity(self.fusion_width());
        let mut traces = Vec::with_capacity(3);
        for (stack, input) in self.signals.iter().zip(&x.signals) {
            let (y, t) = stack.forward(&self.store, input)?;
            fused.extend_from_slice(y.data());
            traces.push(t);
        }
        let (y, physics) = self.physics.forward(&self.store, &x.physics)?;
        fused.extend_from_slice(y.data());
        let (logits, head) = self.head.forward(&self.store, &Tensor::vector(fused.clone()))?;
        let signals: [Trace; 3] = traces.try_into().expect("three signal branches");
        Ok((logits, fused, SampleTrace { signals, physics, head }))
    }

    /// Logits `[N × 3]` for a batch, recording the pass for [`Self::backward`].
    pub fn forward_batch(&mut self, batch: &[&ModelInput]) -> Result<Tensor> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        self.tape.clear();
        let mut rows = Vec::with_capacity(batch.len() * FaultClass::COUNT);
        for x in batch {
            let (logits, _, trace) = self.forward_sample(x)?;
            rows.extend_from_slice(logits.data());
            self.tape.push(trace);
        }
        Tensor::new(vec![batch.len(), FaultClass::COUNT], rows)
    }

    /// Logits `[N × 3]` without recording the pass.
    pub fn logits(&self, batch: &[&ModelInput]) -> Result<Tensor> {
        let mut rows = Vec::with_capacity(batch.len() * FaultClass::COUNT);
        for x in batch {
            rows.extend_from_slice(self.forward_sample(x)?.0.data());
        }
        Tensor::new(vec![batch.len(), FaultClass::COUNT], rows)
    }

    /// Parameter gradients given `d loss / d logits`. Consumes the recorded pass.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<Gradients> {
        if self.tape.is_empty() {
            return Err(Error::State("backward called before forward".into()));
        }
        grad_logits.ensure_shape(&[self.tape.len(), FaultClass::COUNT])?;
        let mut grads = Gradients::zeros_like(&self.store);
        for (i, trace) in self.tape.iter().enumerate() {
            let g = Tensor::vector(grad_logits.row(i).to_vec());
            let g_fused = self.head.backward(&self.store, &trace.head, &g, &mut grads)?;
            let mut offset = 0;
            for (c, stack) in self.signals.iter().enumerate() {
                let w = self.widths[c];
                let g = Tensor::vector(g_fused.data()[offset..offset + w].to_vec());
                stack.backward(&self.store, &trace.signals[c], &g, &mut grads)?;
                offset += w;
            }
            let g = Tensor::vector(g_fused.data()[offset..].to_vec());
            self.physics.backward(&self.store, &trace.physics, &g, &mut grads)?;
        }
        self.tape.clear();
        Ok(grads)
    }

    /// Class probabilities and the fused vector; records nothing.
    pub fn predict(&self, x: &ModelInput) -> Result<Prediction> {
        let (logits, fused, _) = self.forward_sample(x)?;
        let p = softmax(logits.data());
        Ok(Prediction {
            probabilities: [p[0], p[1], p[2]],
            fused,
        })
    }
}
