#![allow(dead_code)]

pub mod gradcheck;

use bearing_pinn::dataio::CorpusSpec;
use bearing_pinn::dsp::BandpassSpec;
use bearing_pinn::geometry::OperatingCondition;
use bearing_pinn::model::{ArchConfig, PhysicsLossConfig};
use bearing_pinn::nn::LayerSpec;
use bearing_pinn::pipeline::{Corpus, FitSpec, TrainConfig};

pub fn band() -> BandpassSpec {
    BandpassSpec {
        low_cut_hz: 800.0,
        high_cut_hz: 3500.0,
        order: 4,
    }
}

pub fn corpus(spec: &CorpusSpec) -> Corpus {
    Corpus::new(spec.generate().unwrap(), &spec.geometry, &spec.condition, &band()).unwrap()
}

/// A 512-sample corpus small enough for quick contract tests.
pub fn tiny_spec(per_class: usize, seed: u64) -> CorpusSpec {
    CorpusSpec {
        per_class,
        window: 512,
        seed,
        ..CorpusSpec::desk()
    }
}

pub fn shifted(spec: &CorpusSpec) -> CorpusSpec {
    CorpusSpec {
        condition: OperatingCondition::new(900.0, 0.7, 1000.0, "N09_M07_F10"),
        carrier_hz: 2600.0,
        impact_decay_s: 0.005,
        snr_db: 4.0,
        seed: spec.seed + 1000,
        ..spec.clone()
    }
}

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        window_len: 512,
        signal_branch: vec![
            LayerSpec::Conv1d { out_channels: 4, kernel: 16, stride: 4 },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { size: 4, stride: None },
            LayerSpec::Conv1d { out_channels: 4, kernel: 4, stride: 2 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
        ],
        physics_branch: vec![LayerSpec::Dense { units: 4 }, LayerSpec::Relu],
        head: vec![LayerSpec::Dense { units: 16 }, LayerSpec::Relu, LayerSpec::Dense { units: 3 }],
        seed: 0,
    }
}

pub fn tiny_fit(seed: u64, max_epochs: usize) -> FitSpec {
    FitSpec {
        arch: tiny_arch(),
        loss: PhysicsLossConfig::default(),
        train: TrainConfig {
            max_epochs,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        geometry: CorpusSpec::desk().geometry,
        band: band(),
        seed,
    }
}
