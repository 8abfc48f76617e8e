use serde::{Deserialize, Serialize};

use crate::dataio::SignalSegment;
use crate::dsp::{amplitude_at, default_tolerance, envelope_spectrum, BandpassSpec, TimeSeries};
use crate::error::Result;
use crate::geometry::{defect_frequencies, BearingGeometry, OperatingCondition};

/// Envelope-spectrum amplitudes at the outer- and inner-race defect
/// frequencies. Raw after extraction, in `[0, 1]` after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicsFeatures {
    pub a_bpfo: f64,
    pub a_bpfi: f64,
}

impl PhysicsFeatures {
    pub fn new(a_bpfo: f64, a_bpfi: f64) -> Self {
        Self { a_bpfo, a_bpfi }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.a_bpfo, self.a_bpfi]
    }
}

pub fn extract_physics_features(
    seg: &SignalSegment,
    geom: &BearingGeometry,
    cond: &OperatingCondition,
    band: &BandpassSpec,
) -> Result<PhysicsFeatures> {
    let freqs = defect_frequencies(geom, cond)?;
    let x = TimeSeries::new(seg.vibration_f64(), seg.sample_rate_hz)?;
    let spectrum = envelope_spectrum(&x, band)?;
    let bin = spectrum.bin_spacing();
    Ok(PhysicsFeatures {
        a_bpfo: amplitude_at(&spectrum, freqs.bpfo_hz, default_tolerance(freqs.bpfo_hz, bin))?,
        a_bpfi: amplitude_at(&spectrum, freqs.bpfi_hz, default_tolerance(freqs.bpfi_hz, bin))?,
    })
}

/// Per-feature maximum over the training corpus; values beyond it clip to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsNormalizer {
    pub max_bpfo: f64,
    pub max_bpfi: f64,
}

impl PhysicsNormalizer {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a PhysicsFeatures>) -> Self {
        let (mut max_bpfo, mut max_bpfi) = (0.0f64, 0.0f64);
        for f in features {
            max_bpfo = max_bpfo.max(f.a_bpfo);
            max_bpfi = max_bpfi.max(f.a_bpfi);
        }
        Self { max_bpfo, max_bpfi }
    }

    pub fn apply(&self, raw: &PhysicsFeatures) -> PhysicsFeatures {
        let scale = |v: f64, max: f64| if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
        PhysicsFeatures {
            a_bpfo: scale(raw.a_bpfo, self.max_bpfo),
            a_bpfi: scale(raw.a_bpfi, self.max_bpfi),
        }
    }
}
