//! Envelope spectrum analysis.
//!
//! The processing chain for a vibration window is
//! bandpass (zero-phase Butterworth) → analytic-signal envelope → mean removal
//! → single-sided FFT magnitude. Periodic defect impacts exciting a structural
//! resonance show up as peaks at their repetition rate in the result.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("time series is empty".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    /// Order of the lowpass prototype; the bandpass has twice as many poles.
    pub order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            low_cut_hz: 1_000.0,
            high_cut_hz: 10_000.0,
            order: 4,
        }
    }
}

impl BandpassSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if self.order == 0 {
            return Err(Error::InvalidSpec("filter order must be positive".into()));
        }
        if !(self.low_cut_hz > 0.0
            && self.low_cut_hz < self.high_cut_hz
            && self.high_cut_hz < nyquist)
        {
            return Err(Error::InvalidSpec(format!(
                "band [{}, {}] Hz must satisfy 0 < low < high < {nyquist} Hz",
                self.low_cut_hz, self.high_cut_hz
            )));
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// Direct-form II transposed state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let y = self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>();
        [y - self.b[0], self.b[2] - self.a[2] * y]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

/// Digital Butterworth bandpass as cascaded second-order sections.
///
/// Analog prototype poles are mapped lowpass→bandpass, then through the
/// bilinear transform with prewarped band edges. Each section carries one zero
/// at z = 1 and one at z = −1. Gain is unity at the geometric band centre.
pub fn butterworth_bandpass(spec: &BandpassSpec, sample_rate_hz: f64) -> Result<Vec<Biquad>> {
    spec.validate(sample_rate_hz)?;
    let n = spec.order;
    let fs2 = 2.0 * sample_rate_hz;
    let w1 = fs2 * (PI * spec.low_cut_hz / sample_rate_hz).tan();
    let w2 = fs2 * (PI * spec.high_cut_hz / sample_rate_hz).tan();
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let mut upper = Vec::new();
    let mut real = Vec::new();
    for k in 1..=n {
        let theta = PI * (2 * k + n - 1) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        for s in [half + root, half - root] {
            let z = (fs2 + s) / (fs2 - s);
            if z.im > 1e-12 {
                upper.push(z);
            } else if z.im.abs() <= 1e-12 {
                real.push(z.re);
            }
        }
    }
    real.sort_by(|a, b| b.total_cmp(a));
    if real.len() % 2 != 0 || upper.len() + real.len() / 2 != n {
        return Err(Error::InvalidSpec(format!(
            "could not pair poles of order-{n} bandpass"
        )));
    }

    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|p| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        })
        .collect();
    for pair in real.chunks(2) {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(pair[0] + pair[1]), pair[0] * pair[1]],
        });
    }

    let centre = 2.0 * (w0 / fs2).atan();
    let z_inv = Complex64::from_polar(1.0, -centre);
    let gain: f64 = sections.iter().map(|s| s.response(z_inv).norm()).product();
    let per_section = gain.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(sections)
}

fn sos_filter(sections: &[Biquad], x: &mut [f64], initial: Option<f64>) {
    let mut level = initial.unwrap_or(0.0);
    for s in sections {
        let [mut z1, mut z2] = match initial {
            Some(_) => {
                let st = s.step_state();
                [st[0] * level, st[1] * level]
            }
            None => [0.0, 0.0],
        };
        level *= s.dc_gain();
        for v in x.iter_mut() {
            let input = *v;
            let y = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[1] * y + z2;
            z2 = s.b[2] * input - s.a[2] * y;
            *v = y;
        }
    }
}

/// Forward-backward filtering with odd-extension padding and steady-state
/// initial conditions, so the result has zero phase.
pub fn filtfilt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let first = ext[0];
    sos_filter(sections, &mut ext, Some(first));
    ext.reverse();
    let first = ext[0];
    sos_filter(sections, &mut ext, Some(first));
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

pub fn bandpass_filter(x: &TimeSeries, spec: &BandpassSpec) -> Result<TimeSeries> {
    let sections = butterworth_bandpass(spec, x.sample_rate_hz)?;
    TimeSeries::new(filtfilt(&sections, &x.samples), x.sample_rate_hz)
}

/// Analytic signal via the frequency-domain Hilbert transform.
pub fn analytic_signal(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive frequencies, zero the rest.
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= h;
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Magnitude of the analytic signal.
pub fn envelope(x: &TimeSeries) -> Result<TimeSeries> {
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "envelope needs at least 2 samples, got {}",
            x.len()
        )));
    }
    let env = analytic_signal(&x.samples).iter().map(|c| c.norm()).collect();
    TimeSeries::new(env, x.sample_rate_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSpectrum {
    bin_frequencies_hz: Vec<f64>,
    amplitudes: Vec<f64>,
}

impl EnvelopeSpectrum {
    pub fn new(bin_frequencies_hz: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        if bin_frequencies_hz.len() != amplitudes.len() {
            return Err(Error::InvalidInput(format!(
                "{} frequencies but {} amplitudes",
                bin_frequencies_hz.len(),
                amplitudes.len()
            )));
        }
        if bin_frequencies_hz.first().is_some_and(|&f| f != 0.0) {
            return Err(Error::InvalidInput("first bin must be at 0 Hz".into()));
        }
        if bin_frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "bin frequencies must be strictly increasing".into(),
            ));
        }
        if amplitudes.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidInput("amplitudes must be nonnegative".into()));
        }
        Ok(Self {
            bin_frequencies_hz,
            amplitudes,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.bin_frequencies_hz
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Spacing between adjacent bins, or 0 for a single-bin spectrum.
    pub fn bin_spacing(&self) -> f64 {
        match self.bin_frequencies_hz.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    /// Frequency of the largest bin at or above `min_hz`.
    pub fn peak_frequency(&self, min_hz: f64) -> Option<f64> {
        self.bin_frequencies_hz
            .iter()
            .zip(&self.amplitudes)
            .filter(|(f, _)| **f >= min_hz)
            .fold(None, |best: Option<(f64, f64)>, (&f, &a)| match best {
                Some((_, ba)) if ba >= a => best,
                _ => Some((f, a)),
            })
            .map(|(f, _)| f)
    }

    /// Two-column CSV dump (`frequency_hz,amplitude`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("frequency_hz,amplitude\n");
        for (f, a) in self.bin_frequencies_hz.iter().zip(&self.amplitudes) {
            out.push_str(&format!("{f},{a}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut fh| fh.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Single-sided magnitude spectrum scaled 2/N (DC and Nyquist 1/N).
pub fn magnitude_spectrum(samples: &[f64], sample_rate_hz: f64) -> Result<EnvelopeSpectrum> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot transform an empty signal".into()));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let spacing = sample_rate_hz / n as f64;
    let freqs = (0..bins).map(|k| k as f64 * spacing).collect();
    let amps = buf[..bins]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let scale = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else {
                2.0
            };
            scale * c.norm() / n as f64
        })
        .collect();
    EnvelopeSpectrum::new(freqs, amps)
}

pub fn envelope_spectrum(x: &TimeSeries, band: &BandpassSpec) -> Result<EnvelopeSpectrum> {
    let filtered = bandpass_filter(x, band)?;
    let env = envelope(&filtered)?;
    let mut samples = env.into_samples();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    for v in &mut samples {
        *v -= mean;
    }
    magnitude_spectrum(&samples, x.sample_rate_hz)
}

/// Default search half-width around a target frequency: one bin or 2% of
/// the target, whichever is wider.
pub fn default_tolerance(f_target_hz: f64, bin_spacing_hz: f64) -> f64 {
    bin_spacing_hz.max(0.02 * f_target_hz)
}

/// Largest amplitude within `[f_target − tol, f_target + tol]`.
pub fn amplitude_at(spec: &EnvelopeSpectrum, f_target_hz: f64, tolerance_hz: f64) -> Result<f64> {
    if !(f_target_hz > 0.0 && tolerance_hz > 0.0) {
        return Err(Error::InvalidRange(format!(
            "target {f_target_hz} Hz and tolerance {tolerance_hz} Hz must be positive"
        )));
    }
    let (lo, hi) = (f_target_hz - tolerance_hz, f_target_hz + tolerance_hz);
    spec.bin_frequencies_hz
        .iter()
        .zip(&spec.amplitudes)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .map(|(_, a)| *a)
        .reduce(f64::max)
        .ok_or_else(|| {
            Error::InvalidRange(format!("no spectrum bins within [{lo}, {hi}] Hz"))
        })
}

/// p-th percentile with linear interpolation between closest ranks.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("percentile of an empty array".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidInput(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 1000.0;

    fn tone(freq: f64, amp: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).cos())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn band(lo: f64, hi: f64) -> BandpassSpec {
        BandpassSpec {
            low_cut_hz: lo,
            high_cut_hz: hi,
            order: 4,
        }
    }

    fn interior(x: &[f64]) -> &[f64] {
        let cut = x.len() / 10;
        &x[cut..x.len() - cut]
    }

    #[test]
    fn passband_tone_preserved() {
        let x = TimeSeries::new(tone(50.0, 1.0, 4000, FS), FS).unwrap();
        let y = bandpass_filter(&x, &band(30.0, 100.0)).unwrap();
        assert_eq!(y.len(), x.len());
        let ratio = rms(interior(y.samples())) / rms(interior(x.samples()));
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn stopband_tones_attenuated() {
        let spec = band(30.0, 100.0);
        for f in [5.0, 15.0, 200.0] {
            let x = TimeSeries::new(tone(f, 1.0, 4000, FS), FS).unwrap();
            let y = bandpass_filter(&x, &spec).unwrap();
            let ratio = rms(interior(y.samples())) / rms(x.samples());
            // 20 dB in amplitude
            assert!(ratio < 0.1, "{f} Hz leaked with ratio {ratio}");
        }
    }

    #[test]
    fn dc_offset_removed() {
        let x = TimeSeries::new(vec![3.5; 2000], FS).unwrap();
        let y = bandpass_filter(&x, &band(30.0, 100.0)).unwrap();
        let mean = y.samples().iter().sum::<f64>() / y.len() as f64;
        assert!(mean.abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn rejects_band_outside_nyquist() {
        let x = TimeSeries::new(tone(50.0, 1.0, 100, FS), FS).unwrap();
        assert!(matches!(
            bandpass_filter(&x, &band(30.0, 600.0)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(bandpass_filter(&x, &band(0.0, 100.0)).is_err());
        assert!(bandpass_filter(&x, &band(100.0, 30.0)).is_err());
    }

    #[test]
    fn design_has_unit_centre_gain_and_stable_poles() {
        let secs = butterworth_bandpass(&band(1000.0, 10_000.0), 64_000.0).unwrap();
        assert_eq!(secs.len(), 4);
        for s in &secs {
            // |p|² = a2 < 1 for complex-conjugate pole pairs
            assert!(s.a[2] < 1.0 && s.a[2] > 0.0);
        }
        let centre = 2.0 * PI * (1000.0f64 * 10_000.0).sqrt() / 64_000.0;
        // prewarped centre differs slightly from the arithmetic one; gain stays near 1
        let z = Complex64::from_polar(1.0, -centre);
        let g: f64 = secs.iter().map(|s| s.response(z).norm()).product();
        assert!((g - 1.0).abs() < 0.05, "gain {g}");
    }

    #[test]
    fn unit_tone_has_unit_envelope() {
        let fs = 10_000.0;
        let x = TimeSeries::new(tone(100.0, 1.0, 10_000, fs), fs).unwrap();
        let env = envelope(&x).unwrap();
        let inner = interior(env.samples());
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn am_envelope_tracks_modulation() {
        let fs = 10_000.0;
        let n = 10_000;
        let a: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (2.0 * PI * 5.0 * i as f64 / fs).cos())
            .collect();
        let x: Vec<f64> = (0..n)
            .map(|i| a[i] * (2.0 * PI * 1000.0 * i as f64 / fs).cos())
            .collect();
        let env = envelope(&TimeSeries::new(x, fs).unwrap()).unwrap();
        let r = pearson(interior(env.samples()), interior(&a));
        assert!(r > 0.99, "r = {r}");
    }

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn zero_signal_edge_cases() {
        let zeros = TimeSeries::new(vec![0.0; 512], FS).unwrap();
        assert!(envelope(&zeros).unwrap().samples().iter().all(|v| *v == 0.0));
        let spec = envelope_spectrum(&zeros, &band(30.0, 100.0)).unwrap();
        assert!(spec.amplitudes().iter().all(|v| *v == 0.0));
        let one = TimeSeries::new(vec![1.0], FS).unwrap();
        assert!(matches!(envelope(&one), Err(Error::InvalidInput(_))));
        assert!(TimeSeries::new(vec![], FS).is_err());
    }

    #[test]
    fn spectrum_bins_and_scaling() {
        let fs = 1024.0;
        let x = TimeSeries::new(tone(64.0, 0.7, 1024, fs), fs).unwrap();
        let spec = magnitude_spectrum(x.samples(), fs).unwrap();
        assert_eq!(spec.len(), 513);
        assert_eq!(spec.bin_spacing(), 1.0);
        assert!((spec.amplitudes()[64] - 0.7).abs() < 1e-9);
        assert_eq!(*spec.frequencies().last().unwrap(), 512.0);
    }

    #[test]
    fn tone_below_passband_gives_flat_envelope_spectrum() {
        let fs = 8192.0;
        let n = 4096;
        let spec = band(500.0, 2000.0);
        let reference: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (1.0 + 0.5 * (2.0 * PI * 40.0 * t).cos()) * (2.0 * PI * 1000.0 * t).cos()
            })
            .collect();
        let ref_peak = envelope_spectrum(&TimeSeries::new(reference, fs).unwrap(), &spec)
            .unwrap()
            .amplitudes()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let low = envelope_spectrum(&TimeSeries::new(tone(20.0, 1.0, n, fs), fs).unwrap(), &spec)
            .unwrap();
        let leak = low.amplitudes().iter().cloned().fold(0.0, f64::max);
        assert!(leak < 0.05 * ref_peak, "leak {leak} vs reference {ref_peak}");
    }

    fn grid_spectrum(points: &[(f64, f64)]) -> EnvelopeSpectrum {
        let freqs: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.1).collect();
        let mut amps = vec![0.0; freqs.len()];
        for &(f, a) in points {
            amps[(f * 10.0).round() as usize] = a;
        }
        EnvelopeSpectrum::new(freqs, amps).unwrap()
    }

    #[test]
    fn amplitude_at_reads_band_maximum() {
        let lone = grid_spectrum(&[(76.4, 0.8)]);
        assert_eq!(amplitude_at(&lone, 76.36, 1.0).unwrap(), 0.8);
        assert_eq!(amplitude_at(&lone, 123.6, 1.0).unwrap(), 0.0);
        let two = grid_spectrum(&[(75.9, 0.3), (76.8, 0.5)]);
        assert_eq!(amplitude_at(&two, 76.36, 1.0).unwrap(), 0.5);
        assert!(matches!(
            amplitude_at(&two, 500.0, 1.0),
            Err(Error::InvalidRange(_))
        ));
        assert!(amplitude_at(&two, -1.0, 1.0).is_err());
    }

    #[test]
    fn percentile_linear_interpolation() {
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        assert!((percentile_threshold(&grid, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(percentile_threshold(&[4.2], 37.0).unwrap(), 4.2);
        // rank = 0.5·3 = 1.5 → halfway between 2 and 3
        assert_eq!(percentile_threshold(&[4.0, 1.0, 3.0, 2.0], 50.0).unwrap(), 2.5);
        assert!(percentile_threshold(&[], 50.0).is_err());
    }

    #[test]
    fn rejects_malformed_spectrum() {
        assert!(EnvelopeSpectrum::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(EnvelopeSpectrum::new(vec![0.0, 1.0, 1.0], vec![1.0; 3]).is_err());
        assert!(EnvelopeSpectrum::new(vec![0.5, 1.0], vec![1.0; 2]).is_err());
        assert!(EnvelopeSpectrum::new(vec![0.0, 1.0], vec![1.0, -0.1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn envelope_is_nonnegative(x in prop::collection::vec(-10.0f64..10.0, 2..300)) {
            let env = envelope(&TimeSeries::new(x, FS).unwrap()).unwrap();
            prop_assert!(env.samples().iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn spectrum_is_positively_homogeneous(
            x in prop::collection::vec(-1.0f64..1.0, 256..512),
            k in 0.1f64..20.0,
        ) {
            let spec = band(50.0, 300.0);
            let base = envelope_spectrum(&TimeSeries::new(x.clone(), FS).unwrap(), &spec).unwrap();
            let scaled_x: Vec<f64> = x.iter().map(|v| v * k).collect();
            let scaled = envelope_spectrum(&TimeSeries::new(scaled_x, FS).unwrap(), &spec).unwrap();
            let peak = base.amplitudes().iter().cloned().fold(0.0, f64::max);
            for (a, b) in base.amplitudes().iter().zip(scaled.amplitudes()) {
                prop_assert!((b - k * a).abs() <= 1e-6 * (k * a).max(k * peak * 1e-3));
            }
        }

        #[test]
        fn amplitude_at_respects_domination(
            amps in prop::collection::vec(0.0f64..1.0, 50),
            bumps in prop::collection::vec(0.0f64..1.0, 50),
            target in 1.0f64..45.0,
        ) {
            let freqs: Vec<f64> = (0..50).map(f64::from).collect();
            let lower = EnvelopeSpectrum::new(freqs.clone(), amps.clone()).unwrap();
            let upper_amps: Vec<f64> = amps.iter().zip(&bumps).map(|(a, b)| a + b).collect();
            let upper = EnvelopeSpectrum::new(freqs, upper_amps).unwrap();
            prop_assert!(amplitude_at(&upper, target, 1.5).unwrap() >= amplitude_at(&lower, target, 1.5).unwrap());
        }

        #[test]
        fn percentile_is_monotone(
            values in prop::collection::vec(0.0f64..100.0, 1..60),
            p in 0.0f64..100.0,
            q in 0.0f64..100.0,
        ) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(percentile_threshold(&values, lo).unwrap() <= percentile_threshold(&values, hi).unwrap());
        }
    }
}
