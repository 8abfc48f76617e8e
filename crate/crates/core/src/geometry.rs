//! Bearing geometry and characteristic defect frequencies.
//!
//! Outer- and inner-race defects modulate the vibration signal at the ball
//! pass frequencies
//!
//! ```text
//! BPFO = n/2 · f_r · (1 − d/D · cos φ)
//! BPFI = n/2 · f_r · (1 + d/D · cos φ)
//! ```
//!
//! where `n` is the rolling-element count, `d` the element diameter, `D` the
//! pitch diameter, `φ` the contact angle and `f_r` the shaft frequency in Hz.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingGeometry {
    pub rolling_element_count: u32,
    pub element_diameter_mm: f64,
    pub pitch_diameter_mm: f64,
    /// Deep-groove bearings have a nominal contact angle of zero.
    #[serde(default)]
    pub contact_angle_rad: f64,
}

impl BearingGeometry {
    pub fn new(
        rolling_element_count: u32,
        element_diameter_mm: f64,
        pitch_diameter_mm: f64,
        contact_angle_rad: f64,
    ) -> Result<Self> {
        let geom = Self {
            rolling_element_count,
            element_diameter_mm,
            pitch_diameter_mm,
            contact_angle_rad,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// The 6203-type bearing of the Paderborn test rig: 8 balls, 6.75 mm
    /// element diameter, 28.55 mm pitch diameter.
    pub fn paderborn_6203() -> Self {
        Self {
            rolling_element_count: 8,
            element_diameter_mm: 6.75,
            pitch_diameter_mm: 28.55,
            contact_angle_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rolling_element_count == 0 {
            return Err(Error::InvalidGeometry(
                "rolling_element_count must be positive".into(),
            ));
        }
        let d = self.element_diameter_mm;
        let pitch = self.pitch_diameter_mm;
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "element_diameter_mm must be positive, got {d}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pitch_diameter_mm must be positive, got {pitch}"
            )));
        }
        if d >= pitch {
            return Err(Error::InvalidGeometry(format!(
                "element diameter {d} must be smaller than pitch diameter {pitch}"
            )));
        }
        let phi = self.contact_angle_rad;
        if !(phi.is_finite() && (0.0..FRAC_PI_2).contains(&phi)) {
            return Err(Error::InvalidGeometry(format!(
                "contact angle {phi} rad outside [0, π/2)"
            )));
        }
        let ratio = self.diameter_ratio();
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "(d/D)·cos φ = {ratio} outside (0, 1)"
            )));
        }
        Ok(())
    }

    /// `(d/D)·cos φ`, the term shared by both ball pass frequencies.
    pub fn diameter_ratio(&self) -> f64 {
        self.element_diameter_mm / self.pitch_diameter_mm * self.contact_angle_rad.cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub shaft_speed_rpm: f64,
    #[serde(default)]
    pub load_torque_nm: f64,
    #[serde(default)]
    pub radial_force_n: f64,
    pub label: String,
}

impl OperatingCondition {
    pub fn new(shaft_speed_rpm: f64, load_torque_nm: f64, radial_force_n: f64, label: &str) -> Self {
        Self {
            shaft_speed_rpm,
            load_torque_nm,
            radial_force_n,
            label: label.to_string(),
        }
    }

    /// Paderborn baseline condition N15_M07_F10.
    pub fn paderborn_baseline() -> Self {
        Self::new(1500.0, 0.7, 1000.0, "N15_M07_F10")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shaft_speed_rpm.is_finite() && self.shaft_speed_rpm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shaft speed must be positive, got {} rpm",
                self.shaft_speed_rpm
            )));
        }
        if self.load_torque_nm < 0.0 || self.radial_force_n < 0.0 {
            return Err(Error::InvalidInput(
                "load torque and radial force must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Shaft rotational frequency in Hz.
pub fn shaft_frequency(cond: &OperatingCondition) -> Result<f64> {
    if !(cond.shaft_speed_rpm.is_finite() && cond.shaft_speed_rpm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "shaft speed must be positive, got {} rpm",
            cond.shaft_speed_rpm
        )));
    }
    Ok(cond.shaft_speed_rpm / 60.0)
}

fn check_shaft_hz(f_r: f64) -> Result<()> {
    if f_r.is_finite() && f_r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "shaft frequency must be positive, got {f_r} Hz"
        )))
    }
}

/// Ball pass frequency, outer race.
pub fn bpfo(geom: &BearingGeometry, f_r: f64) -> Result<f64> {
    geom.validate()?;
    check_shaft_hz(f_r)?;
    let n = f64::from(geom.rolling_element_count);
    Ok(n / 2.0 * f_r * (1.0 - geom.diameter_ratio()))
}

/// Ball pass frequency, inner race.
pub fn bpfi(geom: &BearingGeometry, f_r: f64) -> Result<f64> {
    geom.validate()?;
    check_shaft_hz(f_r)?;
    let n = f64::from(geom.rolling_element_count);
    Ok(n / 2.0 * f_r * (1.0 + geom.diameter_ratio()))
}

/// Both characteristic frequencies for a geometry under an operating condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectFrequencies {
    pub shaft_hz: f64,
    pub bpfo_hz: f64,
    pub bpfi_hz: f64,
}

pub fn defect_frequencies(
    geom: &BearingGeometry,
    cond: &OperatingCondition,
) -> Result<DefectFrequencies> {
    let shaft_hz = shaft_frequency(cond)?;
    Ok(DefectFrequencies {
        shaft_hz,
        bpfo_hz: bpfo(geom, shaft_hz)?,
        bpfi_hz: bpfi(geom, shaft_hz)?,
    })
}
