//! LC resonance capacitance-to-digital conversion.
//!
//! The sensor sits in parallel with a fixed board capacitance inside an LC
//! tank; the converter digitizes the ratio of the tank's resonant frequency
//! to a reference clock into an unsigned code. Codes therefore fall as
//! capacitance rises.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rngutil::standard_normal;
use crate::sensing::SensorFrame;

/// Converter channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConverterConfig {
    /// Tank inductance (uH).
    pub inductance_uh: f64,
    /// Fixed capacitance in parallel with the sensor (pF).
    pub board_capacitance_pf: f64,
    /// Reference clock (MHz).
    pub reference_clock_mhz: f64,
    /// Output width in bits.
    pub bits: u32,
    /// Additive Gaussian noise on the sensed capacitance (pF).
    pub noise_sigma_pf: f64,
    /// Nominal conversion rate (frames per second).
    pub sample_rate_hz: f64,
}

impl Default for ConverterConfig {
    fn default() -> Self {
        Self {
            inductance_uh: 18.0,
            board_capacitance_pf: 33.0,
            reference_clock_mhz: 40.0,
            bits: 28,
            noise_sigma_pf: 0.001,
            sample_rate_hz: 100.0,
        }
    }
}

impl ConverterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inductance_uh > 0.0
            && self.board_capacitance_pf > 0.0
            && self.reference_clock_mhz > 0.0
            && self.sample_rate_hz > 0.0)
        {
            return Err(Error::Config(format!(
                "converter constants must be positive: {self:?}"
            )));
        }
        if self.bits != 28 {
            return Err(Error::Config(format!(
                "converter output width is fixed at 28 bits, got {}",
                self.bits
            )));
        }
        if !(self.noise_sigma_pf >= 0.0) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma_pf
            )));
        }
        Ok(())
    }

    fn full_scale(&self) -> f64 {
        (1u64 << self.bits) as f64
    }

    /// Tank resonant frequency at sensor capacitance `c_pf` (Hz).
    fn resonant_hz(&self, c_pf: f64) -> f64 {
        let l = self.inductance_uh * 1e-6;
        let c = (c_pf + self.board_capacitance_pf) * 1e-12;
        1.0 / (2.0 * std::f64::consts::PI * (l * c).sqrt())
    }
}

/// Digitized converter outputs at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFrame {
    pub code: Vec<u32>,
    pub step: usize,
}

/// Forward conversion: capacitance (pF) to output code.
pub fn capacitance_to_code(config: &ConverterConfig, c_pf: f64) -> u32 {
    let ratio = config.resonant_hz(c_pf.max(0.0)) / (config.reference_clock_mhz * 1e6);
    let clamped = ratio.clamp(0.0, 1.0 - 0.5 / config.full_scale());
    (clamped * config.full_scale()).round() as u32
}

/// Algebraic inverse of the noiseless forward map.
pub fn code_to_capacitance(config: &ConverterConfig, code: u32) -> Result<f64> {
    let full_scale = config.full_scale() as u64 as f64;
    if code == 0 {
        return Err(Error::Range("code 0 maps to zero frequency".into()));
    }
    if (code as u64) >= (1u64 << config.bits) {
        return Err(Error::Range(format!(
            "code {code} does not fit in {} bits",
            config.bits
        )));
    }
    let f = code as f64 / full_scale * config.reference_clock_mhz * 1e6;
    let l = config.inductance_uh * 1e-6;
    let omega = 2.0 * std::f64::consts::PI * f;
    Ok(1.0 / (l * omega * omega) * 1e12 - self_board(config))
}

fn self_board(config: &ConverterConfig) -> f64 {
    config.board_capacitance_pf
}

/// Convert a sensor frame with additive capacitance noise. The caller owns
/// the RNG stream, so identical seeds replay identical codes.
pub fn acquire<R: Rng>(config: &ConverterConfig, frame: &SensorFrame, rng: &mut R) -> CodeFrame {
    let code = frame
        .capacitance
        .iter()
        .map(|&c| {
            let noisy = if config.noise_sigma_pf > 0.0 {
                (c + config.noise_sigma_pf * standard_normal(rng)).max(0.0)
            } else {
                c
            };
            capacitance_to_code(config, noisy)
        })
        .collect();
    CodeFrame {
        code,
        step: frame.step,
    }
}
