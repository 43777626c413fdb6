//! Baseband model of the stripline resonator: a single-pole band-pass
//! transfer function plus the power-to-Rabi conversion.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::SampledWaveform;

/// Measured resonator parameters. The transfer function is the single-pole
/// complex low-pass `H(f) = 1 / (1 + 2i (f + carrier_offset) / bandwidth)`
/// on the baseband envelope, which reproduces the measured FWHM of `|H|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel {
    pub center_freq_ghz: f64,
    pub bandwidth_fwhm_mhz: f64,
    pub q_factor: f64,
    /// Rabi frequency per square-root watt, MHz / sqrt(W).
    pub efficiency_mhz_per_sqrt_w: f64,
}

impl ResonatorModel {
    pub fn new(
        center_freq_ghz: f64,
        bandwidth_fwhm_mhz: f64,
        q_factor: f64,
        efficiency_mhz_per_sqrt_w: f64,
    ) -> Result<Self> {
        if !center_freq_ghz.is_finite() || center_freq_ghz <= 0.0 {
            return Err(Error::invalid("center_freq_ghz", "must be finite and > 0"));
        }
        if !bandwidth_fwhm_mhz.is_finite() || bandwidth_fwhm_mhz <= 0.0 {
            return Err(Error::invalid(
                "bandwidth_fwhm_mhz",
                "must be finite and > 0",
            ));
        }
        if !q_factor.is_finite() || q_factor <= 0.0 {
            return Err(Error::invalid("q_factor", "must be finite and > 0"));
        }
        if !efficiency_mhz_per_sqrt_w.is_finite() || efficiency_mhz_per_sqrt_w < 0.0 {
            return Err(Error::invalid(
                "efficiency_mhz_per_sqrt_w",
                "must be finite and >= 0",
            ));
        }
        let model = Self {
            center_freq_ghz,
            bandwidth_fwhm_mhz,
            q_factor,
            efficiency_mhz_per_sqrt_w,
        };
        let implied_q = center_freq_ghz * 1e3 / bandwidth_fwhm_mhz;
        if (implied_q - q_factor).abs() / q_factor > 0.05 {
            log::warn!(
                "q_factor {} inconsistent with center/bandwidth {:.1}",
                q_factor,
                implied_q
            );
        }
        Ok(model)
    }

    /// Analytic complex gain at baseband frequency `f_mhz`.
    pub fn gain(&self, f_mhz: f64, carrier_offset_mhz: f64) -> Complex64 {
        let x = 2.0 * (f_mhz + carrier_offset_mhz) / self.bandwidth_fwhm_mhz;
        Complex64::new(1.0, 0.0) / Complex64::new(1.0, x)
    }
}

/// Filter a waveform through the resonator passband as a causal first-order
/// recursion on the sampling grid: `y_k = p y_{k-1} + c x_k` with the
/// matched pole `p = exp((-pi B - 2 pi i offset) dt)` and `c` fixed so the
/// peak gain (at `f = -carrier_offset`) is exactly 1. Output length equals
/// input length.
pub fn apply_filter(
    model: &ResonatorModel,
    w: &SampledWaveform,
    carrier_offset_mhz: f64,
) -> Result<SampledWaveform> {
    if !carrier_offset_mhz.is_finite() || carrier_offset_mhz.abs() >= model.bandwidth_fwhm_mhz {
        return Err(Error::invalid(
            "carrier_offset_mhz",
            "must satisfy |offset| < bandwidth",
        ));
    }
    let dt = w.dt_ns * 1e-3; // MHz * us units
    let decay = (-PI * model.bandwidth_fwhm_mhz * dt).exp();
    let pole = Complex64::from_polar(decay, -2.0 * PI * carrier_offset_mhz * dt);
    let c = 1.0 - decay;
    let mut state = Complex64::new(0.0, 0.0);
    let samples = w
        .samples
        .iter()
        .map(|x| {
            state = pole * state + c * x;
            state
        })
        .collect();
    Ok(SampledWaveform {
        dt_ns: w.dt_ns,
        samples,
    })
}

/// Rabi frequency produced by a given input power: `efficiency * sqrt(P)`.
pub fn power_to_rabi(model: &ResonatorModel, power_w: f64) -> Result<f64> {
    if !power_w.is_finite() || power_w < 0.0 {
        return Err(Error::invalid("power_w", "must be finite and >= 0"));
    }
    Ok(model.efficiency_mhz_per_sqrt_w * power_w.sqrt())
}
