//! Run configuration: per-experiment defaults, TOML files, and the
//! header-embedded round trip.
//!
//! Every output file starts with the fully resolved configuration as
//! `# `-prefixed TOML between `# config:` and `# end-config` markers, and
//! such a file can itself be passed back via `--config` to reproduce the
//! run.

use std::f64::consts::PI;
use std::path::Path;

use esrsim::{AmplitudeMode, B1Distribution, EnsembleSpec, ErrorScope, Lineshape, SequenceElement};
use serde::{Deserialize, Serialize};

use crate::experiments::CliError;

pub const FAST_RABI_MHZ: f64 = 38.46;
pub const SLOW_RABI_MHZ: f64 = 1.16;
pub const DEFAULT_TAU_NS: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig2,
    Fig3,
    /// All three fig4 outputs.
    Fig4,
    Fig4a,
    Fig4b,
    Fig4c,
    Custom,
}

impl ExperimentId {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig4a => "fig4a",
            ExperimentId::Fig4b => "fig4b",
            ExperimentId::Fig4c => "fig4c",
            ExperimentId::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    pub rabi_mhz: f64,
    pub tau_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionParams {
    pub half_width_ns: f64,
    pub amplitude_mode: AmplitudeMode,
    /// Grid step; 0.1 ns is the hardware resolution, halved values are a
    /// convergence diagnostic.
    pub dt_ns: f64,
}

impl Default for AcquisitionParams {
    fn default() -> Self {
        Self {
            half_width_ns: 100.0,
            amplitude_mode: AmplitudeMode::MagnitudeIntegral,
            dt_ns: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorParams {
    pub enabled: bool,
    pub center_freq_ghz: f64,
    pub bandwidth_fwhm_mhz: f64,
    pub q_factor: f64,
    pub efficiency_mhz_per_sqrt_w: f64,
}

impl Default for ResonatorParams {
    fn default() -> Self {
        Self {
            enabled: false,
            center_freq_ghz: 17.06,
            bandwidth_fwhm_mhz: 255.0,
            q_factor: 66.0,
            efficiency_mhz_per_sqrt_w: 57.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Params {
    pub sigma_grid: Vec<f64>,
    pub error_scope: ErrorScope,
}

impl Default for Fig2Params {
    fn default() -> Self {
        Self {
            sigma_grid: (-4..=4).map(|k| k as f64 / 10.0).collect(),
            error_scope: ErrorScope::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Params {
    /// Total-angle grid in units of pi.
    pub angle_grid_pi: GridSpec,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Self {
            angle_grid_pi: GridSpec {
                start: 0.0,
                step: 0.125,
                stop: 5.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig4Params {
    pub offsets_mhz: Vec<f64>,
    /// Reference Gaussian FWHMs of the comb pi/2 and pi pulses.
    pub fwhm_half_ns: f64,
    pub fwhm_pi_ns: f64,
    /// Field-sweep grid for the line spectrum, MHz.
    pub sweep_mhz: GridSpec,
    /// Frequency grid for the echo spectrum, MHz.
    pub spectrum_mhz: GridSpec,
    /// Rabi-equivalent amplifier ceiling; a compiled comb exceeding it
    /// only logs a warning.
    pub amplifier_ceiling_mhz: f64,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Self {
            offsets_mhz: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            fwhm_half_ns: 203.0,
            fwhm_pi_ns: 401.7,
            sweep_mhz: GridSpec {
                start: -40.0,
                step: 1.0,
                stop: 40.0,
            },
            spectrum_mhz: GridSpec {
                start: -30.0,
                step: 0.25,
                stop: 30.0,
            },
            amplifier_ceiling_mhz: FAST_RABI_MHZ,
        }
    }
}

/// Inclusive uniform grid `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if !(self.start.is_finite() && self.step.is_finite() && self.stop.is_finite())
            || self.step <= 0.0
            || self.stop < self.start
        {
            return Err(CliError::Config(format!(
                "invalid grid {}:{}:{}",
                self.start, self.step, self.stop
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub experiment: ExperimentId,
    /// Reserved for stochastic sampling modes; the quadrature ensemble is
    /// deterministic, so this only documents the run.
    pub seed: u64,
    pub out: Option<String>,
    pub pulse: Option<PulseParams>,
    pub ensemble: Option<EnsembleSpec>,
    pub acquisition: AcquisitionParams,
    pub resonator: ResonatorParams,
    pub fig2: Fig2Params,
    pub fig3: Fig3Params,
    pub fig4: Fig4Params,
    /// Explicit pulse program for `custom` runs and `export`.
    pub sequence: Option<Vec<SequenceElement>>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            experiment: ExperimentId::Fig2,
            seed: 0,
            out: None,
            pulse: None,
            ensemble: None,
            acquisition: AcquisitionParams::default(),
            resonator: ResonatorParams::default(),
            fig2: Fig2Params::default(),
            fig3: Fig3Params::default(),
            fig4: Fig4Params::default(),
            sequence: None,
        }
    }
}

fn default_pulse(id: ExperimentId) -> PulseParams {
    let rabi_mhz = match id {
        ExperimentId::Fig4 | ExperimentId::Fig4a | ExperimentId::Fig4b | ExperimentId::Fig4c => {
            SLOW_RABI_MHZ
        }
        _ => FAST_RABI_MHZ,
    };
    PulseParams {
        rabi_mhz,
        tau_ns: DEFAULT_TAU_NS,
    }
}

fn default_ensemble(id: ExperimentId) -> EnsembleSpec {
    match id {
        ExperimentId::Fig3 => EnsembleSpec {
            lineshape: Lineshape::Gaussian { fwhm_mhz: 9.35 },
            n_packets: 101,
            b1: B1Distribution::Gaussian {
                relative_sd: 0.05,
                n_grid: 19,
            },
            t1_ns: f64::INFINITY,
            t2_ns: f64::INFINITY,
        },
        ExperimentId::Fig4 | ExperimentId::Fig4a | ExperimentId::Fig4b | ExperimentId::Fig4c => {
            EnsembleSpec {
                lineshape: Lineshape::Gaussian { fwhm_mhz: 40.0 },
                n_packets: 801,
                b1: B1Distribution::Delta,
                t1_ns: 1e6,
                t2_ns: 2000.0,
            }
        }
        _ => EnsembleSpec {
            lineshape: Lineshape::Gaussian { fwhm_mhz: 9.35 },
            n_packets: 1001,
            b1: B1Distribution::Delta,
            t1_ns: 1e6,
            t2_ns: 200.0,
        },
    }
}

impl Config {
    /// Fill every experiment-dependent optional with its default so the
    /// serialized form is complete.
    pub fn resolve(mut self) -> Self {
        if self.pulse.is_none() {
            self.pulse = Some(default_pulse(self.experiment));
        }
        if self.ensemble.is_none() {
            self.ensemble = Some(default_ensemble(self.experiment));
        }
        if self.out.is_none() {
            self.out = Some(format!("{}.csv", self.experiment.name()));
        }
        self
    }

    pub fn pulse(&self) -> &PulseParams {
        self.pulse.as_ref().expect("config not resolved")
    }

    pub fn ensemble(&self) -> &EnsembleSpec {
        self.ensemble.as_ref().expect("config not resolved")
    }

    pub fn out_path(&self) -> &str {
        self.out.as_deref().expect("config not resolved")
    }

    /// Parse a TOML config file, or the `# `-prefixed header of a previous
    /// output file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(CliError::Io)?;
        let toml_text = if text.starts_with('#') {
            extract_header(&text).ok_or_else(|| {
                CliError::Config(format!(
                    "{}: no config header found",
                    path.as_ref().display()
                ))
            })?
        } else {
            text
        };
        toml::from_str(&toml_text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_header(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        let mut out = String::from("# config:\n");
        for line in body.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str("# end-config\n");
        out
    }
}

fn extract_header(text: &str) -> Option<String> {
    let mut in_config = false;
    let mut body = String::new();
    for line in text.lines() {
        if line.trim() == "# config:" {
            in_config = true;
            continue;
        }
        if line.trim() == "# end-config" {
            return Some(body);
        }
        if in_config {
            let stripped = line.strip_prefix("# ").or_else(|| line.strip_prefix('#'))?;
            body.push_str(stripped);
            body.push('\n');
        }
    }
    None
}

/// Parse a numeric grid flag: either `start:step:stop` or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |t: &str| CliError::Config(format!("cannot parse grid '{t}'"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(text));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(text))?;
        GridSpec {
            start: nums[0],
            step: nums[1],
            stop: nums[2],
        }
        .points()
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(text)))
            .collect()
    }
}

/// Total nutation angles (rad) of the fig3 grid.
pub fn fig3_angles(cfg: &Config) -> Result<Vec<f64>, CliError> {
    Ok(cfg
        .fig3
        .angle_grid_pi
        .points()?
        .into_iter()
        .map(|a| a * PI)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_differ_per_experiment() {
        let fig2 = Config {
            experiment: ExperimentId::Fig2,
            ..Config::default()
        }
        .resolve();
        let fig4 = Config {
            experiment: ExperimentId::Fig4b,
            ..Config::default()
        }
        .resolve();
        assert_eq!(fig2.pulse().rabi_mhz, FAST_RABI_MHZ);
        assert_eq!(fig4.pulse().rabi_mhz, SLOW_RABI_MHZ);
        assert_eq!(fig2.ensemble().t2_ns, 200.0);
    }

    #[test]
    fn header_roundtrip_is_lossless() {
        let cfg = Config {
            experiment: ExperimentId::Fig3,
            seed: 7,
            ..Config::default()
        }
        .resolve();
        let header = cfg.to_header();
        let body = extract_header(&header).unwrap();
        let parsed: Config = toml::from_str(&body).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        let g = parse_grid("-0.4:0.1:0.4").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[0] + 0.4).abs() < 1e-12);
        assert!((g[8] - 0.4).abs() < 1e-12);
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("0:0:1").is_err());
        // A span that is not a multiple of the step must not overshoot.
        let g = parse_grid("0:0.4:1").unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.last().unwrap() <= &1.0);
    }

    #[test]
    fn sigma_grid_default_includes_zero() {
        let cfg = Config::default();
        assert!(cfg.fig2.sigma_grid.contains(&0.0));
        assert_eq!(cfg.fig2.sigma_grid.len(), 9);
    }
}
