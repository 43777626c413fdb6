//! Symbolic pulse programs and their compilation to complex baseband IQ
//! waveforms on the spectrometer grid.
//!
//! Everything is complex baseband: waveform samples carry the drive as a Rabi
//! frequency in MHz (`re` = x component, `im` = y component). The carrier is
//! implicit; a tone's `offset_mhz` is drive frequency minus carrier. Tone
//! phases are evaluated in absolute time from sequence start so that all
//! tones of a program stay mutually phase coherent across segments.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectrometer waveform resolution in ns.
pub const DT_NS: f64 = 0.1;

/// MHz * ns -> cycles.
pub(crate) const MHZ_NS_TO_CYCLES: f64 = 1e-3;

/// FWHM of a unit-variance Gaussian: `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Pulse envelope shape. Amplitudes are relative to the segment peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    Rectangular {
        duration_ns: f64,
    },
    /// Gaussian truncated symmetrically to `truncation_ns`; the envelope is
    /// nonzero on `[0, truncation_ns]` with its peak at the midpoint.
    Gaussian {
        fwhm_ns: f64,
        truncation_ns: f64,
    },
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Envelope::Rectangular { duration_ns } => {
                if !duration_ns.is_finite() || duration_ns < 0.0 {
                    return Err(Error::invalid("duration_ns", "must be finite and >= 0"));
                }
            }
            Envelope::Gaussian {
                fwhm_ns,
                truncation_ns,
            } => {
                if !fwhm_ns.is_finite() || fwhm_ns <= 0.0 {
                    return Err(Error::invalid("fwhm_ns", "must be finite and > 0"));
                }
                if !truncation_ns.is_finite() || truncation_ns < 2.0 * fwhm_ns {
                    return Err(Error::invalid("truncation_ns", "must be >= 2 x fwhm"));
                }
            }
        }
        Ok(())
    }

    /// Occupied time on the sequence timeline.
    pub fn duration_ns(&self) -> f64 {
        match *self {
            Envelope::Rectangular { duration_ns } => duration_ns,
            Envelope::Gaussian { truncation_ns, .. } => truncation_ns,
        }
    }

    /// Unit-peak amplitude at local time `t` in `[0, duration]`.
    pub fn value(&self, t_ns: f64) -> f64 {
        match *self {
            Envelope::Rectangular { .. } => 1.0,
            Envelope::Gaussian {
                fwhm_ns,
                truncation_ns,
            } => {
                let sigma = fwhm_ns / FWHM_PER_SIGMA;
                let x = (t_ns - 0.5 * truncation_ns) / sigma;
                (-0.5 * x * x).exp()
            }
        }
    }

    /// Analytic time integral of the unit-peak envelope, in ns.
    pub fn area_ns(&self) -> f64 {
        match *self {
            Envelope::Rectangular { duration_ns } => duration_ns,
            Envelope::Gaussian {
                fwhm_ns,
                truncation_ns,
            } => {
                let sigma = fwhm_ns / FWHM_PER_SIGMA;
                let h = 0.5 * truncation_ns;
                sigma * (2.0 * PI).sqrt() * libm::erf(h / (sigma * std::f64::consts::SQRT_2))
            }
        }
    }
}

/// One shaped tone: envelope, peak Rabi frequency, carrier-relative offset,
/// phase and a multiplicative amplitude error factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub envelope: Envelope,
    /// omega_1 / 2 pi at the envelope peak, MHz.
    pub peak_rabi_mhz: f64,
    /// Axis phase of the rotation, rad.
    pub phase_rad: f64,
    /// Drive frequency minus carrier, MHz.
    pub offset_mhz: f64,
    /// `1 + sigma` error factor applied to the amplitude; 1 when error free.
    pub amplitude_scale: f64,
}

impl PulseSegment {
    pub fn new(
        envelope: Envelope,
        peak_rabi_mhz: f64,
        phase_rad: f64,
        offset_mhz: f64,
    ) -> Result<Self> {
        envelope.validate()?;
        if !peak_rabi_mhz.is_finite() || peak_rabi_mhz < 0.0 {
            return Err(Error::invalid("peak_rabi_mhz", "must be finite and >= 0"));
        }
        if !phase_rad.is_finite() {
            return Err(Error::NonFinite("phase_rad"));
        }
        if !offset_mhz.is_finite() {
            return Err(Error::NonFinite("offset_mhz"));
        }
        Ok(Self {
            envelope,
            peak_rabi_mhz,
            phase_rad,
            offset_mhz,
            amplitude_scale: 1.0,
        })
    }

    pub fn duration_ns(&self) -> f64 {
        self.envelope.duration_ns()
    }

    /// Nominal rotation angle `2 pi * scale * rabi * area`, rad.
    pub fn nominal_angle_rad(&self) -> f64 {
        2.0 * PI
            * self.amplitude_scale
            * self.peak_rabi_mhz
            * self.envelope.area_ns()
            * MHZ_NS_TO_CYCLES
    }
}

/// Several identically shaped tones sharing one time window, compiled as the
/// complex sum of the single-tone waveforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombPulse {
    pub base: PulseSegment,
    pub offsets_mhz: Vec<f64>,
}

/// One element of a pulse program; list order is time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SequenceElement {
    Pulse(PulseSegment),
    Comb(CombPulse),
    Delay {
        duration_ns: f64,
    },
    /// Zero-duration acquisition marker. The echo integration window is
    /// centered `center_offset_ns` after the marker position.
    Acquire {
        half_width_ns: f64,
        center_offset_ns: f64,
    },
}

impl SequenceElement {
    pub fn duration_ns(&self) -> f64 {
        match self {
            SequenceElement::Pulse(p) => p.duration_ns(),
            SequenceElement::Comb(c) => c.base.duration_ns(),
            SequenceElement::Delay { duration_ns } => *duration_ns,
            SequenceElement::Acquire { .. } => 0.0,
        }
    }
}

/// A time-ordered pulse program.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    pub elements: Vec<SequenceElement>,
}

impl PulseSequence {
    pub fn new(elements: Vec<SequenceElement>) -> Self {
        Self { elements }
    }

    pub fn total_duration_ns(&self) -> f64 {
        self.elements.iter().map(|e| e.duration_ns()).sum()
    }

    pub fn push(&mut self, element: SequenceElement) {
        self.elements.push(element);
    }

    pub fn push_delay(&mut self, duration_ns: f64) {
        self.elements.push(SequenceElement::Delay { duration_ns });
    }
}

/// Which pulses of a sequence an operation applies to. Indices count pulse
/// and comb elements only, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseSelector {
    All,
    Index(usize),
}

/// Complex baseband drive sampled on a fixed grid. `re` and `im` are the x
/// and y drive components in Rabi MHz. Sample `k` covers
/// `[k dt, (k+1) dt)`; envelope and tone phase are evaluated at the interval
/// midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub dt_ns: f64,
    pub samples: Vec<Complex64>,
}

impl SampledWaveform {
    pub fn duration_ns(&self) -> f64 {
        self.samples.len() as f64 * self.dt_ns
    }

    /// Peak magnitude of the complex drive, MHz.
    pub fn peak_mhz(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn rms_mhz(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Write the plain-text export format: one line per sample,
    /// tab-separated `time_ns I_MHz Q_MHz`, time from sequence start.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            let t = k as f64 * self.dt_ns;
            writeln!(w, "{t:.4}\t{:.5e}\t{:.5e}", s.re, s.im)?;
        }
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }
}

/// Rectangular rotation pulse of angle `theta` about the in-plane axis with
/// phase `phi`, at zero offset. Duration is `theta / (2 pi rabi)`.
pub fn rect_pulse(theta: f64, phi: f64, rabi_mhz: f64) -> Result<PulseSegment> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::invalid("theta", "must be finite and >= 0"));
    }
    if !rabi_mhz.is_finite() || rabi_mhz <= 0.0 {
        return Err(Error::invalid("rabi_mhz", "must be finite and > 0"));
    }
    let duration_ns = theta / (2.0 * PI * rabi_mhz) / MHZ_NS_TO_CYCLES;
    PulseSegment::new(Envelope::Rectangular { duration_ns }, rabi_mhz, phi, 0.0)
}

/// Gaussian rotation pulse calibrated against the equivalent rectangular
/// pulse: equal peak amplitude and equal time-integrated area.
///
/// The equal-area rule gives `FWHM = rect_duration * 2 sqrt(ln 2 / pi)`. The
/// envelope is truncated at 3 x FWHM and its width is then widened by the
/// ~0.04% needed for the truncated area to match the untruncated target, so
/// the nominal angle is exact while the peak stays at `rabi`.
pub fn gaussian_pulse(theta: f64, phi: f64, rabi_mhz: f64) -> Result<PulseSegment> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::invalid("theta", "must be finite and > 0"));
    }
    if !rabi_mhz.is_finite() || rabi_mhz <= 0.0 {
        return Err(Error::invalid("rabi_mhz", "must be finite and > 0"));
    }
    let rect_duration = theta / (2.0 * PI * rabi_mhz) / MHZ_NS_TO_CYCLES;
    let sigma0 = rect_duration / (2.0 * PI).sqrt();
    let truncation_ns = 3.0 * FWHM_PER_SIGMA * sigma0;
    let h = 0.5 * truncation_ns / std::f64::consts::SQRT_2;
    let mut sigma = sigma0;
    for _ in 0..50 {
        let next = sigma0 / libm::erf(h / sigma);
        if (next - sigma).abs() <= f64::EPSILON * sigma {
            sigma = next;
            break;
        }
        sigma = next;
    }
    PulseSegment::new(
        Envelope::Gaussian {
            fwhm_ns: FWHM_PER_SIGMA * sigma,
            truncation_ns,
        },
        rabi_mhz,
        phi,
        0.0,
    )
}

/// Superpose several copies of `base` at the given offset frequencies. The
/// compiled waveform is `sum_k A(t) exp(i (2 pi f_k t + phi))`.
pub fn comb_superpose(base: PulseSegment, offsets_mhz: Vec<f64>) -> Result<CombPulse> {
    if offsets_mhz.is_empty() {
        return Err(Error::Empty("offset list"));
    }
    for f in &offsets_mhz {
        if !f.is_finite() {
            return Err(Error::NonFinite("offset_mhz"));
        }
    }
    for i in 0..offsets_mhz.len() {
        for j in (i + 1)..offsets_mhz.len() {
            if offsets_mhz[i] == offsets_mhz[j] {
                return Err(Error::invalid(
                    "offsets_mhz",
                    format!("duplicate offset {} MHz", offsets_mhz[i]),
                ));
            }
        }
    }
    Ok(CombPulse { base, offsets_mhz })
}

/// Multiply the amplitude of the selected pulses by `1 + sigma`. Durations
/// are unchanged; the pulse-length error is realized as an amplitude
/// deviation.
pub fn inject_amplitude_error(
    seq: &PulseSequence,
    sigma: f64,
    selector: PulseSelector,
) -> Result<PulseSequence> {
    if !sigma.is_finite() || sigma <= -1.0 {
        return Err(Error::invalid("sigma", "must be finite and > -1"));
    }
    let mut out = seq.clone();
    let mut pulse_index = 0usize;
    let mut hit = false;
    for element in &mut out.elements {
        let scale = match element {
            SequenceElement::Pulse(p) => Some(&mut p.amplitude_scale),
            SequenceElement::Comb(c) => Some(&mut c.base.amplitude_scale),
            _ => None,
        };
        if let Some(scale) = scale {
            let selected = match selector {
                PulseSelector::All => true,
                PulseSelector::Index(i) => i == pulse_index,
            };
            if selected {
                *scale *= 1.0 + sigma;
                hit = true;
            }
            pulse_index += 1;
        }
    }
    if !hit {
        return Err(Error::invalid("selector", "no pulse matched"));
    }
    Ok(out)
}

/// Number of grid steps occupied by a duration.
pub(crate) fn steps_for(duration_ns: f64, dt_ns: f64) -> usize {
    (duration_ns / dt_ns).round() as usize
}

pub(crate) fn sample_pulse(
    base: &PulseSegment,
    offsets_mhz: &[f64],
    start_step: usize,
    dt_ns: f64,
) -> Vec<Complex64> {
    let n = steps_for(base.duration_ns(), dt_ns);
    let amp = base.amplitude_scale * base.peak_rabi_mhz;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t_local = (k as f64 + 0.5) * dt_ns;
        let t_abs = (start_step + k) as f64 * dt_ns + 0.5 * dt_ns;
        let a = amp * base.envelope.value(t_local);
        let mut s = Complex64::new(0.0, 0.0);
        for &f in offsets_mhz {
            let phase = 2.0 * PI * f * MHZ_NS_TO_CYCLES * t_abs + base.phase_rad;
            s += Complex64::from_polar(a, phase);
        }
        out.push(s);
    }
    out
}

/// Compile a sequence to IQ samples on the `dt` grid. Segment sample counts
/// are `round(duration / dt)`; delays are zero filled; acquisition markers
/// occupy no samples.
pub fn compile_with_dt(seq: &PulseSequence, dt_ns: f64) -> Result<SampledWaveform> {
    if !dt_ns.is_finite() || dt_ns <= 0.0 {
        return Err(Error::invalid("dt_ns", "must be finite and > 0"));
    }
    if seq.elements.is_empty() {
        return Err(Error::Empty("pulse sequence"));
    }
    let mut samples: Vec<Complex64> = Vec::new();
    for element in &seq.elements {
        match element {
            SequenceElement::Pulse(p) => {
                samples.extend(sample_pulse(p, &[p.offset_mhz], samples.len(), dt_ns));
            }
            SequenceElement::Comb(c) => {
                samples.extend(sample_pulse(&c.base, &c.offsets_mhz, samples.len(), dt_ns));
            }
            SequenceElement::Delay { duration_ns } => {
                let n = steps_for(*duration_ns, dt_ns);
                samples.resize(samples.len() + n, Complex64::new(0.0, 0.0));
            }
            SequenceElement::Acquire { .. } => {}
        }
    }
    Ok(SampledWaveform { dt_ns, samples })
}

/// Compile on the standard 0.1 ns spectrometer grid.
pub fn compile(seq: &PulseSequence) -> Result<SampledWaveform> {
    compile_with_dt(seq, DT_NS)
}

/// Discrete-time Fourier transform of complex samples at selected
/// frequencies: `S(f) = dt * sum_k s_k exp(-2 pi i f (t0 + k dt))`.
pub fn dft_at(samples: &[Complex64], dt_ns: f64, t0_ns: f64, freqs_mhz: &[f64]) -> Vec<Complex64> {
    freqs_mhz
        .iter()
        .map(|&f| {
            let w = -2.0 * PI * f * MHZ_NS_TO_CYCLES * dt_ns;
            let step = Complex64::from_polar(1.0, w);
            let mut phase = Complex64::from_polar(1.0, -2.0 * PI * f * MHZ_NS_TO_CYCLES * t0_ns);
            let mut acc = Complex64::new(0.0, 0.0);
            for s in samples {
                acc += s * phase;
                phase *= step;
            }
            acc * dt_ns
        })
        .collect()
}
