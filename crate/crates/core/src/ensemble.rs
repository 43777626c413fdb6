//! Inhomogeneously broadened spin-1/2 ensembles and the time-domain echo,
//! nutation and field-sweep experiments built on them.
//!
//! The ensemble is a deterministic quadrature discretization of the
//! lineshape: packets sit at equally spaced detunings with weights
//! proportional to the density, optionally tensor-multiplied with a grid
//! over the drive-strength (B1) distribution. Packet evolutions are
//! independent; the weighted average is accumulated in fixed packet-index
//! chunks so results do not depend on the parallel schedule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composite::nutation_sequence;
use crate::error::{Error, Result};
use crate::integrator::{evolve_trace, evolve_trajectory, AcquireMarker, Timeline};
use crate::pulse::{dft_at, PulseSequence, SampledWaveform, DT_NS, FWHM_PER_SIGMA};
use crate::su2::BlochVector;

/// Packets narrower than this trip a resolution warning.
const MIN_RESOLVED_PACKETS: usize = 11;

/// Fixed reduction chunk so the ensemble average is schedule independent.
const REDUCE_CHUNK: usize = 64;

/// One member of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinPacket {
    /// Offset of the packet Larmor frequency from the carrier, MHz.
    pub detuning_mhz: f64,
    /// Local drive-strength multiplier.
    pub b1_scale: f64,
    /// Quadrature weight; ensemble weights sum to 1.
    pub weight: f64,
    pub t1_ns: f64,
    pub t2_ns: f64,
}

impl SpinPacket {
    pub fn new(
        detuning_mhz: f64,
        b1_scale: f64,
        weight: f64,
        t1_ns: f64,
        t2_ns: f64,
    ) -> Result<Self> {
        if !detuning_mhz.is_finite() {
            return Err(Error::NonFinite("detuning_mhz"));
        }
        if !b1_scale.is_finite() || b1_scale < 0.0 {
            return Err(Error::invalid("b1_scale", "must be finite and >= 0"));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::invalid("weight", "must be finite and >= 0"));
        }
        if t1_ns.is_nan() || t1_ns <= 0.0 {
            return Err(Error::invalid("t1_ns", "must be > 0"));
        }
        if t2_ns.is_nan() || t2_ns <= 0.0 {
            return Err(Error::invalid("t2_ns", "must be > 0"));
        }
        if 2.0 * t1_ns < t2_ns {
            return Err(Error::invalid("t2_ns", "requires 2 t1 >= t2"));
        }
        Ok(Self {
            detuning_mhz,
            b1_scale,
            weight,
            t1_ns,
            t2_ns,
        })
    }
}

/// Detuning distribution of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Lineshape {
    Gaussian {
        fwhm_mhz: f64,
    },
    Lorentzian {
        fwhm_mhz: f64,
    },
    /// Explicit `(detuning_mhz, weight)` pairs; weights are normalized.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

/// Drive-strength inhomogeneity across the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum B1Distribution {
    Delta,
    Gaussian {
        relative_sd: f64,
        #[serde(default = "default_b1_grid")]
        n_grid: usize,
    },
}

fn default_b1_grid() -> usize {
    19
}

/// Statistical description of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub lineshape: Lineshape,
    /// Number of detuning grid points.
    pub n_packets: usize,
    pub b1: B1Distribution,
    pub t1_ns: f64,
    pub t2_ns: f64,
}

impl EnsembleSpec {
    /// Single packet on resonance, no inhomogeneity.
    pub fn single(t1_ns: f64, t2_ns: f64) -> Self {
        EnsembleSpec {
            lineshape: Lineshape::Tabulated {
                points: vec![(0.0, 1.0)],
            },
            n_packets: 1,
            b1: B1Distribution::Delta,
            t1_ns,
            t2_ns,
        }
    }
}

/// How the scalar echo amplitude is reduced from the complex trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// `|mean of (mx + i my)|` over the window.
    #[default]
    MagnitudeIntegral,
    /// Signed mean of the in-phase (+y) component.
    InPhase,
}

/// Ensemble-averaged transverse magnetization around the echo.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoTrace {
    pub dt_ns: f64,
    /// Absolute time of the first sample, ns from sequence start.
    pub start_time_ns: f64,
    /// `<mx + i my>` ensemble average per grid point.
    pub samples: Vec<Complex64>,
    pub echo_amplitude: f64,
    pub amplitude_mode: AmplitudeMode,
    /// Nominal echo center the window was placed around.
    pub window_center_ns: f64,
}

impl EchoTrace {
    /// Spectrum of the trace at selected frequencies, with the phase origin
    /// at the window center.
    pub fn spectrum(&self, freqs_mhz: &[f64]) -> Vec<Complex64> {
        dft_at(
            &self.samples,
            self.dt_ns,
            self.start_time_ns - self.window_center_ns,
            freqs_mhz,
        )
    }
}

fn uniform_grid(center: f64, half_span: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center];
    }
    let step = 2.0 * half_span / (n - 1) as f64;
    (0..n)
        .map(|i| center - half_span + i as f64 * step)
        .collect()
}

fn normalized(mut points: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    let total: f64 = points.iter().map(|(_, w)| *w).sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::invalid("weights", "must sum to a positive value"));
    }
    for (_, w) in &mut points {
        *w /= total;
    }
    Ok(points)
}

/// Discretize an ensemble spec into weighted packets (weights sum to 1).
///
/// Gaussian lines are gridded over +-3 FWHM, Lorentzian over +-8 FWHM. A
/// non-delta B1 distribution is gridded the same way on a secondary axis and
/// combined as a tensor product.
pub fn build_ensemble(spec: &EnsembleSpec) -> Result<Vec<SpinPacket>> {
    if spec.n_packets == 0 {
        return Err(Error::invalid("n_packets", "must be >= 1"));
    }
    if spec.n_packets < MIN_RESOLVED_PACKETS
        && !matches!(spec.lineshape, Lineshape::Tabulated { .. })
    {
        log::warn!(
            "n_packets = {} may be too coarse to resolve the drive bandwidth (< {})",
            spec.n_packets,
            MIN_RESOLVED_PACKETS
        );
    }

    let detunings: Vec<(f64, f64)> = match &spec.lineshape {
        Lineshape::Gaussian { fwhm_mhz } => {
            if !fwhm_mhz.is_finite() || *fwhm_mhz <= 0.0 {
                return Err(Error::invalid("fwhm_mhz", "must be finite and > 0"));
            }
            let pts = uniform_grid(0.0, 3.0 * fwhm_mhz, spec.n_packets)
                .into_iter()
                .map(|x| {
                    let u = x / fwhm_mhz;
                    (x, (-4.0 * std::f64::consts::LN_2 * u * u).exp())
                })
                .collect();
            normalized(pts)?
        }
        Lineshape::Lorentzian { fwhm_mhz } => {
            if !fwhm_mhz.is_finite() || *fwhm_mhz <= 0.0 {
                return Err(Error::invalid("fwhm_mhz", "must be finite and > 0"));
            }
            let pts = uniform_grid(0.0, 8.0 * fwhm_mhz, spec.n_packets)
                .into_iter()
                .map(|x| {
                    let u = 2.0 * x / fwhm_mhz;
                    (x, 1.0 / (1.0 + u * u))
                })
                .collect();
            normalized(pts)?
        }
        Lineshape::Tabulated { points } => {
            if points.is_empty() {
                return Err(Error::Empty("tabulated lineshape"));
            }
            for (x, w) in points {
                if !x.is_finite() || !w.is_finite() || *w < 0.0 {
                    return Err(Error::invalid(
                        "points",
                        "entries must be finite, weight >= 0",
                    ));
                }
            }
            normalized(points.clone())?
        }
    };

    let b1_grid: Vec<(f64, f64)> = match &spec.b1 {
        B1Distribution::Delta => vec![(1.0, 1.0)],
        B1Distribution::Gaussian {
            relative_sd,
            n_grid,
        } => {
            if !relative_sd.is_finite() || *relative_sd < 0.0 {
                return Err(Error::invalid("relative_sd", "must be finite and >= 0"));
            }
            if *relative_sd == 0.0 || *n_grid <= 1 {
                vec![(1.0, 1.0)]
            } else {
                let half_span = 3.0 * FWHM_PER_SIGMA * relative_sd;
                let pts = uniform_grid(1.0, half_span, *n_grid)
                    .into_iter()
                    .map(|b| {
                        let u = (b - 1.0) / relative_sd;
                        (b.max(0.0), (-0.5 * u * u).exp())
                    })
                    .collect();
                normalized(pts)?
            }
        }
    };

    let mut packets = Vec::with_capacity(detunings.len() * b1_grid.len());
    for &(delta, wd) in &detunings {
        for &(b1, wb) in &b1_grid {
            packets.push(SpinPacket::new(delta, b1, wd * wb, spec.t1_ns, spec.t2_ns)?);
        }
    }
    Ok(packets)
}

/// Integrate one packet through a sampled waveform from `initial`; returns
/// the Bloch trajectory at every grid boundary (`len = samples + 1`).
pub fn evolve_packet(
    packet: &SpinPacket,
    waveform: &SampledWaveform,
    initial: BlochVector,
) -> Result<Vec<BlochVector>> {
    if waveform
        .samples
        .iter()
        .any(|s| !s.re.is_finite() || !s.im.is_finite())
    {
        return Err(Error::NonFinite("waveform sample"));
    }
    if !waveform.dt_ns.is_finite() || waveform.dt_ns <= 0.0 {
        return Err(Error::invalid("dt_ns", "must be finite and > 0"));
    }
    let timeline = Timeline::from_waveform(waveform);
    let traj = evolve_trajectory(packet, &timeline, [initial.x, initial.y, initial.z]);
    Ok(traj
        .into_iter()
        .map(|m| BlochVector::new(m[0], m[1], m[2]))
        .collect())
}

struct Window {
    rec_start: usize,
    rec_count: usize,
    start_time_ns: f64,
    center_ns: f64,
}

fn acquisition_window(marker: &AcquireMarker, dt_ns: f64) -> Result<Window> {
    let center = marker.time_ns + marker.center_offset_ns;
    let first = ((center - marker.half_width_ns) / dt_ns).round() as i64;
    if first < 0 {
        return Err(Error::invalid(
            "acquisition window",
            "window starts before the sequence",
        ));
    }
    let count = (2.0 * marker.half_width_ns / dt_ns).round() as usize + 1;
    Ok(Window {
        rec_start: first as usize,
        rec_count: count,
        start_time_ns: first as f64 * dt_ns,
        center_ns: center,
    })
}

fn average_trace(
    timeline: &Timeline,
    window: &Window,
    packets: &[SpinPacket],
    mode: AmplitudeMode,
) -> EchoTrace {
    let initial = [0.0, 0.0, 1.0];
    let partials: Vec<Vec<Complex64>> = packets
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); window.rec_count];
            for p in chunk {
                let trace = evolve_trace(p, timeline, initial, window.rec_start, window.rec_count);
                for (a, t) in acc.iter_mut().zip(&trace) {
                    *a += p.weight * t;
                }
            }
            acc
        })
        .collect();

    let mut samples = vec![Complex64::new(0.0, 0.0); window.rec_count];
    for partial in partials {
        for (a, t) in samples.iter_mut().zip(&partial) {
            *a += t;
        }
    }

    // Trapezoid window average: half-weight endpoints keep the reduction
    // second-order accurate in the grid step.
    let mean = if samples.len() == 1 {
        samples[0]
    } else {
        let sum = samples.iter().sum::<Complex64>();
        (sum - 0.5 * (samples[0] + samples[samples.len() - 1])) / (samples.len() - 1) as f64
    };
    let echo_amplitude = match mode {
        AmplitudeMode::MagnitudeIntegral => mean.norm(),
        AmplitudeMode::InPhase => mean.im,
    };
    EchoTrace {
        dt_ns: timeline.dt_ns,
        start_time_ns: window.start_time_ns,
        samples,
        echo_amplitude,
        amplitude_mode: mode,
        window_center_ns: window.center_ns,
    }
}

/// Simulate a spin echo: compile the sequence, evolve every packet from
/// thermal equilibrium and average the transverse magnetization over the
/// acquisition window.
pub fn simulate_echo(seq: &PulseSequence, spec: &EnsembleSpec) -> Result<EchoTrace> {
    simulate_echo_with(seq, spec, DT_NS, AmplitudeMode::default())
}

/// [`simulate_echo`] with an explicit grid step (diagnostic, e.g. dt
/// halving) and amplitude mode.
pub fn simulate_echo_with(
    seq: &PulseSequence,
    spec: &EnsembleSpec,
    dt_ns: f64,
    mode: AmplitudeMode,
) -> Result<EchoTrace> {
    let packets = build_ensemble(spec)?;
    simulate_echo_packets(seq, &packets, dt_ns, mode)
}

/// Echo simulation over explicit packets.
pub fn simulate_echo_packets(
    seq: &PulseSequence,
    packets: &[SpinPacket],
    dt_ns: f64,
    mode: AmplitudeMode,
) -> Result<EchoTrace> {
    let (timeline, marker) = Timeline::from_sequence(seq, dt_ns)?;
    let marker = marker.ok_or(Error::MissingElement("acquisition marker"))?;
    let window = acquisition_window(&marker, dt_ns)?;
    Ok(average_trace(&timeline, &window, packets, mode))
}

/// Acquisition marker of a sequence, as realized on the sampling grid:
/// `(marker time ns, half width ns, center offset ns)`.
pub fn acquisition_marker(seq: &PulseSequence, dt_ns: f64) -> Result<(f64, f64, f64)> {
    let (_, marker) = Timeline::from_sequence(seq, dt_ns)?;
    let m = marker.ok_or(Error::MissingElement("acquisition marker"))?;
    Ok((m.time_ns, m.half_width_ns, m.center_offset_ns))
}

/// Echo simulation directly on a sampled waveform (e.g. after resonator
/// filtering), with the acquisition window given explicitly as
/// `(marker time, half width, center offset)` in ns.
pub fn simulate_echo_on_waveform(
    w: &SampledWaveform,
    marker: (f64, f64, f64),
    packets: &[SpinPacket],
    mode: AmplitudeMode,
) -> Result<EchoTrace> {
    let timeline = Timeline::from_waveform(w);
    let window = acquisition_window(
        &AcquireMarker {
            time_ns: marker.0,
            half_width_ns: marker.1,
            center_offset_ns: marker.2,
        },
        w.dt_ns,
    )?;
    Ok(average_trace(&timeline, &window, packets, mode))
}

/// Echo amplitude versus total nutation angle, in plain or BB1 mode. Each
/// grid angle `alpha` is realized as `theta + 4 pi n_pad` with
/// `theta in [0, 4 pi)`.
pub fn nutation_curve(
    total_angles: &[f64],
    spec: &EnsembleSpec,
    use_bb1: bool,
    rabi_mhz: f64,
    tau_ns: f64,
) -> Result<Vec<(f64, f64)>> {
    let packets = build_ensemble(spec)?;
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(total_angles.len());
    for &alpha in total_angles {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::invalid("total_angle", "must be finite and >= 0"));
        }
        let n_pad = (alpha / four_pi).floor() as usize;
        let theta = (alpha - four_pi * n_pad as f64).max(0.0);
        let seq = nutation_sequence(theta, n_pad, rabi_mhz, tau_ns, use_bb1)?;
        let trace = simulate_echo_packets(&seq, &packets, DT_NS, AmplitudeMode::default())?;
        out.push((alpha, trace.echo_amplitude));
    }
    Ok(out)
}

/// Echo amplitude versus a uniform detuning shift of the whole ensemble
/// (a field sweep is equivalent to shifting every packet by the offset).
pub fn field_sweep_spectrum(
    seq: &PulseSequence,
    spec: &EnsembleSpec,
    sweep_offsets_mhz: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let packets = build_ensemble(spec)?;
    let (timeline, marker) = Timeline::from_sequence(seq, DT_NS)?;
    let marker = marker.ok_or(Error::MissingElement("acquisition marker"))?;
    let window = acquisition_window(&marker, DT_NS)?;
    let mut out = Vec::with_capacity(sweep_offsets_mhz.len());
    for &offset in sweep_offsets_mhz {
        if !offset.is_finite() {
            return Err(Error::NonFinite("sweep offset"));
        }
        let shifted: Vec<SpinPacket> = packets
            .iter()
            .map(|p| SpinPacket {
                detuning_mhz: p.detuning_mhz + offset,
                ..*p
            })
            .collect();
        let trace = average_trace(&timeline, &window, &shifted, AmplitudeMode::default());
        out.push((offset, trace.echo_amplitude));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::echo_sequence;
    use crate::pulse::{compile, rect_pulse, SequenceElement};
    use std::f64::consts::PI;

    const INF: f64 = f64::INFINITY;

    fn single_packet(detuning: f64) -> SpinPacket {
        SpinPacket::new(detuning, 1.0, 1.0, INF, INF).unwrap()
    }

    #[test]
    fn packet_validation() {
        assert!(SpinPacket::new(0.0, 1.0, 1.0, 1e6, 200.0).is_ok());
        assert!(SpinPacket::new(0.0, -0.1, 1.0, 1e6, 200.0).is_err());
        assert!(SpinPacket::new(0.0, 1.0, -1.0, 1e6, 200.0).is_err());
        assert!(SpinPacket::new(0.0, 1.0, 1.0, 0.0, 200.0).is_err());
        // Physicality: 2 t1 >= t2.
        assert!(SpinPacket::new(0.0, 1.0, 1.0, 50.0, 200.0).is_err());
        assert!(SpinPacket::new(0.0, 1.0, 1.0, 100.0, 200.0).is_ok());
    }

    #[test]
    fn tabulated_single_entry_gives_unit_weight() {
        let spec = EnsembleSpec {
            lineshape: Lineshape::Tabulated {
                points: vec![(3.0, 7.0)],
            },
            n_packets: 1,
            b1: B1Distribution::Delta,
            t1_ns: INF,
            t2_ns: INF,
        };
        let packets = build_ensemble(&spec).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].detuning_mhz, 3.0);
        assert_eq!(packets[0].weight, 1.0);
    }

    #[test]
    fn delta_b1_gives_unit_scale() {
        let spec = EnsembleSpec {
            lineshape: Lineshape::Lorentzian { fwhm_mhz: 2.0 },
            n_packets: 51,
            b1: B1Distribution::Delta,
            t1_ns: INF,
            t2_ns: INF,
        };
        for p in build_ensemble(&spec).unwrap() {
            assert_eq!(p.b1_scale, 1.0);
        }
    }

    #[test]
    fn gaussian_weights_match_density() {
        let fwhm = 9.35;
        let spec = EnsembleSpec {
            lineshape: Lineshape::Gaussian { fwhm_mhz: fwhm },
            n_packets: 1001,
            b1: B1Distribution::Delta,
            t1_ns: INF,
            t2_ns: INF,
        };
        let packets = build_ensemble(&spec).unwrap();
        assert_eq!(packets.len(), 1001);
        let sum: f64 = packets.iter().map(|p| p.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);

        // Against the analytic normalized density on the same grid: the
        // uniform-grid Riemann sum of a Gaussian with vanishing tails is
        // accurate to far better than the 1e-6 quadrature budget.
        let sigma = fwhm / FWHM_PER_SIGMA;
        let h = 6.0 * fwhm / 1000.0;
        let norm =
            sigma * (2.0 * PI).sqrt() * libm::erf(3.0 * fwhm / (sigma * std::f64::consts::SQRT_2));
        for p in &packets {
            let u = p.detuning_mhz / sigma;
            let expect = (-0.5 * u * u).exp() * h / norm;
            assert!(
                (p.weight - expect).abs() < 1e-6,
                "delta={} w={} expect={}",
                p.detuning_mhz,
                p.weight,
                expect
            );
        }
    }

    #[test]
    fn tensor_product_weights_sum_to_one() {
        let spec = EnsembleSpec {
            lineshape: Lineshape::Gaussian { fwhm_mhz: 9.35 },
            n_packets: 101,
            b1: B1Distribution::Gaussian {
                relative_sd: 0.05,
                n_grid: 19,
            },
            t1_ns: INF,
            t2_ns: INF,
        };
        let packets = build_ensemble(&spec).unwrap();
        assert_eq!(packets.len(), 101 * 19);
        let sum: f64 = packets.iter().map(|p| p.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_waveform_keeps_equilibrium() {
        let seq = PulseSequence::new(vec![SequenceElement::Delay { duration_ns: 25.0 }]);
        let w = compile(&seq).unwrap();
        let traj = evolve_packet(&single_packet(0.0), &w, BlochVector::equilibrium()).unwrap();
        for m in traj {
            assert_eq!((m.x, m.y, m.z), (0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn pi_pulse_inverts_packet() {
        let seq = PulseSequence::new(vec![SequenceElement::Pulse(
            rect_pulse(PI, 0.0, 38.46).unwrap(),
        )]);
        let w = compile(&seq).unwrap();
        let traj = evolve_packet(&single_packet(0.0), &w, BlochVector::equilibrium()).unwrap();
        let last = traj.last().unwrap();
        assert!((last.z + 1.0).abs() < 1e-6, "mz = {}", last.z);
    }

    #[test]
    fn free_precession_closed_form() {
        // 10 MHz for 25 ns is a quarter turn about z.
        let seq = PulseSequence::new(vec![SequenceElement::Delay { duration_ns: 25.0 }]);
        let w = compile(&seq).unwrap();
        let traj =
            evolve_packet(&single_packet(10.0), &w, BlochVector::new(1.0, 0.0, 0.0)).unwrap();
        let last = traj.last().unwrap();
        assert!(last.x.abs() < 1e-9);
        assert!((last.y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evolve_rejects_non_finite_waveform() {
        let w = SampledWaveform {
            dt_ns: DT_NS,
            samples: vec![Complex64::new(f64::NAN, 0.0)],
        };
        assert!(evolve_packet(&single_packet(0.0), &w, BlochVector::equilibrium()).is_err());
    }

    #[test]
    fn ideal_echo_amplitude_is_one() {
        let seq = echo_sequence(38.46, 300.0).unwrap();
        let trace = simulate_echo(&seq, &EnsembleSpec::single(INF, INF)).unwrap();
        assert!(
            (trace.echo_amplitude - 1.0).abs() < 1e-6,
            "amplitude {}",
            trace.echo_amplitude
        );
        for s in &trace.samples {
            assert!(s.norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn missing_marker_is_an_error() {
        let seq = PulseSequence::new(vec![SequenceElement::Pulse(
            rect_pulse(PI, 0.0, 38.46).unwrap(),
        )]);
        let err = simulate_echo(&seq, &EnsembleSpec::single(INF, INF));
        assert!(matches!(err, Err(Error::MissingElement(_))));
    }

    #[test]
    fn trace_linearity_in_weights() {
        let seq = echo_sequence(38.46, 300.0).unwrap();
        let p1 = SpinPacket::new(2.0, 1.0, 0.3, INF, INF).unwrap();
        let p2 = SpinPacket::new(-5.0, 1.0, 0.7, INF, INF).unwrap();
        let both = simulate_echo_packets(&seq, &[p1, p2], DT_NS, AmplitudeMode::default()).unwrap();
        let alone = |p: SpinPacket| {
            let solo = SpinPacket { weight: 1.0, ..p };
            simulate_echo_packets(&seq, &[solo], DT_NS, AmplitudeMode::default()).unwrap()
        };
        let t1 = alone(p1);
        let t2 = alone(p2);
        for ((s, a), b) in both.samples.iter().zip(&t1.samples).zip(&t2.samples) {
            assert!((s - (0.3 * a + 0.7 * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn detuning_shift_equivalence() {
        // A field sweep offset equals shifting every tabulated detuning.
        let seq = echo_sequence(38.46, 300.0).unwrap();
        let base = vec![(-3.0, 0.25), (0.0, 0.5), (4.0, 0.25)];
        let offset = 1.75;
        let spec = EnsembleSpec {
            lineshape: Lineshape::Tabulated {
                points: base.clone(),
            },
            n_packets: 3,
            b1: B1Distribution::Delta,
            t1_ns: INF,
            t2_ns: 200.0,
        };
        let swept = field_sweep_spectrum(&seq, &spec, &[offset]).unwrap();

        let shifted = EnsembleSpec {
            lineshape: Lineshape::Tabulated {
                points: base.iter().map(|(x, w)| (x + offset, *w)).collect(),
            },
            ..spec
        };
        let direct = simulate_echo(&seq, &shifted).unwrap();
        assert_eq!(swept[0].1, direct.echo_amplitude);
    }
}
