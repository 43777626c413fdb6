//! Time-domain propagation of a single spin packet through a compiled pulse
//! program.
//!
//! Each grid step applies the exact rotation generated by the
//! piecewise-constant field over that step (Rodrigues form), with relaxation
//! as an exact exponential-damping split step (half relax, rotate, half
//! relax). Zero-drive stretches are collapsed into a single analytic jump
//! wherever no trace sample is recorded; a z rotation commutes with the
//! relaxation map, so the jump reproduces the per-step composition exactly.

use num_complex::Complex64;

use crate::ensemble::SpinPacket;
use crate::error::{Error, Result};
use crate::pulse::{sample_pulse, steps_for, PulseSequence, SampledWaveform, SequenceElement};

/// MHz -> rad/ns.
const MHZ_TO_RAD_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

pub(crate) enum Run {
    Drive(Vec<Complex64>),
    Free { steps: usize },
}

pub(crate) struct Timeline {
    pub dt_ns: f64,
    pub runs: Vec<Run>,
    pub total_steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AcquireMarker {
    /// Marker position on the realized grid, ns from sequence start.
    pub time_ns: f64,
    pub half_width_ns: f64,
    pub center_offset_ns: f64,
}

impl Timeline {
    pub fn from_sequence(seq: &PulseSequence, dt_ns: f64) -> Result<(Self, Option<AcquireMarker>)> {
        if !dt_ns.is_finite() || dt_ns <= 0.0 {
            return Err(Error::invalid("dt_ns", "must be finite and > 0"));
        }
        if seq.elements.is_empty() {
            return Err(Error::Empty("pulse sequence"));
        }
        let mut runs = Vec::new();
        let mut steps = 0usize;
        let mut marker = None;
        for element in &seq.elements {
            match element {
                SequenceElement::Pulse(p) => {
                    let samples = sample_pulse(p, &[p.offset_mhz], steps, dt_ns);
                    steps += samples.len();
                    runs.push(Run::Drive(samples));
                }
                SequenceElement::Comb(c) => {
                    let samples = sample_pulse(&c.base, &c.offsets_mhz, steps, dt_ns);
                    steps += samples.len();
                    runs.push(Run::Drive(samples));
                }
                SequenceElement::Delay { duration_ns } => {
                    let n = steps_for(*duration_ns, dt_ns);
                    steps += n;
                    runs.push(Run::Free { steps: n });
                }
                SequenceElement::Acquire {
                    half_width_ns,
                    center_offset_ns,
                } => {
                    if marker.is_some() {
                        return Err(Error::invalid(
                            "sequence",
                            "more than one acquisition marker",
                        ));
                    }
                    marker = Some(AcquireMarker {
                        time_ns: steps as f64 * dt_ns,
                        half_width_ns: *half_width_ns,
                        center_offset_ns: *center_offset_ns,
                    });
                }
            }
        }
        Ok((
            Timeline {
                dt_ns,
                runs,
                total_steps: steps,
            },
            marker,
        ))
    }

    pub fn from_waveform(w: &SampledWaveform) -> Self {
        Timeline {
            dt_ns: w.dt_ns,
            total_steps: w.samples.len(),
            runs: vec![Run::Drive(w.samples.clone())],
        }
    }
}

/// Per-packet constants of motion for a fixed grid step.
pub(crate) struct Stepper {
    dt_ns: f64,
    /// 2 pi * detuning, rad/ns.
    omega_z: f64,
    /// 2 pi * b1_scale scaling for drive samples, rad/ns per MHz.
    k_rf: f64,
    inv_t1: f64,
    inv_t2: f64,
    relaxing: bool,
    /// Half-step damping factors.
    e1h: f64,
    e2h: f64,
    /// Per-step free-precession rotation.
    zc: f64,
    zs: f64,
}

#[inline]
fn rotate(m: &mut [f64; 3], ax: f64, ay: f64, az: f64) {
    let a2 = ax * ax + ay * ay + az * az;
    if a2 == 0.0 {
        return;
    }
    let angle = a2.sqrt();
    let (s, c) = angle.sin_cos();
    let inv = 1.0 / angle;
    let (nx, ny, nz) = (ax * inv, ay * inv, az * inv);
    let d = (nx * m[0] + ny * m[1] + nz * m[2]) * (1.0 - c);
    let cx = ny * m[2] - nz * m[1];
    let cy = nz * m[0] - nx * m[2];
    let cz = nx * m[1] - ny * m[0];
    *m = [
        m[0] * c + cx * s + nx * d,
        m[1] * c + cy * s + ny * d,
        m[2] * c + cz * s + nz * d,
    ];
}

#[inline]
fn rotate_z(m: &mut [f64; 3], s: f64, c: f64) {
    let (x, y) = (m[0], m[1]);
    m[0] = x * c - y * s;
    m[1] = y * c + x * s;
}

impl Stepper {
    pub fn new(packet: &SpinPacket, dt_ns: f64) -> Self {
        let inv_t1 = 1.0 / packet.t1_ns;
        let inv_t2 = 1.0 / packet.t2_ns;
        let relaxing = inv_t1 != 0.0 || inv_t2 != 0.0;
        let omega_z = MHZ_TO_RAD_NS * packet.detuning_mhz;
        let (zs, zc) = (omega_z * dt_ns).sin_cos();
        Stepper {
            dt_ns,
            omega_z,
            k_rf: MHZ_TO_RAD_NS * packet.b1_scale,
            inv_t1,
            inv_t2,
            relaxing,
            e1h: (-0.5 * dt_ns * inv_t1).exp(),
            e2h: (-0.5 * dt_ns * inv_t2).exp(),
            zc,
            zs,
        }
    }

    #[inline]
    fn relax_half(&self, m: &mut [f64; 3]) {
        if self.relaxing {
            m[0] *= self.e2h;
            m[1] *= self.e2h;
            m[2] = 1.0 + (m[2] - 1.0) * self.e1h;
        }
    }

    /// One grid step under the drive sample `s` (Rabi MHz, complex x+iy).
    #[inline]
    pub fn drive_step(&self, m: &mut [f64; 3], s: Complex64) {
        self.relax_half(m);
        rotate(
            m,
            self.k_rf * s.re * self.dt_ns,
            self.k_rf * s.im * self.dt_ns,
            self.omega_z * self.dt_ns,
        );
        self.relax_half(m);
    }

    /// One grid step with no drive.
    #[inline]
    pub fn free_step(&self, m: &mut [f64; 3]) {
        self.relax_half(m);
        rotate_z(m, self.zs, self.zc);
        self.relax_half(m);
    }

    /// Collapse `steps` drive-free grid steps into one analytic update.
    /// Reproduces the repeated [`Self::free_step`] composition (up to
    /// rounding) since the z rotation commutes with the relaxation map.
    pub fn free_jump(&self, m: &mut [f64; 3], steps: usize) {
        if steps == 0 {
            return;
        }
        let t = steps as f64 * self.dt_ns;
        let (s, c) = (self.omega_z * t).sin_cos();
        rotate_z(m, s, c);
        if self.relaxing {
            let e2 = (-t * self.inv_t2).exp();
            let e1 = (-t * self.inv_t1).exp();
            m[0] *= e2;
            m[1] *= e2;
            m[2] = 1.0 + (m[2] - 1.0) * e1;
        }
    }
}

/// Evolve a packet through the timeline and record the transverse
/// magnetization `mx + i my` at grid boundaries `rec_start ..
/// rec_start + rec_count`. Boundary `i` is the state after `i` steps; the
/// evolution continues as free precession past the end of the timeline when
/// the recording window extends beyond it.
pub(crate) fn evolve_trace(
    packet: &SpinPacket,
    timeline: &Timeline,
    initial: [f64; 3],
    rec_start: usize,
    rec_count: usize,
) -> Vec<Complex64> {
    let stepper = Stepper::new(packet, timeline.dt_ns);
    let rec_end = rec_start + rec_count;
    let mut trace = Vec::with_capacity(rec_count);
    if rec_count == 0 {
        return trace;
    }
    let mut m = initial;
    let mut boundary = 0usize;
    if rec_start == 0 {
        trace.push(Complex64::new(m[0], m[1]));
    }

    'runs: for run in &timeline.runs {
        if trace.len() == rec_count {
            break;
        }
        match run {
            Run::Drive(samples) => {
                for s in samples {
                    stepper.drive_step(&mut m, *s);
                    boundary += 1;
                    if boundary >= rec_start && boundary < rec_end {
                        trace.push(Complex64::new(m[0], m[1]));
                        if trace.len() == rec_count {
                            break 'runs;
                        }
                    }
                }
            }
            Run::Free { steps } => {
                let mut remaining = *steps;
                // Collapse the part of the run that precedes the window.
                if boundary < rec_start {
                    let jump = remaining.min(rec_start - boundary);
                    stepper.free_jump(&mut m, jump);
                    boundary += jump;
                    remaining -= jump;
                    if boundary == rec_start {
                        trace.push(Complex64::new(m[0], m[1]));
                        if trace.len() == rec_count {
                            break 'runs;
                        }
                    }
                }
                for _ in 0..remaining {
                    stepper.free_step(&mut m);
                    boundary += 1;
                    if boundary >= rec_start && boundary < rec_end {
                        trace.push(Complex64::new(m[0], m[1]));
                        if trace.len() == rec_count {
                            break 'runs;
                        }
                    }
                }
            }
        }
    }

    // Window extends past the end of the program: free evolution.
    if trace.len() < rec_count {
        if boundary < rec_start {
            stepper.free_jump(&mut m, rec_start - boundary);
            trace.push(Complex64::new(m[0], m[1]));
        }
        while trace.len() < rec_count {
            stepper.free_step(&mut m);
            trace.push(Complex64::new(m[0], m[1]));
        }
    }
    trace
}

/// Full Bloch trajectory at every grid boundary (`total_steps + 1` points).
pub(crate) fn evolve_trajectory(
    packet: &SpinPacket,
    timeline: &Timeline,
    initial: [f64; 3],
) -> Vec<[f64; 3]> {
    let stepper = Stepper::new(packet, timeline.dt_ns);
    let mut m = initial;
    let mut out = Vec::with_capacity(timeline.total_steps + 1);
    out.push(m);
    for run in &timeline.runs {
        match run {
            Run::Drive(samples) => {
                for s in samples {
                    stepper.drive_step(&mut m, *s);
                    out.push(m);
                }
            }
            Run::Free { steps } => {
                for _ in 0..*steps {
                    stepper.free_step(&mut m);
                    out.push(m);
                }
            }
        }
    }
    out
}
