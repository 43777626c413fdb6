//! Builders for the named control sequences: BB1 composite rotations and the
//! echo / nutation experiment programs, plus exact propagator analysis of
//! rectangular pulse programs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{
    inject_amplitude_error, rect_pulse, PulseSelector, PulseSequence, SequenceElement,
};
use crate::su2::{
    apply_to_bloch, axis_rotation_unitary, compose, rotation_unitary, rz_unitary, BlochVector,
    Unitary2,
};

/// Default half-width of the echo integration window, ns.
pub const DEFAULT_ACQUIRE_HALF_WIDTH_NS: f64 = 100.0;

/// How an amplitude error is applied to a composite echo sequence: scale
/// every pulse, or only the target rotation.
///
/// `Global` is the default: amplitude-set errors scale the whole composite,
/// which is the error model a BB1 block corrects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorScope {
    #[default]
    Global,
    TargetOnly,
}

/// Correction phases of a BB1 block: `phi1 = arccos(-theta / 4 pi)`,
/// `phi2 = 3 phi1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bb1Angles {
    pub theta: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl Bb1Angles {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta.abs() > 4.0 * PI {
            return Err(Error::invalid("theta", "requires |theta| <= 4 pi"));
        }
        let phi1 = (-theta / (4.0 * PI)).acos();
        Ok(Self {
            theta,
            phi1,
            phi2: 3.0 * phi1,
        })
    }
}

/// BB1 composite rotation: `[pi]_phi1 [2pi]_phi2 [pi]_phi1 [theta]_0`, four
/// back-to-back rectangular segments in time order.
pub fn bb1(theta: f64, rabi_mhz: f64) -> Result<PulseSequence> {
    if !theta.is_finite() || !(0.0..=4.0 * PI).contains(&theta) {
        return Err(Error::invalid(
            "theta",
            "bb1 requires 0 <= theta <= 4 pi; use padding for larger angles",
        ));
    }
    let a = Bb1Angles::new(theta)?;
    Ok(PulseSequence::new(vec![
        SequenceElement::Pulse(rect_pulse(PI, a.phi1, rabi_mhz)?),
        SequenceElement::Pulse(rect_pulse(2.0 * PI, a.phi2, rabi_mhz)?),
        SequenceElement::Pulse(rect_pulse(PI, a.phi1, rabi_mhz)?),
        SequenceElement::Pulse(rect_pulse(theta, 0.0, rabi_mhz)?),
    ]))
}

fn acquire(center_offset_ns: f64) -> SequenceElement {
    SequenceElement::Acquire {
        half_width_ns: DEFAULT_ACQUIRE_HALF_WIDTH_NS,
        center_offset_ns,
    }
}

/// Predicted echo time relative to the sequence end, from the first-order
/// detuning dependence of the output transverse phase.
///
/// For a packet detuned by `delta` the transverse phase after the sequence
/// is `alpha(delta)`; free precession refocuses the ensemble where
/// `d alpha / d delta` cancels the accumulated `2 pi delta t`, i.e. at
/// `t_end - alpha'(0) / (2 pi)`. This places the window correctly for
/// composite blocks, whose effective emission time is not the block middle.
/// Returns `None` when the sequence leaves no transverse magnetization.
fn echo_offset_ns(seq: &PulseSequence) -> Option<f64> {
    let delta = 1e-4; // MHz
    let transverse = |d: f64| {
        let u = sequence_unitary(seq, d).ok()?;
        let m = apply_to_bloch(&u, &BlochVector::equilibrium()).ok()?;
        let t = m.transverse();
        (t.norm() > 1e-6).then_some(t)
    };
    let hi = transverse(delta)?;
    let lo = transverse(-delta)?;
    let alpha_prime = (hi * lo.conj()).arg() / (2.0 * delta);
    Some(-alpha_prime / (2.0 * PI * 1e-3))
}

/// Two-pulse spin echo: `[pi/2]_0 - tau - [pi]_0 - tau - acquire`.
pub fn echo_sequence(rabi_mhz: f64, tau_ns: f64) -> Result<PulseSequence> {
    if !tau_ns.is_finite() || tau_ns <= 0.0 {
        return Err(Error::invalid("tau_ns", "must be finite and > 0"));
    }
    let excite = rect_pulse(0.5 * PI, 0.0, rabi_mhz)?;
    let fallback = 0.5 * excite.duration_ns();
    let mut seq = PulseSequence::default();
    seq.push(SequenceElement::Pulse(excite));
    seq.push_delay(tau_ns);
    seq.push(SequenceElement::Pulse(rect_pulse(PI, 0.0, rabi_mhz)?));
    seq.push_delay(tau_ns);
    let offset = echo_offset_ns(&seq).unwrap_or(fallback);
    seq.push(acquire(offset));
    Ok(seq)
}

/// BB1-corrected spin echo with a fractional amplitude error `sigma`:
/// `BB1([pi/2 (1+sigma)]_0) - tau - BB1([pi]_0) - tau - acquire`.
///
/// With [`ErrorScope::Global`] the `1 + sigma` factor scales every pulse of
/// the sequence; with [`ErrorScope::TargetOnly`] only the final `pi/2`
/// segment of the excitation block.
pub fn bb1_echo_sequence(
    rabi_mhz: f64,
    tau_ns: f64,
    sigma: f64,
    scope: ErrorScope,
) -> Result<PulseSequence> {
    if !tau_ns.is_finite() || tau_ns <= 0.0 {
        return Err(Error::invalid("tau_ns", "must be finite and > 0"));
    }
    let excite = bb1(0.5 * PI, rabi_mhz)?;
    let fallback = 0.5 * excite.total_duration_ns();
    let mut seq = excite;
    seq.push_delay(tau_ns);
    for e in bb1(PI, rabi_mhz)?.elements {
        seq.push(e);
    }
    seq.push_delay(tau_ns);
    // The acquisition window is calibrated on the error-free sequence and
    // stays put while sigma is swept.
    let offset = echo_offset_ns(&seq).unwrap_or(fallback);
    seq.push(acquire(offset));
    let selector = match scope {
        ErrorScope::Global => PulseSelector::All,
        ErrorScope::TargetOnly => PulseSelector::Index(3),
    };
    inject_amplitude_error(&seq, sigma, selector)
}

/// Nutation experiment: a `theta` excitation padded with `n_pad` full `4 pi`
/// turns, then an echo readout. Total nutation angle is
/// `theta + 4 pi n_pad`.
///
/// With `use_bb1` every rotation block is a BB1 composite; otherwise each is
/// a bare rectangular pulse. A zero `theta` emits no excitation block, so
/// `(theta = 4 pi, n_pad = 0)` and `(theta = 0, n_pad = 1)` compile to
/// identical waveforms.
pub fn nutation_sequence(
    theta: f64,
    n_pad: usize,
    rabi_mhz: f64,
    tau_ns: f64,
    use_bb1: bool,
) -> Result<PulseSequence> {
    if !theta.is_finite() || !(0.0..=4.0 * PI).contains(&theta) {
        return Err(Error::invalid("theta", "requires 0 <= theta <= 4 pi"));
    }
    if !tau_ns.is_finite() || tau_ns <= 0.0 {
        return Err(Error::invalid("tau_ns", "must be finite and > 0"));
    }
    let mut block = PulseSequence::default();
    let push_rotation = |block: &mut PulseSequence, angle: f64| -> Result<()> {
        if use_bb1 {
            for e in bb1(angle, rabi_mhz)?.elements {
                block.push(e);
            }
        } else {
            block.push(SequenceElement::Pulse(rect_pulse(angle, 0.0, rabi_mhz)?));
        }
        Ok(())
    };
    if theta > 0.0 {
        push_rotation(&mut block, theta)?;
    }
    for _ in 0..n_pad {
        push_rotation(&mut block, 4.0 * PI)?;
    }
    let fallback = 0.5 * block.total_duration_ns();

    let mut seq = block;
    seq.push_delay(tau_ns);
    if use_bb1 {
        for e in bb1(PI, rabi_mhz)?.elements {
            seq.push(e);
        }
    } else {
        seq.push(SequenceElement::Pulse(rect_pulse(PI, 0.0, rabi_mhz)?));
    }
    seq.push_delay(tau_ns);
    let offset = echo_offset_ns(&seq).unwrap_or(fallback);
    seq.push(acquire(offset));
    Ok(seq)
}

/// Override the acquisition window half-width of every marker in a sequence.
pub fn with_acquire_half_width(mut seq: PulseSequence, half_width_ns: f64) -> PulseSequence {
    for e in &mut seq.elements {
        if let SequenceElement::Acquire {
            half_width_ns: w, ..
        } = e
        {
            *w = half_width_ns;
        }
    }
    seq
}

/// Exact net propagator of a rectangular pulse program on a spin detuned by
/// `detuning_mhz`, with no relaxation.
///
/// Each rectangular segment is a constant-Hamiltonian rotation about the
/// tilted axis `(w1 cos phi, w1 sin phi, delta)`; delays precess about z.
/// Shaped envelopes and nonzero tone offsets are only admitted on resonance
/// (`detuning_mhz == 0`), where the commuting-Hamiltonian area rule is exact.
pub fn sequence_unitary(seq: &PulseSequence, detuning_mhz: f64) -> Result<Unitary2> {
    if !detuning_mhz.is_finite() {
        return Err(Error::NonFinite("detuning_mhz"));
    }
    let mut parts: Vec<Unitary2> = Vec::new();
    for element in &seq.elements {
        match element {
            SequenceElement::Pulse(p) => {
                let rect = matches!(p.envelope, crate::pulse::Envelope::Rectangular { .. });
                if detuning_mhz == 0.0 {
                    if p.offset_mhz != 0.0 {
                        return Err(Error::UnsupportedSequence {
                            op: "sequence_unitary",
                            reason: "tone offsets require time-domain integration".into(),
                        });
                    }
                    parts.push(rotation_unitary(p.nominal_angle_rad(), p.phase_rad)?);
                } else if rect && p.offset_mhz == 0.0 {
                    let w1 = p.amplitude_scale * p.peak_rabi_mhz;
                    let omega = (w1 * w1 + detuning_mhz * detuning_mhz).sqrt();
                    let angle = 2.0 * PI * omega * p.duration_ns() * 1e-3;
                    let axis = [w1 * p.phase_rad.cos(), w1 * p.phase_rad.sin(), detuning_mhz];
                    parts.push(axis_rotation_unitary(angle, axis)?);
                } else {
                    return Err(Error::UnsupportedSequence {
                        op: "sequence_unitary",
                        reason: "off-resonance analysis needs rectangular zero-offset segments"
                            .into(),
                    });
                }
            }
            SequenceElement::Comb(_) => {
                return Err(Error::UnsupportedSequence {
                    op: "sequence_unitary",
                    reason: "comb pulses require time-domain integration".into(),
                })
            }
            SequenceElement::Delay { duration_ns } => {
                parts.push(rz_unitary(2.0 * PI * detuning_mhz * duration_ns * 1e-3)?);
            }
            SequenceElement::Acquire { .. } => {}
        }
    }
    if parts.is_empty() {
        return Err(Error::Empty("pulse sequence"));
    }
    compose(&parts)
}
