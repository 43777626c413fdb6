//! Pulse-sequence compiler and spin-1/2 ensemble simulator for pulsed ESR
//! control.
//!
//! The crate builds symbolic pulse programs (BB1 composite rotations, spin
//! echoes, nutation trains, multi-frequency Gaussian combs), compiles them
//! to complex baseband IQ waveforms on the 0.1 ns spectrometer grid, and
//! integrates driven, relaxing spin packets over an inhomogeneously
//! broadened ensemble. A resonator module models the passband and the
//! power-to-Rabi conversion.
//!
//! Conventions used throughout:
//!
//! * rotations follow `exp(-i theta n.sigma / 2)`; positive `theta` about +x
//!   takes +z to -y on the Bloch sphere (see [`su2`]),
//! * frequencies are MHz, times ns, angles rad,
//! * waveforms are complex baseband in Rabi MHz (`re` = x drive, `im` = y
//!   drive); tone offsets are relative to the implicit carrier.

pub mod composite;
pub mod ensemble;
pub mod error;
mod integrator;
pub mod pulse;
pub mod resonator;
pub mod su2;

pub use composite::{
    bb1, bb1_echo_sequence, echo_sequence, nutation_sequence, sequence_unitary,
    with_acquire_half_width, Bb1Angles, ErrorScope, DEFAULT_ACQUIRE_HALF_WIDTH_NS,
};
pub use ensemble::{
    acquisition_marker, build_ensemble, evolve_packet, field_sweep_spectrum, nutation_curve,
    simulate_echo, simulate_echo_on_waveform, simulate_echo_packets, simulate_echo_with,
    AmplitudeMode, B1Distribution, EchoTrace, EnsembleSpec, Lineshape, SpinPacket,
};
pub use error::{Error, Result};
pub use pulse::{
    comb_superpose, compile, compile_with_dt, dft_at, gaussian_pulse, inject_amplitude_error,
    rect_pulse, CombPulse, Envelope, PulseSegment, PulseSelector, PulseSequence, SampledWaveform,
    SequenceElement, DT_NS,
};
pub use resonator::{apply_filter, power_to_rabi, ResonatorModel};
pub use su2::{
    apply_to_bloch, axis_rotation_unitary, compose, gate_fidelity, gate_infidelity,
    rotation_unitary, rz_unitary, BlochVector, Unitary2,
};
