//! Property tests for the algebraic invariants of the propagator and pulse
//! compiler.

use esrsim::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn max_entry_diff(a: &Unitary2, b: &Unitary2) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries().iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn rotation_is_unitary(theta in -10.0 * PI..10.0 * PI, phi in -10.0 * PI..10.0 * PI) {
        let u = rotation_unitary(theta, phi).unwrap();
        prop_assert!(u.unitarity_residual() < 1e-12);
        prop_assert!((u.det().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_phase_shift_law(theta in -4.0 * PI..4.0 * PI, phi in -2.0 * PI..2.0 * PI) {
        // U(theta, phi) = Rz(phi) U(theta, 0) Rz(-phi)
        let direct = rotation_unitary(theta, phi).unwrap();
        let shifted = rz_unitary(phi)
            .unwrap()
            .mul(&rotation_unitary(theta, 0.0).unwrap())
            .mul(&rz_unitary(-phi).unwrap());
        prop_assert!(max_entry_diff(&direct, &shifted) < 1e-12);
    }

    #[test]
    fn bloch_norm_preserved(
        theta in -4.0 * PI..4.0 * PI,
        phi in -PI..PI,
        mx in -1.0..1.0f64,
        my in -1.0..1.0f64,
        mz in -1.0..1.0f64,
    ) {
        let m = BlochVector::new(mx, my, mz);
        prop_assume!(m.norm() <= 1.0);
        let u = rotation_unitary(theta, phi).unwrap();
        let rotated = apply_to_bloch(&u, &m).unwrap();
        prop_assert!((rotated.norm() - m.norm()).abs() < 1e-12);
    }

    #[test]
    fn composition_associative(
        a in -4.0 * PI..4.0 * PI,
        b in -4.0 * PI..4.0 * PI,
        c in -4.0 * PI..4.0 * PI,
        pa in -PI..PI,
        pb in -PI..PI,
        pc in -PI..PI,
    ) {
        let (ua, ub, uc) = (
            rotation_unitary(a, pa).unwrap(),
            rotation_unitary(b, pb).unwrap(),
            rotation_unitary(c, pc).unwrap(),
        );
        let left = ua.mul(&ub).mul(&uc);
        let right = ua.mul(&ub.mul(&uc));
        prop_assert!(max_entry_diff(&left, &right) < 1e-12);
        // compose applies the first element first in time
        let seq = compose(&[ua, ub, uc]).unwrap();
        prop_assert!(max_entry_diff(&seq, &uc.mul(&ub).mul(&ua)) < 1e-12);
    }

    #[test]
    fn bb1_phase_roundtrip(theta in 0.0..4.0 * PI) {
        let a = Bb1Angles::new(theta).unwrap();
        prop_assert!((a.phi1.cos() * 4.0 * PI + theta).abs() < 1e-11);
        prop_assert!((a.phi2 - 3.0 * a.phi1).abs() < 1e-15);
    }

    #[test]
    fn area_angle_consistency(
        theta in 0.01..4.0 * PI,
        rabi in 1.0..50.0f64,
        sigma in -0.5..0.5f64,
        gaussian in proptest::bool::ANY,
    ) {
        // 2 pi * scale * rabi * (sampled area) reproduces the nominal angle
        // times (1 + sigma) within 0.1% on the 0.1 ns grid.
        let segment = if gaussian {
            gaussian_pulse(theta, 0.0, rabi).unwrap()
        } else {
            rect_pulse(theta, 0.0, rabi).unwrap()
        };
        prop_assume!(segment.duration_ns() >= 1.0);
        let seq = inject_amplitude_error(
            &PulseSequence::new(vec![SequenceElement::Pulse(segment)]),
            sigma,
            PulseSelector::All,
        )
        .unwrap();
        let w = compile(&seq).unwrap();
        let area: f64 = w.samples.iter().map(|s| s.re).sum::<f64>() * w.dt_ns;
        let angle = 2.0 * PI * area * 1e-3;
        let expected = theta * (1.0 + sigma);
        // Whole-sample compilation snaps the segment boundary by up to half
        // a grid step, worth this much angle at the segment amplitude.
        let snap = 2.0 * PI * (1.0 + sigma) * rabi * 0.5 * DT_NS * 1e-3;
        prop_assert!(
            (angle - expected).abs() <= 1e-3 * expected.abs() + snap,
            "angle {} vs {}", angle, expected
        );
    }

    #[test]
    fn compiled_sample_count_is_rounded_duration(
        theta in 0.01..4.0 * PI,
        rabi in 1.0..50.0f64,
        delay in 0.0..500.0f64,
    ) {
        let p = rect_pulse(theta, 0.0, rabi).unwrap();
        let np = (p.duration_ns() / DT_NS).round() as usize;
        let seq = PulseSequence::new(vec![
            SequenceElement::Pulse(p),
            SequenceElement::Delay { duration_ns: delay },
        ]);
        let w = compile(&seq).unwrap();
        prop_assert_eq!(w.samples.len(), np + (delay / DT_NS).round() as usize);
    }
}
