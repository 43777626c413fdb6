use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use esrsim::*;
use num_complex::Complex64;
use std::f64::consts::PI;

fn bench_packet_stepping(c: &mut Criterion) {
    let n = 10_000;
    let samples: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * DT_NS;
            Complex64::from_polar(20.0, 2.0 * PI * 0.015 * t)
        })
        .collect();
    let w = SampledWaveform {
        dt_ns: DT_NS,
        samples,
    };
    let mut group = c.benchmark_group("integrator");
    group.throughput(Throughput::Elements(n as u64));
    for (name, t2) in [("no_relaxation", f64::INFINITY), ("t2_200ns", 200.0)] {
        let t1 = if t2.is_finite() { 1e6 } else { f64::INFINITY };
        let packet = SpinPacket::new(4.2, 1.0, 1.0, t1, t2).unwrap();
        group.bench_with_input(BenchmarkId::new("drive_steps", name), &packet, |b, p| {
            b.iter(|| evolve_packet(black_box(p), black_box(&w), BlochVector::equilibrium()))
        });
    }
    group.finish();
}

fn bench_echo_simulation(c: &mut Criterion) {
    let spec = EnsembleSpec {
        lineshape: Lineshape::Gaussian { fwhm_mhz: 9.35 },
        n_packets: 101,
        b1: B1Distribution::Delta,
        t1_ns: 1e6,
        t2_ns: 200.0,
    };
    let packets = build_ensemble(&spec).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(20);
    let plain = echo_sequence(38.46, 300.0).unwrap();
    group.bench_function("echo_101_packets", |b| {
        b.iter(|| {
            simulate_echo_packets(
                black_box(&plain),
                black_box(&packets),
                DT_NS,
                AmplitudeMode::MagnitudeIntegral,
            )
        })
    });
    let corrected = bb1_echo_sequence(38.46, 300.0, 0.4, ErrorScope::Global).unwrap();
    group.bench_function("bb1_echo_101_packets", |b| {
        b.iter(|| {
            simulate_echo_packets(
                black_box(&corrected),
                black_box(&packets),
                DT_NS,
                AmplitudeMode::MagnitudeIntegral,
            )
        })
    });
    group.finish();
}

fn bench_compile(c: &mut Criterion) {
    let base = gaussian_pulse(0.5 * PI, 0.0, 1.16).unwrap();
    let comb = comb_superpose(base, vec![-20.0, -10.0, 0.0, 10.0, 20.0]).unwrap();
    let seq = PulseSequence::new(vec![SequenceElement::Comb(comb)]);
    c.bench_function("compile_five_tone_comb", |b| {
        b.iter(|| compile(black_box(&seq)))
    });
}

criterion_group!(
    benches,
    bench_packet_stepping,
    bench_echo_simulation,
    bench_compile
);
criterion_main!(benches);
