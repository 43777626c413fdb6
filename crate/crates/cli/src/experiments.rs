//! The experiment presets: amplitude-error echo sweeps, nutation curves and
//! the multi-frequency comb runs, plus waveform export and field sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};

use esrsim::{
    acquisition_marker, apply_filter, bb1, bb1_echo_sequence, build_ensemble, comb_superpose,
    compile_with_dt, echo_sequence, inject_amplitude_error, nutation_sequence,
    simulate_echo_on_waveform, simulate_echo_packets, with_acquire_half_width, EchoTrace, Envelope,
    ErrorScope, PulseSegment, PulseSelector, PulseSequence, ResonatorModel, SequenceElement,
    SpinPacket,
};
use thiserror::Error;

use crate::config::{fig3_angles, Config, ExperimentId};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(esrsim::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<esrsim::Error> for CliError {
    fn from(e: esrsim::Error) -> Self {
        match e {
            esrsim::Error::Io(io) => CliError::Io(io),
            other => CliError::Domain(other),
        }
    }
}

fn resonator_model(cfg: &Config) -> Result<ResonatorModel, CliError> {
    ResonatorModel::new(
        cfg.resonator.center_freq_ghz,
        cfg.resonator.bandwidth_fwhm_mhz,
        cfg.resonator.q_factor,
        cfg.resonator.efficiency_mhz_per_sqrt_w,
    )
    .map_err(CliError::from)
}

/// Simulate one sequence under the run configuration: acquisition-window
/// override, optional resonator filtering, configured grid step and
/// amplitude mode.
pub fn simulate(
    cfg: &Config,
    seq: &PulseSequence,
    packets: &[SpinPacket],
) -> Result<EchoTrace, CliError> {
    let seq = with_acquire_half_width(seq.clone(), cfg.acquisition.half_width_ns);
    let dt = cfg.acquisition.dt_ns;
    let mode = cfg.acquisition.amplitude_mode;
    let trace = if cfg.resonator.enabled {
        let model = resonator_model(cfg)?;
        let w = compile_with_dt(&seq, dt)?;
        let filtered = apply_filter(&model, &w, 0.0)?;
        let marker = acquisition_marker(&seq, dt)?;
        simulate_echo_on_waveform(&filtered, marker, packets, mode)?
    } else {
        simulate_echo_packets(&seq, packets, dt, mode)?
    };
    Ok(trace)
}

#[derive(Debug, Clone, Copy)]
pub struct Fig2Row {
    pub sigma: f64,
    pub plain_ratio: f64,
    pub bb1_ratio: f64,
}

/// Echo ratio versus the fractional amplitude error for plain and BB1 echo
/// sequences, each normalized to its own error-free amplitude. The plain
/// arm carries the error on the excitation pulse only; the BB1 arm applies
/// it according to the configured error scope.
pub fn run_fig2(cfg: &Config) -> Result<Vec<Fig2Row>, CliError> {
    for &s in &cfg.fig2.sigma_grid {
        if !s.is_finite() || s <= -1.0 || s > 1.0 {
            return Err(CliError::Config(format!("sigma {s} outside (-1, 1]")));
        }
    }
    let p = cfg.pulse();
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    let plain_seq = echo_sequence(p.rabi_mhz, p.tau_ns)?;
    let scope = cfg.fig2.error_scope;

    let plain_base = simulate(cfg, &plain_seq, &packets)?.echo_amplitude;
    let bb1_base = simulate(
        cfg,
        &bb1_echo_sequence(p.rabi_mhz, p.tau_ns, 0.0, scope)?,
        &packets,
    )?
    .echo_amplitude;

    let mut rows = Vec::with_capacity(cfg.fig2.sigma_grid.len());
    for &sigma in &cfg.fig2.sigma_grid {
        let plain = if sigma == 0.0 {
            plain_base
        } else {
            let seq = inject_amplitude_error(&plain_seq, sigma, PulseSelector::Index(0))?;
            simulate(cfg, &seq, &packets)?.echo_amplitude
        };
        let bb1_amp = if sigma == 0.0 {
            bb1_base
        } else {
            let seq = bb1_echo_sequence(p.rabi_mhz, p.tau_ns, sigma, scope)?;
            simulate(cfg, &seq, &packets)?.echo_amplitude
        };
        rows.push(Fig2Row {
            sigma,
            plain_ratio: plain / plain_base,
            bb1_ratio: bb1_amp / bb1_base,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct Fig3Row {
    pub total_angle_rad: f64,
    pub plain_echo: f64,
    pub bb1_echo: f64,
}

/// Decompose a total nutation angle into `theta + 4 pi n_pad`.
fn split_angle(total: f64) -> (f64, usize) {
    let four_pi = 4.0 * std::f64::consts::PI;
    let n_pad = (total / four_pi).floor() as usize;
    ((total - four_pi * n_pad as f64).max(0.0), n_pad)
}

/// Nutation curves with plain and BB1 rotation blocks over a shared
/// ensemble.
pub fn run_fig3(cfg: &Config) -> Result<Vec<Fig3Row>, CliError> {
    let p = cfg.pulse();
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    let mut rows = Vec::new();
    for total in fig3_angles(cfg)? {
        if !total.is_finite() || total < 0.0 {
            return Err(CliError::Config(format!("bad nutation angle {total}")));
        }
        let (theta, n_pad) = split_angle(total);
        let plain = simulate(
            cfg,
            &nutation_sequence(theta, n_pad, p.rabi_mhz, p.tau_ns, false)?,
            &packets,
        )?
        .echo_amplitude;
        let bb1_echo = simulate(
            cfg,
            &nutation_sequence(theta, n_pad, p.rabi_mhz, p.tau_ns, true)?,
            &packets,
        )?
        .echo_amplitude;
        rows.push(Fig3Row {
            total_angle_rad: total,
            plain_echo: plain,
            bb1_echo,
        });
    }
    Ok(rows)
}

/// Gaussian echo sequence with both pulses comb-shaped at the given offsets
/// (a single zero offset gives the plain single-frequency version). The
/// envelopes use the configured reference FWHMs truncated at 3 x FWHM.
pub fn comb_echo_sequence(cfg: &Config, offsets: &[f64]) -> Result<PulseSequence, CliError> {
    if offsets.is_empty() {
        return Err(CliError::Config("offsets list is empty".into()));
    }
    let p = cfg.pulse();
    let half = PulseSegment::new(
        Envelope::Gaussian {
            fwhm_ns: cfg.fig4.fwhm_half_ns,
            truncation_ns: 3.0 * cfg.fig4.fwhm_half_ns,
        },
        p.rabi_mhz,
        0.0,
        0.0,
    )?;
    let excitation_ns = half.duration_ns();
    let full = PulseSegment::new(
        Envelope::Gaussian {
            fwhm_ns: cfg.fig4.fwhm_pi_ns,
            truncation_ns: 3.0 * cfg.fig4.fwhm_pi_ns,
        },
        p.rabi_mhz,
        0.0,
        0.0,
    )?;
    let mut seq = PulseSequence::default();
    seq.push(SequenceElement::Comb(comb_superpose(
        half,
        offsets.to_vec(),
    )?));
    seq.push_delay(p.tau_ns);
    seq.push(SequenceElement::Comb(comb_superpose(
        full,
        offsets.to_vec(),
    )?));
    seq.push_delay(p.tau_ns);
    seq.push(SequenceElement::Acquire {
        half_width_ns: cfg.acquisition.half_width_ns,
        center_offset_ns: 0.5 * excitation_ns,
    });
    Ok(seq)
}

fn warn_if_clipping(cfg: &Config, seq: &PulseSequence) -> Result<(), CliError> {
    let w = compile_with_dt(seq, cfg.acquisition.dt_ns)?;
    let peak = w.peak_mhz();
    if peak > cfg.fig4.amplifier_ceiling_mhz {
        log::warn!(
            "comb peak {:.2} MHz exceeds the amplifier ceiling {:.2} MHz",
            peak,
            cfg.fig4.amplifier_ceiling_mhz
        );
    }
    Ok(())
}

/// Field-swept echo spectrum with a single-frequency Gaussian echo pulse
/// pair (the line map).
pub fn run_fig4a(cfg: &Config) -> Result<Vec<(f64, f64)>, CliError> {
    let seq = comb_echo_sequence(cfg, &[0.0])?;
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    let mut out = Vec::new();
    for offset in cfg.fig4.sweep_mhz.points()? {
        let shifted: Vec<SpinPacket> = packets
            .iter()
            .map(|p| SpinPacket {
                detuning_mhz: p.detuning_mhz + offset,
                ..*p
            })
            .collect();
        let amp = simulate(cfg, &seq, &shifted)?.echo_amplitude;
        out.push((offset, amp));
    }
    Ok(out)
}

/// Five-tone comb echo at fixed field; returns the full trace (fig4c data)
/// and the excitation-resolved echo spectrum (fig4b data).
pub fn run_fig4bc(cfg: &Config) -> Result<(EchoTrace, Vec<(f64, f64)>), CliError> {
    let seq = comb_echo_sequence(cfg, &cfg.fig4.offsets_mhz)?;
    warn_if_clipping(cfg, &seq)?;
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    let trace = simulate(cfg, &seq, &packets)?;
    let freqs = cfg.fig4.spectrum_mhz.points()?;
    let spectrum: Vec<(f64, f64)> = freqs
        .iter()
        .zip(trace.spectrum(&freqs))
        .map(|(f, c)| (*f, c.norm()))
        .collect();
    Ok((trace, spectrum))
}

/// Simulate the config's explicit pulse program.
pub fn run_custom(cfg: &Config) -> Result<EchoTrace, CliError> {
    let elements = cfg
        .sequence
        .clone()
        .ok_or_else(|| CliError::Config("custom run needs a [[sequence]] section".into()))?;
    let seq = PulseSequence::new(elements);
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    simulate(cfg, &seq, &packets)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_table(
    path: &Path,
    cfg: &Config,
    extra_header: &[String],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let mut f = create(path)?;
    write!(f, "{}", cfg.to_header())?;
    for line in extra_header {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    f.flush()?;
    Ok(())
}

fn trace_rows(trace: &EchoTrace) -> impl Iterator<Item = Vec<f64>> + '_ {
    trace
        .samples
        .iter()
        .enumerate()
        .map(move |(k, s)| vec![trace.start_time_ns + k as f64 * trace.dt_ns, s.re, s.im])
}

/// Derive the three fig4 output paths from the configured one.
fn fig4_paths(out: &str) -> (PathBuf, PathBuf, PathBuf) {
    let base = out.strip_suffix(".csv").unwrap_or(out);
    (
        PathBuf::from(format!("{base}a.csv")),
        PathBuf::from(format!("{base}b.csv")),
        PathBuf::from(format!("{base}c.csv")),
    )
}

/// Run the configured experiment and write its data files; returns the
/// paths written.
pub fn run_experiment(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let out = PathBuf::from(cfg.out_path());
    match cfg.experiment {
        ExperimentId::Fig2 => {
            let rows = run_fig2(cfg)?;
            write_table(
                &out,
                cfg,
                &[],
                &["sigma", "plain_ratio", "bb1_ratio"],
                rows.iter()
                    .map(|r| vec![r.sigma, r.plain_ratio, r.bb1_ratio]),
            )?;
            Ok(vec![out])
        }
        ExperimentId::Fig3 => {
            let rows = run_fig3(cfg)?;
            write_table(
                &out,
                cfg,
                &[],
                &["total_angle_rad", "plain_echo", "bb1_echo"],
                rows.iter()
                    .map(|r| vec![r.total_angle_rad, r.plain_echo, r.bb1_echo]),
            )?;
            Ok(vec![out])
        }
        ExperimentId::Fig4a => {
            let rows = run_fig4a(cfg)?;
            write_table(
                &out,
                cfg,
                &[],
                &["offset_mhz", "echo_amplitude"],
                rows.iter().map(|r| vec![r.0, r.1]),
            )?;
            Ok(vec![out])
        }
        ExperimentId::Fig4b => {
            let (_, spectrum) = run_fig4bc(cfg)?;
            write_table(
                &out,
                cfg,
                &[],
                &["freq_mhz", "magnitude"],
                spectrum.iter().map(|r| vec![r.0, r.1]),
            )?;
            Ok(vec![out])
        }
        ExperimentId::Fig4c => {
            let (trace, _) = run_fig4bc(cfg)?;
            let extra = vec![format!("echo_amplitude = {:.6e}", trace.echo_amplitude)];
            write_table(
                &out,
                cfg,
                &extra,
                &["time_ns", "re", "im"],
                trace_rows(&trace),
            )?;
            Ok(vec![out])
        }
        ExperimentId::Fig4 => {
            let (path_a, path_b, path_c) = fig4_paths(cfg.out_path());
            let rows = run_fig4a(cfg)?;
            write_table(
                &path_a,
                cfg,
                &[],
                &["offset_mhz", "echo_amplitude"],
                rows.iter().map(|r| vec![r.0, r.1]),
            )?;
            let (trace, spectrum) = run_fig4bc(cfg)?;
            write_table(
                &path_b,
                cfg,
                &[],
                &["freq_mhz", "magnitude"],
                spectrum.iter().map(|r| vec![r.0, r.1]),
            )?;
            let extra = vec![format!("echo_amplitude = {:.6e}", trace.echo_amplitude)];
            write_table(
                &path_c,
                cfg,
                &extra,
                &["time_ns", "re", "im"],
                trace_rows(&trace),
            )?;
            Ok(vec![path_a, path_b, path_c])
        }
        ExperimentId::Custom => {
            let trace = run_custom(cfg)?;
            let extra = vec![format!("echo_amplitude = {:.6e}", trace.echo_amplitude)];
            write_table(
                &out,
                cfg,
                &extra,
                &["time_ns", "re", "im"],
                trace_rows(&trace),
            )?;
            Ok(vec![out])
        }
    }
}

/// Named sequences addressable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "kebab-case")]
pub enum NamedSequence {
    Bb1,
    Echo,
    Bb1Echo,
    Nutation,
    CombEcho,
    /// The `[[sequence]]` section of the config file.
    Config,
}

pub struct SequenceFlags {
    pub theta: f64,
    pub sigma: f64,
    pub n_pad: usize,
    pub use_bb1: bool,
    pub scope: ErrorScope,
    pub offsets: Option<Vec<f64>>,
}

pub fn build_named_sequence(
    name: NamedSequence,
    cfg: &Config,
    flags: &SequenceFlags,
) -> Result<PulseSequence, CliError> {
    let p = cfg.pulse();
    let seq = match name {
        NamedSequence::Bb1 => {
            let base = bb1(flags.theta, p.rabi_mhz)?;
            inject_amplitude_error(&base, flags.sigma, PulseSelector::All)?
        }
        NamedSequence::Echo => {
            let base = echo_sequence(p.rabi_mhz, p.tau_ns)?;
            inject_amplitude_error(&base, flags.sigma, PulseSelector::Index(0))?
        }
        NamedSequence::Bb1Echo => {
            bb1_echo_sequence(p.rabi_mhz, p.tau_ns, flags.sigma, flags.scope)?
        }
        NamedSequence::Nutation => nutation_sequence(
            flags.theta,
            flags.n_pad,
            p.rabi_mhz,
            p.tau_ns,
            flags.use_bb1,
        )?,
        NamedSequence::CombEcho => {
            let offsets = flags
                .offsets
                .clone()
                .unwrap_or_else(|| cfg.fig4.offsets_mhz.clone());
            comb_echo_sequence(cfg, &offsets)?
        }
        NamedSequence::Config => PulseSequence::new(cfg.sequence.clone().ok_or_else(|| {
            CliError::Config("export from config needs a [[sequence]] section".into())
        })?),
    };
    Ok(seq)
}

/// Compile a sequence (optionally resonator filtered) and write the
/// tab-separated `time_ns I Q` sample list.
pub fn export_waveform(cfg: &Config, seq: &PulseSequence, path: &Path) -> Result<(), CliError> {
    let w = compile_with_dt(seq, cfg.acquisition.dt_ns)?;
    let w = if cfg.resonator.enabled {
        apply_filter(&resonator_model(cfg)?, &w, 0.0)?
    } else {
        w
    };
    let mut f = create(path)?;
    w.write_text(&mut f).map_err(CliError::from)?;
    f.flush()?;
    Ok(())
}

/// Field sweep of an arbitrary sequence (the `sweep` verb): defaults to the
/// single-frequency Gaussian echo when the config has no explicit program.
pub fn run_sweep(cfg: &Config, offsets: &[f64]) -> Result<Vec<(f64, f64)>, CliError> {
    let seq = match &cfg.sequence {
        Some(elements) => PulseSequence::new(elements.clone()),
        None => comb_echo_sequence(cfg, &[0.0])?,
    };
    let packets = build_ensemble(cfg.ensemble()).map_err(CliError::from)?;
    let mut rows = Vec::new();
    for &offset in offsets {
        if !offset.is_finite() {
            return Err(CliError::Config(format!("bad sweep offset {offset}")));
        }
        let shifted: Vec<SpinPacket> = packets
            .iter()
            .map(|p| SpinPacket {
                detuning_mhz: p.detuning_mhz + offset,
                ..*p
            })
            .collect();
        rows.push((offset, simulate(cfg, &seq, &shifted)?.echo_amplitude));
    }
    Ok(rows)
}

pub fn write_sweep(cfg: &Config, rows: &[(f64, f64)], path: &Path) -> Result<(), CliError> {
    write_table(
        path,
        cfg,
        &[],
        &["offset_mhz", "echo_amplitude"],
        rows.iter().map(|r| vec![r.0, r.1]),
    )
}

/// Minimal gnuplot stub next to a data file.
pub fn write_plot_stub(data_path: &Path, columns: usize) -> Result<PathBuf, CliError> {
    let gp = data_path.with_extension("gp");
    let mut f = create(&gp)?;
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set key autotitle columnhead")?;
    let series: Vec<String> = (2..=columns)
        .map(|c| format!("'{}' using 1:{c} with linespoints", data_path.display()))
        .collect();
    writeln!(f, "plot {}", series.join(", "))?;
    f.flush()?;
    Ok(gp)
}
