use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esrsim::ErrorScope;
use esrsim_cli::config::{parse_grid, Config, ExperimentId};
use esrsim_cli::experiments::{self, build_named_sequence, CliError, NamedSequence, SequenceFlags};

#[derive(Parser)]
#[command(
    name = "esrsim",
    version,
    about = "Pulse-sequence compiler and spin ensemble simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset and write its data file(s)
    Run(RunArgs),
    /// Compile a named sequence and write its IQ sample list
    Export(ExportArgs),
    /// Echo amplitude versus a uniform field offset of the ensemble
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "kebab-case")]
enum ScopeArg {
    Global,
    TargetOnly,
}

impl From<ScopeArg> for ErrorScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Global => ErrorScope::Global,
            ScopeArg::TargetOnly => ErrorScope::TargetOnly,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file, or a previous output file (its embedded header is
    /// reused)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pass the compiled drive through the resonator model
    #[arg(long, value_enum)]
    resonator: Option<OnOff>,
    /// Detuning grid points of the ensemble
    #[arg(long)]
    packets: Option<usize>,
    /// Recorded in the output header; the quadrature ensemble is
    /// deterministic
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment preset
    #[arg(value_enum, value_name = "EXPERIMENT")]
    experiment_pos: Option<ExperimentId>,
    /// Alternative to the positional argument
    #[arg(long = "experiment", value_enum)]
    experiment_flag: Option<ExperimentId>,
    #[command(flatten)]
    common: CommonArgs,
    /// Amplitude-error grid: `start:step:stop` or a comma list
    #[arg(long, allow_hyphen_values = true)]
    sigma_grid: Option<String>,
    /// Comb offset frequencies in MHz (comma list)
    #[arg(long, allow_hyphen_values = true)]
    offsets: Option<String>,
    /// How the fig2 BB1 arm applies the amplitude error
    #[arg(long, value_enum)]
    error_scope: Option<ScopeArg>,
    /// Write a gnuplot stub next to each data file
    #[arg(long)]
    plot_script: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// Sequence to compile
    #[arg(value_enum)]
    sequence: NamedSequence,
    #[command(flatten)]
    common: CommonArgs,
    /// Target rotation angle in rad
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    /// Fractional amplitude error
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Number of full 4-pi padding blocks (nutation)
    #[arg(long, default_value_t = 0)]
    n_pad: usize,
    /// Use BB1 blocks in the nutation sequence
    #[arg(long)]
    use_bb1: bool,
    /// Peak Rabi frequency in MHz
    #[arg(long)]
    rabi: Option<f64>,
    /// Echo delay in ns
    #[arg(long)]
    tau: Option<f64>,
    /// Comb offset frequencies in MHz (comma list)
    #[arg(long, allow_hyphen_values = true)]
    offsets: Option<String>,
    /// Error scope for bb1-echo
    #[arg(long, value_enum)]
    error_scope: Option<ScopeArg>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sweep offsets in MHz: `start:step:stop` or a comma list
    #[arg(long, allow_hyphen_values = true)]
    offsets: Option<String>,
    /// Peak Rabi frequency in MHz
    #[arg(long)]
    rabi: Option<f64>,
    /// Echo delay in ns
    #[arg(long)]
    tau: Option<f64>,
}

fn load_config(common: &CommonArgs, experiment: Option<ExperimentId>) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(id) = experiment {
        cfg.experiment = id;
        if common.config.is_none() {
            // Defaults are experiment dependent; re-derive them.
            cfg = Config {
                experiment: id,
                ..Config::default()
            };
        }
    }
    let mut cfg = cfg.resolve();
    if let Some(out) = &common.out {
        cfg.out = Some(out.display().to_string());
    }
    if let Some(r) = common.resonator {
        cfg.resonator.enabled = r == OnOff::On;
    }
    if let Some(n) = common.packets {
        if n == 0 {
            return Err(CliError::Config("--packets must be >= 1".into()));
        }
        if let Some(e) = cfg.ensemble.as_mut() {
            e.n_packets = n;
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let experiment = match (args.experiment_pos, args.experiment_flag) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(
                "positional experiment and --experiment disagree".into(),
            ))
        }
        (a, b) => a.or(b),
    };
    if experiment.is_none() && args.common.config.is_none() {
        return Err(CliError::Config(
            "specify an experiment (positional or --experiment) or a --config file".into(),
        ));
    }
    let mut cfg = load_config(&args.common, experiment)?;
    if let Some(grid) = &args.sigma_grid {
        cfg.fig2.sigma_grid = parse_grid(grid)?;
    }
    if let Some(offsets) = &args.offsets {
        cfg.fig4.offsets_mhz = parse_grid(offsets)?;
    }
    if let Some(scope) = args.error_scope {
        cfg.fig2.error_scope = scope.into();
    }
    let written = experiments::run_experiment(&cfg)?;
    for path in &written {
        if args.plot_script {
            let cols = match cfg.experiment {
                ExperimentId::Fig2 | ExperimentId::Fig3 => 3,
                _ => 2,
            };
            experiments::write_plot_stub(path, cols)?;
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common, None)?;
    // Named comb sequences default to the low-power Rabi frequency.
    let default_rabi = match args.sequence {
        NamedSequence::CombEcho => crate::SLOW_RABI,
        _ => cfg.pulse().rabi_mhz,
    };
    let pulse = cfg.pulse.as_mut().expect("resolved config");
    pulse.rabi_mhz = args.rabi.unwrap_or(default_rabi);
    if let Some(tau) = args.tau {
        pulse.tau_ns = tau;
    }
    let offsets = match &args.offsets {
        Some(text) => Some(parse_grid(text)?),
        None => None,
    };
    let flags = SequenceFlags {
        theta: args.theta,
        sigma: args.sigma,
        n_pad: args.n_pad,
        use_bb1: args.use_bb1,
        scope: args.error_scope.map(Into::into).unwrap_or_default(),
        offsets,
    };
    let seq = build_named_sequence(args.sequence, &cfg, &flags)?;
    let out = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("waveform.tsv"));
    experiments::export_waveform(&cfg, &seq, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = {
        // Field sweeps default to the wide-line, low-power configuration.
        let common = &args.common;
        let id = if common.config.is_none() {
            Some(ExperimentId::Fig4a)
        } else {
            None
        };
        load_config(common, id)?
    };
    if let Some(rabi) = args.rabi {
        cfg.pulse.as_mut().unwrap().rabi_mhz = rabi;
    }
    if let Some(tau) = args.tau {
        cfg.pulse.as_mut().unwrap().tau_ns = tau;
    }
    let offsets = match &args.offsets {
        Some(text) => parse_grid(text)?,
        None => cfg.fig4.sweep_mhz.points()?,
    };
    let rows = experiments::run_sweep(&cfg, &offsets)?;
    let out = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    experiments::write_sweep(&cfg, &rows, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

const SLOW_RABI: f64 = 1.16;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Export(args) => cmd_export(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
