//! `qmem`: command-line front end for the acoustic quantum memory models.

mod commands;
mod config;
mod error;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qmem_core::duffing::SweepDirection;

use commands::{Ctx, IswapArgs, Report};
use config::ProjectConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "qmem", version, about = "Design and simulation tools for phononic-crystal quantum memories")]
struct Cli {
    /// JSON project configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV table here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// What goes to stdout: the JSON summary or the CSV table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized fit restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Write,
    Read,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Forward,
    Backward,
}

#[derive(Subcommand)]
enum Command {
    /// Circuit → coupling chain: g_sm, g_eff, gate time, hybridized decay.
    Couple {
        /// Number of identical defects driven in parallel.
        #[arg(long)]
        defects: Option<u32>,
    },
    /// Lindblad simulation of the write (or read) exchange gate.
    Iswap {
        #[arg(long, value_enum, default_value_t = OnOff::Off)]
        dissipation: OnOff,
        #[arg(long, value_enum, default_value_t = Kind::Write)]
        kind: Kind,
        /// Gate time in seconds; defaults to the first full transfer.
        #[arg(long)]
        duration: Option<f64>,
        /// Output time points over the gate.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        qubit_levels: usize,
        #[arg(long, default_value_t = 5)]
        mech_levels: usize,
        /// Include the SNAIL mode with this many levels instead of eliminating it.
        #[arg(long)]
        snail_levels: Option<usize>,
        /// Keep the qubit–mechanics cross-Kerr term.
        #[arg(long)]
        cross_kerr: bool,
        /// Number of identical defects driven in parallel.
        #[arg(long)]
        defects: Option<u32>,
    },
    /// Lorentzian fit of a resonance trace (f_Hz,mag or f_Hz,re,im).
    FitLorentzian {
        file: PathBuf,
        /// Fit |S| even when the file has complex data.
        #[arg(long)]
        magnitude: bool,
    },
    /// Exponential ringdown fit of a t_s,amp trace.
    Ringdown {
        file: PathBuf,
        /// Resonance frequency, for Q = 2πfτ.
        #[arg(long)]
        f_hz: Option<f64>,
    },
    /// Fit a constant + power-law + Zener loss stack to T_K,Q,sigma_Q data.
    Qvt {
        file: PathBuf,
        /// Mechanical frequency the Q data was taken at.
        #[arg(long)]
        f_hz: f64,
        /// Randomized starts in addition to the data-derived one.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// BVD fit of an admittance trace (f_Hz,ReY_S,ImY_S).
    BvdFit {
        file: PathBuf,
        /// Also fit the motional resistance (held at 0 otherwise).
        #[arg(long)]
        fit_rm: bool,
    },
    /// Quasi-static Duffing frequency sweep from the `duffing` section.
    DuffingSweep {
        #[arg(long, value_enum, default_value_t = Direction::Forward)]
        direction: Direction,
    },
    /// Fit f = f0 + A·aⁿ to amp,f_Hz points, or to a simulated backbone.
    Backbone { file: Option<PathBuf> },
    /// Band gaps and defect mode of the `chain` section.
    Bandgap,
    /// Optical readout across a mode envelope (y_m,amp file or the chain's defect mode).
    PhotoelasticScan {
        /// y_m,amp mode envelope; the chain's defect mode when absent.
        #[arg(long)]
        envelope: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let config = cli.config.as_deref().map(ProjectConfig::load).transpose()?;
    let ctx = Ctx { config, seed: cli.seed };
    match &cli.command {
        Command::Couple { defects } => commands::couple(&ctx, *defects),
        Command::Iswap {
            dissipation,
            kind,
            duration,
            samples,
            qubit_levels,
            mech_levels,
            snail_levels,
            cross_kerr,
            defects,
        } => commands::run_iswap(
            &ctx,
            &IswapArgs {
                dissipation: *dissipation == OnOff::On,
                read: matches!(kind, Kind::Read),
                duration: *duration,
                samples: *samples,
                qubit_levels: *qubit_levels,
                mech_levels: *mech_levels,
                snail_levels: *snail_levels,
                cross_kerr: *cross_kerr,
                defects: *defects,
            },
        ),
        Command::FitLorentzian { file, magnitude } => commands::fit_resonance(file, *magnitude),
        Command::Ringdown { file, f_hz } => commands::ringdown(file, *f_hz),
        Command::Qvt { file, f_hz, restarts } => commands::qvt(&ctx, file, *f_hz, *restarts),
        Command::BvdFit { file, fit_rm } => commands::bvd_fit(file, *fit_rm),
        Command::DuffingSweep { direction } => commands::duffing_sweep(
            &ctx,
            match direction {
                Direction::Forward => SweepDirection::Forward,
                Direction::Backward => SweepDirection::Backward,
            },
        ),
        Command::Backbone { file } => commands::run_backbone(&ctx, file.as_deref()),
        Command::Bandgap => commands::bandgap(&ctx),
        Command::PhotoelasticScan { envelope } => commands::photoelastic_scan(&ctx, envelope.as_deref()),
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    if let Some(path) = &cli.out {
        fs::write(path, &report.table).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
    }
    let mut stdout = std::io::stdout().lock();
    match cli.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&report.summary).map_err(|e| CliError::Compute(e.to_string()))?;
            writeln!(stdout, "{text}")?;
        }
        Format::Csv => stdout.write_all(&report.table)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QMEM_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli).and_then(|r| emit(&cli, &r)) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe, e.g. `| head`
        Err(CliError::Output(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
