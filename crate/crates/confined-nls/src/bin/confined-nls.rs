//! Thin argument layer over the library's subcommand runners. All logic,
//! including exit-code policy, lives in the library; this file only parses.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use confined_nls::cli::{self, CheckKind, Command};

#[derive(Parser)]
#[command(
    name = "confined-nls",
    version,
    about = "Split-step solver and diagnostics for NLS with a confining potential in one direction"
)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the configured datum, writing timeseries.csv and optional snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the confined-direction eigenbasis; write spectrum.csv and optional cache.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Commutation-defect table for the vector-field family over (j, t, tau).
    Vectorfields {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interaction-picture checkpoint ladder; writes scatter_report.csv and u_plus.
    Scatter {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Far-past Picard construction; writes picard.csv and the near state.
    Waveop {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interaction-action and decay diagnostics over a saved trajectory.
    Morawetz {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embedding-ratio checks over a random ensemble; writes ratios.csv.
    Inequalities {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        check: CheckArg,
        /// TOML ensemble description (count, seed, generator).
        #[arg(long)]
        ensemble: PathBuf,
        /// TOML exponent file (k, s, gamma, epsilon) as the check requires.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Write plot scripts for the CSVs already present in the output directory.
    Plots {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckArg {
    #[value(name = "B")]
    B,
    #[value(name = "HgammaS")]
    HGammaS,
    #[value(name = "GN")]
    Gn,
    #[value(name = "Z")]
    Z,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> CheckKind {
        match c {
            CheckArg::B => CheckKind::B,
            CheckArg::HGammaS => CheckKind::HGammaS,
            CheckArg::Gn => CheckKind::Gn,
            CheckArg::Z => CheckKind::Z,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, config, out) = match args.cmd {
        Cmd::Simulate { config, out } => (Command::Simulate, config, out),
        Cmd::Eigen { config, out } => (Command::Eigen, config, out),
        Cmd::Vectorfields { config, out } => (Command::VectorFields, config, out),
        Cmd::Scatter { config, out } => (Command::Scatter, config, out),
        Cmd::Waveop { config, out } => (Command::WaveOp, config, out),
        Cmd::Morawetz { config, out } => (Command::Morawetz, config, out),
        Cmd::Inequalities {
            config,
            out,
            check,
            ensemble,
            params,
        } => (
            Command::Inequalities {
                check: check.into(),
                ensemble,
                params,
            },
            config,
            out,
        ),
        Cmd::Plots { out } => (Command::Plots, out.clone(), out),
    };
    ExitCode::from(cli::run(&command, &config, &out) as u8)
}
