use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gmviterbi::bound::RhoMode;
use gmviterbi::harness::{bound_curve, channel_at_snr, run_sweep, simulate_point, BerCurve, BerRow};
use gmviterbi::{Error, Execution, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "gmviterbi", version, about = "ML detection and BER bounds for ISI channels with Gauss-Markov noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the analytic BER bound.
    Bound {
        #[arg(long)]
        config: PathBuf,
        /// Single SNR point; defaults to the config's grid.
        #[arg(long, allow_negative_numbers = true)]
        snr_db: Option<f64>,
        /// `optimized` or `half`; defaults to the config's setting.
        #[arg(long)]
        rho_mode: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo BER at one SNR point.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulation and bound over the config's SNR grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Diverged,
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Toml(_) | Error::UnstableFilter { .. } => Failure::Config(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

fn write_curve(curve: &BerCurve, path: &Path) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    curve
        .write_csv(BufWriter::new(file))
        .map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_file(path).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("{}: {io}", path.display())),
        e => Failure::from(e),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bound {
            config,
            snr_db,
            rho_mode,
            out,
        } => {
            let cfg = load(&config)?;
            let mode = match rho_mode {
                Some(m) => m.parse::<RhoMode>()?,
                None => cfg.rho_mode,
            };
            let snrs = snr_db.map(|x| vec![x]).unwrap_or_else(|| cfg.snr_grid_db.clone());
            let curve = bound_curve(&cfg, &snrs, mode)?;
            write_curve(&curve, &out)?;
            if curve.rows.iter().any(|r| r.ber_bound.is_none()) {
                return Err(Failure::Diverged);
            }
        }
        Command::Simulate {
            config,
            snr_db,
            bits,
            seed,
            out,
        } => {
            let mut cfg = load(&config)?;
            cfg.payload_bits = bits;
            cfg.seed = seed;
            cfg.snr_grid_db = vec![snr_db];
            cfg.validate()?;
            let params = channel_at_snr(&cfg, snr_db)?;
            let sim = simulate_point(&params, &cfg, 0, Execution::default());
            let curve = BerCurve {
                rows: vec![BerRow {
                    snr_db,
                    sim: Some(sim),
                    ber_bound: None,
                    spectral_radius: None,
                }],
            };
            write_curve(&curve, &out)?;
        }
        Command::Sweep { config, out, workers } => {
            let mut cfg = load(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let curve = run_sweep(&cfg)?;
            write_curve(&curve, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged) => {
            eprintln!("error: bound diverges at one or more SNR points");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
