//! `plasmo` command-line front end.

mod commands;
mod config;
mod meta;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plasmo::materials::Metal;

/// Exit status 2: the command line, environment or config file is invalid.
const EXIT_USAGE: u8 = 2;
/// Exit status 1: the command was valid but failed while running.
const EXIT_RUNTIME: u8 = 1;
const DEFAULT_SEED: u64 = 42;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(plasmo::Error),
}

impl From<plasmo::Error> for CliError {
    fn from(e: plasmo::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(s) = source {
                    write!(f, ": {s}")?;
                    source = s.source();
                }
                Ok(())
            }
        }
    }
}

/// Dispersive FDTD and transfer-matrix absorption in SiO2/metal/ITO
/// multilayers, with neural surrogates and Shapley attribution.
#[derive(Debug, Parser)]
#[command(name = "plasmo", version)]
pub struct Cli {
    /// JSON file with partial settings (sections: sweep, fdtd, mlp, cnn,
    /// train_mlp, train_cnn; keys: seed, workers, profile)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Seed for every random choice (splits, initialisation, dropout,
    /// shuffling, attribution sampling) [default: 42]
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads; overrides PLASMO_WORKERS, which overrides the core count
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,

    /// Resolution and band preset for FDTD runs [default: desk]
    #[arg(long, global = true, value_enum)]
    pub profile: Option<ProfileArg>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    /// 50 cells/μm, 400-1200 nm
    Desk,
    /// 150 cells/μm, 300-1500 nm
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Fdtd,
    Tmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    AbsorbedPower,
    AbsorbedFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Absorption against wavelength from records.csv or a spectrum CSV
    Spectrum,
    /// Grayscale PGM heatmap of an absorption-map CSV
    Map,
    /// Training and validation loss from a training CSV
    Losscurve,
    /// Attribution bars from summary.csv or a strip plot from explanations.csv
    ShapSummary,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    /// Metal layer: au or ag
    #[arg(long, value_parser = parse_metal)]
    pub material: Metal,

    /// Metal layer thickness in nm
    #[arg(long, value_name = "NM", allow_negative_numbers = true, value_parser = parse_positive)]
    pub thickness_nm: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the FDTD engine on one stack: spectrum CSV, absorption maps, run record
    Simulate {
        #[command(flatten)]
        stack: StackArgs,
        /// Monitored wavelengths in nm, comma separated
        #[arg(long, value_name = "NM,..", value_delimiter = ',', allow_negative_numbers = true, value_parser = parse_positive)]
        wavelengths_nm: Vec<f64>,
        /// Evenly spaced wavelengths over the profile band when none are listed
        #[arg(long, value_name = "N", default_value_t = 17, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
    },
    /// Transfer-matrix reflectance, transmittance and per-layer absorptance
    Tmm {
        #[command(flatten)]
        stack: StackArgs,
        /// Wavelengths in nm, comma separated
        #[arg(long, value_name = "NM,..", value_delimiter = ',', allow_negative_numbers = true, value_parser = parse_positive)]
        wavelengths_nm: Vec<f64>,
        /// Evenly spaced wavelengths over 300-1500 nm when none are listed
        #[arg(long, value_name = "N", default_value_t = 121, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
    },
    /// Run a (material × thickness) sweep into the output directory
    Sweep {
        /// Simulation engine [default: tmm]
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Metals, comma separated
        #[arg(long, value_delimiter = ',', value_parser = parse_metal)]
        materials: Vec<Metal>,
        /// Metal thicknesses in nm, comma separated
        #[arg(long, value_name = "NM,..", value_delimiter = ',', allow_negative_numbers = true, value_parser = parse_positive)]
        thicknesses_nm: Vec<f64>,
        /// Wavelengths in nm, comma separated
        #[arg(long, value_name = "NM,..", value_delimiter = ',', allow_negative_numbers = true, value_parser = parse_positive)]
        wavelengths_nm: Vec<f64>,
    },
    /// Train the MLP for absorbed power and absorbed flux on a sweep directory
    TrainMlp {
        /// Sweep directory holding records.csv
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Override the epoch limit
        #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
        max_epochs: Option<u64>,
    },
    /// Train the CNN on the absorption maps of an FDTD sweep directory
    TrainCnn {
        /// Sweep directory holding records.csv and maps/
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Override the epoch limit
        #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
        max_epochs: Option<u64>,
    },
    /// Evaluate a saved model at physical-unit inputs
    Predict {
        /// Model file written by train-mlp or train-cnn
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[command(flatten)]
        stack: StackArgs,
        /// Wavelengths in nm, comma separated
        #[arg(long, value_name = "NM,..", required = true, value_delimiter = ',', allow_negative_numbers = true, value_parser = parse_positive)]
        wavelengths_nm: Vec<f64>,
    },
    /// Exact Shapley attribution of a saved MLP over a sweep's records
    Explain {
        /// MLP model file
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Sweep directory the model was trained on
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Number of records to explain (at least 10)
        #[arg(long, value_name = "N", default_value_t = 100, value_parser = clap::value_parser!(u64).range(10..))]
        instances: u64,
        /// Model output to explain
        #[arg(long, value_enum, default_value = "absorbed-power")]
        target: TargetArg,
    },
    /// Render a CSV produced by another subcommand as SVG or PGM
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Input CSV
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Column to plot for spectra [default: absorbed_power, else A]
        #[arg(long)]
        column: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Tmm { .. } => "tmm",
            Command::Sweep { .. } => "sweep",
            Command::TrainMlp { .. } => "train-mlp",
            Command::TrainCnn { .. } => "train-cnn",
            Command::Predict { .. } => "predict",
            Command::Explain { .. } => "explain",
            Command::Plot { .. } => "plot",
        }
    }
}

fn parse_metal(s: &str) -> Result<Metal, String> {
    Metal::parse(s).map_err(|_| format!("expected au or ag, got '{s}'"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(_) => Err(format!("'{s}' is not a number")),
    }
}

/// Thread count: flag, then PLASMO_WORKERS, then config, then core count.
fn resolve_workers(flag: Option<u64>, config: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n as usize);
    }
    if let Ok(text) = std::env::var("PLASMO_WORKERS") {
        return match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!(
                "PLASMO_WORKERS must be a positive integer, got '{text}'"
            ))),
        };
    }
    if let Some(n) = config {
        if n == 0 {
            return Err(CliError::Usage("config: workers must be positive".into()));
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Settings shared by every subcommand after flags, environment and config
/// have been combined.
pub struct Context {
    pub cli_args: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config: config::Config,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub profile: plasmo::fdtd::Profile,
}

fn run(cli: Cli, args: Vec<String>) -> Result<(), CliError> {
    let config = config::Config::load(cli.config.as_deref())?;
    let workers = resolve_workers(cli.workers, config.workers)?;
    let profile = match (cli.profile, &config.profile) {
        (Some(ProfileArg::Desk), _) => plasmo::fdtd::Profile::Desk,
        (Some(ProfileArg::Full), _) => plasmo::fdtd::Profile::Full,
        (None, Some(name)) => plasmo::fdtd::Profile::parse(name)
            .map_err(|e| CliError::Usage(format!("config: {e}")))?,
        (None, None) => plasmo::fdtd::Profile::Desk,
    };
    // a pool may already exist when running inside a test harness
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global();
    let ctx = Context {
        cli_args: args,
        config_path: cli.config.clone(),
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        config,
        out: cli.out.clone(),
        workers,
        profile,
    };
    commands::dispatch(cli.command, &ctx)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, args.into_iter().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn positive_parser() {
        assert_eq!(parse_positive("20"), Ok(20.0));
        assert!(parse_positive("-5").is_err());
        assert!(parse_positive("0").is_err());
        assert!(parse_positive("nan").is_err());
        assert!(parse_positive("x").is_err());
    }
}
