//! `lwir-hfe`: PSF generation, dataset synthesis, training, restoration and
//! evaluation from the command line.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration.
    Usage(String),
    /// Missing, unreadable or inconsistent inputs.
    Data(String),
    /// Training produced a non-finite loss.
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<lwir_hfe::Error> for CliError {
    fn from(e: lwir_hfe::Error) -> Self {
        match e {
            lwir_hfe::Error::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "lwir-hfe", version, about = "Metalens LWIR video restoration pipeline")]
struct Cli {
    /// Run configuration (.json or .toml). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the metalens PSF and write it as a raw kernel plus JSON sidecar.
    GenPsf(GenPsfArgs),
    /// Degrade clean frame directories into a paired train/test dataset.
    MakeDataset(MakeDatasetArgs),
    /// Train the restoration networks on a dataset.
    Train(TrainArgs),
    /// Run a trained generator over a frame directory.
    Restore(RestoreArgs),
    /// Compare restored frames with ground truth and write a JSON report.
    Eval(EvalArgs),
    /// Write the radially averaged spectrum of a frame directory as CSV.
    Spectrum(SpectrumArgs),
    /// Estimate optical flow between consecutive frames and write .flo files.
    Flow(FlowArgs),
}

#[derive(Args, Serialize)]
pub struct GenPsfArgs {
    /// Kernel output; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Single wavelength in metres instead of the polychromatic band.
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub spectral_samples: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct MakeDatasetArgs {
    /// A frame directory (one clip) or a directory of frame directories.
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed kernel from `gen-psf`; computed from the config otherwise.
    #[arg(long)]
    pub psf: Option<PathBuf>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory or manifest written by `make-dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub crop_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train the plain cycle-consistent baseline (no high-frequency term).
    #[arg(long)]
    pub no_hf: bool,
    /// Save the full state every this many epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from a `state.ckpt` written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct RestoreArgs {
    /// Generator or training-state checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub restored: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed flows (.flo) for the restored video instead of the built-in estimator.
    #[arg(long, requires = "flows_gt")]
    pub flows_restored: Option<PathBuf>,
    #[arg(long, requires = "flows_restored")]
    pub flows_gt: Option<PathBuf>,
    #[arg(long)]
    pub pitch_mm: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pitch_mm: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct FlowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse(argv: Vec<OsString>) -> Result<Cli, ExitCode> {
    Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        ErrorKind::InvalidSubcommand => {
            let name = match e.get(ContextKind::InvalidSubcommand) {
                Some(ContextValue::String(s)) => s.clone(),
                _ => String::new(),
            };
            eprintln!("lwir-hfe: unknown subcommand '{name}' (see --help)");
            ExitCode::from(2)
        }
        _ => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("lwir-hfe: {}", first.trim_start_matches("error: "));
            ExitCode::from(2)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match parse(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let result = config::RunConfig::load(cli.config.as_deref()).and_then(|(cfg, file)| {
        let file = file.as_deref();
        match &cli.command {
            Command::GenPsf(a) => commands::gen_psf(a, cfg, file),
            Command::MakeDataset(a) => commands::make_dataset(a, cfg, file),
            Command::Train(a) => commands::train(a, cfg, file),
            Command::Restore(a) => commands::restore(a, cfg, file),
            Command::Eval(a) => commands::eval(a, cfg, file),
            Command::Spectrum(a) => commands::spectrum(a, cfg, file),
            Command::Flow(a) => commands::flow(a, cfg, file),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lwir-hfe: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
