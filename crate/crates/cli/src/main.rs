//! `hrtf-graph`: TOA estimation, alignment, phase unwrapping, experiments
//! and synthetic data from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hrtf_graph::toa::{Algorithm, ToaConfig, Weighting};

#[derive(Parser, Debug)]
#[command(name = "hrtf-graph", version, about = "Graph-based TOA estimation and phase unwrapping for HRIRs")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Correlation oversampling factor.
    #[arg(long, global = true, default_value_t = 10)]
    pub oversample: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Summarize a container.
    Inspect {
        container: PathBuf,
    },
    /// Estimate arrival times and write TOA/ITD table, aligned set and diagnostics.
    Toa {
        container: PathBuf,
        #[command(flatten)]
        toa: ToaArgs,
        /// Also write the difference graph(s) as JSON.
        #[arg(long)]
        dump_graph: bool,
    },
    /// Write only the aligned container.
    Align {
        container: PathBuf,
        #[command(flatten)]
        toa: ToaArgs,
    },
    /// Unwrap the phase of one ear.
    Unwrap {
        container: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Joint)]
        method: MethodArg,
        /// Remove estimated delays before unwrapping (joint method).
        #[arg(long)]
        prealign: bool,
        #[arg(long, value_enum, default_value_t = EarArg::Left)]
        ear: EarArg,
        /// FFT length; 0 uses the response length.
        #[arg(long, default_value_t = 0)]
        fft_size: usize,
        /// Keep only the first N frequency bins (DC upwards).
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        toa: ToaArgs,
    },
    /// Run an experiment grid with resumable cells.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Generate a rigid-sphere synthetic set with ground-truth delays.
    Synth(SynthArgs),
}

#[derive(Subcommand, Debug)]
pub enum ExperimentCommand {
    /// SH reconstruction of aligned HRIRs and ITDs per configuration.
    Recon {
        container: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        orders: Vec<usize>,
        #[arg(long, value_enum, default_value_t = GridArg::All)]
        grid: GridArg,
        #[command(flatten)]
        toa: ToaArgs,
        #[command(flatten)]
        spectral: SpectralArgs,
    },
    /// White-noise robustness sweep.
    Noise {
        container: PathBuf,
        /// Target SNRs in dB; `inf` runs the clean set.
        #[arg(long, value_delimiter = ',', default_value = "6,12,18,24,48")]
        snr: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        orders: Vec<usize>,
        #[arg(long, value_enum, default_value_t = GridArg::Noise)]
        grid: GridArg,
        #[command(flatten)]
        toa: ToaArgs,
        #[command(flatten)]
        spectral: SpectralArgs,
    },
    /// Phase-delay reconstruction error per frequency.
    Phase {
        container: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "freq,spherical,joint,joint+prealign")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        fft_size: usize,
        #[arg(long, default_value_t = hrtf_graph::sh::DEFAULT_REG)]
        reg: f64,
        #[command(flatten)]
        toa: ToaArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ToaArgs {
    #[arg(long = "algo", value_enum, default_value_t = AlgoArg::Edgy)]
    pub algo: AlgoArg,
    #[arg(long = "weight", value_enum, default_value_t = WeightArg::Exp)]
    pub weight: WeightArg,
    /// Add minimum-phase correlation edges.
    #[arg(long)]
    pub minphase: bool,
    /// Add inter-aural correlation edges.
    #[arg(long)]
    pub cross: bool,
    #[arg(long, default_value_t = 8.0)]
    pub sigma_deg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_weight: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
}

impl ToaArgs {
    pub fn config(&self, oversample: usize) -> ToaConfig {
        ToaConfig {
            algorithm: self.algo.into(),
            weighting: self.weight.into(),
            use_minphase: self.minphase,
            use_cross: self.cross,
            oversample_factor: oversample,
            sigma_deg: self.sigma_deg,
            delta_weight: self.delta_weight,
            lambda: self.lambda,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SpectralArgs {
    #[arg(long, default_value_t = hrtf_graph::sh::DEFAULT_REG)]
    pub reg: f64,
    /// FFT length for LSD; 0 uses the response length.
    #[arg(long, default_value_t = 0)]
    pub fft_size: usize,
    /// Lower LSD band edge in Hz (default: first bin).
    #[arg(long)]
    pub f_lo: Option<f64>,
    /// Upper LSD band edge in Hz (default: Nyquist).
    #[arg(long)]
    pub f_hi: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// `fib:N` for a Fibonacci grid or `design:K` for K orbits of the icosahedral 9-design.
    #[arg(long, default_value = "fib:256", value_parser = parse_grid)]
    pub grid: GridSpec,
    #[arg(long, default_value_t = 0.0875)]
    pub radius: f64,
    #[arg(long, default_value_t = 343.0)]
    pub speed_of_sound: f64,
    #[arg(long, default_value_t = 44_100.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long, default_value_t = 32.0)]
    pub offset: f64,
    /// Add white noise at this measurement SNR in dB.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, default_value = "rigid-sphere")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", content = "count", rename_all = "lowercase")]
pub enum GridSpec {
    Fib(usize),
    Design(usize),
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (kind, count) = s.split_once(':').ok_or_else(|| format!("expected fib:N or design:K, got {s}"))?;
    let n: usize = count.parse().map_err(|_| format!("bad count in {s}"))?;
    match kind {
        "fib" if n >= 4 => Ok(GridSpec::Fib(n)),
        "design" if n >= 1 => Ok(GridSpec::Design(n)),
        _ => Err(format!("expected fib:N (N >= 4) or design:K (K >= 1), got {s}")),
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum AlgoArg {
    Simp,
    Edgy,
    Ls,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Simp => Algorithm::Simp,
            AlgoArg::Edgy => Algorithm::Edgy,
            AlgoArg::Ls => Algorithm::Ls,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum WeightArg {
    None,
    Exp,
    Corr,
}

impl From<WeightArg> for Weighting {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::None => Weighting::None,
            WeightArg::Exp => Weighting::Exp,
            WeightArg::Corr => Weighting::Corr,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum MethodArg {
    Freq,
    Spherical,
    Joint,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum EarArg {
    Left,
    Right,
}

/// Which configurations an experiment runs.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum GridArg {
    /// All 36 combinations of algorithm, weighting and features.
    All,
    /// EDGY and LS with EXP weights over the four feature sets.
    Noise,
    /// Only the configuration given by the TOA flags.
    Single,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<hrtf_graph::Error> for CliError {
    fn from(e: hrtf_graph::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
