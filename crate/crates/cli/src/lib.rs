//! Command-line front end for the `nfsar` restoration library.

pub mod bench;
pub mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nfsar", version, about = "Near-field SAR point-scatterer restoration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Square N×N grid over the same extent.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output directory; defaults to the configured `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Proposed,
    Ista,
    Clean,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Ista => "ISTA",
            Method::Clean => "CLEAN",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene and write the ideal and degraded images.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scene file, `paper1` or `paper2`.
        #[arg(long, default_value = "paper1")]
        scene: String,
        #[arg(long)]
        no_noise: bool,
    },
    /// Synthesize the PSF at one position and report its widths.
    Psf {
        #[command(flatten)]
        common: Common,
        /// Selects the built-in geometry when no config is given.
        #[arg(long, default_value = "paper1")]
        scene: String,
        #[arg(long, allow_negative_numbers = true)]
        azimuth: f64,
        #[arg(long)]
        range: f64,
    },
    /// Restore scatterers from a degraded NFSAR1 image.
    Restore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "proposed")]
        method: Method,
        /// λ as a fraction of the largest back-projected magnitude.
        #[arg(long)]
        lambda_rel: Option<f64>,
        /// Scene used to size the CLEAN component budget.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Match restored coefficients against the true scene.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coefficients: PathBuf,
        #[arg(long)]
        scene: String,
        #[arg(long, value_enum, default_value = "proposed")]
        method: Method,
    },
    /// Simulate, restore with every method over a λ grid and tabulate.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "paper1")]
        scene: String,
        #[arg(long)]
        no_noise: bool,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            scene,
            no_noise,
        } => commands::simulate(&common, &scene, no_noise),
        Command::Psf {
            common,
            scene,
            azimuth,
            range,
        } => commands::psf(&common, &scene, azimuth, range),
        Command::Restore {
            common,
            input,
            method,
            lambda_rel,
            scene,
        } => commands::restore_cmd(&common, &input, method, lambda_rel, scene.as_deref()),
        Command::Evaluate {
            common,
            coefficients,
            scene,
            method,
        } => commands::evaluate(&common, &coefficients, &scene, method),
        Command::Bench {
            common,
            scene,
            no_noise,
        } => commands::bench(&common, &scene, no_noise),
    }
}
