use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tvdbar", version, about = "TV-enhanced D-bar reconstruction for 2-D EIT")]
pub struct Cli {
    /// Worker threads for parallel stages; 0 uses all cores.
    #[arg(long, global = true, env = "TVDBAR_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate noisy ND/DN data of a phantom.
    Simulate(SimulateArgs),
    /// Scattering transform from DN data or from a Beltrami coefficient.
    Scatter(ScatterArgs),
    /// D-bar reconstruction from a scattering field.
    Reconstruct(ReconstructArgs),
    /// Multi-label TV segmentation of an image.
    Segment(SegmentArgs),
    /// Contrast enhancement of a segmented image against DN data.
    Enhance(EnhanceArgs),
    /// Full iterative reconstruction driven by a config file.
    Run(RunArgs),
    /// Recompute metrics.csv from the images written by `run`.
    Metrics(MetricsArgs),
    /// PNG preview of an image.
    Preview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct Grid {
    /// z-grid has 2^ell points per side.
    #[arg(long, default_value_t = 7)]
    pub ell: u32,
    /// z-grid half width.
    #[arg(long, default_value_t = 2.3)]
    pub s: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Phantom: `heart_and_lungs`, `pipeline` or a JSON file.
    #[arg(long)]
    pub phantom: String,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trigonometric order N; matrices are 2N x 2N.
    #[arg(long, default_value_t = 16)]
    pub order: usize,
    #[arg(long, default_value_t = 64)]
    pub mesh_rings: usize,
    #[command(flatten)]
    pub grid: Grid,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Tau,
    T,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    /// DN matrix (binary with JSON header).
    #[arg(long, conflicts_with = "mu", required_unless_present = "mu")]
    pub dn: Option<PathBuf>,
    /// Beltrami coefficient image.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// Radius for DN data; defaults to --r.
    #[arg(long, conflicts_with = "mu")]
    pub radius: Option<f64>,
    /// `disc:R` or `annulus:R1:R2`, for Beltrami data.
    #[arg(long, requires = "mu")]
    pub kmask: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub m: u32,
    #[arg(long, default_value_t = 5.0)]
    pub r: f64,
    #[arg(long, default_value_t = 10.0)]
    pub r_tilde: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Tau)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub scattering: PathBuf,
    #[arg(long)]
    pub cutoff: f64,
    #[command(flatten)]
    pub grid: Grid,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a PNG preview here.
    #[arg(long)]
    pub preview: Option<PathBuf>,
    /// Preview color range `lo:hi`.
    #[arg(long, default_value = "0.3:2.5")]
    pub scale: String,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Number of regions.
    #[arg(long = "K", alias = "regions", default_value_t = 4)]
    pub regions: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub edge_strength: f64,
    #[arg(long, default_value_t = 2.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Label image (label index on the disc, -1 outside).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Measured DN matrix.
    #[arg(long)]
    pub data: PathBuf,
    /// Contrast bounds `c:C`.
    #[arg(long, default_value = "0.3:2.5")]
    pub bounds: String,
    #[arg(long, default_value_t = 60)]
    pub budget: usize,
    #[arg(long, default_value_t = 2.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 64)]
    pub mesh_rings: usize,
    #[arg(long, default_value_t = 0.01)]
    pub flat_tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV log of every sampled (s, t).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Use this DN matrix instead of simulating the config phantom.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Truth image for scoring when --data is given.
    #[arg(long, requires = "data")]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory written by `run`.
    #[arg(long)]
    pub results: PathBuf,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Color range `lo:hi`; defaults to the image range on the disc.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}
