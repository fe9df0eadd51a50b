use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use trilab::GraphFamily;

#[derive(Debug, Parser)]
#[command(
    name = "trilab",
    version,
    about = "Two-point functions, triangle diagrams and cluster-size decompositions on finite transitive graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: TopCommand,
}

#[derive(Debug, Subcommand)]
pub enum TopCommand {
    #[command(flatten)]
    Run(RunCommand),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunCommand {
    /// Exact B, B_n and Q by enumerating every edge configuration.
    Exact(ExactArgs),
    /// Check one step of the triangle / open-triangle argument.
    Verify(VerifyArgs),
    /// Monte Carlo estimate of B (and optionally B_n).
    Mc(McArgs),
    /// Radial power-law and box-sum diagnostics.
    Kernel(KernelArgs),
    /// Profile of max Q(v,w) outside balls of growing radius.
    OpenTriangle(OpenTriangleArgs),
}

impl RunCommand {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            RunCommand::Exact(a) => Some(&a.out),
            RunCommand::Verify(a) => a.out.as_ref(),
            RunCommand::Mc(a) => Some(&a.out),
            RunCommand::Kernel(a) => a.out.as_ref(),
            RunCommand::OpenTriangle(a) => Some(&a.out),
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            RunCommand::Exact(a) => a.out = dir,
            RunCommand::Verify(a) => a.out = Some(dir),
            RunCommand::Mc(a) => a.out = dir,
            RunCommand::Kernel(a) => a.out = Some(dir),
            RunCommand::OpenTriangle(a) => a.out = dir,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GraphArgs {
    /// cycle:n, torus:d,L, complete:n or hypercube:k
    #[arg(long)]
    #[serde(with = "graph_spec")]
    pub graph: GraphFamily,
    /// Edge open probability.
    #[arg(long)]
    pub p: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub model: GraphArgs,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Psd,
    Decompose,
    Spectral,
    Tail,
    Lemma,
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Enumeration when cheap, the cycle closed forms otherwise.
    Auto,
    Exact,
    ClosedForm,
    Mc,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: GraphArgs,
    #[arg(long, value_enum)]
    pub which: Check,
    #[arg(long, value_enum, default_value_t = Source::Auto)]
    pub source: Source,
    /// Base vertex.
    #[arg(long, default_value_t = 0)]
    pub vertex: usize,
    /// Tolerance override for the selected check.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[command(flatten)]
    pub model: GraphArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Estimate every row instead of the root row only.
    #[arg(long)]
    pub full: bool,
    /// Root vertex for single-row estimates.
    #[arg(long, default_value_t = 0)]
    pub root: usize,
    /// Also estimate B_1..B_{n_max} plus an overflow bucket.
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelCheck {
    Triangle,
    L2,
    Box,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub which: KernelCheck,
    #[arg(long)]
    pub d: u32,
    /// Box half-widths for `--which box`; a slope is reported between consecutive sizes.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [4u32, 8])]
    pub sizes: Vec<u32>,
    /// Compare against the frontier table (triangle finite iff d > 6, l2 iff d > 12,
    /// box sums growing for d <= 4); exit 1 on mismatch.
    #[arg(long)]
    pub expect: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OpenTriangleArgs {
    #[command(flatten)]
    pub model: GraphArgs,
    #[arg(long, value_enum, default_value_t = Source::Auto)]
    pub source: Source,
    #[arg(long, default_value_t = 0)]
    pub vertex: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory; defaults to the manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Graphs are stored in manifests as their `family:params` flag string.
mod graph_spec {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use trilab::GraphFamily;

    pub fn serialize<S: Serializer>(g: &GraphFamily, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(g)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GraphFamily, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}
