use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kpath_core::placement::{DEFAULT_MAX_CANDIDATES, DEFAULT_THETA};

#[derive(Debug, Parser)]
#[command(name = "kpath", version, about = "Pick at most k loop-free paths per flow to keep link utilization low")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory that relative output paths are written into.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Suppress progress and summary messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a fat-tree or random irregular topology.
    GenTopo(GenTopo),
    /// Generate a traffic matrix over a topology's endpoints.
    GenTraffic(GenTraffic),
    /// Multiply each demand by an independent uniform factor.
    Perturb(Perturb),
    /// List loop-free paths between two nodes, shortest first.
    Paths(PathsCmd),
    /// Select paths per flow and write the plan as JSON.
    Plan(PlanCmd),
    /// Per-link loads under fluid ECMP.
    Ecmp(EcmpCmd),
    /// Per-link loads of an existing plan.
    Evaluate(Evaluate),
    /// Maximum utilization for a list of path counts.
    SweepK(SweepK),
    /// Flow-level simulation under a plan or ECMP.
    Simulate(Simulate),
    /// Run a JSON experiment config end to end.
    Experiment(ExperimentCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopoKind {
    Xgft,
    Irregular,
}

#[derive(Debug, Args)]
pub struct GenTopo {
    #[arg(long, value_enum)]
    pub kind: TopoKind,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Children per node at each level, e.g. 5,10.
    #[arg(long, value_delimiter = ',')]
    pub children: Vec<usize>,
    /// Parents per node at each level, e.g. 5,5.
    #[arg(long, value_delimiter = ',')]
    pub parents: Vec<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub degree: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrafficKind {
    Uniform,
    Random,
    Skewed,
}

#[derive(Debug, Args)]
pub struct GenTraffic {
    #[arg(long, value_enum)]
    pub kind: TrafficKind,
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub hot_fraction: f64,
    #[arg(long, default_value_t = 0.8)]
    pub hot_share: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Perturb {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Topology to check node names against. Without it any names pass.
    #[arg(long)]
    pub topo: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub hi: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathsCmd {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub src: String,
    #[arg(long)]
    pub dst: String,
    /// Allowed relative stretch; `inf` for no bound.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value_t = 1000)]
    pub max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PlannerArgs {
    /// Paths per flow (upper bound with --adaptive-k).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Allowed relative stretch; `inf` for no bound.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    /// Path cost: max, sum or convex.
    #[arg(long, default_value = "max")]
    pub cost: String,
    #[arg(long)]
    pub adaptive_k: bool,
    #[arg(long)]
    pub finetune: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: usize,
}

#[derive(Debug, Args)]
pub struct PlanCmd {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub tm: PathBuf,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EcmpCmd {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub tm: PathBuf,
    /// Load report CSV; a sorted-curve file is written next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub tm: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Load report CSV; a sorted-curve file is written next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepK {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub tm: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6,8")]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value = "max")]
    pub cost: String,
    #[arg(long)]
    pub adaptive_k: bool,
    #[arg(long)]
    pub finetune: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Ecmp,
}

#[derive(Debug, Args)]
pub struct Simulate {
    #[arg(long)]
    pub topo: PathBuf,
    #[arg(long)]
    pub tm: PathBuf,
    #[arg(long, conflicts_with = "policy", required_unless_present = "policy")]
    pub plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long, default_value_t = kpath_core::flowsim::DEFAULT_MEAN_HOLDING)]
    pub mean_holding: f64,
    /// Rate of every flow; defaults to a twentieth of the largest demand.
    #[arg(long)]
    pub flow_rate: Option<f64>,
    #[arg(long, default_value_t = kpath_core::flowsim::DEFAULT_HORIZON)]
    pub horizon: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentCmd {
    /// JSON experiment config.
    pub config: PathBuf,
}
