//! JSON-configured experiment runs: one topology and traffic matrix, a
//! plan per seed, ECMP and plan load reports, and optional k sweeps and
//! simulations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kpath_core::flowsim::{default_flow_rate, generate_flows, simulate, DEFAULT_HORIZON, DEFAULT_MEAN_HOLDING};
use kpath_core::loadmodel::{ecmp_loads, plan_loads, report};
use kpath_core::placement::{self, DEFAULT_MAX_CANDIDATES, DEFAULT_THETA};
use kpath_core::topology::{make_irregular, make_xgft};
use kpath_core::traffic::{perturb_matrix, random_matrix, skewed_matrix, uniform_matrix};
use kpath_core::{CostKind, LoadLedger, PlanParams, PlanVariant, RoutingPolicy, Topology, TrafficMatrix};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub topology: TopologySource,
    pub traffic: TrafficSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Planner seeds, one scenario each. Empty means the `--seed` value.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_sweep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    /// Relative to the working directory. `--out-dir` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Input paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    File { path: PathBuf },
    Xgft { levels: usize, children: Vec<usize>, parents: Vec<usize> },
    Irregular { nodes: usize, degree: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficSource {
    File {
        path: PathBuf,
    },
    Uniform,
    Random {
        seed: u64,
    },
    Skewed {
        #[serde(default = "default_hot_fraction")]
        hot_fraction: f64,
        #[serde(default = "default_hot_share")]
        hot_share: f64,
        seed: u64,
    },
}

fn default_hot_fraction() -> f64 {
    0.2
}

fn default_hot_share() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// `null` means no stretch bound.
    #[serde(default = "default_theta", serialize_with = "ser_theta", deserialize_with = "de_theta")]
    pub theta: f64,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default)]
    pub finetune: bool,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            k: default_k(),
            theta: DEFAULT_THETA,
            cost: CostKind::default(),
            adaptive: false,
            finetune: false,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

impl PlannerConfig {
    pub fn params(&self, k: usize, seed: u64) -> PlanParams {
        let mut p = PlanParams::new(k, self.theta, self.cost, seed);
        if self.adaptive {
            p.variant = PlanVariant::AdaptiveK;
        }
        p.fine_tuned = self.finetune;
        p.max_candidates = self.max_candidates;
        p
    }
}

fn default_k() -> usize {
    4
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_max_candidates() -> usize {
    DEFAULT_MAX_CANDIDATES
}

fn ser_theta<S: Serializer>(theta: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if theta.is_finite() {
        s.serialize_some(theta)
    } else {
        s.serialize_none()
    }
}

fn de_theta<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_mean_holding")]
    pub mean_holding: f64,
    /// Defaults to a twentieth of the largest demand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_rate: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub seed: u64,
}

fn default_mean_holding() -> f64 {
    DEFAULT_MEAN_HOLDING
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("experiment name must be a non-empty file-name-safe string");
        }
        let p = &self.planner;
        if p.k == 0 {
            bail!("planner k must be at least 1");
        }
        if p.theta.is_nan() || p.theta < 0.0 {
            bail!("planner theta must be non-negative or null");
        }
        if p.max_candidates == 0 {
            bail!("max_candidates must be positive");
        }
        if let Some(ks) = &self.k_sweep {
            if ks.is_empty() || ks.contains(&0) {
                bail!("k_sweep values must be positive");
            }
        }
        if let Some(pt) = &self.perturb {
            if !(pt.lo >= 0.0 && pt.lo <= pt.hi) {
                bail!("perturb needs 0 <= lo <= hi");
            }
        }
        if let Some(sim) = &self.simulation {
            for (what, v) in [("mean_holding", Some(sim.mean_holding)), ("horizon", Some(sim.horizon)), ("flow_rate", sim.flow_rate)] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        bail!("simulation {what} must be positive");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Files produced by a run, keyed by name inside the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub files: Vec<(String, String)>,
    pub summary: Vec<ScenarioSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub seed: u64,
    pub path_count: usize,
    pub ecmp_max: f64,
    pub plan_max: f64,
    pub sim: Option<(f64, f64)>,
}

impl Artifacts {
    /// Writes every file. Nothing is written unless the whole run succeeded,
    /// since artifacts only exist after `run_experiment` returns.
    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        for (name, body) in &self.files {
            let path = self.out_dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn read(base: &Path, path: &Path) -> Result<String> {
    let full = base.join(path);
    fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))
}

fn build_topology(source: &TopologySource, base: &Path) -> Result<(Topology, Option<String>)> {
    Ok(match source {
        TopologySource::File { path } => {
            let text = read(base, path)?;
            let topo = Topology::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
            (topo, Some(text))
        }
        TopologySource::Xgft { levels, children, parents } => (make_xgft(*levels, children, parents)?, None),
        TopologySource::Irregular { nodes, degree, seed } => (make_irregular(*nodes, *degree, *seed)?, None),
    })
}

fn build_traffic(source: &TrafficSource, topo: &Topology, base: &Path) -> Result<(TrafficMatrix, Option<String>)> {
    Ok(match source {
        TrafficSource::File { path } => {
            let text = read(base, path)?;
            let m = TrafficMatrix::read_csv(topo, text.as_bytes()).with_context(|| format!("parsing {}", path.display()))?;
            (m, Some(text))
        }
        TrafficSource::Uniform => (uniform_matrix(topo)?, None),
        TrafficSource::Random { seed } => (random_matrix(topo, *seed)?, None),
        TrafficSource::Skewed { hot_fraction, hot_share, seed } => {
            (skewed_matrix(topo, *hot_fraction, *hot_share, *seed)?, None)
        }
    })
}

/// SHA-256 over the canonical config JSON (without the output directory)
/// and the bytes of every input file.
pub fn config_hash(cfg: &ExperimentConfig, inputs: &[&str]) -> Result<String> {
    let mut cfg = cfg.clone();
    cfg.output_dir = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_string(&cfg)?.as_bytes());
    for text in inputs {
        h.update(b"\0");
        h.update(text.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn stamp(hash: &str) -> String {
    format!("# config {hash}\n")
}

fn report_files(topo: &Topology, ledger: &LoadLedger, hash: &str) -> Result<(String, String)> {
    let r = report(topo, ledger);
    let mut csv = stamp(hash).into_bytes();
    r.write_csv(topo, &mut csv)?;
    let mut curve = stamp(hash).into_bytes();
    r.write_curve(&mut curve)?;
    Ok((String::from_utf8(csv)?, String::from_utf8(curve)?))
}

/// Computes every artifact in memory. `base` resolves relative input paths;
/// `seed` is used when the config lists no seeds.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path, out_dir: PathBuf, seed: u64) -> Result<Artifacts> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.seeds.is_empty() {
        cfg.seeds.push(seed);
    }

    let (topo, topo_text) = build_topology(&cfg.topology, base).context("building topology")?;
    if !topo.is_strongly_connected() {
        bail!("topology is not strongly connected");
    }
    let (mut m, tm_text) = build_traffic(&cfg.traffic, &topo, base).context("building traffic matrix")?;
    if let Some(p) = &cfg.perturb {
        m = perturb_matrix(&m, p.lo, p.hi, p.seed)?;
    }
    let inputs: Vec<&str> = topo_text.iter().chain(&tm_text).map(String::as_str).collect();
    let hash = config_hash(&cfg, &inputs)?;

    let mut files = Vec::new();
    let mut resolved = serde_json::to_string_pretty(&serde_json::json!({ "config_hash": hash, "config": cfg }))?;
    resolved.push('\n');
    files.push(("config.resolved.json".to_string(), resolved));
    files.push(("topology.topo".to_string(), stamp(&hash) + &topo.to_text()));
    files.push(("traffic.csv".to_string(), stamp(&hash) + &m.to_csv_string(&topo)));

    let ecmp = ecmp_loads(&topo, &m).context("ECMP loads")?;
    let (csv, curve) = report_files(&topo, &ecmp, &hash)?;
    files.push(("ecmp_loads.csv".to_string(), csv));
    files.push(("ecmp_loads.curve.dat".to_string(), curve));

    let sim_flows = match &cfg.simulation {
        Some(sim) => {
            let rate = sim.flow_rate.unwrap_or_else(|| default_flow_rate(&m));
            Some((sim, generate_flows(&m, sim.mean_holding, rate, sim.horizon, sim.seed)?))
        }
        None => None,
    };

    let mut summary = Vec::new();
    for &s in &cfg.seeds {
        let params = cfg.planner.params(cfg.planner.k, s);
        let plan = placement::plan(&topo, &m, &params).with_context(|| format!("planning with seed {s}"))?;
        files.push((format!("plan_s{s}.json"), plan.to_json(&topo, Some(&hash))?));
        let loads = plan_loads(&topo, &m, &plan)?;
        let (csv, curve) = report_files(&topo, &loads, &hash)?;
        files.push((format!("plan_loads_s{s}.csv"), csv));
        files.push((format!("plan_loads_s{s}.curve.dat"), curve));

        if let Some(ks) = &cfg.k_sweep {
            let mut out = stamp(&hash) + "k,max_utilization\n";
            for &k in ks {
                let p = placement::plan(&topo, &m, &cfg.planner.params(k, s))?;
                writeln!(out, "{k},{}", plan_loads(&topo, &m, &p)?.max_utilization())?;
            }
            files.push((format!("k_sweep_s{s}.csv"), out));
        }

        let sim = match &sim_flows {
            Some((sim, flows)) => {
                let pt = simulate(&topo, RoutingPolicy::Plan(&plan), flows, sim.horizon, sim.seed ^ s)?;
                let et = simulate(&topo, RoutingPolicy::Ecmp, flows, sim.horizon, sim.seed ^ s)?;
                files.push((format!("sim_plan_s{s}.csv"), stamp(&hash) + &pt.to_csv()));
                files.push((format!("sim_ecmp_s{s}.csv"), stamp(&hash) + &et.to_csv()));
                Some((pt.window_max_average, et.window_max_average))
            }
            None => None,
        };
        summary.push(ScenarioSummary {
            seed: s,
            path_count: plan.path_count(),
            ecmp_max: ecmp.max_utilization(),
            plan_max: loads.max_utilization(),
            sim,
        });
    }

    let mut table = stamp(&hash) + "seed,paths,ecmp_max_utilization,plan_max_utilization";
    if cfg.simulation.is_some() {
        table.push_str(",sim_plan_window_max,sim_ecmp_window_max");
    }
    table.push('\n');
    for row in &summary {
        write!(table, "{},{},{},{}", row.seed, row.path_count, row.ecmp_max, row.plan_max)?;
        if let Some((p, e)) = row.sim {
            write!(table, ",{p},{e}")?;
        }
        table.push('\n');
    }
    files.push(("summary.csv".to_string(), table));

    Ok(Artifacts { config_hash: hash, out_dir, files, summary })
}
