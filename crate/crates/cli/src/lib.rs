//! Command-line front end: generators, planning, evaluation, simulation and
//! the config-driven experiment driver.

pub mod args;
pub mod experiment;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kpath_core::flowsim::{default_flow_rate, generate_flows, simulate as run_sim};
use kpath_core::kpaths::enumerate_paths;
use kpath_core::loadmodel::{ecmp_loads, plan_loads, report};
use kpath_core::placement;
use kpath_core::topology::{make_irregular, make_xgft};
use kpath_core::traffic::{perturb_matrix, random_matrix, skewed_matrix, uniform_matrix};
use kpath_core::{CostKind, LoadLedger, MultipathPlan, PlanParams, PlanVariant, RoutingPolicy, Topology, TrafficMatrix};

use crate::args::{Cli, Command, PlannerArgs, PolicyKind, TopoKind, TrafficKind};
use crate::experiment::{run_experiment, ExperimentConfig};

/// How a run failed, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameter values (exit 1).
    Usage(String),
    /// Unreadable or invalid input data, or a failed computation (exit 2).
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<kpath_core::Error> for Failure {
    fn from(e: kpath_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Destination of a single-output command: a file (relative paths go under
/// `--out-dir`) or standard output.
struct Sink<'a> {
    out_dir: Option<&'a Path>,
    quiet: bool,
}

impl Sink<'_> {
    fn resolve(&self, output: Option<&Path>, default_name: &str) -> Option<PathBuf> {
        match (output, self.out_dir) {
            (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
            (Some(p), _) => Some(p.to_path_buf()),
            (None, Some(dir)) => Some(dir.join(default_name)),
            (None, None) => None,
        }
    }

    /// Writes all files, or prints the first body when there is no path.
    fn emit(&self, files: Vec<(Option<PathBuf>, String)>) -> Result<()> {
        for (path, body) in files {
            match path {
                Some(p) => {
                    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
                    }
                    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
                    self.note(&format!("wrote {}", p.display()));
                }
                None => {
                    std::io::stdout().write_all(body.as_bytes())?;
                    break;
                }
            }
        }
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// `loads.csv` -> `loads.curve.dat`.
fn curve_path(csv: &Path) -> PathBuf {
    csv.with_extension("curve.dat")
}

fn load_topology(path: &Path) -> Result<Topology> {
    let text = fs::read_to_string(path).with_context(|| format!("reading topology {}", path.display()))?;
    Topology::parse(&text).with_context(|| format!("parsing topology {}", path.display()))
}

fn load_matrix(topo: &Topology, path: &Path) -> Result<TrafficMatrix> {
    let file = fs::File::open(path).with_context(|| format!("reading traffic matrix {}", path.display()))?;
    TrafficMatrix::read_csv(topo, file).with_context(|| format!("parsing traffic matrix {}", path.display()))
}

fn load_plan(topo: &Topology, path: &Path) -> Result<MultipathPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
    MultipathPlan::from_json(topo, &text).with_context(|| format!("parsing plan {}", path.display()))
}

fn check_theta(theta: f64) -> Result<(), Failure> {
    if theta.is_nan() || theta < 0.0 {
        return Err(usage(format!("--theta must be non-negative or inf, got {theta}")));
    }
    Ok(())
}

fn parse_cost(s: &str) -> Result<CostKind, Failure> {
    s.parse().map_err(|e: kpath_core::Error| usage(e.to_string()))
}

fn planner_params(a: &PlannerArgs, k: usize, seed: u64) -> Result<PlanParams, Failure> {
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    if a.max_candidates == 0 {
        return Err(usage("--max-candidates must be positive"));
    }
    check_theta(a.theta)?;
    let mut p = PlanParams::new(k, a.theta, parse_cost(&a.cost)?, seed);
    if a.adaptive_k {
        p.variant = PlanVariant::AdaptiveK;
    }
    p.fine_tuned = a.finetune;
    p.max_candidates = a.max_candidates;
    Ok(p)
}

fn report_bodies(topo: &Topology, ledger: &LoadLedger) -> Result<(String, String)> {
    let r = report(topo, ledger);
    let mut csv = Vec::new();
    r.write_csv(topo, &mut csv)?;
    let mut curve = Vec::new();
    r.write_curve(&mut curve)?;
    Ok((String::from_utf8(csv)?, String::from_utf8(curve)?))
}

fn emit_report(sink: &Sink, output: Option<&Path>, default_name: &str, topo: &Topology, ledger: &LoadLedger) -> Result<()> {
    let (csv, curve) = report_bodies(topo, ledger)?;
    let path = sink.resolve(output, default_name);
    let curve_file = path.as_deref().map(curve_path);
    let mut files = vec![(path, csv)];
    if let Some(c) = curve_file {
        files.push((Some(c), curve));
    }
    sink.emit(files)?;
    sink.note(&format!("max utilization {}", ledger.max_utilization()));
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let sink = Sink { out_dir: cli.out_dir.as_deref(), quiet: cli.quiet };
    let seed = cli.seed;
    match cli.command {
        Command::GenTopo(a) => {
            let topo = match a.kind {
                TopoKind::Xgft => {
                    let levels = a.levels.unwrap_or(a.children.len());
                    if a.children.is_empty() || a.parents.is_empty() {
                        return Err(usage("xgft needs --children and --parents"));
                    }
                    make_xgft(levels, &a.children, &a.parents).map_err(|e| usage(e.to_string()))?
                }
                TopoKind::Irregular => {
                    let (Some(n), Some(d)) = (a.nodes, a.degree) else {
                        return Err(usage("irregular needs --nodes and --degree"));
                    };
                    make_irregular(n, d, seed).map_err(|e| usage(e.to_string()))?
                }
            };
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "topology.topo"), topo.to_text())])?;
        }
        Command::GenTraffic(a) => {
            let topo = load_topology(&a.topo)?;
            let m = match a.kind {
                TrafficKind::Uniform => uniform_matrix(&topo)?,
                TrafficKind::Random => random_matrix(&topo, seed)?,
                TrafficKind::Skewed => {
                    if !(a.hot_fraction > 0.0 && a.hot_fraction < 1.0 && a.hot_share > 0.0 && a.hot_share < 1.0) {
                        return Err(usage("--hot-fraction and --hot-share must lie in (0, 1)"));
                    }
                    skewed_matrix(&topo, a.hot_fraction, a.hot_share, seed)?
                }
            };
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "traffic.csv"), m.to_csv_string(&topo))])?;
        }
        Command::Perturb(a) => {
            if !(a.lo >= 0.0 && a.lo <= a.hi) {
                return Err(usage("perturb needs 0 <= --lo <= --hi"));
            }
            let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let topo = match &a.topo {
                Some(p) => load_topology(p)?,
                None => names_only_topology(&text)?,
            };
            let m = TrafficMatrix::read_csv(&topo, text.as_bytes())
                .with_context(|| format!("parsing traffic matrix {}", a.input.display()))?;
            let out = perturb_matrix(&m, a.lo, a.hi, seed)?;
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "traffic_perturbed.csv"), out.to_csv_string(&topo))])?;
        }
        Command::Paths(a) => {
            check_theta(a.theta)?;
            if a.max == 0 {
                return Err(usage("--max must be positive"));
            }
            let topo = load_topology(&a.topo)?;
            let s = topo.node_or_err(&a.src)?;
            let d = topo.node_or_err(&a.dst)?;
            if s == d {
                return Err(usage("--src and --dst must differ"));
            }
            let mut out = String::new();
            for p in enumerate_paths(&topo, s, d, a.theta, a.max)? {
                writeln!(out, "{} {}", p.display(&topo), p.length).unwrap();
            }
            std::io::stdout().write_all(out.as_bytes()).context("writing paths")?;
        }
        Command::Plan(a) => {
            let params = planner_params(&a.planner, a.planner.k, seed)?;
            let topo = load_topology(&a.topo)?;
            let m = load_matrix(&topo, &a.tm)?;
            let plan = placement::plan(&topo, &m, &params)?;
            let max = plan_loads(&topo, &m, &plan)?.max_utilization();
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "plan.json"), plan.to_json(&topo, None)?)])?;
            sink.note(&format!("{} paths for {} flows, max utilization {max}", plan.path_count(), plan.flow_count()));
        }
        Command::Ecmp(a) => {
            let topo = load_topology(&a.topo)?;
            let m = load_matrix(&topo, &a.tm)?;
            let ledger = ecmp_loads(&topo, &m)?;
            emit_report(&sink, a.output.as_deref(), "ecmp_loads.csv", &topo, &ledger)?;
        }
        Command::Evaluate(a) => {
            let topo = load_topology(&a.topo)?;
            let m = load_matrix(&topo, &a.tm)?;
            let plan = load_plan(&topo, &a.plan)?;
            let ledger = plan_loads(&topo, &m, &plan)?;
            emit_report(&sink, a.output.as_deref(), "loads.csv", &topo, &ledger)?;
        }
        Command::SweepK(a) => {
            if a.k_values.is_empty() {
                return Err(usage("--k-values is empty"));
            }
            let base = PlannerArgs {
                k: 1,
                theta: a.theta,
                cost: a.cost.clone(),
                adaptive_k: a.adaptive_k,
                finetune: a.finetune,
                max_candidates: placement::DEFAULT_MAX_CANDIDATES,
            };
            let params: Vec<PlanParams> =
                a.k_values.iter().map(|&k| planner_params(&base, k, seed)).collect::<Result<_, _>>()?;
            let topo = load_topology(&a.topo)?;
            let m = load_matrix(&topo, &a.tm)?;
            let mut out = String::from("k,max_utilization\n");
            for p in params {
                let plan = placement::plan(&topo, &m, &p)?;
                writeln!(out, "{},{}", p.k, plan_loads(&topo, &m, &plan)?.max_utilization()).unwrap();
            }
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "k_sweep.csv"), out)])?;
        }
        Command::Simulate(a) => {
            for (name, v) in [("--mean-holding", Some(a.mean_holding)), ("--horizon", Some(a.horizon)), ("--flow-rate", a.flow_rate)] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(usage(format!("{name} must be positive")));
                    }
                }
            }
            let topo = load_topology(&a.topo)?;
            let m = load_matrix(&topo, &a.tm)?;
            let plan = a.plan.as_deref().map(|p| load_plan(&topo, p)).transpose()?;
            let policy = match (&plan, a.policy) {
                (Some(p), _) => RoutingPolicy::Plan(p),
                (None, Some(PolicyKind::Ecmp)) => RoutingPolicy::Ecmp,
                (None, None) => return Err(usage("give --plan or --policy ecmp")),
            };
            let rate = a.flow_rate.unwrap_or_else(|| default_flow_rate(&m));
            let flows = generate_flows(&m, a.mean_holding, rate, a.horizon, seed)?;
            let trace = run_sim(&topo, policy, &flows, a.horizon, seed)?;
            sink.emit(vec![(sink.resolve(a.output.as_deref(), "trace.csv"), trace.to_csv())])?;
            if !cli.quiet {
                println!(
                    "flows {} window [{}, {}] window-averaged max link load {}",
                    flows.len(),
                    trace.window.0,
                    trace.window.1,
                    trace.window_max_average
                );
            }
        }
        Command::Experiment(a) => {
            let text = fs::read_to_string(&a.config).with_context(|| format!("reading config {}", a.config.display()))?;
            let cfg = ExperimentConfig::from_json(&text).with_context(|| format!("parsing config {}", a.config.display()))?;
            let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
            let out_dir = cli
                .out_dir
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(&cfg.name));
            let artifacts = run_experiment(&cfg, &base, out_dir, seed)?;
            artifacts.write()?;
            if !cli.quiet {
                println!("config {} -> {}", artifacts.config_hash, artifacts.out_dir.display());
                for row in &artifacts.summary {
                    print!("seed {} paths {} ECMP max {} plan max {}", row.seed, row.path_count, row.ecmp_max, row.plan_max);
                    if let Some((p, e)) = row.sim {
                        print!(" simulated plan {p} ECMP {e}");
                    }
                    println!();
                }
            }
        }
    }
    Ok(())
}

/// A topology whose nodes are the names in a traffic CSV, all endpoints, no
/// links. Enough to read and rewrite the matrix.
fn names_only_topology(csv: &str) -> Result<Topology> {
    let mut b = kpath_core::TopologyBuilder::new();
    for line in csv.lines().skip_while(|l| l.trim_start().starts_with('#')).skip(1) {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for name in line.split(',').take(2) {
            let name = name.trim();
            if b.node(name).is_none() {
                b.add_node(name)?;
            }
        }
    }
    Ok(b.build())
}
