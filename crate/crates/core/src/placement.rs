//! Greedy multipath selection.
//!
//! Flows are visited in a seeded random order and each picks paths from its
//! candidate set (loop-free, within the stretch bound) by a load-aware cost
//! against a running per-link ledger. Traffic of a flow is always split
//! evenly over its chosen paths.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kpaths::{enumerate_with_tree, Path, ShortestPathTree};
use crate::loadmodel::{plan_loads, LoadLedger};
use crate::topology::{LinkId, NodeId, Topology};
use crate::traffic::{shuffled_flows, TrafficMatrix};
use crate::{approx_le, EPS};

pub const DEFAULT_THETA: f64 = 0.25;
pub const DEFAULT_MAX_CANDIDATES: usize = 100;
pub const DEFAULT_FINETUNE_ROUNDS: usize = 100;
pub const DEFAULT_CONVEX_EXPONENT: f64 = 2.0;

/// How a path is scored against the current ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// Highest resulting utilization along the path.
    #[default]
    MaxUtil,
    /// Sum of resulting utilizations.
    SumUtil,
    /// Sum of resulting utilizations raised to `exponent` (> 1).
    ConvexUtil { exponent: f64 },
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max_util" => Ok(CostKind::MaxUtil),
            "sum" | "sum_util" => Ok(CostKind::SumUtil),
            "convex" | "convex_util" => Ok(CostKind::ConvexUtil { exponent: DEFAULT_CONVEX_EXPONENT }),
            other => Err(Error::InvalidArgument(format!("unknown cost function `{other}`"))),
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::MaxUtil => write!(f, "max"),
            CostKind::SumUtil => write!(f, "sum"),
            CostKind::ConvexUtil { exponent } => write!(f, "convex({exponent})"),
        }
    }
}

/// Cost of routing `increment` more traffic over `p`.
pub fn path_cost(kind: CostKind, ledger: &LoadLedger, p: &Path, increment: f64) -> Result<f64> {
    if p.links.is_empty() {
        return Err(Error::InvalidArgument("cost of an empty path".into()));
    }
    let util = p.links.iter().map(|&l| (ledger.load(l) + increment) / ledger.capacity(l));
    Ok(match kind {
        CostKind::MaxUtil => util.fold(f64::NEG_INFINITY, f64::max),
        CostKind::SumUtil => util.sum(),
        CostKind::ConvexUtil { exponent } => {
            if !(exponent > 1.0) {
                return Err(Error::InvalidArgument(format!("convex exponent must exceed 1, got {exponent}")));
            }
            util.map(|u| u.powf(exponent)).sum()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlanVariant {
    #[default]
    FixedK,
    AdaptiveK,
    Oracle,
}

mod theta_serde {
    use super::*;

    pub fn serialize<S: Serializer>(theta: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if theta.is_finite() {
            s.serialize_some(theta)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Planner inputs. An infinite `theta` is written as `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub k: usize,
    #[serde(with = "theta_serde")]
    pub theta: f64,
    pub cost: CostKind,
    pub seed: u64,
    pub variant: PlanVariant,
    #[serde(default)]
    pub fine_tuned: bool,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
    /// Adaptive mode only: require a strict decrease to add a path.
    #[serde(default)]
    pub strict_accept: bool,
}

fn default_max_candidates() -> usize {
    DEFAULT_MAX_CANDIDATES
}

impl PlanParams {
    pub fn new(k: usize, theta: f64, cost: CostKind, seed: u64) -> Self {
        PlanParams {
            k,
            theta,
            cost,
            seed,
            variant: PlanVariant::FixedK,
            fine_tuned: false,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            strict_accept: false,
        }
    }

    pub fn adaptive(mut self) -> Self {
        self.variant = PlanVariant::AdaptiveK;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.theta.is_nan() || self.theta < 0.0 {
            return Err(Error::InvalidArgument(format!("theta must be non-negative, got {}", self.theta)));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidArgument("candidate cap must be positive".into()));
        }
        if let CostKind::ConvexUtil { exponent } = self.cost {
            if !(exponent > 1.0) {
                return Err(Error::InvalidArgument(format!("convex exponent must exceed 1, got {exponent}")));
            }
        }
        Ok(())
    }
}

/// Selected paths per flow together with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathPlan {
    pub params: PlanParams,
    paths: BTreeMap<(NodeId, NodeId), Vec<Path>>,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    params: PlanParams,
    flows: Vec<FlowRecord>,
}

#[derive(Serialize, Deserialize)]
struct FlowRecord {
    src: String,
    dst: String,
    split: f64,
    paths: Vec<Vec<String>>,
}

impl MultipathPlan {
    pub fn new(params: PlanParams) -> Self {
        MultipathPlan { params, paths: BTreeMap::new() }
    }

    pub fn paths(&self, s: NodeId, t: NodeId) -> Option<&[Path]> {
        self.paths.get(&(s, t)).map(Vec::as_slice)
    }

    pub fn set_paths(&mut self, s: NodeId, t: NodeId, paths: Vec<Path>) {
        self.paths.insert((s, t), paths);
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), &[Path])> + '_ {
        self.paths.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn flow_count(&self) -> usize {
        self.paths.len()
    }

    pub fn path_count(&self) -> usize {
        self.paths.values().map(Vec::len).sum()
    }

    pub fn to_json(&self, topo: &Topology, config_hash: Option<&str>) -> Result<String> {
        let flows = self
            .paths
            .iter()
            .map(|(&(s, t), ps)| FlowRecord {
                src: topo.name(s).into(),
                dst: topo.name(t).into(),
                split: 1.0 / ps.len() as f64,
                paths: ps.iter().map(|p| p.names(topo)).collect(),
            })
            .collect();
        let file = PlanFile { config_hash: config_hash.map(str::to_string), params: self.params.clone(), flows };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(topo: &Topology, text: &str) -> Result<MultipathPlan> {
        let file: PlanFile = serde_json::from_str(text)?;
        let mut plan = MultipathPlan::new(file.params);
        for rec in file.flows {
            let (s, t) = (topo.node_or_err(&rec.src)?, topo.node_or_err(&rec.dst)?);
            let mut paths = Vec::with_capacity(rec.paths.len());
            for names in &rec.paths {
                let nodes = names.iter().map(|n| topo.node_or_err(n)).collect::<Result<Vec<_>>>()?;
                let p = Path::from_nodes(topo, &nodes)?;
                if p.src != s || p.dst != t {
                    return Err(Error::Plan(format!("path {} does not join {} to {}", names.join("-"), rec.src, rec.dst)));
                }
                if paths.contains(&p) {
                    return Err(Error::Plan(format!("duplicate path for {}->{}", rec.src, rec.dst)));
                }
                paths.push(p);
            }
            if paths.is_empty() {
                return Err(Error::Plan(format!("flow {}->{} has no paths", rec.src, rec.dst)));
            }
            if plan.paths.insert((s, t), paths).is_some() {
                return Err(Error::Plan(format!("flow {}->{} listed twice", rec.src, rec.dst)));
            }
        }
        Ok(plan)
    }
}

/// Candidate paths per flow, computed once per destination tree.
pub struct CandidateCache<'a> {
    topo: &'a Topology,
    theta: f64,
    cap: usize,
    trees: HashMap<NodeId, ShortestPathTree>,
    paths: HashMap<(NodeId, NodeId), Vec<Path>>,
}

impl<'a> CandidateCache<'a> {
    pub fn new(topo: &'a Topology, theta: f64, cap: usize) -> Self {
        CandidateCache { topo, theta, cap, trees: HashMap::new(), paths: HashMap::new() }
    }

    pub fn get(&mut self, s: NodeId, t: NodeId) -> Result<&[Path]> {
        if !self.paths.contains_key(&(s, t)) {
            let topo = self.topo;
            let tree = self.trees.entry(t).or_insert_with(|| ShortestPathTree::build(topo, t));
            let found = enumerate_with_tree(topo, tree, s, self.theta, self.cap)?;
            if found.is_empty() {
                return Err(Error::NoPath { src: topo.name(s).into(), dst: topo.name(t).into() });
            }
            self.paths.insert((s, t), found);
        }
        Ok(&self.paths[&(s, t)])
    }
}

/// Index of the cheapest candidate not yet taken. Cost ties go to the
/// shorter path, remaining ties to a uniform draw.
fn pick_best(
    kind: CostKind,
    ledger: &LoadLedger,
    cands: &[Path],
    taken: &[bool],
    increment: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<usize>> {
    let mut scored = Vec::with_capacity(cands.len());
    for (i, p) in cands.iter().enumerate() {
        if !taken[i] {
            scored.push((i, path_cost(kind, ledger, p, increment)?));
        }
    }
    let Some(best) = scored.iter().map(|&(_, c)| c).min_by(f64::total_cmp) else {
        return Ok(None);
    };
    scored.retain(|&(_, c)| approx_le(c, best));
    let shortest = scored.iter().map(|&(i, _)| cands[i].length).min_by(f64::total_cmp).unwrap();
    scored.retain(|&(i, _)| approx_le(cands[i].length, shortest));
    let pick = if scored.len() == 1 { 0 } else { rng.random_range(0..scored.len()) };
    Ok(Some(scored[pick].0))
}

/// Plan with exactly `min(k, |candidates|)` distinct paths per flow
/// (greedy, each pick costed against the ledger including earlier picks).
pub fn plan_fixed_k(
    topo: &Topology,
    m: &TrafficMatrix,
    k: usize,
    theta: f64,
    kind: CostKind,
    seed: u64,
) -> Result<MultipathPlan> {
    run_fixed_k(topo, m, &PlanParams::new(k, theta, kind, seed)).map(|(p, _)| p)
}

/// [`plan_fixed_k`] returning the planner's internal ledger as well.
pub fn run_fixed_k(topo: &Topology, m: &TrafficMatrix, params: &PlanParams) -> Result<(MultipathPlan, LoadLedger)> {
    params.validate()?;
    let mut params = params.clone();
    params.variant = PlanVariant::FixedK;
    params.fine_tuned = false;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache = CandidateCache::new(topo, params.theta, params.max_candidates);
    let mut ledger = LoadLedger::new(topo);
    let mut plan = MultipathPlan::new(params.clone());

    for ((s, t), alpha) in shuffled_flows(m, &mut rng) {
        let cands = cache.get(s, t)?;
        let count = params.k.min(cands.len());
        let increment = alpha / count as f64;
        let mut taken = vec![false; cands.len()];
        let mut chosen = Vec::with_capacity(count);
        for _ in 0..count {
            let i = pick_best(params.cost, &ledger, cands, &taken, increment, &mut rng)?.expect("count <= candidates");
            taken[i] = true;
            ledger.add_path(&cands[i], increment);
            chosen.push(cands[i].clone());
        }
        plan.set_paths(s, t, chosen);
    }
    Ok((plan, ledger))
}

/// Plan that grows each flow's path set one round at a time, keeping a new
/// path only if the re-spread load does not raise the highest load on the
/// flow's links.
pub fn plan_adaptive_k(
    topo: &Topology,
    m: &TrafficMatrix,
    k_max: usize,
    theta: f64,
    kind: CostKind,
    seed: u64,
) -> Result<MultipathPlan> {
    run_adaptive_k(topo, m, &PlanParams::new(k_max, theta, kind, seed).adaptive()).map(|(p, _)| p)
}

/// Highest utilization over the links of `paths`, each link counted once.
fn max_over(ledger: &LoadLedger, paths: &[&Path], extra: &HashMap<LinkId, f64>) -> f64 {
    paths
        .iter()
        .flat_map(|p| p.links.iter())
        .map(|&l| (ledger.load(l) + extra.get(&l).copied().unwrap_or(0.0)) / ledger.capacity(l))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn run_adaptive_k(topo: &Topology, m: &TrafficMatrix, params: &PlanParams) -> Result<(MultipathPlan, LoadLedger)> {
    params.validate()?;
    let mut params = params.clone();
    params.variant = PlanVariant::AdaptiveK;
    params.fine_tuned = false;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache = CandidateCache::new(topo, params.theta, params.max_candidates);
    let mut ledger = LoadLedger::new(topo);
    let mut chosen: BTreeMap<(NodeId, NodeId), Vec<usize>> = BTreeMap::new();

    for _round in 0..params.k {
        for ((s, t), alpha) in shuffled_flows(m, &mut rng) {
            let cands = cache.get(s, t)?;
            let current = chosen.entry((s, t)).or_default();
            let n = current.len();
            let mut taken = vec![false; cands.len()];
            for &i in current.iter() {
                taken[i] = true;
            }
            let increment = alpha / (n + 1) as f64;
            let Some(p) = pick_best(params.cost, &ledger, cands, &taken, increment, &mut rng)? else {
                continue;
            };

            // per-link change if alpha is re-spread over n + 1 paths
            let mut delta: HashMap<LinkId, f64> = HashMap::new();
            if n > 0 {
                let shift = increment - alpha / n as f64;
                for &i in current.iter() {
                    for &l in &cands[i].links {
                        *delta.entry(l).or_insert(0.0) += shift;
                    }
                }
            }
            for &l in &cands[p].links {
                *delta.entry(l).or_insert(0.0) += increment;
            }

            let accept = if n == 0 {
                true
            } else {
                let old: Vec<&Path> = current.iter().map(|&i| &cands[i]).collect();
                let before = max_over(&ledger, &old, &HashMap::new());
                let mut new = old;
                new.push(&cands[p]);
                let after = max_over(&ledger, &new, &delta);
                if params.strict_accept {
                    after < before - EPS * before.max(1.0)
                } else {
                    approx_le(after, before)
                }
            };
            if accept {
                let mut links: Vec<_> = delta.into_iter().collect();
                links.sort_by_key(|&(l, _)| l);
                for (l, d) in links {
                    ledger.add_link(l, d);
                }
                current.push(p);
            }
        }
    }

    let mut plan = MultipathPlan::new(params);
    for ((s, t), idx) in chosen {
        let cands = cache.get(s, t)?;
        plan.set_paths(s, t, idx.into_iter().map(|i| cands[i].clone()).collect());
    }
    Ok((plan, ledger))
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub plan: MultipathPlan,
    pub ledger: LoadLedger,
    /// Rounds that applied at least one substitution.
    pub rounds: usize,
    /// Maximum utilization before the first round and after each round.
    pub max_history: Vec<f64>,
}

/// Swaps paths off the hottest links while no link reaches the old maximum.
pub fn finetune(
    topo: &Topology,
    m: &TrafficMatrix,
    plan: &MultipathPlan,
    theta: f64,
    max_rounds: usize,
) -> Result<MultipathPlan> {
    run_finetune(topo, m, plan, theta, max_rounds).map(|o| o.plan)
}

pub fn run_finetune(
    topo: &Topology,
    m: &TrafficMatrix,
    plan: &MultipathPlan,
    theta: f64,
    max_rounds: usize,
) -> Result<FinetuneOutcome> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::InvalidArgument(format!("theta must be non-negative, got {theta}")));
    }
    let mut plan = plan.clone();
    let mut ledger = plan_loads(topo, m, &plan)?;
    let mut cache = CandidateCache::new(topo, theta, plan.params.max_candidates.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(plan.params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut history = vec![ledger.max_utilization()];
    let mut rounds = 0;

    while rounds < max_rounds {
        let old_max = ledger.max_utilization();
        let hot = ledger.hot_links();
        if hot.is_empty() {
            break;
        }
        let is_hot = |l: &LinkId| hot.binary_search(l).is_ok();
        let mut flows: Vec<(NodeId, NodeId)> = m.flows().collect();
        flows.shuffle(&mut rng);
        let mut changed = false;

        for (s, t) in flows {
            let alpha = m.demand(s, t);
            let Some(current) = plan.paths(s, t).map(<[Path]>::to_vec) else {
                return Err(Error::NoPath { src: topo.name(s).into(), dst: topo.name(t).into() });
            };
            let share = alpha / current.len() as f64;
            for (slot, p) in current.iter().enumerate() {
                if !p.links.iter().any(is_hot) {
                    continue;
                }
                let in_plan = plan.paths(s, t).unwrap().to_vec();
                let cands = cache.get(s, t)?;
                let substitute = cands.iter().find(|q| {
                    !in_plan.contains(q)
                        && !q.links.iter().any(is_hot)
                        && q.links.iter().filter(|l| !p.uses(**l)).all(|&l| {
                            let after = (ledger.load(l) + share) / ledger.capacity(l);
                            after < old_max - EPS * old_max.max(1.0)
                        })
                });
                if let Some(q) = substitute {
                    let q = q.clone();
                    ledger.add_path(p, -share);
                    ledger.add_path(&q, share);
                    let mut updated = in_plan;
                    updated[slot] = q;
                    plan.set_paths(s, t, updated);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        rounds += 1;
        history.push(ledger.max_utilization());
    }
    if rounds > 0 {
        plan.params.fine_tuned = true;
    }
    Ok(FinetuneOutcome { plan, ledger, rounds, max_history: history })
}

/// Exhaustive search over every per-flow subset of at most `k` candidates.
pub const ORACLE_MAX_COMBINATIONS: u128 = 5_000_000;

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out.sort_by_key(Vec::len);
    out
}

fn binomial(n: usize, r: usize) -> u128 {
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Plan minimizing the maximum utilization under even splitting, by brute
/// force. Only for tiny instances; larger ones return [`Error::TooLarge`].
pub fn oracle_best_plan(topo: &Topology, m: &TrafficMatrix, k: usize, theta: f64) -> Result<(MultipathPlan, f64)> {
    let mut params = PlanParams::new(k, theta, CostKind::MaxUtil, 0);
    params.variant = PlanVariant::Oracle;
    params.validate()?;
    let mut cache = CandidateCache::new(topo, theta, 21);
    let mut flows = Vec::new();
    let mut combos = 1u128;
    for ((s, t), alpha) in m.iter() {
        let cands = cache.get(s, t)?.to_vec();
        let options: u128 = (1..=k.min(cands.len())).map(|r| binomial(cands.len(), r)).sum();
        combos = combos.saturating_mul(options);
        if cands.len() > 20 || combos > ORACLE_MAX_COMBINATIONS {
            return Err(Error::TooLarge(combos.max(options)));
        }
        let sets = subsets(cands.len(), k);
        flows.push(((s, t), alpha, cands, sets));
    }

    struct Search<'a> {
        flows: &'a [((NodeId, NodeId), f64, Vec<Path>, Vec<Vec<usize>>)],
        load: Vec<f64>,
        capacity: Vec<f64>,
        pick: Vec<usize>,
        best: f64,
        best_pick: Vec<usize>,
    }

    impl Search<'_> {
        fn go(&mut self, depth: usize) {
            if depth == self.flows.len() {
                let max = self.load.iter().zip(&self.capacity).map(|(l, c)| l / c).fold(0.0, f64::max);
                if max < self.best - EPS * self.best.max(1.0) || self.best_pick.is_empty() {
                    self.best = max;
                    self.best_pick = self.pick.clone();
                }
                return;
            }
            let (_, alpha, ref cands, ref sets) = self.flows[depth];
            for (si, set) in sets.iter().enumerate() {
                let share = alpha / set.len() as f64;
                for &i in set {
                    for &l in &cands[i].links {
                        self.load[l.0] += share;
                    }
                }
                self.pick.push(si);
                self.go(depth + 1);
                self.pick.pop();
                for &i in set {
                    for &l in &cands[i].links {
                        self.load[l.0] -= share;
                    }
                }
            }
        }
    }

    let mut search = Search {
        flows: &flows,
        load: vec![0.0; topo.link_count()],
        capacity: topo.links().iter().map(|l| l.capacity).collect(),
        pick: Vec::new(),
        best: f64::INFINITY,
        best_pick: Vec::new(),
    };
    search.go(0);
    let best = if flows.is_empty() { 0.0 } else { search.best };
    let best_pick = search.best_pick;

    let mut plan = MultipathPlan::new(params);
    for (fi, ((s, t), _, cands, sets)) in flows.iter().enumerate() {
        let set = &sets[best_pick[fi]];
        plan.set_paths(*s, *t, set.iter().map(|&i| cands[i].clone()).collect());
    }
    Ok((plan, best))
}

/// Runs the variant in `params`, then fine-tuning when `params.fine_tuned`
/// is set.
pub fn plan(topo: &Topology, m: &TrafficMatrix, params: &PlanParams) -> Result<MultipathPlan> {
    let (plan, _) = match params.variant {
        PlanVariant::FixedK => run_fixed_k(topo, m, params)?,
        PlanVariant::AdaptiveK => run_adaptive_k(topo, m, params)?,
        PlanVariant::Oracle => {
            let (p, _) = oracle_best_plan(topo, m, params.k, params.theta)?;
            (p, LoadLedger::new(topo))
        }
    };
    if params.fine_tuned {
        let mut tuned = finetune(topo, m, &plan, params.theta, DEFAULT_FINETUNE_ROUNDS)?;
        tuned.params.fine_tuned = true;
        Ok(tuned)
    } else {
        Ok(plan)
    }
}
