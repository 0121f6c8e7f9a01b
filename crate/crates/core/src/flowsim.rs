//! Flow-level event simulation: constant-rate flows arrive as a Poisson
//! process per source-destination pair, hold for an exponential time and
//! are pinned to one path each for their lifetime.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::kpaths::{Path, ShortestPathTree};
use crate::placement::MultipathPlan;
use crate::topology::{LinkId, NodeId, Topology};
use crate::traffic::TrafficMatrix;

pub const DEFAULT_HORIZON: f64 = 100.0;
pub const DEFAULT_MEAN_HOLDING: f64 = 10.0;

/// A flow before routing.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRequest {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
    pub arrival: f64,
    pub holding: f64,
}

/// A routed flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEvent {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
    pub arrival: f64,
    pub holding: f64,
    pub path: Path,
}

impl FlowEvent {
    pub fn departure(&self) -> f64 {
        self.arrival + self.holding
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.arrival <= t && t < self.departure()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum RoutingPolicy<'a> {
    /// One of the plan's paths for the flow, uniformly.
    Plan(&'a MultipathPlan),
    /// Per-hop uniform choice among shortest-path next hops, as a flow hash
    /// would do at every router.
    Ecmp,
}

/// Rate granularity used when none is given: a twentieth of the largest
/// demand.
pub fn default_flow_rate(m: &TrafficMatrix) -> f64 {
    m.max_demand() / 20.0
}

/// Poisson arrivals on `[0, horizon]` with rate `demand / (flow_rate *
/// mean_holding)` per pair, so the offered load of each pair averages its
/// demand. Sorted by arrival time.
pub fn generate_flows(
    m: &TrafficMatrix,
    mean_holding: f64,
    flow_rate: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<FlowRequest>> {
    for (name, v) in [("mean holding time", mean_holding), ("flow rate", flow_rate), ("horizon", horizon)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let holding = Exp::new(1.0 / mean_holding).expect("positive rate");
    let mut flows = Vec::new();
    for ((src, dst), alpha) in m.iter() {
        let arrivals = Exp::new(alpha / (flow_rate * mean_holding)).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += arrivals.sample(&mut rng);
            if t > horizon {
                break;
            }
            let h: f64 = holding.sample(&mut rng);
            flows.push(FlowRequest { src, dst, rate: flow_rate, arrival: t, holding: h.max(f64::MIN_POSITIVE) });
        }
    }
    flows.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    Ok(flows)
}

/// Pins every flow to one path according to `policy`.
pub fn assign_paths(
    topo: &Topology,
    policy: RoutingPolicy<'_>,
    flows: &[FlowRequest],
    seed: u64,
) -> Result<Vec<FlowEvent>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees: HashMap<NodeId, ShortestPathTree> = HashMap::new();
    let mut out = Vec::with_capacity(flows.len());
    for f in flows {
        let unroutable = || Error::NoPath { src: topo.name(f.src).into(), dst: topo.name(f.dst).into() };
        let path = match policy {
            RoutingPolicy::Plan(plan) => plan
                .paths(f.src, f.dst)
                .and_then(|ps| ps.choose(&mut rng))
                .cloned()
                .ok_or_else(unroutable)?,
            RoutingPolicy::Ecmp => {
                let tree = trees.entry(f.dst).or_insert_with(|| ShortestPathTree::build(topo, f.dst));
                if f.src == f.dst || !tree.dist(f.src).is_finite() {
                    return Err(unroutable());
                }
                let mut nodes = vec![f.src];
                let mut v = f.src;
                while v != f.dst {
                    let next: Vec<LinkId> = tree.dag_links(topo, v).collect();
                    let l = *next.choose(&mut rng).ok_or_else(unroutable)?;
                    v = topo.link(l).dst;
                    nodes.push(v);
                }
                Path::from_nodes(topo, &nodes)?
            }
        };
        out.push(FlowEvent { src: f.src, dst: f.dst, rate: f.rate, arrival: f.arrival, holding: f.holding, path });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    /// `(time, max link load)` after every arrival and departure.
    pub series: Vec<(f64, f64)>,
    pub window: (f64, f64),
    /// Time-averaged load per link over the window.
    pub link_average: Vec<f64>,
    /// Time average of the max-load series over the window.
    pub window_max_average: f64,
    /// Loads after the last event.
    pub final_loads: Vec<f64>,
    pub flows: Vec<FlowEvent>,
}

impl SimTrace {
    /// Max link load in effect at time `t`.
    pub fn max_at(&self, t: f64) -> f64 {
        let i = self.series.partition_point(|&(time, _)| time <= t);
        if i == 0 {
            0.0
        } else {
            self.series[i - 1].1
        }
    }

    /// Per-link load at `t` recomputed from the routed flows.
    pub fn recount_at(&self, link_count: usize, t: f64) -> Vec<f64> {
        let mut load = vec![0.0; link_count];
        for f in self.flows.iter().filter(|f| f.active_at(t)) {
            for &l in &f.path.links {
                load[l.0] += f.rate;
            }
        }
        load
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,max_link_load\n");
        for (t, v) in &self.series {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Measurement window that trims warm-up and drain.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.2 * horizon, 0.8 * horizon)
}

/// Replays routed flows in time order. Departures at the same instant as an
/// arrival are applied first.
pub fn run_events(topo: &Topology, flows: Vec<FlowEvent>, window: (f64, f64)) -> SimTrace {
    let mut events: Vec<(f64, bool, usize)> = Vec::with_capacity(2 * flows.len());
    for (i, f) in flows.iter().enumerate() {
        events.push((f.arrival, true, i));
        if f.departure().is_finite() {
            events.push((f.departure(), false, i));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let (w0, w1) = window;
    let span = (w1 - w0).max(0.0);
    let overlap = |a: f64, b: f64| (b.min(w1) - a.max(w0)).max(0.0);

    let mut load = vec![0.0; topo.link_count()];
    let mut integral = vec![0.0; topo.link_count()];
    let mut max_integral = 0.0;
    let mut current_max = 0.0;
    let mut last = f64::NEG_INFINITY;
    let mut series = Vec::with_capacity(events.len());

    for (time, arrival, i) in events {
        let dt = overlap(last, time);
        if dt > 0.0 {
            for (acc, &l) in integral.iter_mut().zip(&load) {
                *acc += l * dt;
            }
            max_integral += current_max * dt;
        }
        let f = &flows[i];
        let delta = if arrival { f.rate } else { -f.rate };
        for &l in &f.path.links {
            let v = &mut load[l.0];
            *v += delta;
            if v.abs() < 1e-9 * f.rate {
                *v = 0.0;
            }
        }
        current_max = load.iter().copied().fold(0.0, f64::max);
        series.push((time, current_max));
        last = time;
    }
    let dt = overlap(last, f64::INFINITY);
    if dt > 0.0 {
        for (acc, &l) in integral.iter_mut().zip(&load) {
            *acc += l * dt;
        }
        max_integral += current_max * dt;
    }

    let norm = |x: f64| if span > 0.0 { x / span } else { 0.0 };
    SimTrace {
        series,
        window,
        link_average: integral.into_iter().map(norm).collect(),
        window_max_average: norm(max_integral),
        final_loads: load,
        flows,
    }
}

/// Routes `flows` by `policy` and replays them, measuring over the default
/// window of `horizon`.
pub fn simulate(
    topo: &Topology,
    policy: RoutingPolicy<'_>,
    flows: &[FlowRequest],
    horizon: f64,
    seed: u64,
) -> Result<SimTrace> {
    let routed = assign_paths(topo, policy, flows, seed)?;
    Ok(run_events(topo, routed, default_window(horizon)))
}

/// Time-averaged offered load of one pair over `window`.
pub fn offered_load(flows: &[FlowRequest], src: NodeId, dst: NodeId, window: (f64, f64)) -> f64 {
    let (w0, w1) = window;
    flows
        .iter()
        .filter(|f| f.src == src && f.dst == dst)
        .map(|f| f.rate * ((f.arrival + f.holding).min(w1) - f.arrival.max(w0)).max(0.0))
        .sum::<f64>()
        / (w1 - w0)
}
