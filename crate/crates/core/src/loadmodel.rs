//! Per-link load accounting, the fluid ECMP baseline and sorted load reports.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kpaths::{Path, ShortestPathTree};
use crate::placement::MultipathPlan;
use crate::topology::{LinkId, NodeId, Topology};
use crate::traffic::TrafficMatrix;
use crate::EPS;

/// Load assigned to each directed link, indexed by link id.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadLedger {
    load: Vec<f64>,
    capacity: Vec<f64>,
}

impl LoadLedger {
    pub fn new(topo: &Topology) -> Self {
        LoadLedger { load: vec![0.0; topo.link_count()], capacity: topo.links().iter().map(|l| l.capacity).collect() }
    }

    pub fn load(&self, l: LinkId) -> f64 {
        self.load[l.0]
    }

    pub fn loads(&self) -> &[f64] {
        &self.load
    }

    pub fn capacity(&self, l: LinkId) -> f64 {
        self.capacity[l.0]
    }

    pub fn utilization(&self, l: LinkId) -> f64 {
        self.load[l.0] / self.capacity[l.0]
    }

    pub fn link_count(&self) -> usize {
        self.load.len()
    }

    pub fn add_link(&mut self, l: LinkId, amount: f64) {
        let v = &mut self.load[l.0];
        *v += amount;
        // removals may leave rounding residue below zero
        if *v < 0.0 && *v > -EPS {
            *v = 0.0;
        }
    }

    pub fn add_path(&mut self, p: &Path, amount: f64) {
        for &l in &p.links {
            self.add_link(l, amount);
        }
    }

    pub fn max_load(&self) -> f64 {
        self.load.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_utilization(&self) -> f64 {
        self.load.iter().zip(&self.capacity).map(|(l, c)| l / c).fold(0.0, f64::max)
    }

    /// Links within rounding of the maximum utilization. Empty when the
    /// ledger is all zero.
    pub fn hot_links(&self) -> Vec<LinkId> {
        let max = self.max_utilization();
        if max <= 0.0 {
            return Vec::new();
        }
        (0..self.load.len())
            .map(LinkId)
            .filter(|&l| self.utilization(l) >= max - EPS * max.max(1.0))
            .collect()
    }

    /// Largest per-link absolute difference.
    pub fn max_abs_diff(&self, other: &LoadLedger) -> f64 {
        self.load.iter().zip(&other.load).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Fluid ECMP: for each destination, every node splits the traffic it holds
/// evenly over its out-links on the shortest-path DAG.
pub fn ecmp_loads(topo: &Topology, m: &TrafficMatrix) -> Result<LoadLedger> {
    let mut ledger = LoadLedger::new(topo);
    let mut by_dst: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for ((s, t), a) in m.iter() {
        by_dst.entry(t).or_default().push((s, a));
    }
    let mut held = vec![0.0; topo.node_count()];
    for (t, sources) in by_dst {
        let tree = ShortestPathTree::build(topo, t);
        held.iter_mut().for_each(|x| *x = 0.0);
        for (s, a) in sources {
            if !tree.dist(s).is_finite() {
                return Err(Error::Unreachable { from: topo.name(s).into(), to: topo.name(t).into() });
            }
            held[s.0] += a;
        }
        // farthest first is a topological order of the DAG (weights > 0)
        let mut order: Vec<NodeId> = topo.nodes().filter(|&v| v != t && tree.dist(v).is_finite()).collect();
        order.sort_by(|a, b| tree.dist(*b).total_cmp(&tree.dist(*a)).then(a.cmp(b)));
        for v in order {
            let q = held[v.0];
            if q == 0.0 {
                continue;
            }
            let next: Vec<LinkId> = tree.dag_links(topo, v).collect();
            let share = q / next.len() as f64;
            for l in next {
                ledger.add_link(l, share);
                held[topo.link(l).dst.0] += share;
            }
            held[v.0] = 0.0;
        }
    }
    Ok(ledger)
}

/// Loads from splitting each demand evenly over its planned paths.
pub fn plan_loads(topo: &Topology, m: &TrafficMatrix, plan: &MultipathPlan) -> Result<LoadLedger> {
    let mut ledger = LoadLedger::new(topo);
    for ((s, t), a) in m.iter() {
        let paths = plan.paths(s, t).filter(|p| !p.is_empty()).ok_or_else(|| Error::NoPath {
            src: topo.name(s).into(),
            dst: topo.name(t).into(),
        })?;
        let share = a / paths.len() as f64;
        for p in paths {
            ledger.add_path(p, share);
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkLoad {
    pub link: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub load: f64,
    pub capacity: f64,
    pub utilization: f64,
}

/// Links sorted by ascending utilization (ties by link id).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub rows: Vec<LinkLoad>,
    pub max_utilization: f64,
}

#[derive(Serialize)]
struct ReportRow<'a> {
    rank: usize,
    link_src: &'a str,
    link_dst: &'a str,
    load: f64,
    capacity: f64,
    utilization: f64,
}

impl LoadReport {
    pub fn sorted_utilizations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.utilization).collect()
    }

    /// Columns `rank,link_src,link_dst,load,capacity,utilization`; rank
    /// counts from 1 in ascending order.
    pub fn write_csv<W: io::Write>(&self, topo: &Topology, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.rows.is_empty() {
            w.write_record(["rank", "link_src", "link_dst", "load", "capacity", "utilization"])?;
        }
        for (i, r) in self.rows.iter().enumerate() {
            w.serialize(ReportRow {
                rank: i + 1,
                link_src: topo.name(r.src),
                link_dst: topo.name(r.dst),
                load: r.load,
                capacity: r.capacity,
                utilization: r.utilization,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated `rank utilization` lines for plotting.
    pub fn write_curve<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# rank utilization")?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(w, "{} {}", i + 1, r.utilization)?;
        }
        Ok(())
    }
}

pub fn report(topo: &Topology, ledger: &LoadLedger) -> LoadReport {
    let mut rows: Vec<LinkLoad> = topo
        .links()
        .iter()
        .map(|l| LinkLoad {
            link: l.id,
            src: l.src,
            dst: l.dst,
            load: ledger.load(l.id),
            capacity: ledger.capacity(l.id),
            utilization: ledger.utilization(l.id),
        })
        .collect();
    rows.sort_by(|a, b| a.utilization.total_cmp(&b.utilization).then(a.link.cmp(&b.link)));
    let max_utilization = rows.last().map_or(0.0, |r| r.utilization);
    LoadReport { rows, max_utilization }
}
