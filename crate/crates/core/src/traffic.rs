//! Traffic matrices over a topology's endpoints, their generators and the
//! `src,dst,demand` CSV format.

use std::collections::BTreeMap;
use std::io;

use rand::distr::{Distribution, Open01, Uniform};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Demand per ordered (source, destination) pair. Only positive demands are
/// stored, so the key set is the flow set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    src: String,
    dst: String,
    demand: f64,
}

impl TrafficMatrix {
    /// Builds a matrix checked against `topo`: both ends must be distinct
    /// endpoints and demands finite and non-negative. Zero demands are
    /// dropped; repeated keys are summed.
    pub fn new(topo: &Topology, entries: impl IntoIterator<Item = ((NodeId, NodeId), f64)>) -> Result<Self> {
        let mut m = TrafficMatrix::default();
        for ((s, t), demand) in entries {
            if !topo.contains(s) || !topo.contains(t) {
                return Err(Error::InvalidArgument(format!("flow {s}->{t} references a missing node")));
            }
            if s == t {
                return Err(Error::InvalidArgument(format!("flow from `{}` to itself", topo.name(s))));
            }
            if !topo.is_endpoint(s) || !topo.is_endpoint(t) {
                return Err(Error::InvalidArgument(format!(
                    "flow {}->{} is not between endpoints",
                    topo.name(s),
                    topo.name(t)
                )));
            }
            if !(demand.is_finite() && demand >= 0.0) {
                return Err(Error::InvalidArgument(format!("demand must be non-negative, got {demand}")));
            }
            if demand > 0.0 {
                *m.entries.entry((s, t)).or_insert(0.0) += demand;
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn demand(&self, s: NodeId, t: NodeId) -> f64 {
        self.entries.get(&(s, t)).copied().unwrap_or(0.0)
    }

    /// Flows in key order.
    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn flows(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.entries.keys().copied()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn max_demand(&self) -> f64 {
        self.entries.values().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> TrafficMatrix {
        let entries = self
            .entries
            .iter()
            .map(|(&k, &v)| (k, v * factor))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        TrafficMatrix { entries }
    }

    /// Entry-wise sum.
    pub fn sum(&self, other: &TrafficMatrix) -> TrafficMatrix {
        let mut entries = self.entries.clone();
        for (&k, &v) in &other.entries {
            *entries.entry(k).or_insert(0.0) += v;
        }
        TrafficMatrix { entries }
    }

    pub fn read_csv<R: io::Read>(topo: &Topology, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            entries.push(((topo.node_or_err(&row.src)?, topo.node_or_err(&row.dst)?), row.demand));
        }
        Self::new(topo, entries)
    }

    pub fn write_csv<W: io::Write>(&self, topo: &Topology, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&(s, t), &demand) in &self.entries {
            w.serialize(CsvRow { src: topo.name(s).to_string(), dst: topo.name(t).to_string(), demand })?;
        }
        if self.entries.is_empty() {
            w.write_record(["src", "dst", "demand"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, topo: &Topology) -> String {
        let mut buf = Vec::new();
        self.write_csv(topo, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn endpoint_pairs(topo: &Topology) -> Result<Vec<(NodeId, NodeId)>> {
    let ep = topo.endpoints();
    if ep.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "traffic needs at least 2 endpoints, topology has {}",
            ep.len()
        )));
    }
    Ok(ep
        .iter()
        .flat_map(|&s| ep.iter().filter(move |&&t| t != s).map(move |&t| (s, t)))
        .collect())
}

/// One unit of demand between every ordered endpoint pair.
pub fn uniform_matrix(topo: &Topology) -> Result<TrafficMatrix> {
    let pairs = endpoint_pairs(topo)?;
    TrafficMatrix::new(topo, pairs.into_iter().map(|p| (p, 1.0)))
}

/// Demands drawn i.i.d. from the open interval (0, 1).
pub fn random_matrix(topo: &Topology, seed: u64) -> Result<TrafficMatrix> {
    let pairs = endpoint_pairs(topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<_> = pairs.into_iter().map(|p| (p, Open01.sample(&mut rng))).collect();
    TrafficMatrix::new(topo, entries)
}

/// Uniform (0, 1) demands, rescaled so that traffic from the hot senders to
/// the hot receivers carries exactly `hot_share` of the unchanged total.
///
/// Hot senders and hot receivers are `ceil(hot_fraction * endpoints)` nodes
/// each, drawn independently, so the two sets may overlap.
pub fn skewed_matrix(topo: &Topology, hot_fraction: f64, hot_share: f64, seed: u64) -> Result<TrafficMatrix> {
    skewed_matrix_with_hot_sets(topo, hot_fraction, hot_share, seed).map(|s| s.matrix)
}

#[derive(Debug, Clone)]
pub struct SkewedMatrix {
    pub matrix: TrafficMatrix,
    pub hot_senders: Vec<NodeId>,
    pub hot_receivers: Vec<NodeId>,
}

/// [`skewed_matrix`] that also reports the chosen hot sets.
pub fn skewed_matrix_with_hot_sets(
    topo: &Topology,
    hot_fraction: f64,
    hot_share: f64,
    seed: u64,
) -> Result<SkewedMatrix> {
    if !(hot_fraction > 0.0 && hot_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("hot fraction must be in (0, 1), got {hot_fraction}")));
    }
    if !(hot_share > 0.0 && hot_share < 1.0) {
        return Err(Error::InvalidArgument(format!("hot share must be in (0, 1), got {hot_share}")));
    }
    let pairs = endpoint_pairs(topo)?;
    let ep = topo.endpoints();
    let hot_count = ((hot_fraction * ep.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    if hot_count == 0 {
        return Err(Error::InvalidArgument("hot set is empty after rounding".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| {
        let mut set: Vec<NodeId> = index::sample(rng, ep.len(), hot_count).into_iter().map(|i| ep[i]).collect();
        set.sort();
        set
    };
    let senders = pick(&mut rng);
    let receivers = pick(&mut rng);
    let is_hot = |(s, t): (NodeId, NodeId)| senders.binary_search(&s).is_ok() && receivers.binary_search(&t).is_ok();

    let draws: Vec<((NodeId, NodeId), f64)> = pairs.into_iter().map(|p| (p, Open01.sample(&mut rng))).collect();
    let (mut hot, mut cold) = (0.0, 0.0);
    for &(p, d) in &draws {
        if is_hot(p) {
            hot += d;
        } else {
            cold += d;
        }
    }
    if hot == 0.0 {
        return Err(Error::InvalidArgument("hot senders and receivers share no distinct pair".into()));
    }
    if cold == 0.0 {
        // Every pair is hot: nothing to shift.
        let matrix = TrafficMatrix::new(topo, draws)?;
        return Ok(SkewedMatrix { matrix, hot_senders: senders, hot_receivers: receivers });
    }
    let total = hot + cold;
    let (hot_scale, cold_scale) = (hot_share * total / hot, (1.0 - hot_share) * total / cold);
    let entries: Vec<_> = draws
        .into_iter()
        .map(|(p, d)| (p, if is_hot(p) { d * hot_scale } else { d * cold_scale }))
        .collect();
    let matrix = TrafficMatrix::new(topo, entries)?;
    Ok(SkewedMatrix { matrix, hot_senders: senders, hot_receivers: receivers })
}

/// Multiplies every entry by an independent `U(lo, hi)` factor.
pub fn perturb_matrix(m: &TrafficMatrix, lo: f64, hi: f64, seed: u64) -> Result<TrafficMatrix> {
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("perturbation range [{lo}, {hi}] is invalid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = if lo == hi {
        m.entries.iter().map(|(&k, &v)| (k, v * lo)).collect()
    } else {
        let dist = Uniform::new_inclusive(lo, hi).expect("checked range");
        m.entries.iter().map(|(&k, &v)| (k, v * dist.sample(&mut rng))).filter(|&(_, v)| v > 0.0).collect()
    };
    Ok(TrafficMatrix { entries })
}

/// Seeded random permutation of the matrix's flows.
pub(crate) fn shuffled_flows(m: &TrafficMatrix, rng: &mut ChaCha8Rng) -> Vec<((NodeId, NodeId), f64)> {
    let mut flows: Vec<_> = m.iter().collect();
    flows.shuffle(rng);
    flows
}
