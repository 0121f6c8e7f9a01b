//! Traffic-engineering planner: picks at most `k` loop-free paths per
//! source-destination pair so that an even split of each demand over its
//! paths keeps the maximum link utilization low.
//!
//! The crate also carries the evaluation harness: topology and traffic
//! generators, a fluid ECMP baseline and a flow-level event simulator.

pub mod error;
pub mod flowsim;
pub mod kpaths;
pub mod loadmodel;
pub mod placement;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
pub use flowsim::{FlowEvent, FlowRequest, RoutingPolicy, SimTrace};
pub use kpaths::{Path, ShortestPathTree, SidetrackSet};
pub use loadmodel::{LoadLedger, LoadReport};
pub use placement::{CostKind, MultipathPlan, PlanParams, PlanVariant};
pub use topology::{Link, LinkId, NodeId, Topology, TopologyBuilder};
pub use traffic::TrafficMatrix;

/// Relative tolerance used when comparing accumulated loads and lengths.
pub const EPS: f64 = 1e-9;

pub(crate) fn approx_le(a: f64, b: f64) -> bool {
    a <= b + EPS * b.abs().max(1.0)
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::topology::{NodeId, Topology};

    /// Six-node example with an ECMP imbalance between S and T.
    pub const FIG1: &str = "\
node S
node A
node B
node C
node D
node T
link S A 1 1
link S B 1 1
link A B 1 1
link A C 1 1
link B C 1 1
link B D 1 1
link C D 1 1
link C T 1 1
link D T 1 1
endpoint S
endpoint T
";

    pub fn fig1() -> Topology {
        Topology::parse(FIG1).unwrap()
    }

    pub fn n(t: &Topology, name: &str) -> NodeId {
        t.node(name).unwrap()
    }
}
