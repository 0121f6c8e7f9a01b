//! Benchmark inputs shared by the criterion benches.

use kpath_core::topology::make_xgft;
use kpath_core::traffic::random_matrix;
use kpath_core::{Topology, TrafficMatrix};

/// Two-level fat tree with 50 hosts and a random matrix over them.
pub fn fat_tree() -> (Topology, TrafficMatrix) {
    let topo = make_xgft(2, &[5, 10], &[5, 5]).expect("valid fat tree");
    let m = random_matrix(&topo, 1).expect("non-empty endpoint set");
    (topo, m)
}
