#![allow(dead_code)]

use std::path::PathBuf;

use kpath_core::topology::TopologyBuilder;
use kpath_core::{NodeId, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> Topology {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    Topology::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn node(t: &Topology, name: &str) -> NodeId {
    t.node(name).unwrap()
}

/// Connected random graph on `n` nodes. Integer weights in `1..=3` give
/// plenty of equal-length ties; `real_weights` draws from (0.5, 2.5)
/// instead.
pub fn random_graph(n: usize, extra: usize, real_weights: bool, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TopologyBuilder::new();
    let ids: Vec<NodeId> = (0..n).map(|i| b.add_node(&format!("v{i}")).unwrap()).collect();
    let weight = |rng: &mut ChaCha8Rng| {
        if real_weights {
            rng.random_range(0.5..2.5)
        } else {
            rng.random_range(1..=3) as f64
        }
    };
    let mut have = std::collections::HashSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let w = weight(&mut rng);
        b.add_cable(ids[j], ids[i], w, 1.0).unwrap();
        have.insert((j, i));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let key = (u.min(v), u.max(v));
        if u == v || !have.insert(key) {
            continue;
        }
        let w = weight(&mut rng);
        b.add_cable(ids[key.0], ids[key.1], w, 1.0).unwrap();
    }
    b.build()
}

/// Shortest distances to `target` by |V| rounds of relaxing every link.
pub fn relaxation_distances(t: &Topology, target: NodeId) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; t.node_count()];
    d[target.0] = 0.0;
    for _ in 0..t.node_count() {
        for l in t.links() {
            let via = l.weight + d[l.dst.0];
            if via < d[l.src.0] {
                d[l.src.0] = via;
            }
        }
    }
    d
}

/// Every loop-free `s -> dst` path as (length, node sequence), by DFS.
pub fn all_simple_paths(t: &Topology, s: NodeId, dst: NodeId) -> Vec<(f64, Vec<NodeId>)> {
    fn go(
        t: &Topology,
        v: NodeId,
        dst: NodeId,
        len: f64,
        seen: &mut Vec<bool>,
        cur: &mut Vec<NodeId>,
        out: &mut Vec<(f64, Vec<NodeId>)>,
    ) {
        if v == dst {
            out.push((len, cur.clone()));
            return;
        }
        for &l in t.out_links(v) {
            let link = t.link(l);
            if seen[link.dst.0] {
                continue;
            }
            seen[link.dst.0] = true;
            cur.push(link.dst);
            go(t, link.dst, dst, len + link.weight, seen, cur, out);
            cur.pop();
            seen[link.dst.0] = false;
        }
    }
    let mut seen = vec![false; t.node_count()];
    seen[s.0] = true;
    let mut out = Vec::new();
    go(t, s, dst, 0.0, &mut seen, &mut vec![s], &mut out);
    out
}

/// DFS paths with stretch at most `theta`, in (length, node sequence) order.
pub fn oracle_paths(t: &Topology, s: NodeId, dst: NodeId, theta: f64) -> Vec<(f64, Vec<NodeId>)> {
    let mut all = all_simple_paths(t, s, dst);
    let ds = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    all.retain(|(len, _)| len - ds <= theta * ds + 1e-9 * ds.max(1.0));
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    all
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
