//! Directed-link network graphs, the fat-tree and random generators, and
//! the line-oriented topology file format.
//!
//! Every topology is built from undirected cables. Cable `c` expands to two
//! directed links: `2c` runs in the declared direction and `2c + 1` is its
//! reverse.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl LinkId {
    pub fn index(self) -> usize {
        self.0
    }

    /// The opposite direction of the same cable.
    pub fn reverse(self) -> LinkId {
        LinkId(self.0 ^ 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Routing metric.
    pub weight: f64,
    /// Traffic units per unit of time.
    pub capacity: f64,
}

#[derive(Debug, Clone)]
pub struct Topology {
    names: Vec<String>,
    links: Vec<Link>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    endpoints: Vec<NodeId>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.links == other.links && self.endpoints == other.endpoints
    }
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len()).map(NodeId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn out_links(&self, v: NodeId) -> &[LinkId] {
        &self.out_links[v.0]
    }

    pub fn in_links(&self, v: NodeId) -> &[LinkId] {
        &self.in_links[v.0]
    }

    /// Nodes that source and sink traffic.
    pub fn endpoints(&self) -> &[NodeId] {
        &self.endpoints
    }

    pub fn is_endpoint(&self, v: NodeId) -> bool {
        self.endpoints.binary_search(&v).is_ok()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v.0]
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn node_or_err(&self, name: &str) -> Result<NodeId> {
        self.node(name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// The directed link `u -> v`, if one exists.
    pub fn find_link(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        self.out_links[u.0].iter().copied().find(|&l| self.links[l.0].dst == v)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.0 < self.names.len()
    }

    /// True when every node reaches every other node along directed links.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(v) = queue.pop_front() {
                let adj = if forward { &self.out_links[v] } else { &self.in_links[v] };
                for &l in adj {
                    let link = &self.links[l.0];
                    let w = if forward { link.dst.0 } else { link.src.0 };
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Copy with every capacity multiplied by `factor`.
    pub fn with_scaled_capacities(&self, factor: f64) -> Topology {
        let mut t = self.clone();
        for l in &mut t.links {
            l.capacity *= factor;
        }
        t
    }

    pub fn parse(text: &str) -> Result<Topology> {
        let mut b = TopologyBuilder::new();
        let mut endpoints = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let lookup = |b: &TopologyBuilder, name: &str| {
                b.node(name).ok_or_else(|| err(format!("dangling node reference `{name}`")))
            };
            match fields[0] {
                "node" => {
                    if fields.len() != 2 {
                        return Err(err("expected `node <name>`".into()));
                    }
                    b.add_node(fields[1]).map_err(|e| err(e.to_string()))?;
                }
                "link" => {
                    if fields.len() != 5 {
                        return Err(err("expected `link <src> <dst> <weight> <capacity>`".into()));
                    }
                    let a = lookup(&b, fields[1])?;
                    let z = lookup(&b, fields[2])?;
                    let num = |s: &str| {
                        s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")))
                    };
                    let (w, c) = (num(fields[3])?, num(fields[4])?);
                    b.add_cable(a, z, w, c).map_err(|e| err(e.to_string()))?;
                }
                "endpoint" => {
                    if fields.len() != 2 {
                        return Err(err("expected `endpoint <name>`".into()));
                    }
                    endpoints.push(lookup(&b, fields[1])?);
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        if b.names.is_empty() {
            return Err(Error::Parse { line: text.lines().count().max(1), msg: "no nodes declared".into() });
        }
        if !endpoints.is_empty() {
            b.set_endpoints(endpoints);
        }
        Ok(b.build())
    }

    /// Canonical text form. Endpoint lines are written only when the
    /// endpoint set differs from the full node set.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.names {
            writeln!(out, "node {name}").unwrap();
        }
        for l in self.links.iter().step_by(2) {
            writeln!(
                out,
                "link {} {} {} {}",
                self.names[l.src.0], self.names[l.dst.0], l.weight, l.capacity
            )
            .unwrap();
        }
        if self.endpoints.len() != self.names.len() {
            for &e in &self.endpoints {
                writeln!(out, "endpoint {}", self.names[e.0]).unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct TopologyBuilder {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    cables: HashSet<(NodeId, NodeId)>,
    links: Vec<Link>,
    endpoints: Option<Vec<NodeId>>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn add_node(&mut self, name: &str) -> Result<NodeId> {
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == '#' || c == ',') {
            return Err(Error::InvalidArgument(format!("invalid node name `{name}`")));
        }
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate node `{name}`")));
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Adds an undirected cable as two directed links of equal weight and
    /// capacity.
    pub fn add_cable(&mut self, a: NodeId, b: NodeId, weight: f64, capacity: f64) -> Result<()> {
        let n = self.names.len();
        if a.0 >= n || b.0 >= n {
            return Err(Error::InvalidArgument("cable endpoint out of range".into()));
        }
        if a == b {
            return Err(Error::InvalidArgument(format!("self-loop on `{}`", self.names[a.0])));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidArgument(format!("capacity must be positive, got {capacity}")));
        }
        let key = (a.min(b), a.max(b));
        if !self.cables.insert(key) {
            return Err(Error::InvalidArgument(format!(
                "duplicate cable `{}`-`{}`",
                self.names[a.0], self.names[b.0]
            )));
        }
        for (src, dst) in [(a, b), (b, a)] {
            let id = LinkId(self.links.len());
            self.links.push(Link { id, src, dst, weight, capacity });
        }
        Ok(())
    }

    pub fn set_endpoints(&mut self, endpoints: Vec<NodeId>) {
        self.endpoints = Some(endpoints);
    }

    pub fn build(self) -> Topology {
        let n = self.names.len();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for l in &self.links {
            out_links[l.src.0].push(l.id);
            in_links[l.dst.0].push(l.id);
        }
        let mut endpoints = self.endpoints.unwrap_or_else(|| (0..n).map(NodeId).collect());
        endpoints.sort();
        endpoints.dedup();
        Topology { names: self.names, links: self.links, out_links, in_links, endpoints }
    }
}

/// Extended generalized fat tree XGFT(h; m_1..m_h; w_1..w_h).
///
/// A level-`i` node has `m_i` children and a level-`(i-1)` node has `w_i`
/// parents, so level `i` holds `∏_{j>i} m_j · ∏_{j<=i} w_j` nodes. Leaves
/// (level 0) are the endpoints. Nodes are named `s<level>_<index>`.
pub fn make_xgft(levels: usize, children: &[usize], parents: &[usize]) -> Result<Topology> {
    if levels == 0 {
        return Err(Error::InvalidArgument("xgft needs at least one level".into()));
    }
    if children.len() != levels || parents.len() != levels {
        return Err(Error::InvalidArgument(format!(
            "xgft with {levels} levels needs {levels} child and parent counts"
        )));
    }
    if children.iter().chain(parents).any(|&x| x == 0) {
        return Err(Error::InvalidArgument("xgft arities must be positive".into()));
    }

    // upper[i] = ∏_{j>i} m_j, lower[i] = ∏_{j<=i} w_j (1-based arities)
    let upper: Vec<usize> = (0..=levels).map(|i| children[i..].iter().product()).collect();
    let lower: Vec<usize> = (0..=levels).map(|i| parents[..i].iter().product()).collect();
    let count: Vec<usize> = (0..=levels).map(|i| upper[i] * lower[i]).collect();

    let mut b = TopologyBuilder::new();
    let mut first = Vec::with_capacity(levels + 1);
    for (level, &c) in count.iter().enumerate() {
        first.push(b.names.len());
        for idx in 0..c {
            b.add_node(&format!("s{level}_{idx}"))?;
        }
    }
    for level in 1..=levels {
        let m = children[level - 1];
        let w = parents[level - 1];
        for child in 0..count[level - 1] {
            let (a, lo) = (child / lower[level - 1], child % lower[level - 1]);
            for p in 0..w {
                let parent = (a / m) * lower[level] + lo + lower[level - 1] * p;
                b.add_cable(
                    NodeId(first[level - 1] + child),
                    NodeId(first[level] + parent),
                    1.0,
                    1.0,
                )?;
            }
        }
    }
    b.set_endpoints((0..count[0]).map(NodeId).collect());
    Ok(b.build())
}

/// Seeded random connected graph with `round(n * avg_degree / 2)` cables:
/// a random spanning tree first, then uniformly chosen extra cables.
pub fn make_irregular(n_nodes: usize, avg_degree: f64, seed: u64) -> Result<Topology> {
    if n_nodes < 3 {
        return Err(Error::InvalidArgument("irregular topology needs at least 3 nodes".into()));
    }
    if !(avg_degree >= 2.0) {
        return Err(Error::InvalidArgument("average degree must be at least 2".into()));
    }
    let target = (n_nodes as f64 * avg_degree / 2.0).round() as usize;
    let max = n_nodes * (n_nodes - 1) / 2;
    if target > max {
        return Err(Error::InvalidArgument(format!(
            "degree {avg_degree} needs {target} cables but a simple graph on {n_nodes} nodes has at most {max}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TopologyBuilder::new();
    for i in 0..n_nodes {
        b.add_node(&format!("n{i}"))?;
    }
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    for i in 1..n_nodes {
        let j = rng.random_range(0..i);
        b.add_cable(NodeId(order[j]), NodeId(order[i]), 1.0, 1.0)?;
    }
    let mut missing: Vec<(usize, usize)> = (0..n_nodes)
        .flat_map(|u| (u + 1..n_nodes).map(move |v| (u, v)))
        .filter(|&(u, v)| !b.cables.contains(&(NodeId(u), NodeId(v))))
        .collect();
    missing.shuffle(&mut rng);
    for &(u, v) in missing.iter().take(target - (n_nodes - 1)) {
        b.add_cable(NodeId(u), NodeId(v), 1.0, 1.0)?;
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::testutil::FIG1;

    #[test]
    fn fig1_parses() {
        let t = Topology::parse(FIG1).unwrap();
        assert_eq!(t.node_count(), 6);
        assert_eq!(t.link_count(), 18);
        assert_eq!(t.endpoints().len(), 2);
        assert!(t.is_strongly_connected());
        let (s, a) = (t.node("S").unwrap(), t.node("A").unwrap());
        let l = t.find_link(a, s).unwrap();
        assert_eq!(l.reverse(), t.find_link(s, a).unwrap());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Topology::parse("# nothing here\n\n") {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
        match Topology::parse("node a\nnode b\nlink a c 1 1\n") {
            Err(Error::Parse { line: 3, msg }) => assert!(msg.contains("dangling")),
            other => panic!("{other:?}"),
        }
        match Topology::parse("node a\nnode b\nlink a b 0 1\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match Topology::parse("node a\nnode b\nlink a b 1 -2\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(Topology::parse("node a\nnode a\n").is_err());
        assert!(Topology::parse("node a\nnode b\nlink a b 1 1\nlink b a 1 1\n").is_err());
        assert!(Topology::parse("node a\nedge a\n").is_err());
    }

    #[test]
    fn endpoints_and_comments() {
        let text = "node a # first\nnode b\nnode c\nlink a b 2 3.5\nlink b c 1 1\nendpoint c\nendpoint a\n";
        let t = Topology::parse(text).unwrap();
        assert_eq!(t.endpoints(), &[NodeId(0), NodeId(2)]);
        assert_eq!(t.link(LinkId(0)).weight, 2.0);
        assert_eq!(t.link(LinkId(1)).capacity, 3.5);
        let again = Topology::parse(&t.to_text()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let t = make_irregular(12, 3.0, 5).unwrap();
        let text = t.to_text();
        let back = Topology::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn xgft_star() {
        let t = make_xgft(1, &[4], &[1]).unwrap();
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.link_count(), 8);
        assert_eq!(t.endpoints().len(), 4);
        let root = t.node("s1_0").unwrap();
        assert_eq!(t.out_links(root).len(), 4);
    }

    #[test]
    fn xgft_rejects_bad_arguments() {
        assert!(make_xgft(0, &[], &[]).is_err());
        assert!(make_xgft(2, &[3], &[3, 3]).is_err());
        assert!(make_xgft(2, &[3, 0], &[3, 3]).is_err());
    }

    #[test]
    fn irregular_small_cases() {
        let tri = make_irregular(3, 2.0, 7).unwrap();
        assert_eq!(tri.link_count(), 6);
        for u in tri.nodes() {
            assert_eq!(tri.out_links(u).len(), 2);
        }
        let t = make_irregular(10, 3.0, 1).unwrap();
        assert_eq!(t.link_count(), 30);
        assert!(t.is_strongly_connected());
        assert!(make_irregular(4, 4.0, 0).is_err());
        assert!(make_irregular(2, 2.0, 0).is_err());
        assert!(make_irregular(10, 1.5, 0).is_err());
    }

    #[test]
    fn irregular_is_deterministic() {
        let a = make_irregular(25, 3.5, 42).unwrap();
        let b = make_irregular(25, 3.5, 42).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = make_irregular(25, 3.5, 43).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }
}
