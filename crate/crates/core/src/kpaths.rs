//! Shortest-path trees and loop-free path enumeration in ascending length.
//!
//! A path from `s` to `t` is encoded by its sidetrack links: the links it
//! uses that are not arcs of the shortest-path tree toward `t`. With
//! `d(v)` the tree distance and `c(u->v) = d(v) - d(u) + w(u->v)` the
//! sidetrack penalty, every loop-free path satisfies
//! `length = d(s) + sum of c over its sidetracks`, so popping sidetrack sets
//! from a priority queue keyed on the penalty sum yields paths by length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::topology::{LinkId, NodeId, Topology};
use crate::{approx_eq, approx_le};

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    target: NodeId,
    dist: Vec<f64>,
    parent: Vec<Option<LinkId>>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ShortestPathTree {
    /// Builds the tree without requiring every node to reach `target`;
    /// unreachable nodes get an infinite distance and no parent.
    pub fn build(topo: &Topology, target: NodeId) -> ShortestPathTree {
        let n = topo.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[target.0] = 0.0;
        heap.push(HeapEntry(0.0, target.0));
        while let Some(HeapEntry(d, v)) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            for &l in topo.in_links(NodeId(v)) {
                let link = topo.link(l);
                let u = link.src.0;
                let nd = d + link.weight;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(HeapEntry(nd, u));
                }
            }
        }

        let parent = (0..n)
            .map(|u| {
                if u == target.0 || !dist[u].is_finite() {
                    return None;
                }
                topo.out_links(NodeId(u))
                    .iter()
                    .copied()
                    .filter(|&l| {
                        let link = topo.link(l);
                        approx_eq(dist[u], link.weight + dist[link.dst.0])
                    })
                    .min()
            })
            .collect();
        ShortestPathTree { target, dist, parent }
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn dist(&self, v: NodeId) -> f64 {
        self.dist[v.0]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Tree arc leaving `v` toward the target.
    pub fn parent_link(&self, v: NodeId) -> Option<LinkId> {
        self.parent[v.0]
    }

    pub fn is_tree_arc(&self, topo: &Topology, l: LinkId) -> bool {
        self.parent[topo.link(l).src.0] == Some(l)
    }

    /// Links `u -> v` lying on some shortest path toward the target, i.e.
    /// `d(u) = w + d(v)`. These form the ECMP forwarding DAG.
    pub fn dag_links<'a>(&'a self, topo: &'a Topology, u: NodeId) -> impl Iterator<Item = LinkId> + 'a {
        let du = self.dist[u.0];
        topo.out_links(u).iter().copied().filter(move |&l| {
            let link = topo.link(l);
            du.is_finite() && u != self.target && approx_eq(du, link.weight + self.dist[link.dst.0])
        })
    }

    /// Penalty of a non-tree link, clamped at zero against rounding.
    fn penalty(&self, topo: &Topology, l: LinkId) -> f64 {
        let link = topo.link(l);
        (self.dist[link.dst.0] - self.dist[link.src.0] + link.weight).max(0.0)
    }
}

/// Shortest-path tree toward `target`. Every node must reach the target.
/// Parent ties go to the smallest link id.
pub fn shortest_tree(topo: &Topology, target: NodeId) -> Result<ShortestPathTree> {
    if !topo.contains(target) {
        return Err(Error::UnknownNode(target.to_string()));
    }
    let tree = ShortestPathTree::build(topo, target);
    if let Some(u) = tree.dist.iter().position(|d| !d.is_finite()) {
        return Err(Error::Unreachable { from: topo.name(NodeId(u)).into(), to: topo.name(target).into() });
    }
    Ok(tree)
}

/// `c(e) = d(v) - d(u) + w(e)` for a non-tree link `e = u -> v`.
pub fn sidetrack_cost(topo: &Topology, tree: &ShortestPathTree, l: LinkId) -> Result<f64> {
    if tree.is_tree_arc(topo, l) {
        return Err(Error::TreeArc(l.0));
    }
    Ok(tree.penalty(topo, l))
}

#[derive(Debug, Clone)]
pub struct Path {
    pub src: NodeId,
    pub dst: NodeId,
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub length: f64,
}

impl PartialEq for Path {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src && self.dst == other.dst && self.links == other.links
    }
}

impl Eq for Path {}

impl std::hash::Hash for Path {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.src.hash(state);
        self.links.hash(state);
    }
}

impl Path {
    /// Path through the given node sequence, resolving each hop to the
    /// directed link between consecutive nodes.
    pub fn from_nodes(topo: &Topology, nodes: &[NodeId]) -> Result<Path> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two nodes".into()));
        }
        let mut seen = vec![false; topo.node_count()];
        let mut links = Vec::with_capacity(nodes.len() - 1);
        for (i, &v) in nodes.iter().enumerate() {
            if !topo.contains(v) {
                return Err(Error::UnknownNode(v.to_string()));
            }
            if std::mem::replace(&mut seen[v.0], true) {
                return Err(Error::InvalidArgument(format!("path revisits `{}`", topo.name(v))));
            }
            if i > 0 {
                let u = nodes[i - 1];
                let l = topo.find_link(u, v).ok_or_else(|| {
                    Error::InvalidArgument(format!("no link `{}` -> `{}`", topo.name(u), topo.name(v)))
                })?;
                links.push(l);
            }
        }
        Ok(Self::assemble(topo, nodes.to_vec(), links))
    }

    fn assemble(topo: &Topology, nodes: Vec<NodeId>, links: Vec<LinkId>) -> Path {
        let length = links.iter().map(|&l| topo.link(l).weight).sum();
        Path { src: nodes[0], dst: *nodes.last().unwrap(), nodes, links, length }
    }

    pub fn hop_count(&self) -> usize {
        self.links.len()
    }

    pub fn uses(&self, l: LinkId) -> bool {
        self.links.contains(&l)
    }

    /// Sidetrack links of this path relative to `tree`.
    pub fn sidetracks(&self, topo: &Topology, tree: &ShortestPathTree) -> SidetrackSet {
        SidetrackSet::new(self.links.iter().copied().filter(|&l| !tree.is_tree_arc(topo, l)))
    }

    pub fn names(&self, topo: &Topology) -> Vec<String> {
        self.nodes.iter().map(|&v| topo.name(v).to_string()).collect()
    }

    pub fn display(&self, topo: &Topology) -> String {
        self.names(topo).join("-")
    }
}

/// A set of non-tree links, kept sorted by link id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SidetrackSet {
    edges: Vec<LinkId>,
}

impl SidetrackSet {
    pub fn new(edges: impl IntoIterator<Item = LinkId>) -> Self {
        let mut edges: Vec<LinkId> = edges.into_iter().collect();
        edges.sort();
        edges.dedup();
        SidetrackSet { edges }
    }

    pub fn edges(&self) -> &[LinkId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn cost(&self, topo: &Topology, tree: &ShortestPathTree) -> Result<f64> {
        self.edges.iter().map(|&l| sidetrack_cost(topo, tree, l)).sum()
    }

    /// Walks from `src`: at each node take the member link leaving it if
    /// there is one, otherwise the tree arc. The set is well-formed when the
    /// walk reaches the target without revisiting a node and uses every
    /// member.
    pub fn path(&self, topo: &Topology, tree: &ShortestPathTree, src: NodeId) -> Result<Path> {
        let n = topo.node_count();
        let mut from_node: Vec<Option<LinkId>> = vec![None; n];
        for &l in &self.edges {
            if tree.is_tree_arc(topo, l) {
                return Err(Error::TreeArc(l.0));
            }
            let u = topo.link(l).src.0;
            if from_node[u].replace(l).is_some() {
                return Err(Error::Malformed);
            }
        }
        let mut seen = vec![false; n];
        let mut nodes = vec![src];
        let mut links = Vec::new();
        let mut used = 0;
        let mut v = src;
        seen[v.0] = true;
        while v != tree.target() {
            let l = match from_node[v.0] {
                Some(l) => {
                    used += 1;
                    l
                }
                None => tree.parent_link(v).ok_or(Error::Malformed)?,
            };
            v = topo.link(l).dst;
            if std::mem::replace(&mut seen[v.0], true) {
                return Err(Error::Malformed);
            }
            nodes.push(v);
            links.push(l);
        }
        if used != self.edges.len() {
            return Err(Error::Malformed);
        }
        Ok(Path::assemble(topo, nodes, links))
    }
}

/// Partial path: the route from `src` up to the head of the most recent
/// sidetrack, which must be loop-free.
#[derive(Debug)]
struct Candidate {
    cost: f64,
    seq: u64,
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Loop-free `src -> tree.target()` paths whose stretch
/// `(length - d(src)) / d(src)` is at most `theta`, shortest first, at most
/// `max_paths` of them. Equal lengths are ordered by node sequence.
///
/// Sidetracks are added in path order: a set is only extended by a link
/// leaving the tree path after its last sidetrack, and only while the route
/// up to that sidetrack stays loop-free. Every loop-free path has exactly
/// one such build order, so each is produced once.
pub fn enumerate_with_tree(
    topo: &Topology,
    tree: &ShortestPathTree,
    src: NodeId,
    theta: f64,
    max_paths: usize,
) -> Result<Vec<Path>> {
    let target = tree.target();
    if !topo.contains(src) {
        return Err(Error::UnknownNode(src.to_string()));
    }
    if src == target {
        return Err(Error::InvalidArgument("source and destination coincide".into()));
    }
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::InvalidArgument(format!("theta must be non-negative, got {theta}")));
    }
    let ds = tree.dist(src);
    if !ds.is_finite() {
        return Err(Error::Unreachable { from: topo.name(src).into(), to: topo.name(target).into() });
    }
    if max_paths == 0 {
        return Ok(Vec::new());
    }
    let budget = theta * ds;

    let n = topo.node_count();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Candidate { cost: 0.0, seq, nodes: vec![src], links: Vec::new() });
    let mut found: Vec<(f64, Path)> = Vec::new();
    let mut on_path = vec![false; n];

    while let Some(cand) = heap.pop() {
        if found.len() >= max_paths {
            let cutoff = found[max_paths - 1].0;
            if !approx_le(cand.cost, cutoff) {
                break;
            }
        }
        on_path.iter_mut().for_each(|x| *x = false);
        for v in &cand.nodes {
            on_path[v.0] = true;
        }

        let mut tail_nodes: Vec<NodeId> = Vec::new();
        let mut tail_links: Vec<LinkId> = Vec::new();
        let mut x = *cand.nodes.last().unwrap();
        let complete = loop {
            if x == target {
                break true;
            }
            for &l in topo.out_links(x) {
                if tree.parent_link(x) == Some(l) {
                    continue;
                }
                let head = topo.link(l).dst;
                if on_path[head.0] || !tree.dist(head).is_finite() {
                    continue;
                }
                let cost = cand.cost + tree.penalty(topo, l);
                if !approx_le(cost, budget) {
                    continue;
                }
                let mut nodes = cand.nodes.clone();
                nodes.extend_from_slice(&tail_nodes);
                nodes.push(head);
                let mut links = cand.links.clone();
                links.extend_from_slice(&tail_links);
                links.push(l);
                seq += 1;
                heap.push(Candidate { cost, seq, nodes, links });
            }
            let Some(arc) = tree.parent_link(x) else { break false };
            let next = topo.link(arc).dst;
            if on_path[next.0] {
                break false;
            }
            on_path[next.0] = true;
            tail_nodes.push(next);
            tail_links.push(arc);
            x = next;
        };

        if complete {
            let mut nodes = cand.nodes;
            nodes.extend(tail_nodes);
            let mut links = cand.links;
            links.extend(tail_links);
            found.push((cand.cost, Path::assemble(topo, nodes, links)));
        }
    }

    let mut paths: Vec<Path> = found.into_iter().map(|(_, p)| p).collect();
    paths.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.nodes.cmp(&b.nodes)));
    paths.truncate(max_paths);
    Ok(paths)
}

/// [`enumerate_with_tree`] after building the tree toward `dst`.
pub fn enumerate_paths(topo: &Topology, src: NodeId, dst: NodeId, theta: f64, max_paths: usize) -> Result<Vec<Path>> {
    if !topo.contains(dst) {
        return Err(Error::UnknownNode(dst.to_string()));
    }
    let tree = ShortestPathTree::build(topo, dst);
    enumerate_with_tree(topo, &tree, src, theta, max_paths)
}
