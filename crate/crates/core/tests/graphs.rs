mod common;

use common::{all_simple_paths, fixture, node, oracle_paths, random_graph, relaxation_distances};
use kpath_core::kpaths::{enumerate_paths, shortest_tree, sidetrack_cost};
use kpath_core::topology::{make_irregular, make_xgft};
use kpath_core::{LinkId, Topology};
use proptest::prelude::*;

/// Independent XGFT construction: a node is a digit vector
/// (a_h..a_{i+1}, b_i..b_1) with a_j < m_j and b_j < w_j. A level-(i-1)
/// node connects to every level-i node that keeps its digits above i,
/// drops a_i and picks any b_i.
fn xgft_counts(children: &[usize], parents: &[usize]) -> (Vec<usize>, usize) {
    let h = children.len();
    let digits = |level: usize| -> Vec<usize> {
        // radices, low digit first: b_1..b_level, a_{level+1}..a_h
        parents[..level].iter().chain(&children[level..]).copied().collect()
    };
    let expand = |radix: &[usize]| -> Vec<Vec<usize>> {
        let mut all = vec![vec![]];
        for &r in radix {
            all = all.into_iter().flat_map(|v| (0..r).map(move |d| [v.clone(), vec![d]].concat())).collect();
        }
        all
    };
    let mut counts = Vec::new();
    let mut cables = 0;
    for level in 0..=h {
        counts.push(expand(&digits(level)).len());
    }
    for level in 1..=h {
        let lower = expand(&digits(level - 1));
        let upper = expand(&digits(level));
        for c in &lower {
            for p in &upper {
                // shared: b_1..b_{level-1} and a_{level+1}..a_h
                let same_low = c[..level - 1] == p[..level - 1];
                let same_high = c[level..] == p[level..];
                if same_low && same_high {
                    cables += 1;
                }
            }
        }
    }
    (counts, cables)
}

fn level_counts(t: &Topology, levels: usize) -> Vec<usize> {
    (0..=levels).map(|l| t.nodes().filter(|&v| t.name(v).starts_with(&format!("s{l}_"))).count()).collect()
}

#[test]
fn xgft_matches_digit_construction() {
    for (children, parents) in [
        (vec![3, 6], vec![3, 3]),
        (vec![5, 10], vec![5, 5]),
        (vec![4], vec![1]),
        (vec![2, 3, 2], vec![1, 2, 2]),
        (vec![4, 4], vec![2, 1]),
    ] {
        let h = children.len();
        let t = make_xgft(h, &children, &parents).unwrap();
        let (counts, cables) = xgft_counts(&children, &parents);
        assert_eq!(level_counts(&t, h), counts, "{children:?} {parents:?}");
        assert_eq!(t.link_count(), 2 * cables);
        assert_eq!(t.endpoints().len(), children.iter().product::<usize>());
        assert!(t.is_strongly_connected());
    }
    let t = make_xgft(2, &[3, 6], &[3, 3]).unwrap();
    assert_eq!(level_counts(&t, 2), vec![18, 18, 9]);
    let t = make_xgft(2, &[5, 10], &[5, 5]).unwrap();
    assert_eq!(level_counts(&t, 2), vec![50, 50, 25]);
}

#[test]
fn xgft_degrees() {
    let t = make_xgft(2, &[3, 6], &[3, 3]).unwrap();
    for v in t.nodes() {
        let name = t.name(v);
        let deg = t.out_links(v).len();
        let expect = match &name[..2] {
            "s0" => 3,
            "s1" => 3 + 3,
            _ => 6,
        };
        assert_eq!(deg, expect, "{name}");
        assert_eq!(t.in_links(v).len(), deg);
    }
}

#[test]
fn irregular_graphs_are_connected_and_sized() {
    for seed in 0..50 {
        let n = 15 + (seed as usize % 11);
        let t = make_irregular(n, 3.0, seed).unwrap();
        assert!(t.is_strongly_connected());
        assert_eq!(t.link_count(), 2 * (n as f64 * 1.5).round() as usize);
        assert_eq!(t.endpoints().len(), n);
        assert_eq!(make_irregular(n, 3.0, seed).unwrap().to_text(), t.to_text());
    }
}

#[test]
fn fixtures_round_trip() {
    for name in ["fig1.topo", "hotlink.topo"] {
        let t = fixture(name);
        let text = t.to_text();
        let back = Topology::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }
}

#[test]
fn fig1_distances_and_sidetracks() {
    let t = fixture("fig1.topo");
    let tree = shortest_tree(&t, node(&t, "T")).unwrap();
    for (name, d) in [("T", 0.0), ("C", 1.0), ("D", 1.0), ("A", 2.0), ("B", 2.0), ("S", 3.0)] {
        assert_eq!(tree.dist(node(&t, name)), d, "{name}");
    }
    let ab = t.find_link(node(&t, "A"), node(&t, "B")).unwrap();
    assert_eq!(sidetrack_cost(&t, &tree, ab).unwrap(), 1.0);
    // the tree leaves S by its smallest link id, S->A; S->B is a free sidetrack
    let sb = t.find_link(node(&t, "S"), node(&t, "B")).unwrap();
    assert_eq!(sidetrack_cost(&t, &tree, sb).unwrap(), 0.0);
}

#[test]
fn hotlink_candidates() {
    let t = fixture("hotlink.topo");
    let names = |theta: f64| -> Vec<String> {
        enumerate_paths(&t, node(&t, "A"), node(&t, "T"), theta, 100)
            .unwrap()
            .iter()
            .map(|p| p.display(&t))
            .collect()
    };
    assert_eq!(names(0.0), ["A-C-T"]);
    assert_eq!(names(0.5), ["A-C-T", "A-C-Z-T"]);
    assert_eq!(names(f64::INFINITY), ["A-C-T", "A-C-Z-T", "A-E-B-C-T", "A-E-B-C-Z-T"]);
}

fn check_enumeration(t: &Topology, theta: f64, cap: usize) -> std::result::Result<(), TestCaseError> {
    for s in t.nodes() {
        for d in t.nodes() {
            if s == d {
                continue;
            }
            let got = enumerate_paths(t, s, d, theta, cap).unwrap();
            let mut want = oracle_paths(t, s, d, theta);
            want.truncate(cap);
            let got_nodes: Vec<_> = got.iter().map(|p| p.nodes.clone()).collect();
            let want_nodes: Vec<_> = want.iter().map(|p| p.1.clone()).collect();
            prop_assert_eq!(&got_nodes, &want_nodes, "{}->{} theta {}", s, d, theta);
            for w in got.windows(2) {
                prop_assert!(w[0].length <= w[1].length);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tree_matches_relaxation(n in 2usize..10, extra in 0usize..14, real in any::<bool>(), seed in any::<u64>()) {
        let t = random_graph(n, extra, real, seed);
        for target in t.nodes() {
            let tree = shortest_tree(&t, target).unwrap();
            let want = relaxation_distances(&t, target);
            for v in t.nodes() {
                prop_assert!((tree.dist(v) - want[v.0]).abs() <= 1e-9 * want[v.0].max(1.0));
            }
            for l in t.links() {
                // Bellman optimality, and tree arcs are tight
                prop_assert!(tree.dist(l.src) <= l.weight + tree.dist(l.dst) + 1e-9);
                if tree.is_tree_arc(&t, l.id) {
                    prop_assert!((tree.dist(l.src) - l.weight - tree.dist(l.dst)).abs() < 1e-9);
                } else {
                    prop_assert!(sidetrack_cost(&t, &tree, l.id).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn enumeration_matches_dfs(n in 2usize..9, extra in 0usize..12, seed in any::<u64>()) {
        let t = random_graph(n, extra, false, seed);
        check_enumeration(&t, 0.0, 10_000)?;
        check_enumeration(&t, 0.25, 10_000)?;
        check_enumeration(&t, f64::INFINITY, 7)?;
    }

    #[test]
    fn enumeration_matches_dfs_real_weights(n in 2usize..8, extra in 0usize..10, seed in any::<u64>()) {
        let t = random_graph(n, extra, true, seed);
        check_enumeration(&t, 0.0, 10_000)?;
        check_enumeration(&t, 0.25, 10_000)?;
        check_enumeration(&t, 1.0, 10_000)?;
    }

    #[test]
    fn length_identity(n in 2usize..9, extra in 0usize..12, real in any::<bool>(), seed in any::<u64>()) {
        let t = random_graph(n, extra, real, seed);
        for d in t.nodes() {
            let tree = shortest_tree(&t, d).unwrap();
            for s in t.nodes().filter(|&s| s != d) {
                let paths = enumerate_paths(&t, s, d, f64::INFINITY, 50).unwrap();
                prop_assert!((paths[0].length - tree.dist(s)).abs() < 1e-9);
                for p in &paths {
                    let sum: f64 = p.links.iter().map(|&l| t.link(l).weight).sum();
                    let side = p.sidetracks(&t, &tree);
                    let identity = tree.dist(s) + side.cost(&t, &tree).unwrap();
                    prop_assert!((sum - p.length).abs() < 1e-9);
                    prop_assert!((sum - identity).abs() < 1e-9 * sum.max(1.0));
                    // the sidetrack encoding rebuilds the same path
                    prop_assert_eq!(&side.path(&t, &tree, s).unwrap(), p);
                }
            }
        }
    }
}

#[test]
fn dfs_oracle_counts_fig1() {
    let t = fixture("fig1.topo");
    let all = all_simple_paths(&t, node(&t, "S"), node(&t, "T"));
    let got = enumerate_paths(&t, node(&t, "S"), node(&t, "T"), f64::INFINITY, 1000).unwrap();
    assert_eq!(got.len(), all.len());
    let ids: Vec<LinkId> = got.iter().flat_map(|p| p.links.clone()).collect();
    assert!(ids.iter().all(|l| l.0 < t.link_count()));
}
