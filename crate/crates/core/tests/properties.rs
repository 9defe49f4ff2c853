//! Randomised structural properties of the finite-graph layer.

use std::collections::BTreeSet;
use std::sync::Arc;

use percolab::conntree::{build_connectivity_tree, build_connectivity_tree_definitional};
use percolab::lattice::{
    clusters, connected, doubly_connected, enumerate_configurations, Configuration, Graph, LatticeBox, LatticePoint,
};
use percolab::pivotals::{
    common_pivotals, common_pivotals_definitional, open_pivotals, open_pivotals_definitional,
    random_open_paths, order_consistent,
};
use percolab::trees::{enumerate_trees, AbstractTree};
use proptest::prelude::*;

/// A connected multigraph on `n` vertices: a random spanning tree plus extras.
fn graph_strategy(max_vertices: usize, max_extra: usize) -> impl Strategy<Value = Graph> {
    (2..=max_vertices).prop_flat_map(move |n| {
        let tree = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n), 0..=max_extra);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut pairs: Vec<(usize, usize)> =
                tree.iter().enumerate().map(|(i, ix)| (ix.index(i + 1), i + 1)).collect();
            pairs.extend(extra.into_iter().filter(|(a, b)| a != b));
            Graph::from_pairs(n, &pairs)
        })
    })
}

fn config_strategy(max_vertices: usize, max_extra: usize) -> impl Strategy<Value = Configuration> {
    graph_strategy(max_vertices, max_extra).prop_flat_map(|g| {
        let m = g.num_edges();
        let g = Arc::new(g);
        proptest::collection::vec(any::<bool>(), m).prop_map(move |open| Configuration::new(g.clone(), open, 0.5))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_is_a_probability_measure(g in graph_strategy(7, 5), p in 0.0f64..=1.0) {
        let g = Arc::new(g);
        let total: f64 = enumerate_configurations(g.clone(), p).unwrap().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
    }

    #[test]
    fn clusters_agree_with_connection(c in config_strategy(9, 6)) {
        let part = clusters(&c);
        let n = c.graph().num_vertices();
        for x in 0..n {
            for y in 0..n {
                prop_assert_eq!(part.same(x, y), connected(&c, x, y, None));
            }
        }
    }

    #[test]
    fn double_connection_is_monotone_and_implies_connection(c in config_strategy(7, 6), e in any::<prop::sample::Index>()) {
        let n = c.graph().num_vertices();
        let mut opened = c.clone();
        opened.set(e.index(c.graph().num_edges()), true);
        for x in 0..n {
            for y in 0..n {
                if doubly_connected(&c, x, y, None) {
                    prop_assert!(connected(&c, x, y, None));
                    prop_assert!(doubly_connected(&opened, x, y, None));
                }
            }
        }
    }

    #[test]
    fn pivotals_match_their_definition(c in config_strategy(8, 5)) {
        let n = c.graph().num_vertices();
        for v in 1..n {
            if !connected(&c, 0, v, None) {
                prop_assert!(open_pivotals(&c, 0, v).is_err());
                continue;
            }
            let fast = open_pivotals(&c, 0, v).unwrap();
            let slow = open_pivotals_definitional(&c, 0, v).unwrap();
            prop_assert_eq!(&fast.edges, &slow.edges);
            let paths = random_open_paths(&c, 0, v, 3, v as u64);
            prop_assert!(order_consistent(&fast, &paths));
        }
        let reach: Vec<usize> = (1..n).filter(|&v| connected(&c, 0, v, None)).collect();
        if !reach.is_empty() {
            let fast = common_pivotals(&c, 0, &reach).unwrap();
            let slow = common_pivotals_definitional(&c, 0, &reach).unwrap();
            prop_assert_eq!(fast.edges, slow.edges);
        }
    }

    #[test]
    fn connectivity_tree_is_a_tree(seed in any::<u64>(), p in 0.45f64..0.9) {
        let g = Arc::new(Graph::lattice_box(&LatticeBox::centered(2, 2)));
        let c = percolab::lattice::sample_configuration(g.clone(), p, seed).unwrap();
        let at = |x: i64, y: i64| g.vertex(&LatticePoint::new(vec![x, y])).unwrap();
        let marked = [at(0, 0), at(-2, -2), at(2, -2), at(2, 2)];
        if marked.iter().all(|&m| connected(&c, marked[0], m, None)) {
            let fast = build_connectivity_tree(&c, &marked).unwrap();
            let slow = build_connectivity_tree_definitional(&c, &marked).unwrap();
            prop_assert!(fast.is_tree());
            prop_assert_eq!(fast, slow);
        } else {
            prop_assert!(build_connectivity_tree(&c, &marked).is_err());
        }
    }

    #[test]
    fn newick_round_trips(k in 3usize..=7, ix in any::<prop::sample::Index>()) {
        let trees = enumerate_trees(k).unwrap();
        let t = &trees[ix.index(trees.len())];
        let back = AbstractTree::parse_newick(&t.newick()).unwrap();
        prop_assert_eq!(back.canonical(), t.canonical());
    }
}

#[test]
fn iterated_reduction_reaches_the_base_case() {
    for t in enumerate_trees(6).unwrap() {
        let mut cur = t.clone();
        let mut steps = 0;
        while cur.k() >= 4 {
            let r = cur.phi_reduce().unwrap();
            r.tree.validate().unwrap();
            assert_eq!(r.tree.k(), cur.k() - 1);
            // surviving labels keep their order and are distinct from v
            let kept: Vec<usize> = r.label_map.iter().flatten().copied().collect();
            assert!(kept.windows(2).all(|w| w[0] < w[1]));
            assert!(!kept.contains(&r.v_label));
            assert_eq!(r.label_map.iter().filter(|l| l.is_none()).count(), 2);
            cur = r.tree;
            steps += 1;
        }
        assert_eq!(steps, 3);
        assert_eq!(cur.k(), 3);
    }
}

#[test]
fn census_has_no_duplicates() {
    for k in 3..=7 {
        let trees = enumerate_trees(k).unwrap();
        let canon: BTreeSet<String> = trees.iter().map(|t| t.canonical().newick()).collect();
        assert_eq!(canon.len(), trees.len());
        assert_eq!(trees.len() as u64, percolab::trees::tree_count(k));
    }
}
