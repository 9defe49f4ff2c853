//! Open pivotal edges for connection events.
//!
//! The fast path finds the bridges of the open subgraph and reads them off
//! one BFS path from `u` to `v`: an edge on a simple u–v path is pivotal
//! exactly when it is a bridge, and the path fixes orientation and order.
//! The definitional version closes each open edge in turn and retests.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{reach_filtered, Configuration, DirectedEdge, EdgeId, VertexId};
use crate::rng;

/// Ordered, oriented open pivotals of `source ↔ targets`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PivotalList {
    pub source: VertexId,
    pub targets: Vec<VertexId>,
    pub edges: Vec<DirectedEdge>,
}

impl PivotalList {
    pub fn first(&self) -> Option<DirectedEdge> {
        self.edges.first().copied()
    }

    pub fn last(&self) -> Option<DirectedEdge> {
        self.edges.last().copied()
    }

    /// Tails e̲ of the pivotals, in order.
    pub fn tails(&self) -> Vec<VertexId> {
        self.edges.iter().map(|e| e.tail).collect()
    }

    pub fn contains(&self, id: EdgeId) -> bool {
        self.edges.iter().any(|e| e.id == id)
    }
}

/// Bridges of the open subgraph (iterative lowlink; parallel edges handled
/// by skipping only the tree edge id, not the parent vertex).
pub fn open_bridges(config: &Configuration) -> Vec<bool> {
    let g = config.graph();
    let n = g.num_vertices();
    let mut is_bridge = vec![false; g.num_edges()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // stack frames: (vertex, edge used to enter, next neighbour index)
    let mut stack: Vec<(VertexId, Option<EdgeId>, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, None, 0));
        while let Some(top) = stack.last_mut() {
            let (v, in_edge) = (top.0, top.1);
            let nbrs = g.neighbors(v);
            if top.2 < nbrs.len() {
                let (w, e) = nbrs[top.2];
                top.2 += 1;
                if !config.is_open(e) || Some(e) == in_edge {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, Some(e), 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let (Some(e), Some(&(parent, _, _))) = (in_edge, stack.last()) {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        is_bridge[e] = true;
                    }
                }
            }
        }
    }
    is_bridge
}

/// Deterministic BFS path from `u` to `v` along open edges, as (vertex, edge
/// used to reach it) steps after `u`. `None` if not connected.
pub fn bfs_open_path(config: &Configuration, u: VertexId, v: VertexId) -> Option<Vec<(VertexId, EdgeId)>> {
    let g = config.graph();
    let mut pred: Vec<Option<(VertexId, EdgeId)>> = vec![None; g.num_vertices()];
    let mut seen = vec![false; g.num_vertices()];
    seen[u] = true;
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        if x == v {
            break;
        }
        for &(w, e) in g.neighbors(x) {
            if !seen[w] && config.is_open(e) {
                seen[w] = true;
                pred[w] = Some((x, e));
                queue.push_back(w);
            }
        }
    }
    if !seen[v] {
        return None;
    }
    let mut steps = Vec::new();
    let mut x = v;
    while x != u {
        let (p, e) = pred[x].expect("bfs predecessor");
        steps.push((x, e));
        x = p;
    }
    steps.reverse();
    Some(steps)
}

/// Pivotals of u ↔ v given precomputed [`open_bridges`].
pub fn open_pivotals_with(
    config: &Configuration,
    u: VertexId,
    v: VertexId,
    bridges: &[bool],
) -> Result<Vec<DirectedEdge>> {
    let path = bfs_open_path(config, u, v).ok_or_else(|| {
        Error::NotConnected(format!(
            "{} and {}",
            config.graph().point(u),
            config.graph().point(v)
        ))
    })?;
    let mut out = Vec::new();
    let mut prev = u;
    for (x, e) in path {
        if bridges[e] {
            out.push(DirectedEdge { id: e, tail: prev, head: x });
        }
        prev = x;
    }
    Ok(out)
}

/// P(u, v): open pivotals of {u ↔ v}, oriented and ordered from `u`.
pub fn open_pivotals(config: &Configuration, u: VertexId, v: VertexId) -> Result<PivotalList> {
    let bridges = open_bridges(config);
    Ok(PivotalList {
        source: u,
        targets: vec![v],
        edges: open_pivotals_with(config, u, v, &bridges)?,
    })
}

/// Close-and-test computation of P(u, v). Orientation: the tail is the
/// endpoint left on `u`'s side once the edge is closed. Order: by the size
/// of `u`'s side, which strictly grows along the pivotal sequence.
pub fn open_pivotals_definitional(
    config: &Configuration,
    u: VertexId,
    v: VertexId,
) -> Result<PivotalList> {
    let g = config.graph();
    let base = reach_filtered(config, &[u], |_| true, |_| true);
    if !base[v] {
        return Err(Error::NotConnected(format!("{} and {}", g.point(u), g.point(v))));
    }
    let mut found: Vec<(usize, DirectedEdge)> = Vec::new();
    for e in 0..g.num_edges() {
        if !config.is_open(e) {
            continue;
        }
        let side = reach_filtered(config, &[u], |_| true, |f| f != e);
        if side[v] {
            continue;
        }
        let (a, b) = g.endpoints(e);
        let tail = if side[a] { a } else { b };
        let size = side.iter().filter(|&&s| s).count();
        found.push((size, g.directed(e, tail)));
    }
    found.sort_by_key(|&(s, _)| s);
    Ok(PivotalList {
        source: u,
        targets: vec![v],
        edges: found.into_iter().map(|(_, e)| e).collect(),
    })
}

fn intersect_lists(lists: Vec<Vec<DirectedEdge>>, source: VertexId, targets: &[VertexId]) -> PivotalList {
    let mut iter = lists.into_iter();
    let mut common = iter.next().unwrap_or_default();
    for other in iter {
        common.retain(|e| other.iter().any(|f| f.id == e.id));
    }
    PivotalList {
        source,
        targets: targets.to_vec(),
        edges: common,
    }
}

/// Common open pivotals of {u ↔ x} for all x in `targets`, in the order and
/// orientation inherited from the first target's connection.
pub fn common_pivotals(config: &Configuration, u: VertexId, targets: &[VertexId]) -> Result<PivotalList> {
    if targets.is_empty() {
        return Err(Error::Domain("empty target set".into()));
    }
    let bridges = open_bridges(config);
    let lists = targets
        .iter()
        .map(|&x| open_pivotals_with(config, u, x, &bridges))
        .collect::<Result<Vec<_>>>()?;
    Ok(intersect_lists(lists, u, targets))
}

/// Definitional counterpart of [`common_pivotals`].
pub fn common_pivotals_definitional(
    config: &Configuration,
    u: VertexId,
    targets: &[VertexId],
) -> Result<PivotalList> {
    if targets.is_empty() {
        return Err(Error::Domain("empty target set".into()));
    }
    let lists = targets
        .iter()
        .map(|&x| open_pivotals_definitional(config, u, x).map(|l| l.edges))
        .collect::<Result<Vec<_>>>()?;
    Ok(intersect_lists(lists, u, targets))
}

/// (P̲(u, A), P̄(u, A)): the common pivotals closest to and furthest from `u`.
pub fn common_pivotal_extremes(
    config: &Configuration,
    u: VertexId,
    targets: &[VertexId],
) -> Result<(Option<DirectedEdge>, Option<DirectedEdge>)> {
    let c = common_pivotals(config, u, targets)?;
    Ok((c.first(), c.last()))
}

/// Up to `count` distinct simple open u–v paths found by randomised DFS.
/// Each path is the list of (vertex, edge) steps after `u`.
pub fn random_open_paths(
    config: &Configuration,
    u: VertexId,
    v: VertexId,
    count: usize,
    seed: u64,
) -> Vec<Vec<(VertexId, EdgeId)>> {
    let g = config.graph();
    let mut out: Vec<Vec<(VertexId, EdgeId)>> = Vec::new();
    let reachable = reach_filtered(config, &[u], |_| true, |_| true);
    if !reachable[v] {
        return out;
    }
    for attempt in 0..(4 * count as u64) {
        if out.len() >= count {
            break;
        }
        let mut r = rng::stream(seed, attempt);
        let mut on_path = vec![false; g.num_vertices()];
        let mut path: Vec<(VertexId, EdgeId)> = Vec::new();
        let mut stack: Vec<Vec<(VertexId, EdgeId)>> = Vec::new();
        on_path[u] = true;
        let mut opts: Vec<_> = g.neighbors(u).iter().copied().filter(|&(_, e)| config.is_open(e)).collect();
        opts.shuffle(&mut r);
        stack.push(opts);
        let mut current = u;
        // randomised DFS with backtracking; terminates since graphs are finite
        while current != v {
            let top = stack.last_mut().expect("search stack");
            match top.pop() {
                Some((w, e)) if !on_path[w] => {
                    on_path[w] = true;
                    path.push((w, e));
                    current = w;
                    let mut next: Vec<_> = g
                        .neighbors(w)
                        .iter()
                        .copied()
                        .filter(|&(x, f)| config.is_open(f) && !on_path[x])
                        .collect();
                    next.shuffle(&mut r);
                    stack.push(next);
                }
                Some(_) => {}
                None => {
                    stack.pop();
                    let (w, _) = path.pop().expect("backtrack below root");
                    on_path[w] = false;
                    current = path.last().map_or(u, |&(x, _)| x);
                }
            }
        }
        if !out.contains(&path) {
            out.push(path);
        }
    }
    out
}

/// Checks that the pivotals appear along every sampled path in the listed
/// order and orientation.
pub fn order_consistent(list: &PivotalList, paths: &[Vec<(VertexId, EdgeId)>]) -> bool {
    paths.iter().all(|path| {
        let mut prev = list.source;
        let mut seen = Vec::new();
        for &(x, e) in path {
            if let Some(p) = list.edges.iter().find(|p| p.id == e) {
                if p.tail != prev || p.head != x {
                    return false;
                }
                seen.push(e);
            }
            prev = x;
        }
        seen == list.edges.iter().map(|e| e.id).collect::<Vec<_>>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Graph;
    use std::sync::Arc;

    #[test]
    fn path_graph_all_pivotal() {
        let g = Arc::new(Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]));
        let c = Configuration::all_open(g, 0.5);
        let p = open_pivotals(&c, 0, 3).unwrap();
        assert_eq!(p.tails(), vec![0, 1, 2]);
        assert_eq!(p, open_pivotals_definitional(&c, 0, 3).unwrap());
        let back = open_pivotals(&c, 3, 0).unwrap();
        assert_eq!(back.tails(), vec![3, 2, 1]);
    }

    #[test]
    fn cycle_has_none() {
        let g = Arc::new(Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        let c = Configuration::all_open(g, 0.5);
        assert!(open_pivotals(&c, 0, 2).unwrap().edges.is_empty());
    }

    #[test]
    fn parallel_edges_are_not_bridges() {
        let g = Arc::new(Graph::from_pairs(3, &[(0, 1), (0, 1), (1, 2)]));
        let c = Configuration::all_open(g, 0.5);
        let p = open_pivotals(&c, 0, 2).unwrap();
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.edges[0].id, 2);
    }

    #[test]
    fn disconnected_is_an_error() {
        let g = Arc::new(Graph::from_pairs(2, &[(0, 1)]));
        let c = Configuration::all_closed(g, 0.5);
        assert!(matches!(open_pivotals(&c, 0, 1), Err(Error::NotConnected(_))));
    }

    #[test]
    fn shared_bridge_is_both_extremes() {
        // cycle 0-1-2-3 around u=0, bridge (2,4), then branches to 5 and 6
        let g = Arc::new(Graph::from_pairs(
            7,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (4, 6), (5, 6)],
        ));
        let c = Configuration::all_open(g, 0.5);
        let (lo, hi) = common_pivotal_extremes(&c, 0, &[5, 6]).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo.map(|e| (e.tail, e.head)), Some((2, 4)));
    }
}
