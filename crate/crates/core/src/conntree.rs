//! The connectivity tree of a configuration with marked vertices x_0..x_k.
//!
//! For each i ≥ 1, B_i lists the tails of the open pivotals of x_i ↔ x_0,
//! each tail being the endpoint met first when walking from x_i, in the
//! order met. Branch points m_ij are the first element of B_i lying in B_j
//! (x_0 when there is none); the tree joins every vertex to the first later
//! tree vertex on its own pivotal sequence towards x_0.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{clusters, Configuration, Graph, VertexId};
use crate::pivotals::{open_bridges, open_pivotals_with};
use crate::trees::AbstractTree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnTree {
    /// x_0..x_k, as given.
    pub marked: Vec<VertexId>,
    /// Distinct tree vertices: marked ones first, then branch points.
    pub vertices: Vec<VertexId>,
    /// Parent of every vertex except the root.
    pub parent: BTreeMap<VertexId, VertexId>,
    pub root: VertexId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegenerateReason {
    MarkedNotLeaf,
    IndegreeGe3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeClassification {
    Binary(AbstractTree),
    Degenerate(DegenerateReason),
}

impl TreeClassification {
    pub fn binary(&self) -> Option<&AbstractTree> {
        match self {
            TreeClassification::Binary(t) => Some(t),
            TreeClassification::Degenerate(_) => None,
        }
    }
}

impl ConnTree {
    pub fn children(&self, v: VertexId) -> Vec<VertexId> {
        self.parent.iter().filter(|&(_, &p)| p == v).map(|(&c, _)| c).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.parent.len()
    }

    /// Edge count is vertex count − 1 and every parent chain ends at the root.
    pub fn is_tree(&self) -> bool {
        if self.num_edges() + 1 != self.vertices.len() || self.parent.contains_key(&self.root) {
            return false;
        }
        self.vertices.iter().all(|&v| {
            let mut x = v;
            for _ in 0..=self.vertices.len() {
                if x == self.root {
                    return true;
                }
                match self.parent.get(&x) {
                    Some(&p) => x = p,
                    None => return false,
                }
            }
            false
        })
    }

    /// Vertices strictly below `v` (its descendants).
    pub fn descendants(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = self.children(v);
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children(x));
        }
        out
    }

    pub fn to_json(&self, graph: &Graph) -> serde_json::Value {
        let pt = |v: VertexId| graph.point(v).0.clone();
        serde_json::json!({
            "root": pt(self.root),
            "marked": self.marked.iter().map(|&v| pt(v)).collect::<Vec<_>>(),
            "vertices": self.vertices.iter().map(|&v| pt(v)).collect::<Vec<_>>(),
            "parent": self.parent.iter().map(|(&c, &p)| serde_json::json!([pt(c), pt(p)])).collect::<Vec<_>>(),
            "labels": self.vertices.iter().map(|v| self.marked.iter().position(|m| m == v)).collect::<Vec<_>>(),
        })
    }
}

/// B(v): pivotal tails of v ↔ x_0, walking from v.
fn tails_to_root(config: &Configuration, bridges: &[bool], v: VertexId, root: VertexId) -> Result<Vec<VertexId>> {
    Ok(open_pivotals_with(config, v, root, bridges)?.iter().map(|e| e.tail).collect())
}

pub fn build_connectivity_tree(config: &Configuration, marked: &[VertexId]) -> Result<ConnTree> {
    if marked.len() < 2 {
        return Err(Error::Domain("need at least two marked vertices".into()));
    }
    let g = config.graph();
    let x0 = marked[0];
    let part = clusters(config);
    if let Some(&bad) = marked.iter().find(|&&x| !part.same(x, x0)) {
        return Err(Error::NotConnected(format!("{} and {}", g.point(x0), g.point(bad))));
    }
    let bridges = open_bridges(config);
    let b: Vec<Vec<VertexId>> = marked
        .iter()
        .map(|&x| tails_to_root(config, &bridges, x, x0))
        .collect::<Result<_>>()?;

    let mut vertices: Vec<VertexId> = Vec::new();
    for &x in marked {
        if !vertices.contains(&x) {
            vertices.push(x);
        }
    }
    for i in 1..marked.len() {
        for j in i + 1..marked.len() {
            let m = b[i].iter().copied().find(|t| b[j].contains(t)).unwrap_or(x0);
            if !vertices.contains(&m) {
                vertices.push(m);
            }
        }
    }
    let mut parent = BTreeMap::new();
    for &v in &vertices {
        if v == x0 {
            continue;
        }
        let bv = tails_to_root(config, &bridges, v, x0)?;
        let p = bv
            .into_iter()
            .find(|&w| w != v && vertices.contains(&w))
            .unwrap_or(x0);
        parent.insert(v, p);
    }
    Ok(ConnTree {
        marked: marked.to_vec(),
        vertices,
        parent,
        root: x0,
    })
}

/// Binary (an element of 𝔗_{k+1}, leaf i ↔ x_i) or degenerate.
pub fn classify_tree(tree: &ConnTree) -> TreeClassification {
    let k1 = tree.marked.len();
    let distinct = tree.marked.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct != k1 {
        return TreeClassification::Degenerate(DegenerateReason::MarkedNotLeaf);
    }
    let nchildren = |v: VertexId| tree.parent.values().filter(|&&p| p == v).count();
    if nchildren(tree.root) != 1 || tree.marked[1..].iter().any(|&x| nchildren(x) != 0) {
        return TreeClassification::Degenerate(DegenerateReason::MarkedNotLeaf);
    }
    let inner: Vec<VertexId> = tree.vertices.iter().copied().filter(|v| !tree.marked.contains(v)).collect();
    if inner.iter().any(|&v| nchildren(v) >= 3) {
        return TreeClassification::Degenerate(DegenerateReason::IndegreeGe3);
    }
    // every inner vertex is some m_ij and so receives both the x_i and the
    // x_j branch; a single child cannot occur once the checks above pass
    debug_assert!(inner.iter().all(|&v| nchildren(v) == 2));
    let id = |v: VertexId| match tree.marked.iter().position(|&m| m == v) {
        Some(i) => i,
        None => k1 + inner.iter().position(|&w| w == v).expect("inner vertex"),
    };
    let edges = tree.parent.iter().map(|(&c, &p)| (id(c), id(p))).collect();
    if k1 == 2 {
        return TreeClassification::Binary(AbstractTree::pair());
    }
    match AbstractTree::from_edges(k1, edges) {
        Ok(t) => TreeClassification::Binary(t),
        // unreachable for trees produced by build_connectivity_tree
        Err(_) => TreeClassification::Degenerate(DegenerateReason::IndegreeGe3),
    }
}

/// Brute-force construction from the definitional pivotal sets; used to
/// cross-check [`build_connectivity_tree`].
pub fn build_connectivity_tree_definitional(config: &Configuration, marked: &[VertexId]) -> Result<ConnTree> {
    use crate::pivotals::open_pivotals_definitional;
    let x0 = marked[0];
    let b: Vec<Vec<VertexId>> = marked
        .iter()
        .map(|&x| open_pivotals_definitional(config, x, x0).map(|l| l.tails()))
        .collect::<Result<_>>()?;
    let mut vertices: Vec<VertexId> = Vec::new();
    for &x in marked {
        if !vertices.contains(&x) {
            vertices.push(x);
        }
    }
    for i in 1..marked.len() {
        for j in i + 1..marked.len() {
            let common: Vec<VertexId> = b[i].iter().copied().filter(|t| b[j].contains(t)).collect();
            let m = common.first().copied().unwrap_or(x0);
            if !vertices.contains(&m) {
                vertices.push(m);
            }
        }
    }
    let mut parent = BTreeMap::new();
    for &v in &vertices {
        if v != x0 {
            let bv = open_pivotals_definitional(config, v, x0)?.tails();
            let p = bv.into_iter().find(|&w| w != v && vertices.contains(&w)).unwrap_or(x0);
            parent.insert(v, p);
        }
    }
    Ok(ConnTree {
        marked: marked.to_vec(),
        vertices,
        parent,
        root: x0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn two_points_give_one_edge() {
        let g = Arc::new(Graph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]));
        let c = Configuration::all_open(g, 0.5);
        let t = build_connectivity_tree(&c, &[0, 2]).unwrap();
        assert_eq!(t.parent.get(&2), Some(&0));
        assert!(t.is_tree());
        assert_eq!(classify_tree(&t), TreeClassification::Binary(AbstractTree::pair()));
    }

    #[test]
    fn y_junction() {
        // arms 1-2-j, 3-4-j, 5-6-j from x0=1, x1=3, x2=5 to junction j=0
        let g = Arc::new(Graph::from_pairs(7, &[(1, 2), (2, 0), (3, 4), (4, 0), (5, 6), (6, 0)]));
        let c = Configuration::all_open(g, 0.5);
        let t = build_connectivity_tree(&c, &[1, 3, 5]).unwrap();
        assert_eq!(t.vertices, vec![1, 3, 5, 0]);
        assert_eq!(t.parent[&3], 0);
        assert_eq!(t.parent[&5], 0);
        assert_eq!(t.parent[&0], 1);
        assert_eq!(classify_tree(&t), TreeClassification::Binary(AbstractTree::star3()));
    }

    #[test]
    fn disjoint_branches_meet_at_root() {
        // x0=0 on a cycle 0-1-2-3; x1 hangs from 1, x2 hangs from 3
        let g = Arc::new(Graph::from_pairs(6, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 4), (3, 5)]));
        let c = Configuration::all_open(g, 0.5);
        let t = build_connectivity_tree(&c, &[0, 4, 5]).unwrap();
        assert_eq!(t.parent[&4], 0);
        assert_eq!(t.parent[&5], 0);
        assert_eq!(classify_tree(&t), TreeClassification::Degenerate(DegenerateReason::MarkedNotLeaf));
    }

    #[test]
    fn marked_on_the_way() {
        // path x0=0 - x1=1 - x2=2: x1 is a pivotal tail for x2
        let g = Arc::new(Graph::from_pairs(3, &[(0, 1), (1, 2)]));
        let c = Configuration::all_open(g, 0.5);
        let t = build_connectivity_tree(&c, &[0, 1, 2]).unwrap();
        assert_eq!(classify_tree(&t), TreeClassification::Degenerate(DegenerateReason::MarkedNotLeaf));
    }

    #[test]
    fn three_arm_star_is_degenerate() {
        // x0=1 → j=0; x1, x2, x3 each hang from j by a bridge
        let g = Arc::new(Graph::from_pairs(5, &[(1, 0), (2, 0), (3, 0), (4, 0)]));
        let c = Configuration::all_open(g, 0.5);
        let t = build_connectivity_tree(&c, &[1, 2, 3, 4]).unwrap();
        assert_eq!(classify_tree(&t), TreeClassification::Degenerate(DegenerateReason::IndegreeGe3));
    }
}
