//! Binary branching trees with labelled leaves (the family 𝔗_k).
//!
//! A tree in 𝔗_k has leaves `0..k` and `k - 2` unlabelled internal vertices
//! of degree three; it is oriented towards leaf 0. Nodes `0..k` are the
//! leaves and `k..2k-2` the internal vertices. Trees are kept in canonical
//! form, so structural equality is tree equality.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractTree {
    k: usize,
    edges: Vec<(usize, usize)>,
}

/// The reduction site of a tree: leaves `i > j` hanging from internal `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cherry {
    pub i: usize,
    pub j: usize,
    pub v: usize,
}

/// Result of removing a cherry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub tree: AbstractTree,
    /// New label of each old leaf; `None` for the removed pair.
    pub label_map: Vec<Option<usize>>,
    /// Label given to the former internal vertex.
    pub v_label: usize,
}

impl AbstractTree {
    /// Builds and canonicalises a tree from raw edges, checking invariants.
    pub fn from_edges(k: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let t = AbstractTree { k, edges };
        t.validate()?;
        Ok(t.canonical())
    }

    /// The single tree in 𝔗_2: one edge between the two leaves.
    pub fn pair() -> Self {
        AbstractTree { k: 2, edges: vec![(0, 1)] }
    }

    /// The star in 𝔗_3.
    pub fn star3() -> Self {
        AbstractTree::from_edges(3, vec![(0, 3), (1, 3), (2, 3)]).expect("star is valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.k - 2
    }

    pub fn num_internal(&self) -> usize {
        self.k - 2
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.k
    }

    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.k..self.num_nodes()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Parent of each node when oriented towards leaf 0 (`None` for leaf 0).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut parent = vec![None; self.num_nodes()];
        let mut seen = vec![false; self.num_nodes()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    stack.push(y);
                }
            }
        }
        parent
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.num_nodes()];
        for (x, p) in self.parents().into_iter().enumerate() {
            if let Some(p) = p {
                ch[p].push(x);
            }
        }
        ch
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k < 2 {
            return Err(Error::Domain(format!("a tree needs at least 2 leaves, got {k}")));
        }
        let n = self.num_nodes();
        if self.edges.len() != 2 * k - 3 {
            return Err(Error::Domain(format!("expected {} edges, got {}", 2 * k - 3, self.edges.len())));
        }
        if self.edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return Err(Error::Domain("edge endpoint out of range".into()));
        }
        let adj = self.adjacency();
        for (x, nb) in adj.iter().enumerate() {
            let want = if x < k { 1 } else { 3 };
            if nb.len() != want {
                return Err(Error::Domain(format!("node {x} has degree {} (want {want})", nb.len())));
            }
        }
        if self.parents().iter().skip(1).any(|p| p.is_none()) {
            return Err(Error::Domain("tree is not connected".into()));
        }
        Ok(())
    }

    fn subtree_string(&self, adj: &[Vec<usize>], x: usize, from: usize) -> String {
        if self.is_leaf(x) {
            return x.to_string();
        }
        let mut parts: Vec<String> = adj[x]
            .iter()
            .filter(|&&y| y != from)
            .map(|&y| self.subtree_string(adj, y, x))
            .collect();
        parts.sort();
        format!("({})", parts.join(","))
    }

    /// Newick-style text rooted at leaf 0, e.g. `(0,(1,2),3);`.
    pub fn newick(&self) -> String {
        let adj = self.adjacency();
        let r = adj[0][0];
        if self.is_leaf(r) {
            return format!("(0,{r});");
        }
        let mut parts: Vec<String> = adj[r]
            .iter()
            .filter(|&&y| y != 0)
            .map(|&y| self.subtree_string(&adj, y, r))
            .collect();
        parts.sort();
        format!("(0,{});", parts.join(","))
    }

    /// Renumbers internal nodes in canonical traversal order and sorts edges.
    pub fn canonical(&self) -> AbstractTree {
        let adj = self.adjacency();
        let mut relabel = vec![usize::MAX; self.num_nodes()];
        for (x, r) in relabel.iter_mut().enumerate().take(self.k) {
            *r = x;
        }
        let mut next = self.k;
        // visit children in the order of their canonical strings
        let mut stack = vec![(0usize, usize::MAX)];
        while let Some((x, from)) = stack.pop() {
            if !self.is_leaf(x) {
                relabel[x] = next;
                next += 1;
            }
            let mut kids: Vec<(String, usize)> = adj[x]
                .iter()
                .filter(|&&y| y != from)
                .map(|&y| (self.subtree_string(&adj, y, x), y))
                .collect();
            kids.sort();
            for (_, y) in kids.into_iter().rev() {
                stack.push((y, x));
            }
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (relabel[a], relabel[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort();
        AbstractTree { k: self.k, edges }
    }

    /// Parses the text produced by [`AbstractTree::newick`] (any child order).
    pub fn parse_newick(text: &str) -> Result<AbstractTree> {
        let s: Vec<char> = text.trim().trim_end_matches(';').chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let mut leaves: Vec<usize> = Vec::new();
        let mut internal = 0usize;
        let mut raw: Vec<(Node, Node)> = Vec::new();

        #[derive(Clone, Copy)]
        enum Node {
            Leaf(usize),
            Int(usize),
        }

        fn item(
            s: &[char],
            pos: &mut usize,
            leaves: &mut Vec<usize>,
            internal: &mut usize,
            raw: &mut Vec<(Node, Node)>,
        ) -> Result<Node> {
            let bad = |m: &str| Error::Domain(format!("newick: {m}"));
            if *pos >= s.len() {
                return Err(bad("unexpected end"));
            }
            if s[*pos] == '(' {
                *pos += 1;
                let me = Node::Int(*internal);
                *internal += 1;
                loop {
                    let child = item(s, pos, leaves, internal, raw)?;
                    raw.push((me, child));
                    match s.get(*pos) {
                        Some(',') => *pos += 1,
                        Some(')') => {
                            *pos += 1;
                            break;
                        }
                        _ => return Err(bad("expected `,` or `)`")),
                    }
                }
                Ok(me)
            } else {
                let start = *pos;
                while *pos < s.len() && s[*pos].is_ascii_digit() {
                    *pos += 1;
                }
                if start == *pos {
                    return Err(bad("expected a leaf label"));
                }
                let label: String = s[start..*pos].iter().collect();
                let l = label.parse().map_err(|_| bad("bad label"))?;
                leaves.push(l);
                Ok(Node::Leaf(l))
            }
        }

        let top = item(&s, &mut pos, &mut leaves, &mut internal, &mut raw)?;
        if pos != s.len() {
            return Err(Error::Domain("newick: trailing characters".into()));
        }
        let k = leaves.len();
        let sorted: BTreeSet<usize> = leaves.iter().copied().collect();
        if sorted.len() != k || sorted.iter().next_back() != Some(&(k - 1)) {
            return Err(Error::Domain("newick: leaf labels must be 0..k, each once".into()));
        }
        // a top-level pair "(0,1)" is the two-leaf tree; otherwise the outer
        // group is an ordinary internal vertex
        let top_children = raw.iter().filter(|(a, _)| matches!((a, top), (Node::Int(x), Node::Int(y)) if *x == y)).count();
        if k == 2 && top_children == 2 {
            return Ok(AbstractTree::pair());
        }
        let idx = |n: Node| match n {
            Node::Leaf(l) => l,
            Node::Int(j) => k + j,
        };
        let edges = raw.into_iter().map(|(a, b)| (idx(a), idx(b))).collect();
        AbstractTree::from_edges(k, edges)
    }

    /// The reduction site: over internal vertices whose two children are both
    /// leaves, the one holding the largest leaf label `i`; `j` is its partner.
    pub fn select_ijv(&self) -> Result<Cherry> {
        if self.k < 3 {
            return Err(Error::Domain("cherry selection needs k >= 3".into()));
        }
        let children = self.children();
        let mut best: Option<Cherry> = None;
        for v in self.internal_nodes() {
            let ch = &children[v];
            if ch.len() == 2 && ch.iter().all(|&c| self.is_leaf(c)) {
                let (i, j) = (ch[0].max(ch[1]), ch[0].min(ch[1]));
                let better = match best {
                    None => true,
                    Some(b) => i > b.i || (i == b.i && j > b.j),
                };
                if better {
                    best = Some(Cherry { i, j, v });
                }
            }
        }
        best.ok_or_else(|| Error::Domain("tree has no cherry".into()))
    }

    /// The reduction φ: delete leaves I, J and relabel. Public form follows
    /// the convention that φ is defined on 𝔗_k for k >= 4.
    pub fn phi_reduce(&self) -> Result<Reduction> {
        if self.k < 4 {
            return Err(Error::Domain(format!(
                "reduction is defined for k >= 4 leaves; k = {} is the base case",
                self.k
            )));
        }
        self.reduce_any()
    }

    /// φ for any k >= 3; on 𝔗_3 it yields the two-leaf tree.
    pub fn reduce_any(&self) -> Result<Reduction> {
        let c = self.select_ijv()?;
        let k = self.k;
        let nk = k - 1;
        let mut label_map = vec![None; k];
        let mut next = 0;
        for (l, slot) in label_map.iter_mut().enumerate() {
            if l != c.i && l != c.j {
                *slot = Some(next);
                next += 1;
            }
        }
        let v_label = nk - 1;
        // internal nodes other than v, renumbered from nk
        let mut node_map = vec![usize::MAX; self.num_nodes()];
        for l in 0..k {
            if let Some(n) = label_map[l] {
                node_map[l] = n;
            }
        }
        node_map[c.v] = v_label;
        let mut nxt = nk;
        for x in self.internal_nodes() {
            if x != c.v {
                node_map[x] = nxt;
                nxt += 1;
            }
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(a, b)| !(a == c.i || b == c.i || a == c.j || b == c.j))
            .map(|&(a, b)| (node_map[a], node_map[b]))
            .collect();
        let tree = if nk == 2 { AbstractTree::pair() } else { AbstractTree::from_edges(nk, edges)? };
        Ok(Reduction { tree, label_map, v_label })
    }
}

impl fmt::Display for AbstractTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.newick())
    }
}

impl Serialize for AbstractTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("AbstractTree", 4)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("newick", &self.newick())?;
        st.serialize_field("edges", &self.edges)?;
        st.serialize_field("internal", &self.num_internal())?;
        st.end()
    }
}

/// (2k-5)!! = |𝔗_k|.
pub fn tree_count(k: usize) -> u64 {
    (1..=(2 * k as u64).saturating_sub(5)).step_by(2).product()
}

/// All of 𝔗_k, each once, sorted by canonical text.
pub fn enumerate_trees(k: usize) -> Result<Vec<AbstractTree>> {
    if k < 3 {
        return Err(Error::Domain(format!("𝔗_k needs k >= 3, got {k}")));
    }
    // grow by inserting leaf m into every edge of every tree on leaves 0..m
    #[derive(Clone, Copy, PartialEq, Eq)]
    enum N {
        L(usize),
        I(usize),
    }
    let mut level: Vec<(Vec<(N, N)>, usize)> = vec![(vec![(N::L(0), N::I(0)), (N::L(1), N::I(0)), (N::L(2), N::I(0))], 1)];
    for m in 3..k {
        let mut next = Vec::with_capacity(level.len() * (2 * m - 3));
        for (edges, internal) in &level {
            for idx in 0..edges.len() {
                let (a, b) = edges[idx];
                let w = N::I(*internal);
                let mut e = edges.clone();
                e[idx] = (a, w);
                e.push((w, b));
                e.push((N::L(m), w));
                next.push((e, internal + 1));
            }
        }
        level = next;
    }
    let mut set = BTreeSet::new();
    for (edges, _) in level {
        let idx = |n: N| match n {
            N::L(l) => l,
            N::I(j) => k + j,
        };
        let t = AbstractTree::from_edges(k, edges.into_iter().map(|(a, b)| (idx(a), idx(b))).collect())?;
        set.insert((t.newick(), t));
    }
    Ok(set.into_iter().map(|(_, t)| t).collect())
}
