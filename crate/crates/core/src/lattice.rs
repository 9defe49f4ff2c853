//! Finite graphs, boxes of Z^d, and bond configurations on them.
//!
//! Vertices carry integer coordinates. Small hand-built graphs simply use
//! one-dimensional "coordinates" as labels. Boundary conditions are free.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Largest edge count accepted by exhaustive enumeration.
pub const MAX_ENUMERATION_EDGES: usize = 24;
/// Largest number of simultaneous demands for disjoint occurrence.
pub const MAX_DISJOINT_DEMANDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn origin(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    /// `s` times the i-th unit vector.
    pub fn axis(d: usize, i: usize, s: i64) -> Self {
        let mut c = vec![0; d];
        c[i] = s;
        LatticePoint(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn sup_dist(&self, other: &LatticePoint) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn l1_dist(&self, other: &LatticePoint) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for LatticePoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| format!("expected a parenthesised tuple, got `{t}`"))?;
        let coords = inner
            .split(',')
            .map(|c| c.trim().parse::<i64>().map_err(|e| format!("bad coordinate `{c}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if coords.is_empty() {
            return Err("empty tuple".into());
        }
        Ok(LatticePoint(coords))
    }
}

/// B(center; radius) in the sup norm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub center: LatticePoint,
    pub radius: i64,
}

impl LatticeBox {
    pub fn new(center: LatticePoint, radius: i64) -> Self {
        LatticeBox { center, radius }
    }

    pub fn centered(d: usize, radius: i64) -> Self {
        LatticeBox::new(LatticePoint::origin(d), radius)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &LatticePoint) -> bool {
        x.dim() == self.dim() && self.center.sup_dist(x) <= self.radius
    }

    pub fn volume(&self) -> u128 {
        (2 * self.radius as u128 + 1).pow(self.dim() as u32)
    }

    /// All points, in lexicographic order.
    pub fn points(&self) -> Vec<LatticePoint> {
        let d = self.dim();
        let side = 2 * self.radius + 1;
        let n = self.volume() as usize;
        let mut out = Vec::with_capacity(n);
        let mut offs = vec![0i64; d];
        for _ in 0..n {
            out.push(LatticePoint(
                (0..d).map(|i| self.center.0[i] - self.radius + offs[i]).collect(),
            ));
            for i in (0..d).rev() {
                offs[i] += 1;
                if offs[i] < side {
                    break;
                }
                offs[i] = 0;
            }
        }
        out
    }
}

/// A directed view of an undirected edge: `tail` is e̲, `head` is ē.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
}

impl DirectedEdge {
    pub fn reversed(&self) -> DirectedEdge {
        DirectedEdge {
            id: self.id,
            tail: self.head,
            head: self.tail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    dim: usize,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, VertexId>,
    edges: Vec<(VertexId, VertexId)>,
    adj: Vec<Vec<(VertexId, EdgeId)>>,
}

impl Graph {
    pub fn new(dim: usize) -> Self {
        Graph {
            dim,
            points: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
            adj: Vec::new(),
        }
    }

    /// Adds a vertex, or returns the existing id for that point.
    pub fn add_vertex(&mut self, p: LatticePoint) -> VertexId {
        if let Some(&v) = self.index.get(&p) {
            return v;
        }
        let v = self.points.len();
        self.index.insert(p.clone(), v);
        self.points.push(p);
        self.adj.push(Vec::new());
        v
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> EdgeId {
        let e = self.edges.len();
        self.edges.push((u, v));
        self.adj[u].push((v, e));
        self.adj[v].push((u, e));
        e
    }

    /// Graph on vertices `0..n` (labelled by 1-d points) with the given edges.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(1);
        for i in 0..n {
            g.add_vertex(LatticePoint(vec![i as i64]));
        }
        for &(a, b) in pairs {
            assert!(a < n && b < n && a != b, "bad edge ({a},{b})");
            g.add_edge(a, b);
        }
        g
    }

    /// Graph whose vertices are lattice points and edges the given pairs.
    pub fn from_point_pairs(dim: usize, pairs: &[(LatticePoint, LatticePoint)]) -> Result<Self> {
        let mut g = Graph::new(dim);
        for (a, b) in pairs {
            if a.dim() != dim || b.dim() != dim {
                return Err(Error::Domain(format!("point {a} or {b} is not {dim}-dimensional")));
            }
            if a == b {
                return Err(Error::Domain(format!("self-loop at {a}")));
            }
            let u = g.add_vertex(a.clone());
            let v = g.add_vertex(b.clone());
            g.add_edge(u, v);
        }
        Ok(g)
    }

    /// Nearest-neighbour graph of a box.
    pub fn lattice_box(b: &LatticeBox) -> Self {
        let d = b.dim();
        let mut g = Graph::new(d);
        for p in b.points() {
            g.add_vertex(p);
        }
        for v in 0..g.points.len() {
            for i in 0..d {
                let mut q = g.points[v].clone();
                q.0[i] += 1;
                if let Some(&w) = g.index.get(&q) {
                    g.add_edge(v, w);
                }
            }
        }
        g
    }

    /// Parses `u v` pairs, one per line; `#` starts a comment.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut dim = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: ln + 1, msg };
            let close = line.find(')').ok_or_else(|| err("missing `)`".into()))?;
            let a: LatticePoint = line[..=close].parse().map_err(err)?;
            let b: LatticePoint = line[close + 1..].parse().map_err(err)?;
            let d = *dim.get_or_insert(a.dim());
            if a.dim() != d || b.dim() != d {
                return Err(err(format!("expected {d} coordinates")));
            }
            if a == b {
                return Err(err("self-loop".into()));
            }
            pairs.push((a, b));
        }
        let d = dim.ok_or(Error::Parse {
            line: 0,
            msg: "no edges".into(),
        })?;
        Graph::from_point_pairs(d, &pairs)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for &(u, v) in &self.edges {
            s.push_str(&format!("{} {}\n", self.points[u], self.points[v]));
        }
        s
    }

    /// SHA-256 of the canonical edge-list text.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_edge_list().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn point(&self, v: VertexId) -> &LatticePoint {
        &self.points[v]
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn vertex(&self, p: &LatticePoint) -> Result<VertexId> {
        self.index
            .get(p)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(p.to_string()))
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adj[v]
    }

    /// Orient edge `e` so that it leaves `tail`.
    pub fn directed(&self, e: EdgeId, tail: VertexId) -> DirectedEdge {
        let (a, b) = self.edges[e];
        let head = if a == tail { b } else { a };
        DirectedEdge { id: e, tail, head }
    }

    /// Both orientations of every edge.
    pub fn directed_edges(&self) -> Vec<DirectedEdge> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            out.push(DirectedEdge { id: e, tail: a, head: b });
            out.push(DirectedEdge { id: e, tail: b, head: a });
        }
        out
    }
}

/// Vertex subset of a fixed graph, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    mask: Vec<bool>,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        VertexSet { mask: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        VertexSet { mask: vec![true; n] }
    }

    pub fn from_vertices(n: usize, vs: impl IntoIterator<Item = VertexId>) -> Self {
        let mut s = VertexSet::empty(n);
        for v in vs {
            s.mask[v] = true;
        }
        s
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        VertexSet { mask }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.mask[v]
    }

    pub fn insert(&mut self, v: VertexId) {
        self.mask[v] = true;
    }

    pub fn remove(&mut self, v: VertexId) {
        self.mask[v] = false;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn as_mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Open/closed status of every undirected edge of a graph.
#[derive(Clone, Debug)]
pub struct Configuration {
    graph: Arc<Graph>,
    open: Vec<bool>,
    p: f64,
}

impl Configuration {
    pub fn new(graph: Arc<Graph>, open: Vec<bool>, p: f64) -> Self {
        assert_eq!(open.len(), graph.num_edges());
        Configuration { graph, open, p }
    }

    pub fn all_closed(graph: Arc<Graph>, p: f64) -> Self {
        let m = graph.num_edges();
        Configuration::new(graph, vec![false; m], p)
    }

    pub fn all_open(graph: Arc<Graph>, p: f64) -> Self {
        let m = graph.num_edges();
        Configuration::new(graph, vec![true; m], p)
    }

    /// Bit `e` of `mask` is the status of edge `e`.
    pub fn from_mask(graph: Arc<Graph>, mask: u64, p: f64) -> Self {
        let open = (0..graph.num_edges()).map(|e| mask >> e & 1 == 1).collect();
        Configuration { graph, open, p }
    }

    pub fn set_mask(&mut self, mask: u64) {
        for (e, o) in self.open.iter_mut().enumerate() {
            *o = mask >> e & 1 == 1;
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_open(&self, e: EdgeId) -> bool {
        self.open[e]
    }

    pub fn set(&mut self, e: EdgeId, open: bool) {
        self.open[e] = open;
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&b| b).count()
    }

    pub fn statuses(&self) -> &[bool] {
        &self.open
    }

    /// Product-measure weight p^open (1-p)^closed.
    pub fn weight(&self) -> f64 {
        let k = self.open_count() as i32;
        let m = self.open.len() as i32;
        self.p.powi(k) * (1.0 - self.p).powi(m - k)
    }

    /// Bit-string export: a JSON header line followed by one `0`/`1` per edge.
    pub fn export(&self, seed: Option<u64>) -> String {
        let header = serde_json::json!({
            "schema": 1,
            "graph_hash": self.graph.hash_hex(),
            "edges": self.open.len(),
            "p": self.p,
            "seed": seed,
        });
        let bits: String = self.open.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("{header}\n{bits}\n")
    }

    /// Inverse of [`Configuration::export`]; checks the graph hash.
    pub fn import(graph: Arc<Graph>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: serde_json::Value = lines
            .next()
            .and_then(|l| serde_json::from_str(l).ok())
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing JSON header".into(),
            })?;
        if header["graph_hash"].as_str() != Some(graph.hash_hex().as_str()) {
            return Err(Error::Parse {
                line: 1,
                msg: "graph hash mismatch".into(),
            });
        }
        let p = header["p"].as_f64().unwrap_or(f64::NAN);
        let bits = lines.next().unwrap_or("").trim();
        if bits.len() != graph.num_edges() || bits.chars().any(|c| c != '0' && c != '1') {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected {} status bits", graph.num_edges()),
            });
        }
        let open = bits.chars().map(|c| c == '1').collect();
        Ok(Configuration::new(graph, open, p))
    }
}

pub fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("p = {p} is not in [0, 1]")))
    }
}

/// β = p / (1 − p), the cost of opening one closed edge.
pub fn beta(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Independent bond percolation with parameter `p`, driven by stream 0 of `seed`.
pub fn sample_configuration(graph: Arc<Graph>, p: f64, seed: u64) -> Result<Configuration> {
    check_probability(p)?;
    let mut r = rng::stream(seed, 0);
    let open = (0..graph.num_edges()).map(|_| r.random::<f64>() < p).collect();
    Ok(Configuration::new(graph, open, p))
}

pub fn check_enumerable(graph: &Graph, what: &'static str, limit: usize) -> Result<()> {
    if graph.num_edges() > limit {
        Err(Error::TooManyEdges {
            what,
            edges: graph.num_edges(),
            limit,
        })
    } else {
        Ok(())
    }
}

/// All 2^|E| configurations with their product-measure weights.
pub fn enumerate_configurations(
    graph: Arc<Graph>,
    p: f64,
) -> Result<impl Iterator<Item = (Configuration, f64)>> {
    check_probability(p)?;
    check_enumerable(&graph, "enumeration", MAX_ENUMERATION_EDGES)?;
    let m = graph.num_edges();
    Ok((0..1u64 << m).map(move |mask| {
        let c = Configuration::from_mask(graph.clone(), mask, p);
        let w = c.weight();
        (c, w)
    }))
}

/// Weight polynomial Σ_j h[j] p^j (1-p)^(m-j) of an open-count histogram.
pub fn polynomial_weight(hist: &[f64], p: f64) -> f64 {
    let m = hist.len() - 1;
    let mut s = crate::stats::KahanSum::new();
    for (j, &h) in hist.iter().enumerate() {
        if h != 0.0 {
            s.add(h * p.powi(j as i32) * (1.0 - p).powi((m - j) as i32));
        }
    }
    s.value()
}

/// Exhaustive pass over all configurations, in parallel.
///
/// `visit(config, acc)` is called once per configuration with a per-worker
/// accumulator created by `init`; accumulators are then combined with
/// `merge`. Accumulators that bin by open count make one pass serve every p.
pub fn enumerate_fold<A, I, V, M>(
    graph: &Arc<Graph>,
    limit: usize,
    what: &'static str,
    init: I,
    visit: V,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&Configuration, &mut A) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    check_enumerable(graph, what, limit)?;
    let m = graph.num_edges();
    let total = 1u64 << m;
    let chunk = (total / 256).max(1);
    let chunks: Vec<u64> = (0..total.div_ceil(chunk)).collect();
    let parts: Vec<A> = chunks
        .par_iter()
        .map(|&c| {
            let mut acc = init();
            let mut cfg = Configuration::all_closed(graph.clone(), f64::NAN);
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(total);
            for mask in lo..hi {
                cfg.set_mask(mask);
                visit(&cfg, &mut acc);
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().fold(init(), merge))
}

/// Adds `x` into bin `j` of a histogram, elementwise-merged later.
pub fn merge_histograms(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Cluster id of each vertex; ids are numbered by first appearance.
    pub representative: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl ClusterPartition {
    pub fn same(&self, x: VertexId, y: VertexId) -> bool {
        self.representative[x] == self.representative[y]
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn members(&self, id: usize) -> Vec<VertexId> {
        (0..self.representative.len())
            .filter(|&v| self.representative[v] == id)
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Open clusters via union-find.
pub fn clusters(config: &Configuration) -> ClusterPartition {
    let g = config.graph();
    let n = g.num_vertices();
    let mut uf = UnionFind::new(n);
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if config.is_open(e) {
            uf.union(a, b);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut representative = vec![0; n];
    let mut sizes = Vec::new();
    for v in 0..n {
        let r = uf.find(v);
        if ids[r] == usize::MAX {
            ids[r] = sizes.len();
            sizes.push(0);
        }
        representative[v] = ids[r];
        sizes[ids[r]] += 1;
    }
    ClusterPartition {
        representative,
        sizes,
    }
}

/// Vertices reachable from `sources` along open edges, staying inside the
/// vertices accepted by `vertex_ok` and using only edges accepted by `edge_ok`.
/// Sources outside the allowed set are ignored.
pub fn reach_filtered(
    config: &Configuration,
    sources: &[VertexId],
    vertex_ok: impl Fn(VertexId) -> bool,
    edge_ok: impl Fn(EdgeId) -> bool,
) -> Vec<bool> {
    let g = config.graph();
    let mut seen = vec![false; g.num_vertices()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if vertex_ok(s) && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &(w, e) in g.neighbors(v) {
            if !seen[w] && config.is_open(e) && edge_ok(e) && vertex_ok(w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Open cluster of `x` restricted to `region` (𝔠_A(x)); empty if x ∉ A.
pub fn cluster_of(config: &Configuration, x: VertexId, region: Option<&VertexSet>) -> VertexSet {
    VertexSet::from_mask(reach_filtered(
        config,
        &[x],
        |v| region.is_none_or(|r| r.contains(v)),
        |_| true,
    ))
}

/// x ↔ y, or x ↔^A y when a region is given (both endpoints must lie in A).
pub fn connected(
    config: &Configuration,
    x: VertexId,
    y: VertexId,
    region: Option<&VertexSet>,
) -> bool {
    if let Some(r) = region {
        if !r.contains(x) || !r.contains(y) {
            return false;
        }
    }
    if x == y {
        return true;
    }
    cluster_of(config, x, region).contains(y)
}

/// Edge-disjoint open paths from the source set to `sink` inside `region`:
/// a maximum family of at most `limit` paths in which each source starts at
/// most `per_source` of them. Paths are edge lists, each starting at a source.
pub fn edge_disjoint_paths(
    config: &Configuration,
    sources: &[VertexId],
    sink: VertexId,
    region: Option<&VertexSet>,
    limit: usize,
    per_source: usize,
) -> Vec<Vec<EdgeId>> {
    let g = config.graph();
    let n = g.num_vertices();
    let inside = |v: VertexId| region.is_none_or(|r| r.contains(v));
    if !inside(sink) {
        return Vec::new();
    }
    let mut is_source = vec![false; n];
    for &s in sources {
        if inside(s) {
            is_source[s] = true;
        }
    }
    if is_source[sink] {
        // empty paths; the demand is trivially met
        return vec![Vec::new(); limit.min(per_source)];
    }
    // flow[e] in {-1,0,1}: +1 means one unit from endpoints.0 to endpoints.1;
    // emitted[s] is the flow on the virtual arc super-source → s
    let mut flow = vec![0i8; g.num_edges()];
    let mut emitted = vec![0usize; n];
    let residual = |flow: &[i8], v: VertexId, e: EdgeId| {
        let fwd = g.endpoints(e).0 == v;
        1 - if fwd { flow[e] } else { -flow[e] }
    };
    let mut value = 0;
    while value < limit {
        // BFS from a virtual super-source whose arcs feed sources with spare
        // capacity; augmenting paths never need to return to it
        let mut pred: Vec<Option<(VertexId, EdgeId)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            if is_source[v] && emitted[v] < per_source {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            if v == sink {
                break;
            }
            for &(w, e) in g.neighbors(v) {
                if !seen[w] && config.is_open(e) && inside(w) && residual(&flow, v, e) > 0 {
                    seen[w] = true;
                    pred[w] = Some((v, e));
                    queue.push_back(w);
                }
            }
        }
        if !seen[sink] {
            break;
        }
        let mut w = sink;
        while let Some((v, e)) = pred[w] {
            if g.endpoints(e).0 == v {
                flow[e] += 1;
            } else {
                flow[e] -= 1;
            }
            w = v;
        }
        emitted[w] += 1;
        value += 1;
    }
    // decompose the flow into paths
    let mut remaining = flow;
    let mut left = emitted;
    let mut paths = Vec::with_capacity(value);
    for _ in 0..value {
        let start = (0..n).find(|&s| left[s] > 0).expect("flow leaves some source");
        left[start] -= 1;
        let mut v = start;
        let mut path = Vec::new();
        while v != sink {
            let &(w, e) = g
                .neighbors(v)
                .iter()
                .find(|&&(_, e)| {
                    let fwd = g.endpoints(e).0 == v;
                    (if fwd { remaining[e] } else { -remaining[e] }) > 0
                })
                .expect("flow conservation");
            if g.endpoints(e).0 == v {
                remaining[e] -= 1;
            } else {
                remaining[e] += 1;
            }
            path.push(e);
            v = w;
        }
        paths.push(path);
    }
    paths
}

/// x ⟺ y: two edge-disjoint open x–y paths inside the region.
/// By convention x ⟺ x holds whenever x lies in the region.
pub fn doubly_connected(
    config: &Configuration,
    x: VertexId,
    y: VertexId,
    region: Option<&VertexSet>,
) -> bool {
    if let Some(r) = region {
        if !r.contains(x) || !r.contains(y) {
            return false;
        }
    }
    edge_disjoint_paths(config, &[x], y, region, 2, 2).len() >= 2
}

/// A connection demand `source ↔ target`, optionally restricted to a region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Demand {
    pub source: VertexId,
    pub target: VertexId,
    pub region: Option<VertexSet>,
}

impl Demand {
    pub fn new(source: VertexId, target: VertexId) -> Self {
        Demand {
            source,
            target,
            region: None,
        }
    }

    pub fn within(source: VertexId, target: VertexId, region: VertexSet) -> Self {
        Demand {
            source,
            target,
            region: Some(region),
        }
    }
}

/// Edge sets (as bitmasks) of all simple open paths for a demand.
pub fn simple_open_paths(config: &Configuration, d: &Demand) -> Vec<u64> {
    let g = config.graph();
    let inside = |v: VertexId| d.region.as_ref().is_none_or(|r| r.contains(v));
    if !inside(d.source) || !inside(d.target) {
        return Vec::new();
    }
    if d.source == d.target {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; g.num_vertices()];
    fn dfs(
        g: &Graph,
        config: &Configuration,
        v: VertexId,
        target: VertexId,
        mask: u64,
        on_path: &mut [bool],
        inside: &dyn Fn(VertexId) -> bool,
        out: &mut Vec<u64>,
    ) {
        if v == target {
            out.push(mask);
            return;
        }
        on_path[v] = true;
        for &(w, e) in g.neighbors(v) {
            if config.is_open(e) && !on_path[w] && inside(w) {
                dfs(g, config, w, target, mask | 1 << e, on_path, inside, out);
            }
        }
        on_path[v] = false;
    }
    dfs(g, config, d.source, d.target, 0, &mut on_path, &inside, &mut out);
    // witnesses only need to be minimal: drop any path containing another
    out.sort_by_key(|m| m.count_ones());
    let mut minimal: Vec<u64> = Vec::new();
    for m in out {
        if !minimal.iter().any(|&k| k & m == k) {
            minimal.push(m);
        }
    }
    minimal
}

/// Disjoint occurrence A_1 ∘ … ∘ A_k of connection demands: pairwise
/// edge-disjoint open witness paths exist for all of them at once.
pub fn disjointly_occurs(config: &Configuration, demands: &[Demand]) -> Result<bool> {
    check_enumerable(config.graph(), "disjoint occurrence", 64)?;
    if demands.len() > MAX_DISJOINT_DEMANDS {
        return Err(Error::Domain(format!(
            "{} demands exceed the limit of {MAX_DISJOINT_DEMANDS}",
            demands.len()
        )));
    }
    let mut options: Vec<Vec<u64>> = Vec::with_capacity(demands.len());
    for d in demands {
        let paths = simple_open_paths(config, d);
        if paths.is_empty() {
            return Ok(false);
        }
        options.push(paths);
    }
    // most constrained demand first
    options.sort_by_key(|o| o.len());
    fn search(options: &[Vec<u64>], used: u64) -> bool {
        match options.split_first() {
            None => true,
            Some((first, rest)) => first
                .iter()
                .any(|&m| m & used == 0 && search(rest, used | m)),
        }
    }
    Ok(search(&options, 0))
}

/// Sup-norm distance of each vertex from the box centre equals the radius.
pub fn boundary_of_box(graph: &Graph, b: &LatticeBox) -> VertexSet {
    VertexSet::from_vertices(
        graph.num_vertices(),
        (0..graph.num_vertices()).filter(|&v| b.center.sup_dist(graph.point(v)) == b.radius),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(g: Graph) -> Arc<Graph> {
        Arc::new(g)
    }

    #[test]
    fn degenerate_measures() {
        let g = arc(Graph::lattice_box(&LatticeBox::centered(2, 2)));
        let c0 = sample_configuration(g.clone(), 0.0, 9).unwrap();
        assert_eq!(c0.open_count(), 0);
        let c1 = sample_configuration(g.clone(), 1.0, 9).unwrap();
        assert_eq!(c1.open_count(), g.num_edges());
        assert!(sample_configuration(g, 1.5, 0).is_err());
    }

    #[test]
    fn box_sizes() {
        let b = LatticeBox::centered(3, 2);
        let g = Graph::lattice_box(&b);
        assert_eq!(g.num_vertices(), 125);
        assert_eq!(g.num_edges(), 3 * 5 * 5 * 4);
        let sq = Graph::lattice_box(&LatticeBox::new(LatticePoint(vec![0, 0]), 0));
        assert_eq!(sq.num_edges(), 0);
    }

    #[test]
    fn enumeration_weights() {
        let g = arc(Graph::from_pairs(2, &[(0, 1)]));
        let ws: Vec<f64> = enumerate_configurations(g, 0.4).unwrap().map(|(_, w)| w).collect();
        assert!((ws[0] - 0.6).abs() < 1e-15 && (ws[1] - 0.4).abs() < 1e-15);

        let tri = arc(Graph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]));
        let all: Vec<_> = enumerate_configurations(tri, 0.37).unwrap().collect();
        assert_eq!(all.len(), 8);
        let total: f64 = all.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);

        // 2x2 square: 4 vertices, 4 edges
        let sq = Graph::from_point_pairs(
            2,
            &[
                (LatticePoint(vec![0, 0]), LatticePoint(vec![1, 0])),
                (LatticePoint(vec![1, 0]), LatticePoint(vec![1, 1])),
                (LatticePoint(vec![1, 1]), LatticePoint(vec![0, 1])),
                (LatticePoint(vec![0, 1]), LatticePoint(vec![0, 0])),
            ],
        )
        .unwrap();
        for (_, w) in enumerate_configurations(arc(sq), 0.5).unwrap() {
            assert_eq!(w, 1.0 / 16.0);
        }

        let big = arc(Graph::lattice_box(&LatticeBox::centered(2, 3)));
        assert!(matches!(
            enumerate_configurations(big, 0.5).err(),
            Some(Error::TooManyEdges { limit: 24, .. })
        ));
    }

    #[test]
    fn cluster_extremes() {
        let g = arc(Graph::lattice_box(&LatticeBox::centered(2, 2)));
        let closed = clusters(&Configuration::all_closed(g.clone(), 0.5));
        assert_eq!(closed.count(), 25);
        let open = clusters(&Configuration::all_open(g, 0.5));
        assert_eq!(open.sizes, vec![25]);
    }

    #[test]
    fn region_semantics() {
        let g = arc(Graph::from_pairs(2, &[(0, 1)]));
        let c = Configuration::all_open(g, 0.5);
        let only_x = VertexSet::from_vertices(2, [0]);
        assert!(connected(&c, 0, 0, Some(&only_x)));
        assert!(!connected(&c, 0, 1, Some(&only_x)));
        assert!(connected(&c, 0, 1, None));
    }

    #[test]
    fn double_connection_basics() {
        let cyc = arc(Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        let c = Configuration::all_open(cyc, 0.5);
        assert!(doubly_connected(&c, 0, 2, None));
        let path = arc(Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]));
        let c = Configuration::all_open(path, 0.5);
        assert!(!doubly_connected(&c, 0, 3, None));
        assert!(doubly_connected(&c, 2, 2, None));
    }

    #[test]
    fn disjoint_occurrence_basics() {
        // a single bridge cannot serve two demands
        let g = arc(Graph::from_pairs(2, &[(0, 1)]));
        let c = Configuration::all_open(g, 0.5);
        assert!(!disjointly_occurs(&c, &[Demand::new(0, 1), Demand::new(0, 1)]).unwrap());
        // two separate components
        let g = arc(Graph::from_pairs(4, &[(0, 1), (2, 3)]));
        let c = Configuration::all_open(g, 0.5);
        assert!(disjointly_occurs(&c, &[Demand::new(0, 1), Demand::new(2, 3)]).unwrap());
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "(0,0) (1,0)\n# comment\n(1,0) (1,1)\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.num_vertices(), 3);
        let again = Graph::parse_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(g.hash_hex(), again.hash_hex());
        assert!(matches!(
            Graph::parse_edge_list("(0,0) (1,0)\n(0,0) 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn export_round_trip() {
        let g = arc(Graph::lattice_box(&LatticeBox::centered(2, 1)));
        let c = sample_configuration(g.clone(), 0.5, 3).unwrap();
        let back = Configuration::import(g, &c.export(Some(3))).unwrap();
        assert_eq!(back.statuses(), c.statuses());
    }
}
