//! Exhaustive verification on small graphs.
//!
//! Every check enumerates all 2^|E| configurations once and bins the
//! quantities of interest by the number of open edges, so a single pass
//! yields exact values for every p. Indicators reuse the production
//! predicates (connections, pivotals, connectivity trees).

use std::sync::Arc;

use serde::Serialize;

use crate::conntree::{build_connectivity_tree, classify_tree, ConnTree};
use crate::error::{Error, Result};
use crate::lattice::{
    beta, check_enumerable, check_probability, cluster_of, clusters, connected, disjointly_occurs,
    doubly_connected, edge_disjoint_paths, enumerate_configurations, enumerate_fold,
    merge_histograms, polynomial_weight, reach_filtered, Configuration, Demand, DirectedEdge,
    Graph, LatticeBox, VertexId, VertexSet, MAX_ENUMERATION_EDGES,
};
use crate::pivotals::{common_pivotals, open_bridges, open_pivotals_with};
use crate::rng::mix;
use crate::trees::{enumerate_trees, AbstractTree};

/// Edge-count guards, one per oracle.
pub const SWITCHING_MAX_EDGES: usize = 22;
pub const BUBBLE_MAX_EDGES: usize = 20;
pub const TREE_BOUND_MAX_EDGES: usize = 16;
pub const BK_MAX_EDGES: usize = 14;
/// Nesting depth allowed in an [`EventSpec`].
pub const MAX_EVENT_DEPTH: usize = 3;

/// Which end of a common-pivotal sequence an event refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    First,
    Last,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventSpec {
    /// x ↔ y (inside `region` if given).
    Connection {
        x: VertexId,
        y: VertexId,
        region: Option<VertexSet>,
    },
    /// Γ(a_1, …, a_k).
    Gamma(Vec<VertexId>),
    /// x ⟺ y.
    Double {
        x: VertexId,
        y: VertexId,
        region: Option<VertexSet>,
    },
    /// The first/last common pivotal of u ↔ targets equals `edge`
    /// (`None` meaning "there is none").
    PivotalEquals {
        u: VertexId,
        targets: Vec<VertexId>,
        which: Extreme,
        edge: Option<DirectedEdge>,
    },
    /// Γ(marked) and the connectivity tree is binary and equal to `tree`.
    TreeEquals {
        marked: Vec<VertexId>,
        tree: AbstractTree,
    },
    Not(Box<EventSpec>),
    And(Vec<EventSpec>),
    /// Disjoint occurrence of connection events.
    Disjoint(Vec<EventSpec>),
}

impl EventSpec {
    pub fn connection(x: VertexId, y: VertexId) -> Self {
        EventSpec::Connection { x, y, region: None }
    }

    pub fn depth(&self) -> usize {
        match self {
            EventSpec::Not(a) => 1 + a.depth(),
            EventSpec::And(v) | EventSpec::Disjoint(v) => 1 + v.iter().map(|e| e.depth()).max().unwrap_or(0),
            _ => 1,
        }
    }

    fn vertices(&self, out: &mut Vec<VertexId>) {
        match self {
            EventSpec::Connection { x, y, .. } | EventSpec::Double { x, y, .. } => out.extend([*x, *y]),
            EventSpec::Gamma(v) => out.extend(v),
            EventSpec::PivotalEquals { u, targets, .. } => {
                out.push(*u);
                out.extend(targets);
            }
            EventSpec::TreeEquals { marked, .. } => out.extend(marked),
            EventSpec::Not(a) => a.vertices(out),
            EventSpec::And(v) | EventSpec::Disjoint(v) => v.iter().for_each(|e| e.vertices(out)),
        }
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if self.depth() > MAX_EVENT_DEPTH {
            return Err(Error::Domain(format!("event nesting deeper than {MAX_EVENT_DEPTH}")));
        }
        let mut vs = Vec::new();
        self.vertices(&mut vs);
        if let Some(v) = vs.iter().find(|&&v| v >= graph.num_vertices()) {
            return Err(Error::UnknownVertex(format!("#{v}")));
        }
        if let EventSpec::Disjoint(parts) = self {
            if parts.iter().any(|p| !matches!(p, EventSpec::Connection { .. })) {
                return Err(Error::Domain("disjoint occurrence is supported for connection events".into()));
            }
        }
        Ok(())
    }

    /// Indicator of the event in one configuration.
    pub fn holds(&self, config: &Configuration) -> Result<bool> {
        Ok(match self {
            EventSpec::Connection { x, y, region } => connected(config, *x, *y, region.as_ref()),
            EventSpec::Gamma(v) => {
                let part = clusters(config);
                v.iter().all(|&a| part.same(a, v[0]))
            }
            EventSpec::Double { x, y, region } => doubly_connected(config, *x, *y, region.as_ref()),
            EventSpec::PivotalEquals { u, targets, which, edge } => {
                let part = clusters(config);
                if !targets.iter().all(|&t| part.same(t, *u)) {
                    return Ok(false);
                }
                let c = common_pivotals(config, *u, targets)?;
                let got = match which {
                    Extreme::First => c.first(),
                    Extreme::Last => c.last(),
                };
                got == *edge
            }
            EventSpec::TreeEquals { marked, tree } => {
                let part = clusters(config);
                if !marked.iter().all(|&a| part.same(a, marked[0])) {
                    return Ok(false);
                }
                classify_tree(&build_connectivity_tree(config, marked)?).binary() == Some(tree)
            }
            EventSpec::Not(a) => !a.holds(config)?,
            EventSpec::And(v) => {
                for e in v {
                    if !e.holds(config)? {
                        return Ok(false);
                    }
                }
                true
            }
            EventSpec::Disjoint(v) => {
                let demands: Vec<Demand> = v
                    .iter()
                    .map(|e| match e {
                        EventSpec::Connection { x, y, region } => Demand {
                            source: *x,
                            target: *y,
                            region: region.clone(),
                        },
                        _ => unreachable!("validated"),
                    })
                    .collect();
                disjointly_occurs(config, &demands)?
            }
        })
    }
}

/// Open-count histogram of an event: h[j] = #{configurations with j open
/// edges in which the event holds}.
pub fn event_histogram(graph: &Arc<Graph>, event: &EventSpec, limit: usize) -> Result<Vec<f64>> {
    event.validate(graph)?;
    let m = graph.num_edges();
    let out = enumerate_fold(
        graph,
        limit,
        "exact event probability",
        || (vec![0.0; m + 1], None::<Error>),
        |c, (h, err)| {
            if err.is_some() {
                return;
            }
            match event.holds(c) {
                Ok(true) => h[c.open_count()] += 1.0,
                Ok(false) => {}
                Err(e) => *err = Some(e),
            }
        },
        |(a, ea), (b, eb)| (merge_histograms(a, b), ea.or(eb)),
    )?;
    match out.1 {
        Some(e) => Err(e),
        None => Ok(out.0),
    }
}

/// P_p(event), exactly, by enumeration of all configurations.
pub fn exact_event_probability(graph: &Arc<Graph>, p: f64, event: &EventSpec) -> Result<f64> {
    check_probability(p)?;
    Ok(polynomial_weight(&event_histogram(graph, event, MAX_ENUMERATION_EDGES)?, p))
}

/// Plain serial weighted sum over configurations; a second, independent
/// implementation of the enumeration plumbing for cross-checks.
pub fn exact_event_probability_serial(graph: &Arc<Graph>, p: f64, event: &EventSpec) -> Result<f64> {
    event.validate(graph)?;
    check_enumerable(graph, "serial enumeration", 12)?;
    let mut total = 0.0;
    for (c, w) in enumerate_configurations(graph.clone(), p)? {
        if event.holds(&c)? {
            total += w;
        }
    }
    Ok(total)
}

fn add_tables(mut a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.iter_mut().zip(y) {
            *u += v;
        }
    }
    a
}

fn directed_index(graph: &Graph, e: &DirectedEdge) -> usize {
    2 * e.id + usize::from(graph.endpoints(e.id).0 != e.tail)
}

// ---------------------------------------------------------------------------
// switching

/// Exact data for the switching identity on one graph, for every directed
/// edge g at once.
#[derive(Clone, Debug)]
pub struct SwitchingTable {
    pub marked: Vec<VertexId>,
    pub tree: AbstractTree,
    pub edges: Vec<DirectedEdge>,
    /// Histograms of D_T(…, g) per directed edge.
    pub lhs: Vec<Vec<f64>>,
    /// Histograms of the closed-g event on the right-hand side.
    pub rhs: Vec<Vec<f64>>,
    /// Part of `lhs` where, after closing g, g̲ is a pivotal tail on the way
    /// from some remaining x_i to x_0. There the reduced tree has g̲ as an
    /// inner vertex rather than a leaf, so these outcomes have no partner on
    /// the right. Always zero for k = 2.
    pub defect: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SwitchingRow {
    pub g: (usize, usize),
    pub eligible: bool,
    pub p: f64,
    pub lhs: f64,
    pub rhs_times_beta: f64,
    pub residual: f64,
    pub defect: f64,
    pub vacuous: bool,
}

impl SwitchingTable {
    /// g is eligible when its head is not a marked vertex. When ḡ is one of
    /// the two removed leaves the closed-g event can occur while the opened
    /// configuration has a degenerate tree, so the identity does not apply.
    pub fn eligible(&self, gi: usize) -> bool {
        !self.marked.contains(&self.edges[gi].head)
    }

    pub fn lhs(&self, gi: usize, p: f64) -> f64 {
        polynomial_weight(&self.lhs[gi], p)
    }

    pub fn rhs(&self, gi: usize, p: f64) -> f64 {
        polynomial_weight(&self.rhs[gi], p)
    }

    pub fn residual(&self, gi: usize, p: f64) -> f64 {
        (self.lhs(gi, p) - beta(p) * self.rhs(gi, p)).abs()
    }

    pub fn defect(&self, gi: usize, p: f64) -> f64 {
        polynomial_weight(&self.defect[gi], p)
    }

    /// Residual once the collision outcomes are taken out of the left side.
    pub fn corrected_residual(&self, gi: usize, p: f64) -> f64 {
        (self.lhs(gi, p) - self.defect(gi, p) - beta(p) * self.rhs(gi, p)).abs()
    }

    pub fn max_eligible_corrected_residual(&self, p: f64) -> f64 {
        (0..self.edges.len())
            .filter(|&gi| self.eligible(gi))
            .map(|gi| self.corrected_residual(gi, p))
            .fold(0.0, f64::max)
    }

    /// Whether the collision term vanishes identically.
    pub fn defect_free(&self) -> bool {
        self.defect.iter().flatten().all(|&h| h == 0.0)
    }

    pub fn rows(&self, p: f64) -> Vec<SwitchingRow> {
        (0..self.edges.len())
            .map(|gi| {
                let e = self.edges[gi];
                let lhs = self.lhs(gi, p);
                let rhs = beta(p) * self.rhs(gi, p);
                SwitchingRow {
                    g: (e.tail, e.head),
                    eligible: self.eligible(gi),
                    p,
                    lhs,
                    rhs_times_beta: rhs,
                    residual: (lhs - rhs).abs(),
                    defect: self.defect(gi, p),
                    vacuous: self.lhs[gi].iter().all(|&h| h == 0.0) && self.rhs[gi].iter().all(|&h| h == 0.0),
                }
            })
            .collect()
    }

    /// Largest residual over eligible g.
    pub fn max_eligible_residual(&self, p: f64) -> f64 {
        (0..self.edges.len())
            .filter(|&gi| self.eligible(gi))
            .map(|gi| self.residual(gi, p))
            .fold(0.0, f64::max)
    }

    pub fn index_of(&self, graph: &Graph, g: &DirectedEdge) -> usize {
        directed_index(graph, g)
    }
}

/// Builds both sides of the switching identity for tree `tree` ∈ 𝔗_{k+1}
/// with marked x_0..x_k, whose selected cherry must be {k−1, k}.
pub fn switching_table(graph: &Arc<Graph>, marked: &[VertexId], tree: &AbstractTree) -> Result<SwitchingTable> {
    check_enumerable(graph, "switching identity", SWITCHING_MAX_EDGES)?;
    let k1 = marked.len();
    if tree.k() != k1 || k1 < 3 {
        return Err(Error::Precondition(format!(
            "tree has {} leaves but {} marked vertices were given (need at least 3)",
            tree.k(),
            k1
        )));
    }
    let k = k1 - 1;
    let cherry = tree.select_ijv()?;
    if (cherry.i, cherry.j) != (k, k - 1) {
        return Err(Error::Precondition(format!(
            "the selected cherry is {{{}, {}}}, not {{{}, {}}}",
            cherry.j,
            cherry.i,
            k - 1,
            k
        )));
    }
    let mut distinct = marked.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != k1 {
        return Err(Error::Precondition("marked vertices must be distinct".into()));
    }
    let reduced = tree.reduce_any()?.tree;
    let m = graph.num_edges();
    let nd = 2 * m;
    let edges = graph.directed_edges();
    let x0 = marked[0];
    let (xa, xb) = (marked[k - 1], marked[k]);
    let reduced_marked_prefix: Vec<VertexId> = marked[..k - 1].to_vec();

    let zero = || vec![vec![0.0; m + 1]; nd];
    let (lhs, rhs, defect) = enumerate_fold(
        graph,
        SWITCHING_MAX_EDGES,
        "switching identity",
        || (zero(), zero(), zero()),
        |c, (lhs, rhs, defect)| {
            let j = c.open_count();
            let part = clusters(c);
            let c0 = part.representative[x0];
            if marked.iter().all(|&x| part.representative[x] == c0) {
                let t = build_connectivity_tree(c, marked).expect("connected");
                if classify_tree(&t).binary() == Some(tree) {
                    let cp = common_pivotals(c, x0, &[xa, xb]).expect("connected");
                    if let Some(g) = cp.last() {
                        let gi = directed_index(c.graph(), &g);
                        lhs[gi][j] += 1.0;
                        let mut closed = c.clone();
                        closed.set(g.id, false);
                        let br = open_bridges(&closed);
                        let collides = marked[1..k - 1].iter().any(|&x| {
                            open_pivotals_with(&closed, x, x0, &br)
                                .expect("still connected")
                                .iter()
                                .any(|e| e.tail == g.tail)
                        });
                        if collides {
                            defect[gi][j] += 1.0;
                        }
                    }
                }
                return;
            }
            let c1 = part.representative[xa];
            if c1 == c0
                || part.representative[xb] != c1
                || !marked[..k - 1].iter().all(|&x| part.representative[x] == c0)
            {
                return;
            }
            let g = c.graph();
            let bridges = open_bridges(c);
            for (e, &(a, b)) in g.edges().iter().enumerate() {
                if c.is_open(e) {
                    continue;
                }
                let (lo, hi) = if part.representative[a] == c0 && part.representative[b] == c1 {
                    (a, b)
                } else if part.representative[b] == c0 && part.representative[a] == c1 {
                    (b, a)
                } else {
                    continue;
                };
                // P(ḡ, {x_{k-1}, x_k}) = ∅
                let pa = open_pivotals_with(c, hi, xa, &bridges).expect("connected");
                let pb = open_pivotals_with(c, hi, xb, &bridges).expect("connected");
                if pa.iter().any(|e1| pb.iter().any(|e2| e1.id == e2.id)) {
                    continue;
                }
                // with two leaves left the tree event is just x_0 ↔ g̲, which
                // also covers g̲ = x_0
                let tree_ok = reduced.k() == 2 || {
                    let mut mk = reduced_marked_prefix.clone();
                    mk.push(lo);
                    let t = build_connectivity_tree(c, &mk).expect("connected");
                    classify_tree(&t).binary() == Some(&reduced)
                };
                if tree_ok {
                    rhs[directed_index(g, &g.directed(e, lo))][j] += 1.0;
                }
            }
        },
        |(la, ra, da), (lb, rb, db)| (add_tables(la, lb), add_tables(ra, rb), add_tables(da, db)),
    )?;
    Ok(SwitchingTable {
        marked: marked.to_vec(),
        tree: tree.clone(),
        edges,
        lhs,
        rhs,
        defect,
    })
}

/// |P(D_T(x_0..x_k, g)) − β·P(closed-g event)| for one directed edge g.
pub fn verify_switching(
    graph: &Arc<Graph>,
    p: f64,
    marked: &[VertexId],
    tree: &AbstractTree,
    g: &DirectedEdge,
) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("switching needs 0 < p < 1, got {p}")));
    }
    let t = switching_table(graph, marked, tree)?;
    Ok(t.residual(directed_index(graph, g), p))
}

// ---------------------------------------------------------------------------
// bubble switching

/// Test functions G on vertex subsets of the inner ball.
#[derive(Clone, Debug, PartialEq)]
pub enum SubsetFunction {
    One,
    /// Indicator that the subset equals the given one.
    Indicator(VertexSet),
    /// Seeded hash of the subset, uniform in [0, 1).
    Random(u64),
}

impl SubsetFunction {
    fn eval(&self, set: &[bool]) -> f64 {
        match self {
            SubsetFunction::One => 1.0,
            SubsetFunction::Indicator(a) => f64::from(u8::from(a.as_mask() == set)),
            SubsetFunction::Random(seed) => {
                let mut h = *seed;
                for (i, &b) in set.iter().enumerate() {
                    if b {
                        h = mix(h, i as u64 + 1);
                    }
                }
                (mix(h, 0x5eed) >> 11) as f64 / (1u64 << 53) as f64
            }
        }
    }
}

/// Exact data for the bubble switching identity, per G and directed edge f.
#[derive(Clone, Debug)]
pub struct BubbleTable {
    pub edges: Vec<DirectedEdge>,
    pub functions: Vec<SubsetFunction>,
    /// lhs[g][f] histogram.
    pub lhs: Vec<Vec<Vec<f64>>>,
    pub rhs: Vec<Vec<Vec<f64>>>,
    /// Whether each endpoint of each undirected edge lies in the ball.
    inside: Vec<bool>,
    graph_edges: Vec<(VertexId, VertexId)>,
}

impl BubbleTable {
    /// f is eligible unless it enters the ball from outside: then the ball
    /// cluster of f̄ is counted on the right but was unreachable on the left.
    pub fn eligible(&self, fi: usize) -> bool {
        let f = self.edges[fi];
        self.inside[f.tail] || !self.inside[f.head]
    }

    pub fn residual(&self, gi: usize, fi: usize, p: f64) -> f64 {
        (polynomial_weight(&self.lhs[gi][fi], p) - beta(p) * polynomial_weight(&self.rhs[gi][fi], p)).abs()
    }

    pub fn lhs_value(&self, gi: usize, fi: usize, p: f64) -> f64 {
        polynomial_weight(&self.lhs[gi][fi], p)
    }

    pub fn max_eligible_residual(&self, gi: usize, p: f64) -> f64 {
        (0..self.edges.len())
            .filter(|&fi| self.eligible(fi))
            .map(|fi| self.residual(gi, fi, p))
            .fold(0.0, f64::max)
    }

    pub fn num_edges(&self) -> usize {
        self.graph_edges.len()
    }
}

/// Both sides of the bubble switching identity, with origin `zero`, ball
/// B(zero; 2K) and outside points x_1, x_2.
pub fn bubble_switch_table(
    graph: &Arc<Graph>,
    zero: VertexId,
    big_k: i64,
    x1: VertexId,
    x2: VertexId,
    functions: &[SubsetFunction],
) -> Result<BubbleTable> {
    check_enumerable(graph, "bubble switching", BUBBLE_MAX_EDGES)?;
    let ball = LatticeBox::new(graph.point(zero).clone(), 2 * big_k);
    let inside: Vec<bool> = graph.points().iter().map(|p| ball.contains(p)).collect();
    if inside[x1] || inside[x2] {
        return Err(Error::Precondition("x_1 and x_2 must lie outside B(2K)".into()));
    }
    let region = VertexSet::from_mask(inside.clone());
    let m = graph.num_edges();
    let nd = 2 * m;
    let nf = functions.len();
    let empty = || vec![vec![vec![0.0; m + 1]; nd]; nf];
    let (lhs, rhs) = enumerate_fold(
        graph,
        BUBBLE_MAX_EDGES,
        "bubble switching",
        || (empty(), empty()),
        |c, (lhs, rhs)| {
            let j = c.open_count();
            let part = clusters(c);
            let c0 = part.representative[zero];
            let g = c.graph();
            if part.representative[x1] != c0 {
                return;
            }
            if part.representative[x2] == c0 {
                // Γ(0, x1, x2) ∩ {no common pivotal} ∩ {f = first pivotal of 0 ↔ x2}
                let bridges = open_bridges(c);
                let p1 = open_pivotals_with(c, zero, x1, &bridges).expect("connected");
                let p2 = open_pivotals_with(c, zero, x2, &bridges).expect("connected");
                if p1.iter().any(|a| p2.iter().any(|b| a.id == b.id)) {
                    return;
                }
                if let Some(f) = p2.first() {
                    let set = cluster_of(c, zero, Some(&region));
                    let fi = directed_index(g, f);
                    for (gi, func) in functions.iter().enumerate() {
                        lhs[gi][fi][j] += func.eval(set.as_mask());
                    }
                }
                return;
            }
            // f closed from 𝔠(0) to 𝔠(x2); 0 ⟺ f̲
            let c2 = part.representative[x2];
            let base = cluster_of(c, zero, Some(&region));
            for (e, &(a, b)) in g.edges().iter().enumerate() {
                if c.is_open(e) {
                    continue;
                }
                let (lo, hi) = if part.representative[a] == c0 && part.representative[b] == c2 {
                    (a, b)
                } else if part.representative[b] == c0 && part.representative[a] == c2 {
                    (b, a)
                } else {
                    continue;
                };
                if !doubly_connected(c, zero, lo, None) {
                    continue;
                }
                let extra = reach_filtered(c, &[hi], |v| region.contains(v), |_| true);
                let set: Vec<bool> = base.as_mask().iter().zip(&extra).map(|(&x, &y)| x || y).collect();
                let fi = directed_index(g, &g.directed(e, lo));
                for (gi, func) in functions.iter().enumerate() {
                    rhs[gi][fi][j] += func.eval(&set);
                }
            }
        },
        |(la, ra), (lb, rb)| {
            let add = |a: Vec<Vec<Vec<f64>>>, b: Vec<Vec<Vec<f64>>>| a.into_iter().zip(b).map(|(x, y)| add_tables(x, y)).collect();
            (add(la, lb), add(ra, rb))
        },
    )?;
    Ok(BubbleTable {
        edges: graph.directed_edges(),
        functions: functions.to_vec(),
        lhs,
        rhs,
        inside,
        graph_edges: graph.edges().to_vec(),
    })
}

/// Residual of the bubble identity for one f and one G.
pub fn verify_bubble_switch(
    graph: &Arc<Graph>,
    p: f64,
    f: &DirectedEdge,
    big_k: i64,
    zero: VertexId,
    x1: VertexId,
    x2: VertexId,
    func: &SubsetFunction,
) -> Result<f64> {
    let t = bubble_switch_table(graph, zero, big_k, x1, x2, std::slice::from_ref(func))?;
    Ok(t.residual(0, directed_index(graph, f), p))
}

// ---------------------------------------------------------------------------
// BK

/// (P(A ∘ B), P(A) P(B)) for two increasing connection events.
pub fn verify_bk(graph: &Arc<Graph>, p: f64, a: &EventSpec, b: &EventSpec) -> Result<(f64, f64)> {
    let (lhs, pa, pb) = bk_histograms(graph, a, b)?;
    Ok((polynomial_weight(&lhs, p), polynomial_weight(&pa, p) * polynomial_weight(&pb, p)))
}

/// Histograms of A ∘ B, A and B, for evaluating BK at many p.
pub fn bk_histograms(graph: &Arc<Graph>, a: &EventSpec, b: &EventSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    for e in [a, b] {
        if !matches!(e, EventSpec::Connection { .. }) {
            return Err(Error::Precondition("BK check takes connection events".into()));
        }
    }
    check_enumerable(graph, "BK inequality", BK_MAX_EDGES)?;
    let both = EventSpec::Disjoint(vec![a.clone(), b.clone()]);
    Ok((
        event_histogram(graph, &both, BK_MAX_EDGES)?,
        event_histogram(graph, a, BK_MAX_EDGES)?,
        event_histogram(graph, b, BK_MAX_EDGES)?,
    ))
}

// ---------------------------------------------------------------------------
// tree-graph bound

/// Exact two-point functions between all vertex pairs and the k-point
/// function of the chosen points, as open-count histograms.
#[derive(Clone, Debug)]
pub struct TwoPointTable {
    n: usize,
    pairs: Vec<Vec<f64>>,
    tau_k: Vec<f64>,
    points: Vec<VertexId>,
}

impl TwoPointTable {
    pub fn new(graph: &Arc<Graph>, points: &[VertexId]) -> Result<Self> {
        let n = graph.num_vertices();
        let m = graph.num_edges();
        let (pairs, tau_k) = enumerate_fold(
            graph,
            TREE_BOUND_MAX_EDGES,
            "tree-graph bound",
            || (vec![vec![0.0; m + 1]; n * n], vec![0.0; m + 1]),
            |c, (pairs, tk)| {
                let j = c.open_count();
                let part = clusters(c);
                for a in 0..n {
                    for b in a + 1..n {
                        if part.same(a, b) {
                            pairs[a * n + b][j] += 1.0;
                        }
                    }
                }
                if points.iter().all(|&x| part.same(x, points[0])) {
                    tk[j] += 1.0;
                }
            },
            |(mut pa, ta), (pb, tb)| {
                for (x, y) in pa.iter_mut().zip(pb) {
                    for (u, v) in x.iter_mut().zip(y) {
                        *u += v;
                    }
                }
                (pa, merge_histograms(ta, tb))
            },
        )?;
        Ok(TwoPointTable {
            n,
            pairs,
            tau_k,
            points: points.to_vec(),
        })
    }

    /// Matrix τ(a, b) at parameter p (τ(a, a) = 1).
    pub fn tau_matrix(&self, p: f64) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut t = vec![vec![1.0; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let v = polynomial_weight(&self.pairs[a * n + b], p);
                t[a][b] = v;
                t[b][a] = v;
            }
        }
        t
    }

    pub fn tau_k(&self, p: f64) -> f64 {
        polynomial_weight(&self.tau_k, p)
    }

    /// Σ over trees of 𝔗_k and all placements of internal vertices of the
    /// product of two-point functions along the tree edges.
    pub fn tree_bound(&self, p: f64) -> Result<f64> {
        let k = self.points.len();
        let tau = self.tau_matrix(p);
        let n = self.n;
        let x = &self.points;
        match k {
            3 => Ok((0..n).map(|z| tau[x[0]][z] * tau[x[1]][z] * tau[x[2]][z]).sum()),
            4 => {
                let mut total = 0.0;
                for t in enumerate_trees(4)? {
                    for y1 in 0..n {
                        for y2 in 0..n {
                            let place = |node: usize| if node < 4 { x[node] } else if node == 4 { y1 } else { y2 };
                            total += t.edges().iter().map(|&(a, b)| tau[place(a)][place(b)]).product::<f64>();
                        }
                    }
                }
                Ok(total)
            }
            _ => Err(Error::Domain(format!("tree-graph bound implemented for k in {{3, 4}}, got {k}"))),
        }
    }
}

/// (τ_k(points), tree-graph bound) at parameter p.
pub fn verify_tree_bound(graph: &Arc<Graph>, p: f64, points: &[VertexId]) -> Result<(f64, f64)> {
    if !(3..=4).contains(&points.len()) {
        return Err(Error::Domain("tree-graph bound needs 3 or 4 points".into()));
    }
    let t = TwoPointTable::new(graph, points)?;
    Ok((t.tau_k(p), t.tree_bound(p)?))
}

// ---------------------------------------------------------------------------
// witness structure

#[derive(Clone, Debug, Serialize)]
pub struct CycleWitness {
    pub child: VertexId,
    pub a: VertexId,
    pub b: VertexId,
    pub c: VertexId,
    /// Found by the construction in the proof (rather than by search).
    pub constructive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub vertex: VertexId,
    pub children: Vec<VertexId>,
    /// An open tree spans the marked vertices below `vertex`.
    pub spanning_tree: bool,
    /// Per child pair, two edge-disjoint paths (one from each child) to `vertex`.
    pub disjoint_pairs: Vec<(VertexId, VertexId, bool)>,
    /// For three or more children: cycle witnesses for each child beyond the first two.
    pub cycles: Vec<Option<CycleWitness>>,
    pub ok: bool,
}

fn path_vertices(g: &Graph, start: VertexId, path: &[usize]) -> Vec<VertexId> {
    let mut out = vec![start];
    let mut v = start;
    for &e in path {
        let (a, b) = g.endpoints(e);
        v = if a == v { b } else { a };
        out.push(v);
    }
    out
}

/// BFS path from `from` to `to` over open edges not in `banned`, as a vertex list.
fn open_path_avoiding(c: &Configuration, from: VertexId, to: VertexId, banned: &[usize]) -> Option<Vec<VertexId>> {
    let g = c.graph();
    let mut pred = vec![usize::MAX; g.num_vertices()];
    let mut seen = vec![false; g.num_vertices()];
    seen[from] = true;
    let mut q = std::collections::VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        for &(w, e) in g.neighbors(x) {
            if !seen[w] && c.is_open(e) && !banned.contains(&e) {
                seen[w] = true;
                pred[w] = x;
                q.push_back(w);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut out = vec![to];
    let mut x = to;
    while x != from {
        x = pred[x];
        out.push(x);
    }
    out.reverse();
    Some(out)
}

fn five_way(c: &Configuration, v: VertexId, a: VertexId, b: VertexId, cc: VertexId, w: VertexId) -> bool {
    let d = [Demand::new(v, a), Demand::new(a, cc), Demand::new(w, cc), Demand::new(cc, b), Demand::new(b, v)];
    disjointly_occurs(c, &d).unwrap_or(false)
}

/// Searches for the witnesses promised for vertex `v` of the connectivity tree.
pub fn verify_witness_structure(config: &Configuration, tree: &ConnTree, v: VertexId) -> WitnessReport {
    let g = config.graph();
    let children = tree.children(v);
    // clause 1: marked vertices below v lie in one open tree (BFS tree of
    // the open cluster restricted to the union of BFS paths)
    let below: Vec<VertexId> = tree
        .descendants(v)
        .into_iter()
        .filter(|x| tree.marked.contains(x))
        .collect();
    let spanning_tree = match below.first() {
        None => true,
        Some(&y1) => {
            let mut in_tree = VertexSet::from_vertices(g.num_vertices(), [y1]);
            let mut edges = 0usize;
            let mut ok = true;
            for &y in &below[1..] {
                match open_path_avoiding(config, y, y1, &[]) {
                    Some(path) => {
                        for w in path.windows(2) {
                            if in_tree.contains(w[0]) {
                                break;
                            }
                            in_tree.insert(w[0]);
                            edges += 1;
                            let _ = w[1];
                        }
                    }
                    None => ok = false,
                }
            }
            ok && edges + 1 == in_tree.len() && below.iter().all(|&y| in_tree.contains(y))
        }
    };
    // clause 2
    let mut disjoint_pairs = Vec::new();
    for i in 0..children.len() {
        for j in i + 1..children.len() {
            let paths = edge_disjoint_paths(config, &[children[i], children[j]], v, None, 2, 1);
            disjoint_pairs.push((children[i], children[j], paths.len() == 2));
        }
    }
    // clause 3
    let mut cycles = Vec::new();
    if children.len() >= 3 {
        let (w1, w2) = (children[0], children[1]);
        let paths = edge_disjoint_paths(config, &[w1, w2], v, None, 2, 1);
        if paths.len() == 2 {
            let starts = |p: &Vec<usize>| path_vertices(g, w1, p).last() == Some(&v);
            let (p1, p2) = if starts(&paths[0]) { (&paths[0], &paths[1]) } else { (&paths[1], &paths[0]) };
            let pi1 = path_vertices(g, w1, p1);
            let pi2 = path_vertices(g, w2, p2);
            let cluster = cluster_of(config, v, None);
            for &wj in &children[2..] {
                let mut found = None;
                let pj = open_path_avoiding(config, wj, v, p1);
                let pjp = open_path_avoiding(config, wj, v, p2);
                if let (Some(pj), Some(pjp)) = (pj, pjp) {
                    let ia = pjp.iter().position(|x| pi1.contains(x));
                    let ib = pj.iter().position(|x| pi2.contains(x));
                    if let (Some(ia), Some(ib)) = (ia, ib) {
                        let (a, b) = (pjp[ia], pj[ib]);
                        let cands: Vec<(usize, VertexId)> = pj[..=ib]
                            .iter()
                            .enumerate()
                            .filter(|(_, x)| pjp[..=ia].contains(x))
                            .map(|(i, &x)| (i, x))
                            .collect();
                        if let Some(&(_, c)) = cands.last() {
                            if five_way(config, v, a, b, c, wj) {
                                found = Some(CycleWitness { child: wj, a, b, c, constructive: true });
                            }
                        }
                    }
                }
                if found.is_none() {
                    'search: for &a in &pi1 {
                        for &b in &pi2 {
                            for c in cluster.iter() {
                                if five_way(config, v, a, b, c, wj) {
                                    found = Some(CycleWitness { child: wj, a, b, c, constructive: false });
                                    break 'search;
                                }
                            }
                        }
                    }
                }
                cycles.push(found);
            }
        } else {
            cycles.extend(children[2..].iter().map(|_| None));
        }
    }
    let ok = spanning_tree && disjoint_pairs.iter().all(|p| p.2) && cycles.iter().all(|c| c.is_some());
    WitnessReport {
        vertex: v,
        children,
        spanning_tree,
        disjoint_pairs,
        cycles,
        ok,
    }
}

// ---------------------------------------------------------------------------
// fixed test graphs

/// A hand-built graph with marked vertices and the tree the switching
/// identity is checked for.
#[derive(Clone, Debug)]
pub struct SwitchingInstance {
    pub name: &'static str,
    pub graph: Arc<Graph>,
    pub marked: Vec<VertexId>,
    pub tree: AbstractTree,
}

pub fn switching_battery() -> Vec<SwitchingInstance> {
    let star = AbstractTree::star3();
    let two_cherries = AbstractTree::parse_newick("(0,1,(2,3));").expect("valid newick");
    vec![
        SwitchingInstance {
            // x0 on a triangle, one bridge-like edge 3-4, then a 4-cycle holding x1, x2
            name: "y-bridge",
            graph: Arc::new(Graph::from_pairs(
                8,
                &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (5, 7), (6, 7)],
            )),
            marked: vec![0, 6, 7],
            tree: star.clone(),
        },
        SwitchingInstance {
            // 3x3 grid plus a pendant branch and a chord
            name: "grid",
            graph: Arc::new(Graph::from_pairs(
                11,
                &[
                    (0, 1), (1, 2), (3, 4), (4, 5), (6, 7), (7, 8),
                    (0, 3), (3, 6), (1, 4), (4, 7), (2, 5), (5, 8),
                    (8, 9), (9, 10), (5, 10), (2, 10),
                ],
            )),
            marked: vec![0, 9, 10],
            tree: star.clone(),
        },
        SwitchingInstance {
            // two chains joined by parallel edges; x1, x2 share a neck
            name: "necklace",
            graph: Arc::new(Graph::from_pairs(
                10,
                &[
                    (0, 1), (0, 2), (1, 2), (2, 3), (1, 3), (3, 4), (3, 4), (4, 5),
                    (5, 6), (5, 7), (6, 7), (6, 8), (7, 9), (8, 9), (4, 6), (2, 5), (8, 7),
                ],
            )),
            marked: vec![0, 8, 9],
            tree: star,
        },
        SwitchingInstance {
            // four marked points: x1 branches off early, x2 and x3 form the cherry
            name: "two-cherries",
            graph: Arc::new(Graph::from_pairs(
                12,
                &[
                    (0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5), (4, 6),
                    (5, 7), (6, 7), (7, 8), (8, 9), (8, 10), (9, 11), (10, 11), (9, 10),
                    (1, 4),
                ],
            )),
            marked: vec![0, 6, 9, 11],
            tree: two_cherries,
        },
    ]
}

/// A planar graph around the origin for the bubble identity: ball B(0; 2K)
/// with K = 1 inside, two long arms carrying x_1 and x_2 outside.
pub fn bubble_graph() -> (Arc<Graph>, VertexId, VertexId, VertexId, i64) {
    use crate::lattice::LatticePoint as P;
    let p = |a: i64, b: i64| P(vec![a, b]);
    let pairs = vec![
        (p(0, 0), p(1, 0)),
        (p(0, 0), p(0, 1)),
        (p(1, 0), p(1, 1)),
        (p(0, 1), p(1, 1)),
        (p(1, 1), p(2, 1)),
        (p(1, 0), p(2, 0)),
        (p(2, 0), p(2, 1)),
        (p(2, 1), p(3, 1)),
        (p(2, 0), p(3, 0)),
        (p(3, 0), p(3, 1)),
        (p(3, 1), p(4, 1)),
        (p(0, 1), p(0, 2)),
        (p(0, 2), p(-1, 2)),
        (p(-1, 2), p(-1, 3)),
        (p(0, 2), p(0, 3)),
        (p(0, 3), p(-1, 3)),
        (p(4, 1), p(4, 0)),
        (p(3, 0), p(4, 0)),
    ];
    let g = Graph::from_point_pairs(2, &pairs).expect("valid graph");
    let zero = g.vertex(&p(0, 0)).expect("origin");
    let x1 = g.vertex(&p(-1, 3)).expect("x1");
    let x2 = g.vertex(&p(4, 1)).expect("x2");
    (Arc::new(g), zero, x1, x2, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_probability() {
        let g = Arc::new(Graph::from_pairs(2, &[(0, 1)]));
        let p = exact_event_probability(&g, 0.37, &EventSpec::connection(0, 1)).unwrap();
        assert!((p - 0.37).abs() < 1e-15);
    }

    #[test]
    fn gamma_and_not_on_triangle() {
        let g = Arc::new(Graph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]));
        let e = EventSpec::And(vec![
            EventSpec::Gamma(vec![0, 1]),
            EventSpec::Not(Box::new(EventSpec::Gamma(vec![0, 2]))),
        ]);
        // 0-1 open, and 2 isolated: edges (1,2),(2,0) closed
        let p: f64 = 0.3;
        let exact = exact_event_probability(&g, p, &e).unwrap();
        assert!((exact - p * (1.0 - p) * (1.0 - p)).abs() < 1e-15);
        assert!((exact - exact_event_probability_serial(&g, p, &e).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn bk_single_edge() {
        let g = Arc::new(Graph::from_pairs(2, &[(0, 1)]));
        let a = EventSpec::connection(0, 1);
        let (l, r) = verify_bk(&g, 0.4, &a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!((r - 0.16).abs() < 1e-15);
    }

    #[test]
    fn nesting_limit() {
        let g = Graph::from_pairs(2, &[(0, 1)]);
        let deep = EventSpec::Not(Box::new(EventSpec::Not(Box::new(EventSpec::Not(Box::new(
            EventSpec::connection(0, 1),
        ))))));
        assert!(deep.validate(&g).is_err());
    }
}
