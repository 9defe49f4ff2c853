//! Monte Carlo k-point functions on finite boxes, one-arm conditioned
//! proxies for the incipient infinite cluster, and truncated estimates of
//! the vertex factor ρ and the bubble sum built from them.
//!
//! Clusters are explored lazily: an edge's state is drawn the first time
//! the exploration looks at it, which has the same law as sampling the
//! whole box first and is much cheaper for small clusters.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{check_probability, Configuration, EdgeId, Graph, LatticeBox, LatticePoint, VertexId};
use crate::rng::{stream, StreamRng};
use crate::stats::{chunked_moments_with, MCEstimate};

/// Rejection attempts allowed for one conditioned sample.
pub const MAX_ATTEMPTS: u64 = 10_000_000;
/// Largest box (in vertices) the estimators will build.
pub const MAX_BOX_VERTICES: u128 = 20_000_000;

/// A box of Z^d with its nearest-neighbour graph.
#[derive(Clone, Debug)]
pub struct BoxLattice {
    pub lattice: LatticeBox,
    pub graph: Arc<Graph>,
}

impl BoxLattice {
    pub fn new(lattice: LatticeBox) -> Result<Self> {
        Self::with_limit(lattice, MAX_BOX_VERTICES)
    }

    /// As [`BoxLattice::new`] with a different vertex limit.
    pub fn with_limit(lattice: LatticeBox, max_vertices: u128) -> Result<Self> {
        if lattice.volume() > max_vertices {
            return Err(Error::CostGuard(format!(
                "box of {} vertices exceeds the limit of {max_vertices}",
                lattice.volume()
            )));
        }
        let graph = Arc::new(Graph::lattice_box(&lattice));
        Ok(BoxLattice { lattice, graph })
    }

    pub fn centered(d: usize, radius: i64) -> Result<Self> {
        Self::new(LatticeBox::centered(d, radius))
    }

    pub fn vertex(&self, x: &LatticePoint) -> Result<VertexId> {
        if !self.lattice.contains(x) {
            return Err(Error::Domain(format!("{x} lies outside the box")));
        }
        self.graph.vertex(x)
    }

    pub fn center(&self) -> VertexId {
        self.graph.vertex(&self.lattice.center).expect("centre is in the box")
    }

    fn depth(&self, v: VertexId) -> i64 {
        self.lattice.center.sup_dist(self.graph.point(v))
    }
}

const UNKNOWN: u8 = 0;
const OPEN: u8 = 1;
const CLOSED: u8 = 2;

/// Scratch space for lazy cluster exploration; reset cost is proportional to
/// what the last exploration touched.
pub struct Explorer {
    graph: Arc<Graph>,
    edge: Vec<u8>,
    touched: Vec<EdgeId>,
    seen: Vec<bool>,
    visited: Vec<VertexId>,
}

impl Explorer {
    pub fn new(graph: Arc<Graph>) -> Self {
        Explorer {
            edge: vec![UNKNOWN; graph.num_edges()],
            seen: vec![false; graph.num_vertices()],
            touched: Vec::new(),
            visited: Vec::new(),
            graph,
        }
    }

    fn reset(&mut self) {
        for &e in &self.touched {
            self.edge[e] = UNKNOWN;
        }
        for &v in &self.visited {
            self.seen[v] = false;
        }
        self.touched.clear();
        self.visited.clear();
    }

    /// Breadth-first exploration of the open cluster of `source`, drawing
    /// edges as needed; stops early once `stop` has returned true `goal`
    /// times. Returns the number of hits.
    pub fn explore(
        &mut self,
        rng: &mut StreamRng,
        p: f64,
        source: VertexId,
        goal: usize,
        stop: impl Fn(VertexId) -> bool,
    ) -> usize {
        self.reset();
        let mut hits = 0;
        self.seen[source] = true;
        self.visited.push(source);
        let mut head = 0;
        if stop(source) {
            hits += 1;
        }
        while hits < goal && head < self.visited.len() {
            let v = self.visited[head];
            head += 1;
            for &(w, e) in self.graph.neighbors(v) {
                if self.edge[e] == UNKNOWN {
                    self.edge[e] = if rng.random::<f64>() < p { OPEN } else { CLOSED };
                    self.touched.push(e);
                }
                if self.edge[e] == OPEN && !self.seen[w] {
                    self.seen[w] = true;
                    self.visited.push(w);
                    if stop(w) {
                        hits += 1;
                        if hits >= goal {
                            break;
                        }
                    }
                }
            }
        }
        hits
    }

    /// Completes the partial sample into a full configuration.
    pub fn fill(&self, rng: &mut StreamRng, p: f64) -> Configuration {
        let open = self
            .edge
            .iter()
            .map(|&s| match s {
                OPEN => true,
                CLOSED => false,
                _ => rng.random::<f64>() < p,
            })
            .collect();
        Configuration::new(self.graph.clone(), open, p)
    }
}

// ---------------------------------------------------------------------------
// k-point functions

/// Frequency of Γ(points) over `trials` independent configurations.
pub fn estimate_tau_k(graph: &Arc<Graph>, p: f64, points: &[VertexId], trials: u64, seed: u64) -> Result<MCEstimate> {
    check_probability(p)?;
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    if points.is_empty() {
        return Err(Error::Domain("need at least one point".into()));
    }
    if let Some(&v) = points.iter().find(|&&v| v >= graph.num_vertices()) {
        return Err(Error::UnknownVertex(v.to_string()));
    }
    let mut targets = vec![false; graph.num_vertices()];
    points.iter().for_each(|&v| targets[v] = true);
    let goal = targets.iter().filter(|&&t| t).count();
    let m = chunked_moments_with(
        seed,
        trials,
        || Explorer::new(graph.clone()),
        |ex, rng| (ex.explore(rng, p, points[0], goal, |v| targets[v]) == goal) as u8 as f64,
    );
    Ok(m.estimate(seed))
}

/// [`estimate_tau_k`] for lattice points of a box.
pub fn estimate_tau_k_box(lab: &BoxLattice, p: f64, points: &[LatticePoint], trials: u64, seed: u64) -> Result<MCEstimate> {
    let ids = points.iter().map(|x| lab.vertex(x)).collect::<Result<Vec<_>>>()?;
    estimate_tau_k(&lab.graph, p, &ids, trials, seed)
}

// ---------------------------------------------------------------------------
// conditioned proxies

/// A configuration drawn from P(· | x ↔ ∂B(R)).
#[derive(Clone, Debug)]
pub struct ConditionedSample {
    pub config: Configuration,
    pub source: VertexId,
    pub survival_radius: i64,
    pub attempts: u64,
}

fn check_radius(lab: &BoxLattice, source: VertexId, r: i64) -> Result<()> {
    if r > lab.lattice.radius || r < 1 {
        return Err(Error::Domain(format!("R = {r} must lie in 1..={}", lab.lattice.radius)));
    }
    if lab.depth(source) >= r {
        return Err(Error::Domain(format!("{} is not inside B({r})", lab.graph.point(source))));
    }
    Ok(())
}

fn conditioned_with(
    ex: &mut Explorer,
    lab: &BoxLattice,
    p: f64,
    source: VertexId,
    r: i64,
    cap: u64,
    rng: &mut StreamRng,
) -> Result<(Configuration, u64)> {
    for attempt in 1..=cap {
        if ex.explore(rng, p, source, 1, |v| lab.depth(v) >= r) == 1 {
            return Ok((ex.fill(rng, p), attempt));
        }
    }
    Err(Error::AttemptCap {
        attempts: cap,
        rate: 1.0 / cap as f64,
    })
}

/// Rejection sample of P(· | source ↔ ∂B(R)) on the box, B(R) centred
/// with the box. Only the source's cluster is redrawn between attempts.
pub fn conditioned_cluster_sample(
    lab: &BoxLattice,
    p: f64,
    source: VertexId,
    r: i64,
    cap: u64,
    seed: u64,
) -> Result<ConditionedSample> {
    check_probability(p)?;
    check_radius(lab, source, r)?;
    let mut ex = Explorer::new(lab.graph.clone());
    let (config, attempts) = conditioned_with(&mut ex, lab, p, source, r, cap, &mut stream(seed, 0))?;
    Ok(ConditionedSample {
        config,
        source,
        survival_radius: r,
        attempts,
    })
}

/// Vertices u with source ⟺ u: the 2-edge-connected block of the source in
/// the open subgraph (the source itself included).
pub fn doubly_connected_set(config: &Configuration, source: VertexId) -> Vec<bool> {
    let bridges = crate::pivotals::open_bridges(config);
    crate::lattice::reach_filtered(config, &[source], |_| true, |e| !bridges[e])
}

/// Runs one draw per trial in parallel chunks; the first error aborts.
fn trial_moments<F>(lab: &BoxLattice, trials: u64, seed: u64, draw: F) -> Result<MCEstimate>
where
    F: Fn(&mut Explorer, u64) -> Result<f64> + Sync,
{
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let failure: OnceLock<Error> = OnceLock::new();
    let m = chunked_moments_with(
        seed,
        trials,
        || Explorer::new(lab.graph.clone()),
        |ex, rng| {
            if failure.get().is_some() {
                return 0.0;
            }
            match draw(ex, rng.random::<u64>()) {
                Ok(x) => x,
                Err(e) => {
                    let _ = failure.set(e);
                    0.0
                }
            }
        },
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(m.estimate(seed)),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RhoEstimate {
    pub value: MCEstimate,
    pub truncation_m: i64,
    pub proxy_r: i64,
}

/// Truncated ρ: Σ over directed f with f̲ ∈ B(M) of the frequency of
/// E_1 ∩ E_2 ∩ E_3, with three independent proxies conditioned on reaching
/// ∂B(R) from 0, e_1 and f̄, and "↔ ∞" read as "↔ ∂B(R)".
///
/// Every trial seeds its three samples separately (the one at f̄ per edge),
/// so estimates at different M share randomness and are monotone in M.
pub fn estimate_rho_truncated(lab: &BoxLattice, p: f64, r: i64, m: i64, trials: u64, seed: u64) -> Result<RhoEstimate> {
    estimate_rho_truncated_capped(lab, p, r, m, trials, seed, MAX_ATTEMPTS)
}

/// [`estimate_rho_truncated`] with an explicit per-sample attempt cap.
pub fn estimate_rho_truncated_capped(
    lab: &BoxLattice,
    p: f64,
    r: i64,
    m: i64,
    trials: u64,
    seed: u64,
    cap: u64,
) -> Result<RhoEstimate> {
    check_probability(p)?;
    let d = lab.lattice.dim();
    if m < 0 || 4 * m > lab.lattice.radius {
        return Err(Error::Domain(format!("M = {m} must lie in 0..={}", lab.lattice.radius / 4)));
    }
    if m + 1 >= r {
        return Err(Error::Domain(format!("need M + 1 < R, got M = {m}, R = {r}")));
    }
    let o = lab.center();
    let e1 = lab.vertex(&lab.lattice.center.add(&LatticePoint::axis(d, 0, 1)))?;
    check_radius(lab, o, r)?;
    let g = &lab.graph;
    let edges: Vec<(VertexId, VertexId, u64)> = g
        .directed_edges()
        .into_iter()
        .filter(|f| lab.depth(f.tail) <= m)
        .map(|f| {
            let (a, _) = g.endpoints(f.id);
            (f.tail, f.head, 2 * f.id as u64 + (f.tail != a) as u64)
        })
        .collect();
    let value = trial_moments(lab, trials, seed, |ex, ts| {
        let (w1, _) = conditioned_with(ex, lab, p, o, r, cap, &mut stream(ts, 0))?;
        let double = doubly_connected_set(&w1, o);
        let w0 = crate::lattice::cluster_of(&w1, o, None);
        let (w2, _) = conditioned_with(ex, lab, p, e1, r, cap, &mut stream(ts, 1))?;
        let c2 = crate::lattice::cluster_of(&w2, e1, None);
        // e_1 ↔ ∂B(R) holds in w2; off 𝔠(W_0 ∪ f̄) it survives iff its own
        // cluster avoids W_0 and f̄
        let avoids_w0 = !c2.iter().any(|v| w0.contains(v));
        let mut count = 0.0;
        for &(tail, head, idx) in &edges {
            if !double[tail] || !avoids_w0 || c2.contains(head) || w0.contains(head) {
                continue;
            }
            let (w3, _) = conditioned_with(ex, lab, p, head, r, cap, &mut stream(ts, 2 + idx))?;
            let off = crate::lattice::reach_filtered(&w3, &[head], |v| !w0.contains(v), |_| true);
            if off.iter().enumerate().any(|(v, &s)| s && lab.depth(v) >= r) {
                count += 1.0;
            }
        }
        Ok(count)
    })?;
    Ok(RhoEstimate {
        value,
        truncation_m: m,
        proxy_r: r,
    })
}

/// Σ_{u ≠ 0} ν̂(0 ⟺ u) under the proxy conditioned on 0 ↔ ∂B(R), summed over
/// u with |u|_∞ ≤ `sum_radius` (the whole box when `None`). The u = 0 term,
/// 1 by convention, is left out.
pub fn estimate_bubble(
    lab: &BoxLattice,
    p: f64,
    r: i64,
    sum_radius: Option<i64>,
    trials: u64,
    seed: u64,
) -> Result<MCEstimate> {
    estimate_bubble_capped(lab, p, r, sum_radius, trials, seed, MAX_ATTEMPTS)
}

/// [`estimate_bubble`] with an explicit per-sample attempt cap.
pub fn estimate_bubble_capped(
    lab: &BoxLattice,
    p: f64,
    r: i64,
    sum_radius: Option<i64>,
    trials: u64,
    seed: u64,
    cap: u64,
) -> Result<MCEstimate> {
    check_probability(p)?;
    let o = lab.center();
    check_radius(lab, o, r)?;
    let cut = sum_radius.unwrap_or(lab.lattice.radius);
    trial_moments(lab, trials, seed, |ex, ts| {
        let (w, _) = conditioned_with(ex, lab, p, o, r, cap, &mut stream(ts, 0))?;
        let double = doubly_connected_set(&w, o);
        Ok(double
            .iter()
            .enumerate()
            .filter(|&(v, &s)| s && v != o && lab.depth(v) <= cut)
            .count() as f64)
    })
}

// ---------------------------------------------------------------------------
// scaling probe

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbeRow {
    pub n: u64,
    pub tau: MCEstimate,
    pub rescaled: f64,
    pub rescaled_stderr: f64,
}

/// τ_k(⌊n y_0⌋, …) on a box of radius 2n·max|y_i|_∞, multiplied by
/// n^{−((4−d)(k−1)−2)}. Exploration output only.
pub fn scaling_probe(y: &[Vec<f64>], d: usize, p: f64, ns: &[u64], trials: u64, seed: u64) -> Result<Vec<ProbeRow>> {
    let k = y.len();
    if k < 2 {
        return Err(Error::Domain("need at least two directions".into()));
    }
    if let Some(v) = y.iter().find(|v| v.len() != d) {
        return Err(Error::Domain(format!("direction of dimension {} in d = {d}", v.len())));
    }
    let reach = y.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let exponent = -((4.0 - d as f64) * (k as f64 - 1.0) - 2.0);
    ns.iter()
        .enumerate()
        .map(|(i, &n)| {
            let radius = ((2.0 * n as f64 * reach).ceil() as i64).max(1);
            let b = LatticeBox::centered(d, radius);
            if b.volume() > MAX_BOX_VERTICES {
                return Err(Error::CostGuard(format!("n = {n} needs a box of {} vertices", b.volume())));
            }
            let lab = BoxLattice::new(b)?;
            let pts: Vec<LatticePoint> = y
                .iter()
                .map(|v| LatticePoint::new(v.iter().map(|x| (n as f64 * x).floor() as i64).collect()))
                .collect();
            let tau = estimate_tau_k_box(&lab, p, &pts, trials, crate::rng::mix(seed, i as u64))?;
            let s = (n as f64).powf(exponent);
            Ok(ProbeRow {
                n,
                tau,
                rescaled: s * tau.mean,
                rescaled_stderr: s * tau.stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_empty_measures() {
        let lab = BoxLattice::centered(2, 3).unwrap();
        let pts = [LatticePoint::new(vec![0, 0]), LatticePoint::new(vec![2, -1])];
        let one = estimate_tau_k_box(&lab, 1.0, &pts, 100, 1).unwrap();
        assert_eq!((one.mean, one.stderr), (1.0, 0.0));
        let zero = estimate_tau_k_box(&lab, 0.0, &pts, 100, 1).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn conditioned_sample_meets_its_event() {
        let lab = BoxLattice::centered(2, 5).unwrap();
        let o = lab.center();
        for seed in 0..20 {
            let s = conditioned_cluster_sample(&lab, 0.5, o, 4, MAX_ATTEMPTS, seed).unwrap();
            let c = crate::lattice::cluster_of(&s.config, o, None);
            assert!(c.iter().any(|v| lab.depth(v) >= 4));
            assert!(s.attempts >= 1);
        }
        let s = conditioned_cluster_sample(&lab, 1.0, o, 4, MAX_ATTEMPTS, 0).unwrap();
        assert_eq!(s.attempts, 1);
    }

    #[test]
    fn attempt_cap_is_reported() {
        let lab = BoxLattice::centered(2, 5).unwrap();
        let e = conditioned_cluster_sample(&lab, 0.0, lab.center(), 4, 50, 0).unwrap_err();
        assert!(matches!(e, Error::AttemptCap { attempts: 50, .. }));
    }
}
