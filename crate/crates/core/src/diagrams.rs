//! Riesz-kernel diagrams: valuations, convolution checks, reductions and
//! exponent fits.
//!
//! Two-point functions are replaced by the kernel ⟨x⟩^e = (1 + |x|²)^{e/2}
//! throughout (constant 1), so every inequality checked here is a
//! kernel-level statement.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticePoint};
use crate::rng::StreamRng;
use crate::stats::{chunked_moments, KahanSum, MCEstimate};

/// Largest number of free-vertex placements an exact sum may visit.
pub const MAX_EXACT_TERMS: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelParams {
    pub d: usize,
    pub exponent: f64,
}

impl KernelParams {
    pub fn new(d: usize, exponent: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(KernelParams { d, exponent })
    }

    /// ⟨x⟩^{2−d}.
    pub fn standard(d: usize) -> Self {
        KernelParams {
            d,
            exponent: 2.0 - d as f64,
        }
    }
}

/// (1 + r²)^{e/2} given r². Half-integer exponents avoid `powf`.
#[inline]
pub fn bracket_pow(r2: f64, e: f64) -> f64 {
    let t = 1.0 + r2;
    if e == e.round() && e.abs() < 64.0 {
        let k = e as i32;
        if k % 2 == 0 {
            t.powi(k / 2)
        } else {
            t.powi(k.div_euclid(2)) * t.sqrt()
        }
    } else {
        t.powf(e / 2.0)
    }
}

/// ⟨x⟩^{exponent}.
pub fn riesz(x: &[f64], params: &KernelParams) -> f64 {
    bracket_pow(x.iter().map(|v| v * v).sum(), params.exponent)
}

pub fn riesz_point(x: &LatticePoint, exponent: f64) -> f64 {
    bracket_pow(norm2(x.coords()), exponent)
}

fn norm2(x: &[i64]) -> f64 {
    x.iter().map(|&v| (v * v) as f64).sum()
}

fn dist2(a: &[i64], b: &[i64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| ((x - y) * (x - y)) as f64).sum()
}

fn bracket(a: &LatticePoint, b: &LatticePoint) -> f64 {
    (1.0 + dist2(a.coords(), b.coords())).sqrt()
}

// ---------------------------------------------------------------------------
// diagrams

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Role {
    Pinned(LatticePoint),
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagramEdge {
    pub a: usize,
    pub b: usize,
    pub exponent: f64,
}

/// A multigraph whose vertices are pinned lattice points or summation
/// variables; each edge contributes one kernel factor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagram {
    pub d: usize,
    pub roles: Vec<Role>,
    pub edges: Vec<DiagramEdge>,
}

impl Diagram {
    pub fn new(d: usize) -> Self {
        Diagram {
            d,
            roles: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn pin(&mut self, p: LatticePoint) -> usize {
        assert_eq!(p.dim(), self.d, "pin dimension");
        self.roles.push(Role::Pinned(p));
        self.roles.len() - 1
    }

    pub fn free(&mut self) -> usize {
        self.roles.push(Role::Free);
        self.roles.len() - 1
    }

    /// Edge with the standard exponent 2 − d.
    pub fn edge(&mut self, a: usize, b: usize) {
        self.edge_with(a, b, 2.0 - self.d as f64);
    }

    pub fn edge_with(&mut self, a: usize, b: usize, exponent: f64) {
        self.edges.push(DiagramEdge { a, b, exponent });
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.roles.len()).filter(|&v| self.roles[v] == Role::Free).collect()
    }

    pub fn pinned(&self) -> Vec<(usize, &LatticePoint)> {
        self.roles
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r {
                Role::Pinned(p) => Some((i, p)),
                Role::Free => None,
            })
            .collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().map(|e| usize::from(e.a == v) + usize::from(e.b == v)).sum()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| if e.a == v { Some(e.b) } else if e.b == v { Some(e.a) } else { None })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.edges {
            if e.a >= self.roles.len() || e.b >= self.roles.len() {
                return Err(Error::Domain("diagram edge refers to a missing vertex".into()));
            }
        }
        Ok(())
    }

    fn position<'a>(&'a self, v: usize, free: &'a [Vec<i64>], slot: &[usize]) -> &'a [i64] {
        match &self.roles[v] {
            Role::Pinned(p) => p.coords(),
            Role::Free => &free[slot[v]],
        }
    }

    /// Product of kernels at the given free-vertex placement.
    pub fn integrand(&self, free: &[Vec<i64>]) -> f64 {
        let mut slot = vec![usize::MAX; self.roles.len()];
        for (i, v) in self.free_vertices().into_iter().enumerate() {
            slot[v] = i;
        }
        self.integrand_slots(free, &slot)
    }

    fn integrand_slots(&self, free: &[Vec<i64>], slot: &[usize]) -> f64 {
        self.edges
            .iter()
            .map(|e| bracket_pow(dist2(self.position(e.a, free, slot), self.position(e.b, free, slot)), e.exponent))
            .product()
    }
}

/// Valuation method.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Exact,
    ImportanceMc { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Valuation {
    Exact { value: f64 },
    Mc(MCEstimate),
}

impl Valuation {
    pub fn value(&self) -> f64 {
        match self {
            Valuation::Exact { value } => *value,
            Valuation::Mc(e) => e.mean,
        }
    }

    pub fn stderr(&self) -> f64 {
        match self {
            Valuation::Exact { .. } => 0.0,
            Valuation::Mc(e) => e.stderr,
        }
    }
}

/// Σ over free-vertex placements in `truncation` of the kernel product.
pub fn val(diagram: &Diagram, truncation: &LatticeBox, method: &Method) -> Result<Valuation> {
    match method {
        Method::Exact => Ok(Valuation::Exact {
            value: val_exact(diagram, truncation)?,
        }),
        Method::ImportanceMc { samples, seed } => Ok(Valuation::Mc(val_mc(diagram, truncation, *samples, *seed, None)?)),
    }
}

/// Exact truncated sum. One free vertex uses a slice-radial decomposition;
/// otherwise all placements are visited (guarded by [`MAX_EXACT_TERMS`]).
pub fn val_exact(diagram: &Diagram, truncation: &LatticeBox) -> Result<f64> {
    diagram.validate()?;
    let free = diagram.free_vertices();
    match free.len() {
        0 => Ok(diagram.integrand(&[])),
        1 => slice_radial_sum(diagram, truncation),
        _ => brute_force_sum(diagram, truncation),
    }
}

/// Plain sum over every placement of the free vertices.
pub fn brute_force_sum(diagram: &Diagram, truncation: &LatticeBox) -> Result<f64> {
    use rayon::prelude::*;
    let free = diagram.free_vertices();
    let side = (2 * truncation.radius + 1) as f64;
    let terms = side.powi((diagram.d * free.len()) as i32);
    if terms > MAX_EXACT_TERMS {
        return Err(Error::CostGuard(format!(
            "exact sum over {terms:.3e} placements exceeds {MAX_EXACT_TERMS:.0e}; use importance-mc"
        )));
    }
    let points = truncation.points();
    let mut slot = vec![usize::MAX; diagram.roles.len()];
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let nf = free.len();
    let partials: Vec<KahanSum> = points
        .par_iter()
        .map(|first| {
            let mut acc = KahanSum::new();
            let mut idx = vec![0usize; nf.saturating_sub(1)];
            let mut place: Vec<Vec<i64>> = vec![first.coords().to_vec(); nf];
            loop {
                for (j, &i) in idx.iter().enumerate() {
                    place[j + 1] = points[i].coords().to_vec();
                }
                acc.add(diagram.integrand_slots(&place, &slot));
                // odometer
                let mut j = 0;
                loop {
                    if j == idx.len() {
                        return acc;
                    }
                    idx[j] += 1;
                    if idx[j] < points.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        })
        .collect();
    let mut total = KahanSum::new();
    partials.iter().for_each(|p| total.merge(p));
    Ok(total.value())
}

/// Histogram of Σ_{i<m} z_i² over z ∈ [−L, L]^m.
fn square_sum_histogram(m: usize, l: i64) -> Vec<f64> {
    let mut h = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; h.len() + (l * l) as usize];
        for (s, &c) in h.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for z in -l..=l {
                next[s + (z * z) as usize] += c;
            }
        }
        h = next;
    }
    h
}

/// One free vertex: coordinates in which every pin sits at the box centre
/// enter the summand only through their sum of squares, so they are
/// replaced by a histogram of that sum.
fn slice_radial_sum(diagram: &Diagram, truncation: &LatticeBox) -> Result<f64> {
    use rayon::prelude::*;
    let d = diagram.d;
    let c = truncation.center.coords();
    let l = truncation.radius;
    let v = diagram.free_vertices()[0];
    let pins = diagram.pinned();
    let radial: Vec<usize> = (0..d).filter(|&i| pins.iter().all(|(_, p)| p.coords()[i] == c[i])).collect();
    let explicit: Vec<usize> = (0..d).filter(|i| !radial.contains(i)).collect();
    let hist = square_sum_histogram(radial.len(), l);
    let shells: Vec<(f64, f64)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0.0)
        .map(|(s, &n)| (s as f64, n))
        .collect();
    let slices = (2 * l + 1).pow(explicit.len() as u32) as f64;
    if slices * shells.len() as f64 > MAX_EXACT_TERMS {
        return Err(Error::CostGuard(format!(
            "exact sum needs {:.3e} terms, above {MAX_EXACT_TERMS:.0e}",
            slices * shells.len() as f64
        )));
    }
    // per edge: fixed partner position in the explicit coordinates (None for
    // edges not touching v, which contribute a constant)
    let mut constant = 1.0;
    let mut touching: Vec<(Vec<i64>, f64, bool)> = Vec::new();
    for e in &diagram.edges {
        let (a, b) = (e.a, e.b);
        if a == v && b == v {
            continue;
        }
        if a != v && b != v {
            let pa = match &diagram.roles[a] {
                Role::Pinned(p) => p,
                Role::Free => unreachable!(),
            };
            let pb = match &diagram.roles[b] {
                Role::Pinned(p) => p,
                Role::Free => unreachable!(),
            };
            constant *= bracket_pow(dist2(pa.coords(), pb.coords()), e.exponent);
            continue;
        }
        let other = if a == v { b } else { a };
        let p = match &diagram.roles[other] {
            Role::Pinned(p) => p,
            Role::Free => unreachable!("single free vertex"),
        };
        touching.push((explicit.iter().map(|&i| p.coords()[i]).collect(), e.exponent, true));
    }
    let nslices = (2 * l + 1).pow(explicit.len() as u32) as usize;
    let m = explicit.len();
    let partials: Vec<KahanSum> = (0..nslices)
        .into_par_iter()
        .with_min_len(64)
        .map(|mut idx| {
            let mut z = vec![0i64; m];
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = c[explicit[j]] - l + (idx % (2 * l + 1) as usize) as i64;
                idx /= (2 * l + 1) as usize;
            }
            let base: Vec<(f64, f64)> = touching.iter().map(|(p, e, _)| (dist2(&z, p), *e)).collect();
            let mut acc = KahanSum::new();
            for &(s, n) in &shells {
                let mut term = n;
                for &(r2, e) in &base {
                    term *= bracket_pow(r2 + s, e);
                }
                acc.add(term);
            }
            acc
        })
        .collect();
    let mut total = KahanSum::new();
    partials.iter().for_each(|p| total.merge(p));
    Ok(constant * total.value())
}

// ---------------------------------------------------------------------------
// importance sampling

/// Discrete heavy-tailed law on a box around a centre with pmf
/// ∝ ⟨z − c⟩^e for ‖z − c‖_∞ ≤ R. The squared radius is drawn from the
/// lattice-point histogram, then coordinates one at a time from the
/// histograms of the remaining ones, so the pmf is exact.
#[derive(Clone, Debug)]
pub struct RadialLaw {
    d: usize,
    r_max: i64,
    exponent: f64,
    /// hists[m][s] = #{z ∈ [−R, R]^m : |z|² = s}.
    hists: Vec<Vec<f64>>,
    cdf: Vec<f64>,
    norm: f64,
}

impl RadialLaw {
    pub fn new(d: usize, exponent: f64, r_max: i64) -> Self {
        let mut hists = vec![vec![1.0]];
        for m in 1..=d {
            let prev = &hists[m - 1];
            let mut next = vec![0.0; prev.len() + (r_max * r_max) as usize];
            for (s, &c) in prev.iter().enumerate() {
                if c != 0.0 {
                    for z in -r_max..=r_max {
                        next[s + (z * z) as usize] += c;
                    }
                }
            }
            hists.push(next);
        }
        let mut cdf = Vec::with_capacity(hists[d].len());
        let mut acc = KahanSum::new();
        for (s, &c) in hists[d].iter().enumerate() {
            acc.add(c * bracket_pow(s as f64, exponent));
            cdf.push(acc.value());
        }
        let norm = acc.value();
        RadialLaw {
            d,
            r_max,
            exponent,
            hists,
            cdf,
            norm,
        }
    }

    pub fn sample(&self, center: &[i64], rng: &mut StreamRng) -> Vec<i64> {
        let u: f64 = rng.random::<f64>() * self.norm;
        let mut s = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        while self.hists[self.d][s] == 0.0 {
            s -= 1;
        }
        let mut z = center.to_vec();
        for i in 0..self.d {
            let rest = &self.hists[self.d - i - 1];
            let weight = |t: i64| {
                let sq = (t * t) as usize;
                if sq <= s && s - sq < rest.len() {
                    rest[s - sq]
                } else {
                    0.0
                }
            };
            let total = self.hists[self.d - i][s];
            let mut v = rng.random::<f64>() * total;
            let mut pick = None;
            for t in -self.r_max..=self.r_max {
                let w = weight(t);
                if w > 0.0 {
                    pick = Some(t);
                    if v < w {
                        break;
                    }
                    v -= w;
                }
            }
            let t = pick.expect("nonempty shell");
            z[i] += t;
            s -= (t * t) as usize;
        }
        z
    }

    /// Probability of drawing `z` from centre `center`.
    pub fn pmf(&self, center: &[i64], z: &[i64]) -> f64 {
        if z.iter().zip(center).any(|(a, b)| (a - b).abs() > self.r_max) {
            return 0.0;
        }
        bracket_pow(dist2(z, center), self.exponent) / self.norm
    }
}

/// Where a proposal component is centred.
#[derive(Clone, Debug, PartialEq)]
pub enum Center {
    /// A pinned vertex, or a free vertex sampled earlier in the plan.
    Vertex(usize),
    /// A fixed lattice point.
    Point(LatticePoint),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub center: Center,
    pub exponent: f64,
}

impl Anchor {
    pub fn vertex(v: usize, exponent: f64) -> Self {
        Anchor {
            center: Center::Vertex(v),
            exponent,
        }
    }

    pub fn point(p: LatticePoint, exponent: f64) -> Self {
        Anchor {
            center: Center::Point(p),
            exponent,
        }
    }
}

/// Sequential proposal: free vertices are drawn in `order`, each from the
/// equal-weight mixture of [`RadialLaw`]s around its anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalPlan {
    pub order: Vec<usize>,
    pub anchors: Vec<Vec<Anchor>>,
}

impl ProposalPlan {
    /// Each free vertex is drawn around its pinned neighbours and its
    /// already-drawn free neighbours, with the connecting edge's exponent.
    pub fn from_edges(diagram: &Diagram) -> Self {
        let order = diagram.free_vertices();
        let mut anchors = Vec::new();
        for (i, &v) in order.iter().enumerate() {
            let mut a = Vec::new();
            for e in &diagram.edges {
                let other = if e.a == v { e.b } else if e.b == v { e.a } else { continue };
                let known = matches!(diagram.roles[other], Role::Pinned(_)) || order[..i].contains(&other);
                if known && other != v {
                    a.push(Anchor::vertex(other, e.exponent));
                }
            }
            anchors.push(a);
        }
        ProposalPlan { order, anchors }
    }
}

struct Sampler<'a> {
    diagram: &'a Diagram,
    plans: &'a [ProposalPlan],
    laws: HashMap<u64, RadialLaw>,
    center: Vec<i64>,
    radius: i64,
    uniform: f64,
}

impl Sampler<'_> {
    fn centre<'b>(&'b self, a: &'b Anchor, placed: &'b [Option<Vec<i64>>]) -> &'b [i64] {
        match &a.center {
            Center::Point(p) => p.coords(),
            Center::Vertex(v) => match &self.diagram.roles[*v] {
                Role::Pinned(p) => p.coords(),
                Role::Free => placed[*v].as_deref().expect("anchor drawn earlier"),
            },
        }
    }

    fn component_pmf(&self, anchors: &[Anchor], placed: &[Option<Vec<i64>>], z: &[i64]) -> f64 {
        if anchors.is_empty() {
            return self.uniform;
        }
        anchors
            .iter()
            .map(|a| self.laws[&a.exponent.to_bits()].pmf(self.centre(a, placed), z))
            .sum::<f64>()
            / anchors.len() as f64
    }

    /// Mixture pmf of a full placement (indexed by vertex).
    fn pmf(&self, placed: &[Option<Vec<i64>>]) -> f64 {
        self.plans
            .iter()
            .map(|plan| {
                plan.order
                    .iter()
                    .zip(&plan.anchors)
                    .map(|(&v, anchors)| self.component_pmf(anchors, placed, placed[v].as_ref().expect("placed")))
                    .product::<f64>()
            })
            .sum::<f64>()
            / self.plans.len() as f64
    }

    fn draw(&self, rng: &mut StreamRng) -> f64 {
        let plan = &self.plans[rng.random_range(0..self.plans.len())];
        let mut placed: Vec<Option<Vec<i64>>> = vec![None; self.diagram.roles.len()];
        for (&v, anchors) in plan.order.iter().zip(&plan.anchors) {
            let z: Vec<i64> = if anchors.is_empty() {
                self.center.iter().map(|&c| c + rng.random_range(-self.radius..=self.radius)).collect()
            } else {
                let a = &anchors[rng.random_range(0..anchors.len())];
                self.laws[&a.exponent.to_bits()].sample(self.centre(a, &placed), rng)
            };
            if z.iter().zip(&self.center).any(|(a, b)| (a - b).abs() > self.radius) {
                return 0.0;
            }
            placed[v] = Some(z);
        }
        let q = self.pmf(&placed);
        let free: Vec<Vec<i64>> = self
            .diagram
            .free_vertices()
            .into_iter()
            .map(|v| placed[v].take().expect("placed"))
            .collect();
        self.diagram.integrand(&free) / q
    }
}

/// Importance-sampling estimate of the truncated valuation. With several
/// plans, one is picked uniformly per sample and the weight uses the
/// average pmf of all of them.
pub fn val_mc(
    diagram: &Diagram,
    truncation: &LatticeBox,
    samples: u64,
    seed: u64,
    plans: Option<&[ProposalPlan]>,
) -> Result<MCEstimate> {
    diagram.validate()?;
    let default;
    let plans = match plans {
        Some(p) if !p.is_empty() => p,
        Some(_) => return Err(Error::Domain("empty proposal plan list".into())),
        None => {
            default = [ProposalPlan::from_edges(diagram)];
            &default[..]
        }
    };
    let mut free = diagram.free_vertices();
    free.sort_unstable();
    for plan in plans {
        let mut o = plan.order.clone();
        o.sort_unstable();
        if o != free || plan.anchors.len() != plan.order.len() {
            return Err(Error::Domain("each proposal plan must list every free vertex once".into()));
        }
        for (i, anchors) in plan.anchors.iter().enumerate() {
            for a in anchors {
                if let Center::Vertex(u) = a.center {
                    if diagram.roles.get(u) == Some(&Role::Free) && !plan.order[..i].contains(&u) {
                        return Err(Error::Domain(format!("anchor vertex {u} is drawn after its dependant")));
                    }
                }
            }
        }
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let d = diagram.d;
    let l = truncation.radius;
    let reach = plans
        .iter()
        .flat_map(|p| p.anchors.iter().flatten())
        .filter_map(|a| match &a.center {
            Center::Point(p) => Some(p.sup_dist(&truncation.center)),
            Center::Vertex(v) => match &diagram.roles[*v] {
                Role::Pinned(p) => Some(p.sup_dist(&truncation.center)),
                Role::Free => None,
            },
        })
        .max()
        .unwrap_or(0);
    // every box point is within r_max of every possible anchor
    let r_max = l + l.max(reach);
    let mut laws: HashMap<u64, RadialLaw> = HashMap::new();
    for a in plans.iter().flat_map(|p| p.anchors.iter().flatten()) {
        laws.entry(a.exponent.to_bits()).or_insert_with(|| RadialLaw::new(d, a.exponent, r_max));
    }
    let sampler = Sampler {
        diagram,
        plans,
        laws,
        center: truncation.center.coords().to_vec(),
        radius: l,
        uniform: 1.0 / truncation.volume() as f64,
    };
    Ok(chunked_moments(seed, samples, |rng| sampler.draw(rng)).estimate(seed))
}

// ---------------------------------------------------------------------------
// standard diagrams

/// D_loop: w_1 — z_0 — z_2 — w_2 with exponents 2−d, 8−2d, 2−d.
pub fn one_loop_diagram(w1: &LatticePoint, w2: &LatticePoint) -> Diagram {
    let d = w1.dim();
    let mut g = Diagram::new(d);
    let a = g.pin(w1.clone());
    let b = g.pin(w2.clone());
    let z0 = g.free();
    let z2 = g.free();
    g.edge(a, z0);
    g.edge_with(z0, z2, 8.0 - 2.0 * d as f64);
    g.edge(z2, b);
    g
}

/// Proposal for D_loop: z_0 around either pin, z_2 around z_0 (loop
/// exponent) or around w_2.
pub fn one_loop_plan(d: usize) -> ProposalPlan {
    let e = 2.0 - d as f64;
    ProposalPlan {
        order: vec![2, 3],
        anchors: vec![
            vec![Anchor::vertex(0, e), Anchor::vertex(1, e)],
            vec![Anchor::vertex(2, 8.0 - 2.0 * d as f64), Anchor::vertex(1, e)],
        ],
    }
}

/// Truncated one-loop sum over B(L)², exact when affordable and by
/// importance sampling otherwise.
pub fn one_loop(w1: &LatticePoint, w2: &LatticePoint, l: i64, samples: u64, seed: u64) -> Result<Valuation> {
    let g = one_loop_diagram(w1, w2);
    let b = LatticeBox::centered(w1.dim(), l);
    match brute_force_sum(&g, &b) {
        Ok(v) => Ok(Valuation::Exact { value: v }),
        Err(Error::CostGuard(_)) => Ok(Valuation::Mc(val_mc(&g, &b, samples, seed, Some(&[one_loop_plan(w1.dim())]))?)),
        Err(e) => Err(e),
    }
}

/// A 4-cycle z_1 z_2 z_3 z_4 with one pinned leg per cycle vertex.
pub fn four_cycle_diagram(pins: [&LatticePoint; 4]) -> Diagram {
    let d = pins[0].dim();
    let mut g = Diagram::new(d);
    let p: Vec<usize> = pins.iter().map(|x| g.pin((*x).clone())).collect();
    let z: Vec<usize> = (0..4).map(|_| g.free()).collect();
    debug_assert_eq!((p[0], z[0]), (0, 4));
    for i in 0..4 {
        g.edge(p[i], z[i]);
        g.edge(z[i], z[(i + 1) % 4]);
    }
    g
}

/// Proposals for [`four_cycle_diagram`]: four rotations, each drawing two
/// opposite cycle vertices first. Every vertex is drawn near its pin, near
/// the pins' centroid, or near cycle vertices already drawn; all with the
/// steep exponent −d, since the mass sits in tight clusters.
pub fn four_cycle_plans(diagram: &Diagram) -> Vec<ProposalPlan> {
    let d = diagram.d;
    let e = -(d as f64);
    let pins = diagram.pinned();
    let mut centroid = vec![0i64; d];
    for (_, p) in &pins {
        for (c, x) in centroid.iter_mut().zip(p.coords()) {
            *c += x;
        }
    }
    let centroid = LatticePoint::new(centroid.iter().map(|c| c.div_euclid(pins.len() as i64)).collect());
    // vertices 0..4 pins, 4..8 cycle, as built by four_cycle_diagram
    (0..4)
        .map(|r| {
            let o = [r, (r + 2) % 4, (r + 1) % 4, (r + 3) % 4];
            let z = |i: usize| 4 + o[i];
            let mut anchors = Vec::new();
            for i in 0..4 {
                let mut a = vec![Anchor::vertex(o[i], e), Anchor::point(centroid.clone(), e)];
                for j in 0..i.min(2) {
                    a.push(Anchor::vertex(z(j), e));
                }
                anchors.push(a);
            }
            ProposalPlan {
                order: (0..4).map(z).collect(),
                anchors,
            }
        })
        .collect()
}

/// Pins 0, n e_1, n(e_1+e_2), n e_2.
pub fn square_pins(d: usize, n: i64) -> [LatticePoint; 4] {
    let e1 = LatticePoint::axis(d, 0, n);
    let e2 = LatticePoint::axis(d, 1, n);
    [LatticePoint::origin(d), e1.clone(), e1.add(&e2), e2]
}

/// The square 4-cycle at side n, summed over B(2n) by importance sampling.
pub fn four_cycle(d: usize, n: i64, samples: u64, seed: u64) -> Result<MCEstimate> {
    let pins = square_pins(d, n);
    let g = four_cycle_diagram([&pins[0], &pins[1], &pins[2], &pins[3]]);
    let plans = four_cycle_plans(&g);
    val_mc(&g, &LatticeBox::centered(d, 2 * n), samples, seed, Some(&plans))
}

/// A star with one free centre joined to every pin.
pub fn star_diagram(pins: &[LatticePoint]) -> Diagram {
    let mut g = Diagram::new(pins[0].dim());
    let c = g.free();
    for p in pins {
        let v = g.pin(p.clone());
        g.edge(c, v);
    }
    g
}

// ---------------------------------------------------------------------------
// convolution checks

#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    Std,
    Log,
    Triple(LatticePoint),
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl RatioReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        RatioReport { lhs, rhs, ratio: lhs / rhs }
    }
}

/// Truncated left side of a convolution estimate against its right side
/// without the constant. For `Triple` the exponents are fixed at 2 − d.
pub fn check_convolution(x: &LatticePoint, y: &LatticePoint, a: f64, b: f64, l: i64, variant: &Variant) -> Result<RatioReport> {
    let d = x.dim();
    let df = d as f64;
    let mut g = Diagram::new(d);
    let z = g.free();
    let px = g.pin(x.clone());
    let py = g.pin(y.clone());
    let rhs = match variant {
        Variant::Std => {
            if !(a > 0.0 && b > 0.0 && a + b < df) {
                return Err(Error::Domain(format!("std convolution needs a, b > 0 and a + b < d; got a={a}, b={b}, d={d}")));
            }
            g.edge_with(z, px, a - df);
            g.edge_with(z, py, b - df);
            bracket(x, y).powf(a + b - df)
        }
        Variant::Log => {
            if !(a == 0.0 && b > 0.0 && b < df) {
                return Err(Error::Domain(format!("log convolution needs a = 0 and 0 < b < d; got a={a}, b={b}")));
            }
            if x == y {
                return Err(Error::Domain("log convolution needs x ≠ y".into()));
            }
            g.edge_with(z, px, -df);
            g.edge_with(z, py, b - df);
            bracket(x, y).powf(b - df) * bracket(x, y).ln()
        }
        Variant::Triple(w) => {
            if d <= 4 {
                return Err(Error::Domain("triple-product estimate needs d > 4".into()));
            }
            let pw = g.pin(w.clone());
            for p in [px, py, pw] {
                g.edge(z, p);
            }
            triple_rhs(x, y, w)
        }
    };
    let lhs = val_exact(&g, &LatticeBox::centered(d, l))?;
    Ok(RatioReport::new(lhs, rhs))
}

/// Default truncation radius: four times the largest pin magnitude.
pub fn default_truncation(pins: &[&LatticePoint]) -> i64 {
    4 * pins.iter().map(|p| p.coords().iter().map(|c| c.abs()).max().unwrap_or(0)).max().unwrap_or(0).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Std,
    Log,
    Triple,
}

/// One instance of the convolution checks: x is always the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvCase {
    pub x: LatticePoint,
    pub y: LatticePoint,
    pub w: Option<LatticePoint>,
}

/// Smallest sup-norm separation between pins in [`convolution_family`].
/// Below this the ratios are still climbing towards their large-separation
/// value (at d = 7 the std ratio at |y| = 1 is a fifth of its limit).
pub const MIN_SEPARATION: i64 = 3;

/// The fixed instance family for a variant: 30 separations for `Std`
/// (five directions, sup-norm 3–16), 8 for `Log`, and 20 seeded random
/// triples in the first three coordinates for `Triple`; all pins pairwise
/// at least [`MIN_SEPARATION`] apart.
pub fn convolution_family(d: usize, kind: VariantKind) -> Vec<ConvCase> {
    let dir = |v: &[i64], m: i64| {
        let mut c = vec![0i64; d];
        for (i, x) in v.iter().enumerate() {
            c[i] = x * m;
        }
        LatticePoint::new(c)
    };
    let case = |y: LatticePoint| ConvCase {
        x: LatticePoint::origin(d),
        y,
        w: None,
    };
    match kind {
        VariantKind::Std => {
            let mut out = Vec::new();
            for m in [3, 4, 5, 6, 8, 10, 12, 16] {
                out.push(case(dir(&[1], m)));
                out.push(case(dir(&[1, 1], m)));
            }
            for m in 3..=7 {
                out.push(case(dir(&[1, 1, 1], m)));
            }
            for m in [2, 3, 4, 5, 6, 8] {
                out.push(case(dir(&[1, 2], m)));
            }
            for m in 2..=4 {
                out.push(case(dir(&[2, 1, 1], m)));
            }
            out
        }
        VariantKind::Log => [4, 8, 12, 16]
            .iter()
            .flat_map(|&m| [case(dir(&[1], m)), case(dir(&[1, 1], m))])
            .collect(),
        VariantKind::Triple => {
            use rand::Rng;
            let mut rng = crate::rng::stream(0x7219, d as u64);
            let mut out = Vec::new();
            while out.len() < 20 {
                let mut pt = || dir(&[rng.random_range(-6..=6), rng.random_range(-6..=6), rng.random_range(-6..=6)], 1);
                let (y, w) = (pt(), pt());
                let o = LatticePoint::origin(d);
                let far = |a: &LatticePoint, b: &LatticePoint| a.sup_dist(b) >= MIN_SEPARATION;
                if far(&y, &o) && far(&w, &o) && far(&y, &w) {
                    out.push(ConvCase {
                        x: o,
                        y,
                        w: Some(w),
                    });
                }
            }
            out
        }
    }
}

/// Runs [`check_convolution`] over [`convolution_family`] with the default
/// truncation. For `Log`, `a` is ignored (taken as 0).
pub fn run_convolution_family(d: usize, a: f64, b: f64, kind: VariantKind) -> Result<Vec<(ConvCase, RatioReport)>> {
    convolution_family(d, kind)
        .into_iter()
        .map(|c| {
            let (variant, a) = match (&c.w, kind) {
                (Some(w), _) => (Variant::Triple(w.clone()), a),
                (None, VariantKind::Log) => (Variant::Log, 0.0),
                (None, _) => (Variant::Std, a),
            };
            let mut pins = vec![&c.x, &c.y];
            if let Some(w) = &c.w {
                pins.push(w);
            }
            let l = default_truncation(&pins);
            let r = check_convolution(&c.x, &c.y, a, b, l, &variant)?;
            Ok((c, r))
        })
        .collect()
}

/// Cyclic sum of min{⟨x−y⟩, ⟨x−w⟩}² / (⟨x−y⟩^{d−2} ⟨x−w⟩^{d−2}).
pub fn triple_rhs(x: &LatticePoint, y: &LatticePoint, w: &LatticePoint) -> f64 {
    let d = x.dim() as f64;
    let term = |x: &LatticePoint, y: &LatticePoint, w: &LatticePoint| {
        let (a, b) = (bracket(x, y), bracket(x, w));
        a.min(b).powi(2) / (a.powf(d - 2.0) * b.powf(d - 2.0))
    };
    term(x, y, w) + term(y, w, x) + term(w, x, y)
}

/// Σ_w ⟨w−u⟩^{2−d}⟨w−v⟩^{2−d}⟨w−w_1⟩^{2−d} against
/// n²(n^{2−d} + ⟨u−w_1⟩^{2−d} + ⟨v−w_1⟩^{2−d})⟨u−v⟩^{2−d}.
pub fn interior_delta_ratio(u: &LatticePoint, v: &LatticePoint, w1: &LatticePoint, n: f64, l: i64) -> Result<RatioReport> {
    let d = u.dim();
    let e = 2.0 - d as f64;
    let lhs = val_exact(&star_diagram(&[u.clone(), v.clone(), w1.clone()]), &LatticeBox::centered(d, l))?;
    let rhs = n * n * (n.powf(e) + bracket(u, w1).powf(e) + bracket(v, w1).powf(e)) * bracket(u, v).powf(e);
    Ok(RatioReport::new(lhs, rhs))
}

/// The path-reduction estimate, constant and n-power both stripped.
pub fn path_reduction_ratio(
    u: &LatticePoint,
    v: &LatticePoint,
    w: [&LatticePoint; 3],
    n: f64,
    l: i64,
) -> Result<RatioReport> {
    let d = u.dim();
    let e = 2.0 - d as f64;
    let k = |a: &LatticePoint, b: &LatticePoint| bracket(a, b).powf(e);
    let inner = val_exact(&star_diagram(&[u.clone(), v.clone(), w[0].clone()]), &LatticeBox::centered(d, l))?;
    let lhs = k(u, w[1]) * k(v, w[2]) * inner;
    let rhs = n.powf(4.0 - d as f64) * (k(u, w[0]) + k(u, w[1])) * (k(v, w[2]) + k(v, w[0])) * k(u, v);
    Ok(RatioReport::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// contraction

#[derive(Clone, Debug, Serialize)]
pub struct ContractionCertificate {
    pub vertex: usize,
    pub parent: usize,
    pub leaves: (usize, usize),
    /// n-power in val(S) ≤ C n^{4−d} (val(S¹) + val(S²)).
    pub exponent: f64,
}

/// Deletes free vertex v with pinned leaf children w_1, w_2 and parent p,
/// giving S^(i) with p joined directly to w_i.
pub fn contract_cherry(diagram: &Diagram, v: usize) -> Result<((Diagram, Diagram), ContractionCertificate)> {
    if diagram.roles.get(v) != Some(&Role::Free) || diagram.degree(v) != 3 {
        return Err(Error::Precondition(format!("vertex {v} is not a free vertex of degree three")));
    }
    let nb = diagram.neighbors(v);
    let leaf = |u: usize| matches!(diagram.roles[u], Role::Pinned(_)) && diagram.degree(u) == 1;
    // the parent is the non-leaf neighbour; in a bare 3-star, the first one
    let parent = nb.iter().copied().find(|&u| !leaf(u)).unwrap_or(nb[0]);
    let leaves: Vec<usize> = nb.iter().copied().filter(|&u| u != parent).collect();
    if leaves.len() != 2 || !leaves.iter().all(|&u| leaf(u)) {
        return Err(Error::Precondition(format!("vertex {v} does not carry two pinned leaves")));
    }
    let (w1, w2) = (leaves[0], leaves[1]);
    let build = |keep: usize, drop: usize| {
        // remove v and `drop`, rewire p—v into p—keep
        let mut edges = Vec::new();
        for e in &diagram.edges {
            if (e.a == v && e.b == keep) || (e.b == v && e.a == keep) || e.a == drop || e.b == drop {
                continue;
            }
            let mut e2 = *e;
            if e2.a == v {
                e2.a = keep;
            }
            if e2.b == v {
                e2.b = keep;
            }
            edges.push(e2);
        }
        let removed = [v.min(drop), v.max(drop)];
        let remap = |x: usize| x - removed.iter().filter(|&&r| r < x).count();
        let roles = diagram
            .roles
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, r)| r.clone())
            .collect();
        Diagram {
            d: diagram.d,
            roles,
            edges: edges
                .into_iter()
                .map(|e| DiagramEdge {
                    a: remap(e.a),
                    b: remap(e.b),
                    exponent: e.exponent,
                })
                .collect(),
        }
    };
    let cert = ContractionCertificate {
        vertex: v,
        parent,
        leaves: (w1, w2),
        exponent: 4.0 - diagram.d as f64,
    };
    Ok(((build(w1, w2), build(w2, w1)), cert))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionLedger {
    pub steps: Vec<ContractionCertificate>,
    /// Accumulated n-power, (4 − d) per contraction.
    pub exponent: f64,
    /// Final single-edge terms v—w_i with multiplicities.
    pub residual: Vec<(LatticePoint, LatticePoint, usize)>,
}

/// Contracts cherries until every term is a single edge.
pub fn tree_reduce(diagram: &Diagram) -> Result<ReductionLedger> {
    let free = diagram.free_vertices();
    if free.iter().any(|&v| diagram.degree(v) != 3)
        || diagram.edges.len() + 1 != diagram.roles.len()
        || diagram.pinned().iter().any(|&(u, _)| diagram.degree(u) != 1)
    {
        return Err(Error::Precondition("tree reduction needs a binary tree with pinned leaves".into()));
    }
    let mut terms = vec![diagram.clone()];
    let mut steps = Vec::new();
    loop {
        let Some(cur) = terms.first() else { break };
        let cherry = cur.free_vertices().into_iter().find(|&v| contract_cherry(cur, v).is_ok());
        let Some(v) = cherry else { break };
        let mut next = Vec::new();
        let mut cert = None;
        for t in &terms {
            // every term has the same shape, so the same vertex contracts
            let ((a, b), c) = contract_cherry(t, v)?;
            cert = Some(c);
            next.push(a);
            next.push(b);
        }
        steps.push(cert.expect("at least one term"));
        terms = next;
    }
    let mut residual: Vec<(LatticePoint, LatticePoint, usize)> = Vec::new();
    for t in &terms {
        if !t.free_vertices().is_empty() || t.edges.len() != 1 {
            return Err(Error::Precondition("tree did not reduce to single edges".into()));
        }
        let e = t.edges[0];
        let pt = |i: usize| match &t.roles[i] {
            Role::Pinned(p) => p.clone(),
            Role::Free => unreachable!(),
        };
        let (a, b) = (pt(e.a), pt(e.b));
        match residual.iter_mut().find(|r| (r.0 == a && r.1 == b) || (r.0 == b && r.1 == a)) {
            Some(r) => r.2 += 1,
            None => residual.push((a, b, 1)),
        }
    }
    Ok(ReductionLedger {
        exponent: steps.len() as f64 * (4.0 - diagram.d as f64),
        steps,
        residual,
    })
}

// ---------------------------------------------------------------------------
// regions and fits

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Consecutive separations ≥ εn and |x_i| ≤ n/ε.
    G,
    /// Last point g: min_i |g − x_i| ≥ εn over the others and |g − x_0| ≤ n/ε.
    F,
}

fn euclid(a: &LatticePoint, b: &LatticePoint) -> f64 {
    dist2(a.coords(), b.coords()).sqrt()
}

pub fn region_filter(points: &[LatticePoint], eps: f64, n: f64, kind: Region) -> bool {
    if points.len() < 2 || eps <= 0.0 || n < 1.0 {
        return false;
    }
    let (near, far) = (eps * n, n / eps);
    match kind {
        Region::G => {
            points.windows(2).all(|w| euclid(&w[0], &w[1]) >= near)
                && points.iter().all(|p| norm2(p.coords()).sqrt() <= far)
        }
        Region::F => {
            let (g, rest) = points.split_last().expect("nonempty");
            rest.iter().all(|x| euclid(g, x) >= near) && euclid(g, &rest[0]) <= far
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_max: f64,
    /// (log n, log value).
    pub points: Vec<(f64, f64)>,
}

/// Least-squares line through (log n, log value).
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Domain("a scaling fit needs at least three points".into()));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(Error::Domain(format!("scaling fit needs positive n and values; got ({n}, {v})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("scaling fit needs at least two distinct n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_max = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        slope,
        intercept,
        residual_max,
        points: logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[i64]) -> LatticePoint {
        LatticePoint::new(v.to_vec())
    }

    #[test]
    fn riesz_values() {
        let p = KernelParams::standard(7);
        assert_eq!(riesz(&[0.0; 7], &p), 1.0);
        let mut e1 = [0.0; 7];
        e1[0] = 1.0;
        assert!((riesz(&e1, &p) - 2f64.powf(-2.5)).abs() < 1e-15);
        assert!((bracket_pow(3.0, -5.0) - 4f64.powf(-2.5)).abs() < 1e-16);
        assert!((bracket_pow(3.0, -0.7) - 4f64.powf(-0.35)).abs() < 1e-16);
    }

    #[test]
    fn slice_radial_matches_brute_force() {
        let pins = [pt(&[0, 0, 0, 0]), pt(&[3, 0, 0, 0]), pt(&[0, -2, 0, 0])];
        let g = star_diagram(&pins);
        let b = LatticeBox::centered(4, 5);
        let fast = val_exact(&g, &b).unwrap();
        let slow = brute_force_sum(&g, &b).unwrap();
        assert!((fast - slow).abs() < 1e-12 * slow);
    }

    #[test]
    fn square_histogram_counts() {
        let h = square_sum_histogram(2, 1);
        assert_eq!(h, vec![1.0, 4.0, 4.0]);
    }

    #[test]
    fn radial_pmf_sums_to_one() {
        let law = RadialLaw::new(3, -1.0, 4);
        let c = [0i64, 1, -1];
        let b = LatticeBox::new(pt(&c), 4);
        let total: f64 = b.points().iter().map(|z| law.pmf(&c, z.coords())).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&n: &f64| (n, 5.0 * n.powi(3))).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
        assert!(f.residual_max < 1e-12);
    }

    #[test]
    fn region_examples() {
        let o = pt(&[0, 0, 0, 0, 0, 0, 0]);
        assert!(!region_filter(&[o.clone(), o.clone(), o.clone()], 0.1, 10.0, Region::G));
        let a = LatticePoint::axis(7, 0, 10);
        let b = LatticePoint::axis(7, 1, 10);
        assert!(region_filter(&[o.clone(), a, b], 0.1, 10.0, Region::G));
        let c = LatticePoint::axis(7, 0, 1);
        assert!(region_filter(&[o, c], 0.1, 10.0, Region::G));
    }

    #[test]
    fn contraction_shape() {
        let mut g = Diagram::new(3);
        let v = g.free();
        let p = g.pin(pt(&[0, 0, 0]));
        let w1 = g.pin(pt(&[5, 0, 0]));
        let w2 = g.pin(pt(&[0, 5, 0]));
        g.edge(v, p);
        g.edge(v, w1);
        g.edge(v, w2);
        let ((a, b), cert) = contract_cherry(&g, v).unwrap();
        assert_eq!(cert.parent, p);
        assert_eq!(a.edges.len(), 1);
        assert_eq!(b.edges.len(), 1);
        assert!(a.free_vertices().is_empty());
        let l = tree_reduce(&g).unwrap();
        assert_eq!(l.exponent, 1.0);
        assert_eq!(l.residual.len(), 2);
    }
}
