//! Continuum tree integrals I_T and the predicted k-point limit constant.
//!
//! I_T(y_0..y_{k−1}) = ∫ Π_{edges ab} |u_a − u_b|^{2−d} Π du_v, the product over
//! the edges of a tree in 𝔗_k with leaves pinned at the y's and the k − 2
//! internal vertices integrated over R^d.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::beta;
use crate::rng::StreamRng;
use crate::stats::{chunked_moments, MCEstimate};
use crate::trees::{enumerate_trees, AbstractTree};

/// A point of R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContinuumPoint(pub Vec<f64>);

impl ContinuumPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ContinuumPoint(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        ContinuumPoint(self.0.iter().map(|x| x * s).collect())
    }

    pub fn shifted(&self, v: &[f64]) -> Self {
        ContinuumPoint(self.0.iter().zip(v).map(|(x, y)| x + y).collect())
    }
}

/// Relative tolerance (times the diameter) below which two points coincide.
pub const COINCIDENCE_TOL: f64 = 1e-9;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest pairwise distance.
pub fn diameter(y: &[ContinuumPoint]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            m = m.max(dist(&y[i].0, &y[j].0));
        }
    }
    m
}

/// Checks dimensions, finiteness and distinctness.
pub fn check_points(y: &[ContinuumPoint], d: usize) -> Result<()> {
    if let Some(p) = y.iter().find(|p| p.dim() != d) {
        return Err(Error::Domain(format!("point of dimension {} in d = {d}", p.dim())));
    }
    if y.iter().flat_map(|p| &p.0).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite coordinate".into()));
    }
    let tol = COINCIDENCE_TOL * diameter(y);
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            if dist(&y[i].0, &y[j].0) <= tol {
                return Err(Error::Precondition(format!("points {i} and {j} coincide; the y's must be distinct")));
            }
        }
    }
    Ok(())
}

/// Surface area of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// (4 − d)k + d − 6: I_T(λy) = λ^{this} I_T(y) for T ∈ 𝔗_k.
pub fn homogeneity_exponent(k: usize, d: usize) -> i64 {
    (4 - d as i64) * k as i64 + d as i64 - 6
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Isotropic law on R^d with radial density r/R² on [0, R] and R²/r³
/// beyond: density ∝ |x|^{2−d} near the centre, matching the kernel's pole,
/// and a Pareto tail.
#[derive(Clone, Copy, Debug)]
pub struct PoleLaw {
    pub d: usize,
    pub scale: f64,
    area: f64,
}

impl PoleLaw {
    pub fn new(d: usize, scale: f64) -> Self {
        PoleLaw {
            d,
            scale,
            area: sphere_area(d),
        }
    }

    pub fn sample(&self, center: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let u: f64 = 1.0 - rng.random::<f64>();
        let r = if rng.random::<bool>() {
            self.scale * u.sqrt()
        } else {
            self.scale / u.sqrt()
        };
        let g: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        center.iter().zip(&g).map(|(c, x)| c + r * x / norm).collect()
    }

    pub fn density(&self, center: &[f64], x: &[f64]) -> f64 {
        let r = dist(center, x);
        let rr = self.scale;
        let h = if r <= rr { r / (rr * rr) } else { rr * rr / (r * r * r) };
        h / (self.area * r.powi(self.d as i32 - 1))
    }
}

/// Internal vertices in breadth-first order from leaf 0, each with the
/// internal neighbours drawn before it.
fn sampling_order(tree: &AbstractTree) -> Vec<(usize, Vec<usize>)> {
    let adj = tree.adjacency();
    let mut seen = vec![false; tree.num_nodes()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut order: Vec<usize> = Vec::new();
    while let Some(x) = queue.pop_front() {
        if !tree.is_leaf(x) {
            order.push(x);
        }
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    order
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let earlier = adj[v].iter().copied().filter(|u| order[..i].contains(u)).collect();
            (v, earlier)
        })
        .collect()
}

/// Importance-sampling estimate of I_T. Each internal vertex is drawn from
/// an equal mixture of [`PoleLaw`]s centred at every leaf and at its
/// already-drawn internal neighbours, with scale twice the diameter of y.
pub fn eval_i_t(tree: &AbstractTree, y: &[ContinuumPoint], d: usize, samples: u64, seed: u64) -> Result<MCEstimate> {
    tree.validate()?;
    if y.len() != tree.k() {
        return Err(Error::Domain(format!("tree has {} leaves but {} points were given", tree.k(), y.len())));
    }
    if d < 5 {
        return Err(Error::Domain(format!("I_T needs d >= 5, got {d}")));
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    check_points(y, d)?;
    let law = PoleLaw::new(d, 2.0 * diameter(y));
    let order = sampling_order(tree);
    let k = tree.k();
    let e = 2.0 - d as f64;
    let draw = |rng: &mut StreamRng| {
        let mut u: Vec<Vec<f64>> = vec![Vec::new(); tree.num_nodes()];
        for (i, p) in y.iter().enumerate() {
            u[i] = p.0.clone();
        }
        let mut q = 1.0;
        for (v, earlier) in &order {
            let m = k + earlier.len();
            let a = rng.random_range(0..m);
            let c = if a < k { a } else { earlier[a - k] };
            let x = law.sample(&u[c], rng);
            let dens = (0..k).chain(earlier.iter().copied()).map(|c| law.density(&u[c], &x)).sum::<f64>() / m as f64;
            q *= dens;
            u[*v] = x;
        }
        let f: f64 = tree.edges().iter().map(|&(a, b)| dist(&u[a], &u[b]).powf(e)).product();
        f / q
    };
    Ok(chunked_moments(seed, samples, draw).estimate(seed))
}

// ---------------------------------------------------------------------------
// quadrature

/// Resolution of [`quad_i3`]: Gauss–Legendre nodes per panel (the error
/// estimate compares `nodes` with `2 * nodes`) and outer cutoff in units of
/// the diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadParams {
    pub nodes: usize,
    pub cutoff: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams { nodes: 4, cutoff: 40.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    /// Refinement delta plus the tail bound.
    pub error: f64,
    /// Analytic tail beyond the cutoff, included in `value`.
    pub tail: f64,
    pub tail_bound: f64,
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, z);
                for j in 2..=n {
                    let q2 = ((2 * j - 1) as f64 * z * q1 - (j - 1) as f64 * q0) / j as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let (qn, qn1) = if n == 1 { (z, 1.0) } else { (q1, q0) };
                let dq = n as f64 * (z * qn - qn1) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// Nodes and weights of a composite rule over consecutive breakpoints.
fn composite(breaks: &[f64], gl: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = 0.5 * (b - a);
        for (x, wt) in gl.0.iter().zip(&gl.1) {
            out.push((a + h * (1.0 + x), h * wt));
        }
    }
    out
}

/// The three-point integral ∫ |x|^{2−d} |x − y_1|^{2−d} |x − y_2|^{2−d} dx.
///
/// The points span a plane; the integrand depends only on the in-plane
/// coordinates and the distance to the plane, which leaves a three-dimensional
/// integral. A partition of unity w_i ∝ |x − p_i|^{−d} splits it into one
/// piece per pole, each integrated in spherical coordinates around its pole
/// (where it is smooth) out to the cutoff; the tail beyond uses the
/// |x|^{3(2−d)} decay.
pub fn quad_i3(y1: &ContinuumPoint, y2: &ContinuumPoint, d: usize, params: QuadParams) -> Result<QuadResult> {
    if d < 5 {
        return Err(Error::Domain(format!("quad_i3 needs d >= 5, got {d}")));
    }
    let zero = ContinuumPoint(vec![0.0; d]);
    check_points(&[zero, y1.clone(), y2.clone()], d)?;
    let poles = plane_coordinates(&y1.0, &y2.0);
    let coarse = quad_pieces(&poles, d, params.nodes, params.cutoff);
    let fine = quad_pieces(&poles, d, 2 * params.nodes, params.cutoff);
    let diam = diameter(&[ContinuumPoint(vec![0.0; d]), y1.clone(), y2.clone()]);
    let s = params.cutoff * diam;
    // every piece is cut at distance s from its own pole; asymptotically each
    // carries a third of the |x|^{3(2−d)} tail
    let tail = sphere_area(d) * s.powf(6.0 - 2.0 * d as f64) / (2.0 * d as f64 - 6.0);
    // on |x − p_i| ≥ s the integrand and weights are within these factors of
    // their asymptotic forms
    let f = (s / (s - diam)).powf((3 * (d - 2) + d) as f64);
    let tail_bound = tail * (f - 1.0);
    let value = fine + tail;
    Ok(QuadResult {
        value,
        error: (fine - coarse).abs() + tail_bound,
        tail,
        tail_bound,
    })
}

/// The poles 0, y_1, y_2 in orthonormal coordinates of a plane containing them.
fn plane_coordinates(y1: &[f64], y2: &[f64]) -> [[f64; 2]; 3] {
    let n1 = y1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e1: Vec<f64> = y1.iter().map(|x| x / n1).collect();
    let a2: f64 = y2.iter().zip(&e1).map(|(x, e)| x * e).sum();
    let perp: Vec<f64> = y2.iter().zip(&e1).map(|(x, e)| x - a2 * e).collect();
    let b2 = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    [[0.0, 0.0], [n1, 0.0], [a2, b2]]
}

fn quad_pieces(poles: &[[f64; 2]; 3], d: usize, nodes: usize, cutoff: f64) -> f64 {
    use std::f64::consts::PI;
    let gl = gauss_legendre(nodes);
    let pd = |i: usize, j: usize| ((poles[i][0] - poles[j][0]).powi(2) + (poles[i][1] - poles[j][1]).powi(2)).sqrt();
    let diam = pd(0, 1).max(pd(0, 2)).max(pd(1, 2));
    let e = 2.0 - d as f64;
    let q = d as f64;
    let mut total = 0.0;
    for i in 0..3 {
        let near = (0..3).filter(|&j| j != i).map(|j| pd(i, j)).fold(f64::INFINITY, f64::min);
        // graded radial breakpoints: fine around the other poles, geometric outside
        let mut sb = vec![0.0, 0.25 * near, 0.5 * near, 0.75 * near];
        for j in 0..3 {
            if j != i {
                let r = pd(i, j);
                for f in [0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.25] {
                    sb.push(f * r);
                }
            }
        }
        let mut x = 1.5 * diam;
        while x < cutoff * diam {
            sb.push(x);
            x *= 1.6;
        }
        sb.push(cutoff * diam);
        sb.sort_by(f64::total_cmp);
        sb.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * diam);
        // angular breakpoints: refine towards the other poles (ψ = 0 is in-plane)
        let mut pb: Vec<f64> = (0..=16).map(|t| 2.0 * PI * t as f64 / 16.0).collect();
        for j in 0..3 {
            if j != i {
                let a = (poles[j][1] - poles[i][1]).atan2(poles[j][0] - poles[i][0]).rem_euclid(2.0 * PI);
                for off in [-0.2, -0.08, -0.02, 0.0, 0.02, 0.08, 0.2] {
                    let t = a + off;
                    if t > 0.0 && t < 2.0 * PI {
                        pb.push(t);
                    }
                }
            }
        }
        pb.sort_by(f64::total_cmp);
        pb.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let psib = [0.0, 0.02, 0.08, 0.2, 0.45, 0.8, 1.2, PI / 2.0];
        let srule = composite(&sb, &gl);
        let prule = composite(&pb, &gl);
        let psirule = composite(&psib, &gl);
        let mut piece = 0.0;
        for &(psi, wpsi) in &psirule {
            let (sp, cp) = psi.sin_cos();
            let ang = wpsi * cp * sp.powi(d as i32 - 3);
            for &(phi, wphi) in &prule {
                let (sf, cf) = phi.sin_cos();
                let mut acc = 0.0;
                for &(s, ws) in &srule {
                    let a = poles[i][0] + s * cp * cf;
                    let b = poles[i][1] + s * cp * sf;
                    let rho2 = (s * sp).powi(2);
                    let r2: [f64; 3] =
                        std::array::from_fn(|j| (a - poles[j][0]).powi(2) + (b - poles[j][1]).powi(2) + rho2);
                    // w_i f with w_i = r_i^{−q} / Σ r_j^{−q}, written to stay finite at r_i → 0
                    let denom: f64 = (0..3).map(|j| (r2[i] / r2[j]).powf(q / 2.0)).sum();
                    let f: f64 = r2.iter().map(|r| r.powf(e / 2.0)).product();
                    acc += ws * s.powi(d as i32 - 1) * f / denom;
                }
                piece += ang * wphi * acc;
            }
        }
        total += piece;
    }
    // ∫ over S^{d−3} of the normal directions
    total * sphere_area(d - 2)
}

// ---------------------------------------------------------------------------
// the limit constant

/// Inputs of the limit constant; β is derived from p_c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitInputs {
    pub alpha: f64,
    pub p_c: f64,
    pub rho: f64,
    pub d: usize,
}

impl LimitInputs {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("alpha", self.alpha)?;
        pos("rho", self.rho)?;
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            return Err(Error::Domain(format!("p_c must lie in (0, 1), got {}", self.p_c)));
        }
        if self.d <= 6 {
            return Err(Error::Domain(format!("the k-point limit requires d > 6, got d = {}", self.d)));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        beta(self.p_c)
    }
}

/// How each I_T is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    MonteCarlo { samples: u64, seed: u64 },
    /// Deterministic quadrature; k = 3 only.
    Quadrature(QuadParams),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeTerm {
    pub tree: String,
    pub integral: f64,
    pub stderr: f64,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub value: f64,
    /// Term errors combined in quadrature.
    pub stderr: f64,
    pub terms: Vec<TreeTerm>,
}

/// Σ_T α^{2k−3} (2dβρ)^{k−2} I_T(y), over all of 𝔗_k or the given subset.
pub fn predicted_kpoint_constant(
    y: &[ContinuumPoint],
    inputs: &LimitInputs,
    trees: Option<&[AbstractTree]>,
    integrator: Integrator,
) -> Result<Prediction> {
    inputs.validate()?;
    let k = y.len();
    let all;
    let trees = match trees {
        Some(t) => t,
        None => {
            all = enumerate_trees(k)?;
            &all[..]
        }
    };
    let d = inputs.d;
    check_points(y, d)?;
    let vertex = 2.0 * d as f64 * inputs.beta() * inputs.rho;
    let mut terms = Vec::with_capacity(trees.len());
    for (ti, t) in trees.iter().enumerate() {
        if t.k() != k {
            return Err(Error::Domain(format!("tree {t} does not have {k} leaves")));
        }
        let coefficient = inputs.alpha.powi(t.num_edges() as i32) * vertex.powi(t.num_internal() as i32);
        let (integral, stderr) = match integrator {
            Integrator::MonteCarlo { samples, seed } => {
                let e = eval_i_t(t, y, d, samples, crate::rng::mix(seed, ti as u64))?;
                (e.mean, e.stderr)
            }
            Integrator::Quadrature(params) => {
                if k != 3 {
                    return Err(Error::Domain("quadrature is available for k = 3 only".into()));
                }
                let rel = |p: &ContinuumPoint| ContinuumPoint(p.0.iter().zip(&y[0].0).map(|(a, b)| a - b).collect());
                let r = quad_i3(&rel(&y[1]), &rel(&y[2]), d, params)?;
                (r.value, r.error)
            }
        };
        terms.push(TreeTerm {
            tree: t.newick(),
            integral,
            stderr,
            coefficient,
        });
    }
    let value = terms.iter().map(|t| t.coefficient * t.integral).sum();
    let stderr = terms.iter().map(|t| (t.coefficient * t.stderr).powi(2)).sum::<f64>().sqrt();
    Ok(Prediction { value, stderr, terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn pole_law_is_normalised_radially() {
        // ∫ h(r) dr over [0, ∞) = 1: check ∫ density · area · r^{d−1} dr numerically
        let law = PoleLaw::new(7, 1.0);
        let c = [0.0; 7];
        let mut s = 0.0;
        let n = 200_000;
        let rmax: f64 = 1e4;
        for i in 0..n {
            // log-spaced
            let t0 = (i as f64 / n as f64) * (rmax.ln() + 10.0) - 10.0;
            let t1 = ((i + 1) as f64 / n as f64) * (rmax.ln() + 10.0) - 10.0;
            let r = (0.5 * (t0 + t1)).exp();
            let mut x = [0.0; 7];
            x[0] = r;
            s += law.density(&c, &x) * sphere_area(7) * r.powi(6) * r * (t1 - t0);
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn homogeneity_exponents() {
        assert_eq!(homogeneity_exponent(3, 7), -8);
        assert_eq!(homogeneity_exponent(4, 7), -11);
    }
}
