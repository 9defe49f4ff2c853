use percolab::integrals::{
    eval_i_t, homogeneity_exponent, predicted_kpoint_constant, quad_i3, ContinuumPoint, Integrator, LimitInputs,
    QuadParams,
};
use percolab::trees::{enumerate_trees, AbstractTree};
use percolab::Error;

fn pt(c: &[f64]) -> ContinuumPoint {
    ContinuumPoint::new(c.to_vec())
}

fn axis(d: usize, i: usize, s: f64) -> ContinuumPoint {
    let mut c = vec![0.0; d];
    c[i] = s;
    ContinuumPoint::new(c)
}

fn inputs(alpha: f64, p_c: f64, rho: f64) -> LimitInputs {
    LimitInputs { alpha, p_c, rho, d: 7 }
}

#[test]
fn three_point_quadrature_reference_value() {
    let q = quad_i3(&axis(7, 0, 1.0), &axis(7, 1, 1.0), 7, QuadParams { nodes: 6, cutoff: 40.0 }).unwrap();
    assert!((q.value - 14.107019004).abs() < 1e-6, "got {}", q.value);
    assert!(q.error < 1e-3);
}

#[test]
fn quadrature_symmetries() {
    let p = QuadParams::default();
    let a = pt(&[1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let b = pt(&[-0.3, 1.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let q = quad_i3(&a, &b, 7, p).unwrap();
    let ab = q.value;
    let ba = quad_i3(&b, &a, 7, p).unwrap().value;
    assert!((ab - ba).abs() <= q.error, "{ab} vs {ba}");
    // rotation by 90° in the (0, 2) plane
    let rot = |x: &ContinuumPoint| {
        let mut c = x.0.clone();
        let (u, w) = (c[0], c[2]);
        c[0] = -w;
        c[2] = u;
        ContinuumPoint::new(c)
    };
    let r = quad_i3(&rot(&a), &rot(&b), 7, p).unwrap();
    assert!((r.value - ab).abs() <= r.error.max(1e-9 * ab), "{} vs {}", r.value, ab);
}

#[test]
fn doubling_the_cutoff_stays_within_the_tail_bound() {
    let y1 = axis(7, 0, 1.0);
    let y2 = axis(7, 1, 1.0);
    let short = quad_i3(&y1, &y2, 7, QuadParams { nodes: 4, cutoff: 20.0 }).unwrap();
    let long = quad_i3(&y1, &y2, 7, QuadParams { nodes: 4, cutoff: 40.0 }).unwrap();
    assert!((short.value - long.value).abs() <= short.tail_bound + long.error);
}

#[test]
fn monte_carlo_symmetries() {
    let star = AbstractTree::star3();
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    let base = eval_i_t(&star, &y, 7, 200_000, 3).unwrap();
    let shift = [0.3, -0.2, 0.0, 0.1, 0.0, 0.0, 0.5];
    let moved: Vec<_> = y.iter().map(|p| p.shifted(&shift)).collect();
    let translated = eval_i_t(&star, &moved, 7, 200_000, 4).unwrap();
    assert!(base.z_distance(&translated) < 4.0);
    let swapped = [y[0].clone(), y[2].clone(), y[1].clone()];
    let sw = eval_i_t(&star, &swapped, 7, 200_000, 5).unwrap();
    assert!(base.z_distance(&sw) < 4.0);
}

#[test]
fn four_point_homogeneity() {
    let tree = &enumerate_trees(4).unwrap()[0];
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0), axis(7, 2, 1.0)];
    let y2: Vec<_> = y.iter().map(|p| p.scaled(2.0)).collect();
    let a = eval_i_t(tree, &y, 7, 400_000, 8).unwrap();
    let b = eval_i_t(tree, &y2, 7, 400_000, 9).unwrap();
    let factor = 2f64.powi(homogeneity_exponent(4, 7) as i32);
    let ratio = b.mean / a.mean;
    let sd = ratio * (a.rel_err().powi(2) + b.rel_err().powi(2)).sqrt();
    assert!((ratio - factor).abs() < 4.0 * sd, "ratio {ratio}, expected {factor} ± {sd}");
}

#[test]
fn stderr_shrinks_like_inverse_root() {
    let star = AbstractTree::star3();
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    let small = eval_i_t(&star, &y, 7, 20_000, 21).unwrap();
    let large = eval_i_t(&star, &y, 7, 320_000, 21).unwrap();
    let slope = (large.stderr / small.stderr).ln() / 16f64.ln();
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn worker_count_does_not_change_the_sum() {
    let star = AbstractTree::star3();
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| eval_i_t(&star, &y, 7, 50_000, 12)).unwrap();
    let a2 = one.install(|| eval_i_t(&star, &y, 7, 50_000, 12)).unwrap();
    let b = four.install(|| eval_i_t(&star, &y, 7, 50_000, 12)).unwrap();
    assert_eq!(a.mean.to_bits(), a2.mean.to_bits());
    assert!((a.mean - b.mean).abs() <= 1e-10 * a.mean.abs());
}

#[test]
fn invalid_point_sets_are_rejected() {
    let star = AbstractTree::star3();
    let dup = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 0, 1.0)];
    assert!(matches!(eval_i_t(&star, &dup, 7, 100, 1), Err(Error::Precondition(_))));
    let wrong_dim = [pt(&[0.0; 6]), axis(6, 0, 1.0), axis(6, 1, 1.0)];
    assert!(eval_i_t(&star, &wrong_dim, 7, 100, 1).is_err());
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    assert!(eval_i_t(&star, &y, 7, 0, 1).is_err());
    assert!(eval_i_t(&star, &y[..2], 7, 100, 1).is_err());
}

#[test]
fn prediction_scales_with_its_inputs() {
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    let quad = Integrator::Quadrature(QuadParams::default());
    let base = predicted_kpoint_constant(&y, &inputs(1.0, 0.5, 1.0), None, quad).unwrap();
    let alpha2 = predicted_kpoint_constant(&y, &inputs(2.0, 0.5, 1.0), None, quad).unwrap();
    let rho3 = predicted_kpoint_constant(&y, &inputs(1.0, 0.5, 3.0), None, quad).unwrap();
    assert!((alpha2.value / base.value - 8.0).abs() < 1e-12);
    assert!((rho3.value / base.value - 3.0).abs() < 1e-12);
    // α³ · 2dβρ with β = 1 at p_c = 1/2
    let i3 = base.terms[0].integral;
    assert!((base.value - 14.0 * i3).abs() < 1e-9 * base.value);
}

#[test]
fn prediction_rejects_bad_inputs() {
    let y = [pt(&[0.0; 7]), axis(7, 0, 1.0), axis(7, 1, 1.0)];
    let mc = Integrator::MonteCarlo { samples: 100, seed: 1 };
    assert!(predicted_kpoint_constant(&y, &inputs(-1.0, 0.5, 1.0), None, mc).is_err());
    assert!(predicted_kpoint_constant(&y, &inputs(1.0, 1.5, 1.0), None, mc).is_err());
    let low = LimitInputs { alpha: 1.0, p_c: 0.5, rho: 1.0, d: 6 };
    assert!(predicted_kpoint_constant(&y, &low, None, mc).is_err());
}
