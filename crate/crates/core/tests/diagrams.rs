use percolab::diagrams::{
    brute_force_sum, check_convolution, contract_cherry, fit_scaling, interior_delta_ratio, one_loop_diagram,
    path_reduction_ratio, riesz_point, star_diagram, tree_reduce, val_exact, val_mc, Diagram, Variant,
};
use percolab::lattice::{LatticeBox, LatticePoint};
use percolab::rng::stream;
use rand::Rng;

fn ax(d: usize, i: usize, s: i64) -> LatticePoint {
    LatticePoint::axis(d, i, s)
}

fn spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

#[test]
fn star_sum_matches_brute_force_and_sampling() {
    let pins = [LatticePoint::origin(5), ax(5, 0, 3), ax(5, 1, 3)];
    let star = star_diagram(&pins);
    let b = LatticeBox::centered(5, 5);
    let exact = val_exact(&star, &b).unwrap();
    let brute = brute_force_sum(&star, &b).unwrap();
    assert!((exact - brute).abs() < 1e-12 * brute, "{exact} vs {brute}");
    let mc = val_mc(&star, &b, 200_000, 2, None).unwrap();
    assert!((mc.mean - exact).abs() < 4.0 * mc.stderr, "{} ± {} vs {exact}", mc.mean, mc.stderr);
}

#[test]
fn truncated_sums_grow_with_the_box() {
    let star = star_diagram(&[LatticePoint::origin(5), ax(5, 0, 2), ax(5, 2, -2)]);
    let vals: Vec<f64> = [3, 5, 8]
        .iter()
        .map(|&l| val_exact(&star, &LatticeBox::centered(5, l)).unwrap())
        .collect();
    assert!(vals[0] < vals[1] && vals[1] < vals[2]);
}

#[test]
fn one_loop_is_symmetric_in_its_pins() {
    let (w1, w2) = (ax(5, 0, 1), ax(5, 1, -1));
    let b = LatticeBox::centered(5, 2);
    let a = val_exact(&one_loop_diagram(&w1, &w2), &b).unwrap();
    let s = val_exact(&one_loop_diagram(&w2, &w1), &b).unwrap();
    assert!((a - s).abs() < 1e-12 * a);
}

#[test]
fn convolution_sums_are_stable_under_doubling_the_box() {
    let y = ax(7, 0, 4);
    let o = LatticePoint::origin(7);
    for v in [Variant::Std, Variant::Log] {
        let a = if matches!(v, Variant::Log) { 0.0 } else { 2.0 };
        let short = check_convolution(&o, &y, a, 2.0, 20, &v).unwrap();
        let long = check_convolution(&o, &y, a, 2.0, 40, &v).unwrap();
        assert!((long.lhs / short.lhs - 1.0).abs() < 0.2, "{v:?}: {} vs {}", short.lhs, long.lhs);
    }
    assert!(check_convolution(&o, &y, 4.0, 3.0, 20, &Variant::Std).is_err());
    assert!(check_convolution(&o, &o, 0.0, 2.0, 20, &Variant::Log).is_err());
}

#[test]
fn reduction_ratios_stay_bounded_across_scales() {
    let d = 7;
    let mut delta = Vec::new();
    let mut path = Vec::new();
    for n in [4i64, 8, 12] {
        let (u, v) = (LatticePoint::origin(d), ax(d, 0, n));
        let w = [ax(d, 1, n), ax(d, 1, -n), ax(d, 2, n)];
        let l = 3 * n;
        delta.push(interior_delta_ratio(&u, &v, &w[0], n as f64, l).unwrap().ratio);
        path.push(path_reduction_ratio(&u, &v, [&w[0], &w[1], &w[2]], n as f64, l).unwrap().ratio);
    }
    assert!(spread(&delta) < 3.0, "{delta:?}");
    assert!(spread(&path) < 3.0, "{path:?}");
}

/// Binary tree with four pinned leaves at scale n and two free vertices.
fn four_leaf_tree(n: i64) -> Diagram {
    let d = 7;
    let mut g = Diagram::new(d);
    let w: Vec<usize> = [LatticePoint::origin(d), ax(d, 0, n), ax(d, 1, n), ax(d, 2, n)]
        .into_iter()
        .map(|p| g.pin(p))
        .collect();
    let (a, b) = (g.free(), g.free());
    g.edge(a, w[0]);
    g.edge(a, w[1]);
    g.edge(a, b);
    g.edge(b, w[2]);
    g.edge(b, w[3]);
    g
}

#[test]
fn tree_reduction_ledger() {
    let ledger = tree_reduce(&four_leaf_tree(4)).unwrap();
    assert_eq!(ledger.steps.len(), 2);
    assert_eq!(ledger.exponent, 2.0 * (4.0 - 7.0));
    let terms: usize = ledger.residual.iter().map(|r| r.2).sum();
    assert_eq!(terms, 4);
    assert!(tree_reduce(&one_loop_diagram(&ax(7, 0, 1), &ax(7, 1, 1))).is_err());
}

#[test]
fn cherry_contraction_audit() {
    // val(star) against n^{4−d} (val(S¹) + val(S²)), where S^(i) are single edges
    let d = 7;
    let mut ratios = Vec::new();
    for n in [4i64, 8, 16] {
        let pins = [ax(d, 0, n), ax(d, 0, -n), ax(d, 1, n)];
        let star = star_diagram(&pins);
        let ((s1, s2), cert) = contract_cherry(&star, 0).unwrap();
        assert!(s1.free_vertices().is_empty() && s2.free_vertices().is_empty());
        let b = LatticeBox::centered(d, 3 * n);
        let lhs = val_exact(&star, &b).unwrap();
        let rhs = (n as f64).powf(cert.exponent) * (val_exact(&s1, &b).unwrap() + val_exact(&s2, &b).unwrap());
        ratios.push(lhs / rhs);
    }
    assert!(spread(&ratios) < 2.0, "{ratios:?}");
}

#[test]
fn fit_recovers_a_noisy_power_law() {
    let mut rng = stream(5, 0);
    let pts: Vec<(f64, f64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
        .iter()
        .map(|&n: &f64| (n, 3.0 * n.powf(-3.0) * (1.0 + 0.03 * (rng.random::<f64>() - 0.5))))
        .collect();
    let fit = fit_scaling(&pts).unwrap();
    assert!((fit.slope + 3.0).abs() < 0.05, "{}", fit.slope);
    assert!(fit.residual_max < 0.03);
}

#[test]
fn kernel_reference_value() {
    // ⟨e_1⟩^{2−d} at d = 7 is 2^{−5/2}
    let v = riesz_point(&ax(7, 0, 1), -5.0);
    assert!((v - 2f64.powf(-2.5)).abs() < 1e-15);
}
