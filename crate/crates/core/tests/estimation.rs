use percolab::estimation::{
    conditioned_cluster_sample, estimate_bubble, estimate_bubble_capped, estimate_rho_truncated, estimate_tau_k_box,
    scaling_probe, BoxLattice,
};
use percolab::lattice::{connected, LatticePoint};
use percolab::Error;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn conditioning_acceptance_rate_matches_the_event_probability() {
    // on the radius-1 square, 0 ↔ ∂B(1) iff one of the four edges at 0 is open
    let lab = BoxLattice::centered(2, 1).unwrap();
    let p: f64 = 0.3;
    let prob = 1.0 - (1.0 - p).powi(4);
    let n = 20_000;
    let mut total = 0.0;
    for seed in 0..n {
        let s = conditioned_cluster_sample(&lab, p, lab.center(), 1, 1000, seed).unwrap();
        assert!(s.config.graph().neighbors(s.source).iter().any(|&(_, e)| s.config.is_open(e)));
        total += s.attempts as f64;
    }
    let mean = total / n as f64;
    let sd = ((1.0 - prob) / (prob * prob) / n as f64).sqrt();
    assert!((mean - 1.0 / prob).abs() < 4.0 * sd, "mean attempts {mean}, expected {}", 1.0 / prob);
}

#[test]
fn conditioned_samples_reach_the_shell() {
    let lab = BoxLattice::centered(2, 6).unwrap();
    for seed in 0..20 {
        let s = conditioned_cluster_sample(&lab, 0.55, lab.center(), 5, 100_000, seed).unwrap();
        let reached = (0..s.config.graph().num_vertices()).any(|v| {
            let x = s.config.graph().point(v);
            x.sup_dist(&LatticePoint::origin(2)) >= 5 && connected(&s.config, s.source, v, None)
        });
        assert!(reached, "seed {seed}");
    }
}

#[test]
fn estimates_are_reproducible_across_worker_counts() {
    let lab = BoxLattice::centered(2, 6).unwrap();
    let pts = [LatticePoint::new(vec![0, 0]), LatticePoint::new(vec![3, 1]), LatticePoint::new(vec![-2, 2])];
    let a = in_pool(1, || estimate_tau_k_box(&lab, 0.55, &pts, 20_000, 17)).unwrap();
    let b = in_pool(1, || estimate_tau_k_box(&lab, 0.55, &pts, 20_000, 17)).unwrap();
    let c = in_pool(3, || estimate_tau_k_box(&lab, 0.55, &pts, 20_000, 17)).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert!((a.mean - c.mean).abs() <= 1e-10);
    let other = estimate_tau_k_box(&lab, 0.55, &pts, 20_000, 18).unwrap();
    assert_ne!(a.mean.to_bits(), other.mean.to_bits());

    let x = in_pool(1, || estimate_bubble(&lab, 0.55, 4, None, 300, 5)).unwrap();
    let y = in_pool(3, || estimate_bubble(&lab, 0.55, 4, None, 300, 5)).unwrap();
    assert!((x.mean - y.mean).abs() <= 1e-10 * x.mean.max(1.0));
}

#[test]
fn rho_is_monotone_in_the_truncation() {
    let lab = BoxLattice::centered(2, 8).unwrap();
    let vals: Vec<f64> = (0..=2)
        .map(|m| estimate_rho_truncated(&lab, 0.3, 6, m, 40, 9).unwrap().value.mean)
        .collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
    assert!(vals[2] > 0.0);
}

#[test]
fn bubble_partial_sums_grow_with_the_sum_radius() {
    let lab = BoxLattice::centered(2, 8).unwrap();
    let sums: Vec<f64> = (1..=8)
        .map(|s| estimate_bubble(&lab, 0.6, 6, Some(s), 100, 3).unwrap().mean)
        .collect();
    assert!(sums.windows(2).all(|w| w[0] <= w[1]), "{sums:?}");
    let full = estimate_bubble(&lab, 0.6, 6, None, 100, 3).unwrap().mean;
    assert_eq!(full, sums[7]);
}

#[test]
fn parameter_errors() {
    let lab = BoxLattice::centered(2, 8).unwrap();
    assert!(matches!(estimate_rho_truncated(&lab, 0.6, 6, 3, 1, 1), Err(Error::Domain(_))));
    assert!(matches!(estimate_rho_truncated(&lab, 0.6, 2, 1, 1, 1), Err(Error::Domain(_))));
    assert!(matches!(estimate_bubble(&lab, 0.6, 9, None, 1, 1), Err(Error::Domain(_))));
    assert!(estimate_bubble(&lab, 1.2, 4, None, 1, 1).is_err());
    assert!(matches!(
        estimate_bubble_capped(&lab, 0.01, 8, None, 1, 1, 50),
        Err(Error::AttemptCap { attempts: 50, .. })
    ));
}

#[test]
fn probe_rows_at_full_density() {
    let y = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let rows = scaling_probe(&y, 3, 1.0, &[1, 2, 3], 10, 4).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.tau.mean, 1.0);
        assert_eq!(r.tau.stderr, 0.0);
        // the rescaling exponent vanishes at d = 3, k = 3
        assert_eq!(r.rescaled, 1.0);
    }
    assert!(scaling_probe(&y[..1], 3, 0.5, &[1], 10, 4).is_err());
}
