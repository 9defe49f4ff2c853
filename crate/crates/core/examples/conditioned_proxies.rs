//! Finite-volume stand-ins for the incipient infinite cluster: conditioned
//! samples, the bubble sum of double connections, and truncated ρ.

use percolab::estimation::{conditioned_cluster_sample, estimate_bubble, estimate_rho_truncated, BoxLattice, MAX_ATTEMPTS};

fn main() -> anyhow::Result<()> {
    let p = 0.2488; // near the critical point of Z^3
    let lab = BoxLattice::centered(3, 8)?;
    let s = conditioned_cluster_sample(&lab, p, lab.center(), 6, MAX_ATTEMPTS, 1)?;
    println!("0 <-> boundary of B(6) after {} attempts, {} open edges", s.attempts, s.config.open_count());
    for sum_radius in [1, 2, 4, 8] {
        let b = estimate_bubble(&lab, p, 6, Some(sum_radius), 400, 2)?;
        println!("bubble sum over |u| <= {sum_radius}: {:.3} ± {:.3}", b.mean, b.stderr);
    }
    for m in [0, 1, 2] {
        let r = estimate_rho_truncated(&lab, p, 6, m, 200, 3)?;
        println!("ρ truncated at M = {m}: {:.4} ± {:.4}", r.value.mean, r.value.stderr);
    }
    Ok(())
}
