//! The four-cycle diagram decays faster than a tree with the same legs.
//! Pass the sample count as the first argument (default 500000).

use percolab::diagrams::{fit_scaling, four_cycle};

fn main() -> anyhow::Result<()> {
    let samples = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500_000);
    let mut pts = Vec::new();
    for n in [16i64, 24, 32, 48] {
        let e = four_cycle(7, n, samples, 7)?;
        println!("n = {n}: {:.4e} ± {:.1}%", e.mean, 100.0 * e.rel_err());
        pts.push((n as f64, e.mean));
    }
    let fit = fit_scaling(&pts)?;
    println!("slope {:.3}; the tree with four legs scales as n^-11", fit.slope);
    Ok(())
}
