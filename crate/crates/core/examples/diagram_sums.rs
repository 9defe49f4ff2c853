//! Exact and importance-sampled diagram sums, cherry contraction, and a
//! scaling fit for the three-leg star.

use percolab::diagrams::{fit_scaling, star_diagram, tree_reduce, val, Method};
use percolab::lattice::{LatticeBox, LatticePoint};

fn main() -> anyhow::Result<()> {
    let d = 5;
    let pins = |n: i64| vec![LatticePoint::origin(d), LatticePoint::axis(d, 0, n), LatticePoint::axis(d, 1, n)];
    let g = star_diagram(&pins(8));
    let b = LatticeBox::centered(d, 12);
    let exact = val(&g, &b, &Method::Exact)?;
    let mc = val(&g, &b, &Method::ImportanceMc { samples: 400_000, seed: 5 })?;
    println!("star, d = 5, n = 8: exact {:.6e}, sampled {:.6e} ± {:.1e}", exact.value(), mc.value(), mc.stderr());

    let ledger = tree_reduce(&g)?;
    println!("reduction: {} contraction(s), n-power {}", ledger.steps.len(), ledger.exponent);

    let d = 7;
    let mut pts = Vec::new();
    for n in [8i64, 12, 16, 24] {
        let p = vec![LatticePoint::origin(d), LatticePoint::axis(d, 0, n), LatticePoint::axis(d, 1, n)];
        let v = val(&star_diagram(&p), &LatticeBox::centered(d, 3 * n), &Method::Exact)?;
        println!("d = 7, n = {n}: {:.5e}", v.value());
        pts.push((n as f64, v.value()));
    }
    let fit = fit_scaling(&pts)?;
    println!("slope {:.3} (three-point order (4 − d)(k − 1) − 2 = {})", fit.slope, (4 - 7) * 2 - 2);
    Ok(())
}
