//! Truncated convolution sums against their bounds: the ratio settles as
//! the separation grows, so the family's spread stays small.

use percolab::diagrams::{check_convolution, run_convolution_family, Variant, VariantKind};
use percolab::lattice::LatticePoint;

fn main() -> anyhow::Result<()> {
    let d = 5;
    let x = LatticePoint::origin(d);
    println!("ratio against separation (d = 5, a = b = 2), including the near range:");
    for m in [1i64, 2, 3, 4, 8, 16] {
        let y = LatticePoint::axis(d, 0, m);
        let r = check_convolution(&x, &y, 2.0, 2.0, 4 * m, &Variant::Std)?;
        println!("  |y| = {m:>2}: {:.3}", r.ratio);
    }
    let y = LatticePoint::axis(d, 0, 4);
    let (r20, r40) = (
        check_convolution(&x, &y, 2.0, 2.0, 20, &Variant::Std)?,
        check_convolution(&x, &y, 2.0, 2.0, 40, &Variant::Std)?,
    );
    println!("truncation 20 -> 40 at |y| = 4: {:.4} -> {:.4}", r20.ratio, r40.ratio);
    for kind in [VariantKind::Std, VariantKind::Log, VariantKind::Triple] {
        let (a, b) = if kind == VariantKind::Std { (2.0, 2.0) } else { (0.0, 2.0) };
        let r = run_convolution_family(d, a, b, kind)?;
        let lo = r.iter().map(|(_, x)| x.ratio).fold(f64::INFINITY, f64::min);
        let hi = r.iter().map(|(_, x)| x.ratio).fold(0.0, f64::max);
        println!("{kind:?}: {} instances, ratios {lo:.3}..{hi:.3}, spread {:.2}", r.len(), hi / lo);
    }
    Ok(())
}
