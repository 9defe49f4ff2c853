//! τ_k along scaled directions n·y, rescaled by the k-point exponent.
//! In low dimensions this is exploration output only.

use percolab::estimation::scaling_probe;

fn main() -> anyhow::Result<()> {
    let y = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    for p in [0.2, 0.2488] {
        println!("p = {p}");
        for row in scaling_probe(&y, 3, p, &[2, 4, 8], 20_000, 9)? {
            println!("  n = {:>2}: τ_3 = {:.4e} ± {:.1e}, rescaled {:.4}", row.n, row.tau.mean, row.tau.stderr, row.rescaled);
        }
    }
    Ok(())
}
