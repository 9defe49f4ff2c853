//! Continuum tree integrals: the three-point integral by quadrature and by
//! Monte Carlo, a four-point integral, and the assembled limit constant.

use percolab::integrals::{eval_i_t, predicted_kpoint_constant, quad_i3, ContinuumPoint, Integrator, LimitInputs, QuadParams};
use percolab::trees::{enumerate_trees, AbstractTree};

fn pt(v: &[f64]) -> ContinuumPoint {
    let mut c = vec![0.0; 7];
    c[..v.len()].copy_from_slice(v);
    ContinuumPoint(c)
}

fn main() -> anyhow::Result<()> {
    let y = vec![pt(&[]), pt(&[1.0]), pt(&[0.0, 1.0])];
    let q = quad_i3(&y[1], &y[2], 7, QuadParams::default())?;
    let mc = eval_i_t(&AbstractTree::star3(), &y, 7, 1_000_000, 1)?;
    println!("I_3(0, e1, e2), d = 7: quadrature {:.6} (± {:.1e}), Monte Carlo {:.4} ± {:.4}", q.value, q.error, mc.mean, mc.stderr);

    let y4 = vec![pt(&[]), pt(&[1.0]), pt(&[0.0, 1.0]), pt(&[0.0, 0.0, 1.0])];
    for t in enumerate_trees(4)? {
        let e = eval_i_t(&t, &y4, 7, 500_000, 2)?;
        println!("{:<14} {:.4} ± {:.4}", t.newick(), e.mean, e.stderr);
    }

    let inputs = LimitInputs { alpha: 1.0, p_c: 0.5, rho: 1.0, d: 7 };
    let pred = predicted_kpoint_constant(&y, &inputs, None, Integrator::Quadrature(QuadParams::default()))?;
    println!("three-point constant with α = ρ = 1, β = 1: {:.5}", pred.value);
    Ok(())
}
