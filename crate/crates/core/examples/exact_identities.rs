//! Exhaustive checks on small graphs: the switching identity, the bubble
//! identity, BK, the tree-graph bound, and the rest of the suites.

use percolab::suites::{run_suite, SUITES};

fn main() -> anyhow::Result<()> {
    for name in SUITES {
        let r = run_suite(name, 1)?;
        println!(
            "{name:>14}: {:>5} checks, {} violations, max residual {:.1e}",
            r.checks, r.violations, r.max_residual
        );
        for n in &r.notes {
            println!("{:>16}{n}", "");
        }
    }
    Ok(())
}
