//! Open pivotal edges between two points, in the order every open path
//! meets them, checked against the close-and-test definition.

use std::sync::Arc;

use percolab::lattice::{clusters, sample_configuration, Graph, LatticeBox, LatticePoint};
use percolab::pivotals::{open_pivotals, open_pivotals_definitional, order_consistent, random_open_paths};

fn main() -> anyhow::Result<()> {
    let g = Arc::new(Graph::lattice_box(&LatticeBox::centered(2, 6)));
    let u = g.vertex(&LatticePoint::new(vec![-6, 0]))?;
    let v = g.vertex(&LatticePoint::new(vec![6, 0]))?;
    let mut seed = 0;
    let c = loop {
        let c = sample_configuration(g.clone(), 0.55, seed)?;
        if clusters(&c).same(u, v) {
            break c;
        }
        seed += 1;
    };
    let piv = open_pivotals(&c, u, v)?;
    println!("seed {seed}: {} pivotal edges from {} to {}", piv.edges.len(), g.point(u), g.point(v));
    for e in &piv.edges {
        println!("  {} -> {}", g.point(e.tail), g.point(e.head));
    }
    let slow = open_pivotals_definitional(&c, u, v)?;
    let paths = random_open_paths(&c, u, v, 20, 3);
    println!(
        "matches the definition: {}; order consistent along {} random open paths: {}",
        slow.edges == piv.edges,
        paths.len(),
        order_consistent(&piv, &paths)
    );
    Ok(())
}
