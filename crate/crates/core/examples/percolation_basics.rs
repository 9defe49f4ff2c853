//! Sample a configuration on a box, look at its clusters, and compare a
//! sampled connection frequency with the exact value on a small graph.

use std::sync::Arc;

use percolab::estimation::estimate_tau_k;
use percolab::lattice::{clusters, connected, sample_configuration, Graph, LatticeBox, LatticePoint};
use percolab::oracle::{exact_event_probability, EventSpec};

fn main() -> anyhow::Result<()> {
    let g = Arc::new(Graph::lattice_box(&LatticeBox::centered(2, 10)));
    let c = sample_configuration(g.clone(), 0.5, 1)?;
    let part = clusters(&c);
    let sizes: Vec<usize> = (0..part.count()).map(|i| part.members(i).len()).collect();
    println!(
        "box of {} vertices, {} open edges, {} clusters, largest {}",
        g.num_vertices(),
        c.open_count(),
        part.count(),
        sizes.iter().max().unwrap_or(&0)
    );
    let o = g.vertex(&LatticePoint::origin(2))?;
    let far = g.vertex(&LatticePoint::new(vec![10, 10]))?;
    println!("origin connected to the corner: {}", connected(&c, o, far, None));

    // two opposite corners of the 3x3 box: exact against sampled
    let small = Arc::new(Graph::lattice_box(&LatticeBox::centered(2, 1)));
    let (a, b) = (0, small.num_vertices() - 1);
    for p in [0.3, 0.5, 0.7] {
        let exact = exact_event_probability(&small, p, &EventSpec::connection(a, b))?;
        let mc = estimate_tau_k(&small, p, &[a, b], 100_000, 7)?;
        println!("p = {p}: exact {exact:.5}, sampled {:.5} ± {:.5}", mc.mean, mc.stderr);
    }
    Ok(())
}
