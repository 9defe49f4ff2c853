//! Connectivity trees of sampled configurations in which three marked
//! points are joined, and how often they are binary.

use std::sync::Arc;

use percolab::conntree::{build_connectivity_tree, classify_tree, TreeClassification};
use percolab::lattice::{clusters, sample_configuration, Graph, LatticeBox, LatticePoint};

fn main() -> anyhow::Result<()> {
    let g = Arc::new(Graph::lattice_box(&LatticeBox::centered(2, 8)));
    for sep in [2i64, 4, 8] {
        let marked = [
            g.vertex(&LatticePoint::new(vec![0, 0]))?,
            g.vertex(&LatticePoint::new(vec![sep, 0]))?,
            g.vertex(&LatticePoint::new(vec![0, sep]))?,
        ];
        let (mut binary, mut total, mut seed) = (0, 0, 0u64);
        let mut shown = false;
        while total < 200 {
            seed += 1;
            let c = sample_configuration(g.clone(), 0.6, seed)?;
            let part = clusters(&c);
            if !marked.iter().all(|&x| part.same(x, marked[0])) {
                continue;
            }
            total += 1;
            let t = build_connectivity_tree(&c, &marked)?;
            match classify_tree(&t) {
                TreeClassification::Binary(bt) => {
                    binary += 1;
                    if !shown {
                        println!("separation {sep}: first binary tree {}", serde_json::to_string(&t.to_json(&g))?);
                        println!("  as a labelled tree: {}", bt.newick());
                        shown = true;
                    }
                }
                TreeClassification::Degenerate(_) => {}
            }
        }
        println!("separation {sep}: {binary} of {total} conditioned samples give a binary tree");
    }
    Ok(())
}
