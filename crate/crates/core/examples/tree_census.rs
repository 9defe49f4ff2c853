//! Binary trees with k labelled leaves: counts, Newick forms, and the
//! cherry reduction to k − 1 leaves.

use percolab::trees::{enumerate_trees, tree_count};

fn main() -> anyhow::Result<()> {
    for k in 3..=7 {
        let trees = enumerate_trees(k)?;
        println!("k = {k}: {} trees (formula {})", trees.len(), tree_count(k));
    }
    for t in enumerate_trees(5)?.iter().take(5) {
        let c = t.select_ijv()?;
        let r = t.phi_reduce()?;
        println!(
            "{}  cherry (i={}, j={}) at {} -> {}  labels {:?}",
            t.newick(),
            c.i,
            c.j,
            c.v,
            r.tree.newick(),
            r.label_map
        );
    }
    Ok(())
}
