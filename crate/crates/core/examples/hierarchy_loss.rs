//! The hierarchical contrastive loss on a hand-made batch, level by level.

use hippo::hierarchy::{hc_loss, HierarchyTree};
use hippo::numcore::Tensor;

fn main() -> hippo::Result<()> {
    let rows: Vec<(String, String, Option<String>)> = [
        ("kinA", "PF_kinase", "CL_kinase"),
        ("kinB", "PF_kinase", "CL_kinase"),
        ("kinC", "PF_pseudokinase", "CL_kinase"),
        ("wd1", "PF_wd40", "CL_beta"),
        ("wd2", "PF_wd40", "CL_beta"),
        ("ank1", "PF_ankyrin", "CL_beta"),
    ]
    .iter()
    .map(|(p, f, c)| (p.to_string(), f.to_string(), Some(c.to_string())))
    .collect();
    let tree = HierarchyTree::from_clan_family(&rows)?;
    let batch: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let emb = Tensor::from_rows(&[
        vec![1.0, 0.1, 0.0],
        vec![0.9, 0.2, 0.1],
        vec![0.7, 0.6, 0.0],
        vec![0.0, 0.2, 1.0],
        vec![0.1, 0.1, 0.9],
        vec![0.0, 0.8, 0.6],
    ])?;
    for tau in [0.1, 0.5] {
        let b = hc_loss(&tree, &batch, &emb, tau)?;
        println!("tau {tau}: total {:.4}, floor activations {}", b.total, b.constraint_activations);
        for (name, level) in tree.level_names().iter().zip(&b.per_level) {
            println!(
                "  {name:<7} {} pairs, mean {:.4}, max {:.4}",
                level.n_pairs, level.mean_pair_loss, level.max_pair_loss
            );
        }
    }
    Ok(())
}
