//! Clan → family label tree, per-level positive pairs and the
//! hierarchical contrastive loss.

mod loss;
mod report;
mod tree;

pub use loss::{
    hc_loss, hc_loss_from_logits, hc_loss_on_tape, pair_loss, similarity_logits, HcLossBreakdown,
    LevelStats, PairRecord,
};
pub use report::{embedding_cluster_report, silhouette, ClusterReport, ClusterRow};
pub use tree::{positives_at_level, HierarchyTree, LevelPairs, PositiveSets};
