//! Edge-set partitioning, easy/hard stratification and evaluation metrics.

mod metrics;
mod split;

pub use metrics::{aupr, confusion, evaluate, micro_f1, overlap_rate, Counts, MetricReport};
pub use split::{
    split_bfs, split_dfs, split_edges, split_random, stratify_difficulty, Difficulty, SplitMethod,
    SplitSpec,
};
