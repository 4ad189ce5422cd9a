//! Protein interaction graph, GIN message passing, pair classification head
//! and downstream training.

mod gin;
mod graph;
mod head;
mod train;

pub use gin::{gin_forward, gin_forward_on_tape, init_gin, BnMode, BnState, GinConfig};
pub use graph::{build_graph, GraphEdge, PpiGraph};
pub use head::{
    bce_multilabel, bce_on_tape, bce_with_grad, init_pair_head, pair_logits, pair_logits_on_tape,
    Combine, PairHeadConfig, Reduction,
};
pub use train::{
    degree_baseline, degree_baseline_probabilities, predict, predict_ids, select_best_epoch,
    thresholded, train_ppi, write_predictions, EpochRecord, PpiModel, PpiTrainConfig,
    ProjectionStage, TrainLog,
};
