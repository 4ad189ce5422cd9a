//! Run configuration, the pipeline stages and the `hippo` command line.

mod commands;
mod config;
mod gradsuite;
mod log;
mod pipeline;

pub use commands::{
    execute, exit_code, run, Cli, Command, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION,
};
pub use config::{AlignmentConfig, PathsConfig, RunConfig, TrainingConfig};
pub use pipeline::{
    evaluate_baseline, evaluate_model, keyword_matrix, node_features, ppi_checkpoint,
    ppi_from_checkpoint, pretrain_checkpoint, pretrained_from_checkpoint, run_downstream,
    make_split, run_end_to_end, run_pretrain, site_overlaps, Corpus, Downstream, NodeFeatures,
    PretrainResult, RunSummary, SiteOverlap,
};
pub use log::{strip_meta, JsonLog};
pub use gradsuite::{gradient_suite, near_kink, SuiteEntry, SUITE_OPS, SUITE_STEP, SUITE_TOL};
