//! Sequence and annotation encoders, alignment heads and losses, the joint
//! pretraining objective and attention-based site scores.

mod alignment;
mod annotation;
mod layers;
mod model;
mod sequence;
mod sites;

pub use alignment::{
    sac_from_logits, sac_loss, sac_loss_on_tape, sam_loss, sam_loss_on_tape, sam_loss_with_grad,
    sam_pairs, AlignmentHeads, SamPair, P_CLAMP,
};
pub use annotation::{
    encode_annotations, encode_annotations_on_tape, init_annotation_encoder,
    AnnotationEncoderConfig,
};
pub use model::{
    objective_from_pooled, pretrain, pretrain_gradients, pretrain_gradients_parallel,
    pretrain_objective, pretrain_objective_on_tape, LossWeights, ModelConfig, ObjectiveParts,
    PretrainBatch, PretrainData, PretrainModel, PretrainOutcome, PretrainSchedule, StepLog,
};
pub use sequence::{
    encode_sequence, encode_sequence_on_tape, init_sequence_encoder, tokenize, SequenceEncoderConfig,
    SequenceEncoding, SequenceVars, PAD_TOKEN, VOCAB_SIZE,
};
pub use sites::{attention_site_scores, top_residues};
