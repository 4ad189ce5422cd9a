//! Input parsing (FASTA and the TSV formats), the synthetic corpus
//! generator and model checkpoints.

mod checkpoint;
mod fasta;
mod records;
mod synth;
mod tsv;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_checked, save_checkpoint, Checkpoint, CheckpointMeta,
    ManifestEntry, MAGIC,
};
pub use fasta::{parse_fasta, parse_fasta_str, write_fasta};
pub use records::{is_residue, EdgeRecord, ProteinRecord, AMINO_ACIDS};
pub use synth::{
    parse_sites, read_corpus, synth_generate, write_corpus, write_sites, CompatEntry, CompatTable,
    CorpusFiles, SynthCorpus, SynthSpec, ANNOTATIONS_FILE, EDGES_FILE, FASTA_FILE, HIERARCHY_FILE,
    SITES_FILE,
};
pub use tsv::{
    parse_annotations, parse_annotations_str, parse_edges, parse_edges_str, parse_hierarchy,
    parse_hierarchy_str, write_annotations, write_edges, write_hierarchy, Annotations,
};
