//! Overlap of attention-ranked residues with the planted motif sites,
//! before and after pretraining.

use std::path::Path;

use hippo::cli::{run_pretrain, site_overlaps, Corpus, RunConfig};
use hippo::dataio::{synth_generate, SynthSpec};
use hippo::encoders::PretrainModel;
use hippo::numcore::{worker_threads, Rng};

fn mean_overlap(model: &PretrainModel, corpus: &Corpus) -> hippo::Result<f64> {
    let rows = site_overlaps(model, corpus)?;
    Ok(rows.iter().map(|r| r.overlap).sum::<f64>() / rows.len() as f64)
}

fn main() -> hippo::Result<()> {
    let cfg = RunConfig::load(Path::new("configs/synthetic.json"))?;
    let corpus = Corpus::from(synth_generate(&SynthSpec::default())?);
    let root = Rng::new(cfg.training.seed).split("pretrain");
    let init = PretrainModel::init(cfg.model(), corpus.annotations.vocab.len(), &root.split("init"))?;
    println!("mean overlap at init: {:.3}", mean_overlap(&init, &corpus)?);
    let r = run_pretrain(&cfg, &corpus, worker_threads())?;
    println!("mean overlap after pretraining: {:.3}", mean_overlap(&r.model, &corpus)?);
    Ok(())
}
