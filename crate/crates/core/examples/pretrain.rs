//! Pretrains on the synthetic corpus and compares family clustering of the
//! embeddings before and after.

use std::path::Path;

use hippo::cli::{keyword_matrix, run_pretrain, Corpus, RunConfig};
use hippo::dataio::{synth_generate, SynthSpec};
use hippo::encoders::PretrainModel;
use hippo::hierarchy::embedding_cluster_report;
use hippo::numcore::{worker_threads, Rng};

fn silhouette(model: &PretrainModel, corpus: &Corpus, vocab: &[String]) -> hippo::Result<String> {
    let ids = corpus.ids();
    let kw = keyword_matrix(&corpus.annotations, vocab, &ids)?;
    let emb = model.embed(&corpus.sequence_refs(), &kw, worker_threads())?;
    let tree = corpus.tree.as_ref().expect("synthetic corpus has a tree");
    let s = embedding_cluster_report(&emb, &ids, tree, 1)?.silhouette;
    Ok(s.map_or("undefined".into(), |v| format!("{v:.3}")))
}

fn main() -> hippo::Result<()> {
    let cfg = RunConfig::load(Path::new("configs/synthetic.json"))?;
    let corpus = Corpus::from(synth_generate(&SynthSpec::default())?);
    let vocab = corpus.annotations.vocab.clone();
    let root = Rng::new(cfg.training.seed).split("pretrain");
    let init = PretrainModel::init(cfg.model(), vocab.len(), &root.split("init"))?;
    println!("family silhouette before: {}", silhouette(&init, &corpus, &vocab)?);

    let r = run_pretrain(&cfg, &corpus, worker_threads())?;
    for s in r.log.iter().step_by(25) {
        println!("step {:>3}  total {:.4}  hc {:.4}  sac {:.4}  sam {:.4}", s.step, s.total, s.hc, s.sac, s.sam);
    }
    println!("best step {}", r.best_step);
    println!("family silhouette after: {}", silhouette(&r.model, &corpus, &vocab)?);
    Ok(())
}
