use std::path::PathBuf;

use hippo::cli::{run_end_to_end, run_pretrain, Corpus, RunConfig};
use hippo::dataio::{synth_generate, SynthSpec};
use hippo::numcore::worker_threads;

fn preset() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.json");
    RunConfig::load(&path).unwrap()
}

#[test]
fn end_to_end_runs_are_identical() {
    let corpus: Corpus = synth_generate(&SynthSpec {
        n_proteins: 80,
        n_families: 8,
        n_clans: 2,
        ..SynthSpec::default()
    })
    .unwrap()
    .into();
    let mut cfg = preset();
    cfg.training.pretrain_steps = 10;
    cfg.training.ppi_epochs = 5;
    let a = run_end_to_end(&cfg, &corpus, worker_threads()).unwrap();
    let b = run_end_to_end(&cfg, &corpus, 1).unwrap();
    assert_eq!(serde_json::to_string(&a.model).unwrap(), serde_json::to_string(&b.model).unwrap());
    assert_eq!(serde_json::to_string(&a.baseline).unwrap(), serde_json::to_string(&b.baseline).unwrap());
}

#[test]
fn pretraining_lowers_the_loss() {
    let corpus: Corpus = synth_generate(&SynthSpec::default()).unwrap().into();
    let cfg = preset();
    assert_eq!(cfg.training.pretrain_steps, 200);
    let r = run_pretrain(&cfg, &corpus, worker_threads()).unwrap();
    let first = r.log.first().unwrap();
    let last = r.log.last().unwrap();
    assert_eq!(r.log.len(), 200);
    assert!(last.total < first.total, "{} -> {}", first.total, last.total);
}
