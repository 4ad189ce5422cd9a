//! Split, pretraining, GIN training and evaluation on a synthetic corpus,
//! against the degree baseline.

use std::path::Path;

use hippo::cli::{run_end_to_end, Corpus, RunConfig};
use hippo::dataio::{synth_generate, SynthSpec};
use hippo::numcore::worker_threads;

fn main() -> hippo::Result<()> {
    let cfg = RunConfig::load(Path::new("configs/synthetic.json"))?;
    let corpus = Corpus::from(synth_generate(&SynthSpec::default())?);
    let r = run_end_to_end(&cfg, &corpus, worker_threads())?;
    for (name, m) in [("model", &r.model), ("baseline", &r.baseline)] {
        println!(
            "{name:<9} micro-F1 {:.4}  easy {:.4} ({})  hard {:.4} ({})",
            m.micro_f1, m.micro_f1_easy, m.n_easy, m.micro_f1_hard, m.n_hard
        );
    }
    for (t, a) in &r.model.aupr {
        println!("  AUPR {t:<12} {}", a.map_or("n/a".into(), |v| format!("{v:.4}")));
    }
    Ok(())
}
