//! Hierarchical-loss ablation on the synthetic corpus: pretrains with and
//! without the hierarchical term and compares hard-pair micro-F1.
//!
//! ```text
//! cargo run --release --example ablation -- configs/synthetic.json 1 2 3
//! ```

use std::path::Path;
use std::time::Instant;

use hippo::cli::{run_end_to_end, Corpus, RunConfig};
use hippo::dataio::{synth_generate, SynthSpec};
use hippo::numcore::worker_threads;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> hippo::Result<()> {
    let mut args = std::env::args().skip(1);
    let base = match args.next() {
        Some(p) => RunConfig::load(Path::new(&p))?,
        None => RunConfig::default(),
    };
    let mut seeds: Vec<u64> = args.map(|a| a.parse().expect("seed")).collect();
    if seeds.is_empty() {
        seeds = vec![1, 2, 3];
    }
    let start = Instant::now();
    for w_hc in [1.0, 0.0] {
        let (mut hard, mut base_hard) = (Vec::new(), Vec::new());
        for &seed in &seeds {
            let corpus = Corpus::from(synth_generate(&SynthSpec { seed, ..SynthSpec::default() })?);
            let mut cfg = base.clone();
            cfg.training.seed = seed;
            cfg.alignment.w_hc = w_hc;
            let r = run_end_to_end(&cfg, &corpus, worker_threads())?;
            println!(
                "w_hc={w_hc} seed={seed}  hard {:.4}  easy {:.4}  all {:.4}  baseline hard {:.4}",
                r.model.micro_f1_hard, r.model.micro_f1_easy, r.model.micro_f1, r.baseline.micro_f1_hard
            );
            hard.push(r.model.micro_f1_hard);
            base_hard.push(r.baseline.micro_f1_hard);
        }
        println!("w_hc={w_hc} mean hard {:.4}  baseline {:.4}", mean(&hard), mean(&base_hard));
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
