//! Hard test-edge fraction of random, BFS and DFS splits over 20 seeds.

use hippo::dataio::{synth_generate, SynthSpec};
use hippo::numcore::Rng;
use hippo::splitbench::{split_edges, SplitMethod};

fn main() -> hippo::Result<()> {
    let corpus = synth_generate(&SynthSpec::default())?;
    println!("{} edges", corpus.edges.len());
    for method in [SplitMethod::Random, SplitMethod::Bfs, SplitMethod::Dfs] {
        let mut fractions = Vec::new();
        for seed in 1..=20 {
            let s = split_edges(method, &corpus.edges, 0.2, 0.16, &mut Rng::new(seed))?;
            s.validate(corpus.edges.len())?;
            fractions.push(s.hard_fraction());
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        let max = fractions.iter().cloned().fold(0.0, f64::max);
        println!("{method:<6} mean hard fraction {mean:.3}  max {max:.3}");
    }
    Ok(())
}
