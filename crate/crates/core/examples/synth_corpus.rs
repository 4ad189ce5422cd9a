//! Generates the synthetic clan/family corpus and prints what it contains.
//!
//! ```text
//! cargo run --release --example synth_corpus -- [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use hippo::dataio::{synth_generate, write_corpus, SynthSpec};

fn main() -> hippo::Result<()> {
    let spec = SynthSpec::default();
    let corpus = synth_generate(&spec)?;
    println!(
        "{} proteins, {} clans, {} families, {} edges, {} keywords",
        corpus.proteins.len(),
        corpus.tree.n_nodes(0),
        corpus.tree.n_nodes(1),
        corpus.edges.len(),
        corpus.keyword_vocab.len()
    );
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &corpus.edges {
        for (t, _) in corpus.types.iter().zip(&e.labels).filter(|(_, &on)| on) {
            *per_type.entry(t).or_default() += 1;
        }
    }
    for (t, n) in per_type {
        println!("  {t:<12} {n}");
    }
    let first = &corpus.proteins[0];
    println!("{} {} sites {:?}", first.id, first.sequence, corpus.sites[&first.id]);
    if let Some(dir) = std::env::args().nth(1) {
        write_corpus(&corpus, Path::new(&dir))?;
        println!("written to {dir}");
    }
    Ok(())
}
