//! Synthetic hierarchical corpus.
//!
//! Proteins are spread evenly over families and families over clans. Every
//! family owns a motif that is planted at a random position of each member
//! sequence; the planted positions double as ground-truth binding sites.
//! Keyword vectors mark clan membership (plus optional family keywords)
//! with random noise. Interactions follow a family-pair compatibility
//! table: a compatible pair interacts with the table's probability and
//! carries the table's label set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fasta::{parse_fasta, write_fasta};
use super::records::{EdgeRecord, ProteinRecord, AMINO_ACIDS};
use super::tsv::{
    parse_annotations, parse_edges, parse_hierarchy, write_annotations, write_edges,
    write_hierarchy, Annotations,
};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;
use crate::numcore::Rng;

const DEFAULT_TYPES: [&str; 5] = ["activation", "binding", "catalysis", "inhibition", "reaction"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatEntry {
    pub family_a: String,
    pub family_b: String,
    pub probability: f64,
    pub labels: Vec<bool>,
}

/// Interaction rule over unordered family pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatTable {
    pub entries: Vec<CompatEntry>,
}

impl CompatTable {
    /// Hierarchical rule: every clan interacts with itself and with
    /// `partners` other clans drawn at random, each compatible clan pair
    /// gets a random non-empty label set of at most three types, and every
    /// family pair under a compatible clan pair inherits it.
    pub fn random(
        families: &[String],
        clan_of: &[usize],
        n_types: usize,
        partners: usize,
        probability: f64,
        rng: &mut Rng,
    ) -> Self {
        let nc = clan_of.iter().max().map_or(0, |&c| c + 1);
        let mut clan_pairs: BTreeMap<(usize, usize), Vec<bool>> = BTreeMap::new();
        for c in 0..nc {
            clan_pairs.insert((c, c), Vec::new());
            let mut others: Vec<usize> = (0..nc).filter(|&d| d != c).collect();
            rng.shuffle(&mut others);
            for &d in others.iter().take(partners) {
                clan_pairs.insert((c.min(d), c.max(d)), Vec::new());
            }
        }
        for labels in clan_pairs.values_mut() {
            let k = 1 + rng.below(n_types.min(3));
            let mut types: Vec<usize> = (0..n_types).collect();
            rng.shuffle(&mut types);
            *labels = vec![false; n_types];
            for &t in types.iter().take(k) {
                labels[t] = true;
            }
        }
        let mut entries = Vec::new();
        for f in 0..families.len() {
            for g in f..families.len() {
                let key = (clan_of[f].min(clan_of[g]), clan_of[f].max(clan_of[g]));
                if let Some(labels) = clan_pairs.get(&key) {
                    entries.push(CompatEntry {
                        family_a: families[f].clone(),
                        family_b: families[g].clone(),
                        probability,
                        labels: labels.clone(),
                    });
                }
            }
        }
        Self { entries }
    }

    pub fn lookup(&self, fa: &str, fb: &str) -> Option<&CompatEntry> {
        self.entries.iter().find(|e| {
            (e.family_a == fa && e.family_b == fb) || (e.family_a == fb && e.family_b == fa)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_clans: usize,
    pub n_families: usize,
    pub n_proteins: usize,
    pub motif_length: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub n_types: usize,
    /// Partner clans per clan when the table is generated.
    pub partners_per_clan: usize,
    pub interaction_probability: f64,
    pub keywords_per_clan: usize,
    pub keywords_per_family: usize,
    /// Probability that a member carries each of its group's keywords.
    pub keyword_rate: f64,
    /// Probability that any other keyword is switched on.
    pub keyword_noise: f64,
    /// Probability of flipping each label bit of an interaction.
    pub label_noise: f64,
    pub seed: u64,
    /// Explicit rule; generated from the seed when absent.
    pub interaction_rule: Option<CompatTable>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_clans: 5,
            n_families: 20,
            n_proteins: 300,
            motif_length: 12,
            min_length: 16,
            max_length: 20,
            n_types: 5,
            partners_per_clan: 1,
            interaction_probability: 0.04,
            keywords_per_clan: 4,
            keywords_per_family: 0,
            keyword_rate: 0.5,
            keyword_noise: 0.1,
            label_noise: 0.0,
            seed: 1,
            interaction_rule: None,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(format!("synthetic spec: {m}")));
        if self.n_clans == 0 || self.n_families == 0 || self.n_proteins == 0 {
            return bad("counts must be positive");
        }
        if self.n_families < self.n_clans {
            return bad("need at least as many families as clans");
        }
        if self.n_types == 0 {
            return bad("need at least one interaction type");
        }
        if self.motif_length == 0 || self.min_length < self.motif_length || self.max_length < self.min_length {
            return bad("need motif_length <= min_length <= max_length");
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1)");
        }
        for p in [self.interaction_probability, self.keyword_rate, self.keyword_noise] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn family_names(&self) -> Vec<String> {
        (0..self.n_families).map(|f| format!("PF{f:03}")).collect()
    }

    pub fn clan_names(&self) -> Vec<String> {
        (0..self.n_clans).map(|c| format!("CL{c:02}")).collect()
    }

    pub fn type_names(&self) -> Vec<String> {
        if self.n_types == DEFAULT_TYPES.len() {
            DEFAULT_TYPES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.n_types).map(|t| format!("type{t:02}")).collect()
        }
    }
}

/// Everything [`synth_generate`] produces.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub proteins: Vec<ProteinRecord>,
    pub edges: Vec<EdgeRecord>,
    pub types: Vec<String>,
    pub keyword_vocab: Vec<String>,
    pub tree: HierarchyTree,
    /// Planted motif residues (0-based) per protein.
    pub sites: BTreeMap<String, Vec<usize>>,
    pub table: CompatTable,
}

impl SynthCorpus {
    pub fn annotations(&self) -> Annotations {
        Annotations {
            vocab: self.keyword_vocab.clone(),
            vectors: self
                .proteins
                .iter()
                .map(|p| (p.id.clone(), p.keywords.clone()))
                .collect(),
        }
    }

    pub fn sequences(&self) -> Vec<(String, String)> {
        self.proteins
            .iter()
            .map(|p| (p.id.clone(), p.sequence.clone()))
            .collect()
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let families = spec.family_names();
    let clans = spec.clan_names();
    let types = spec.type_names();
    let clan_of = |f: usize| f % spec.n_clans;

    let table = match &spec.interaction_rule {
        Some(t) => {
            for e in &t.entries {
                for f in [&e.family_a, &e.family_b] {
                    if !families.contains(f) {
                        return Err(Error::UnknownId(f.clone()));
                    }
                }
                if e.labels.len() != spec.n_types {
                    return Err(Error::Param("rule label width differs from n_types".into()));
                }
            }
            t.clone()
        }
        None => CompatTable::random(
            &families,
            &(0..spec.n_families).map(clan_of).collect::<Vec<_>>(),
            spec.n_types,
            spec.partners_per_clan,
            spec.interaction_probability,
            &mut root.split("table"),
        ),
    };

    let aa: Vec<char> = AMINO_ACIDS.chars().take(20).collect();
    let mut motif_rng = root.split("motifs");
    let motifs: Vec<String> = (0..spec.n_families)
        .map(|_| (0..spec.motif_length).map(|_| aa[motif_rng.below(20)]).collect())
        .collect();

    let n_kw = spec.keywords_per_clan * spec.n_clans + spec.keywords_per_family * spec.n_families;
    let keyword_vocab: Vec<String> = (0..n_kw).map(|k| format!("KW{k:04}")).collect();

    let mut seq_rng = root.split("sequences");
    let mut kw_rng = root.split("keywords");
    let mut proteins = Vec::with_capacity(spec.n_proteins);
    let mut sites = BTreeMap::new();
    let mut family_idx = Vec::with_capacity(spec.n_proteins);
    for i in 0..spec.n_proteins {
        let f = i % spec.n_families;
        let c = clan_of(f);
        let id = format!("P{i:05}");
        let len = spec.min_length + seq_rng.below(spec.max_length - spec.min_length + 1);
        let mut seq: Vec<char> = (0..len).map(|_| aa[seq_rng.below(20)]).collect();
        let start = seq_rng.below(len - spec.motif_length + 1);
        for (k, ch) in motifs[f].chars().enumerate() {
            seq[start + k] = ch;
        }
        sites.insert(id.clone(), (start..start + spec.motif_length).collect());

        let own_clan = c * spec.keywords_per_clan..(c + 1) * spec.keywords_per_clan;
        let fam_base = spec.keywords_per_clan * spec.n_clans;
        let own_fam = fam_base + f * spec.keywords_per_family..fam_base + (f + 1) * spec.keywords_per_family;
        let keywords = (0..n_kw)
            .map(|k| {
                if own_clan.contains(&k) || own_fam.contains(&k) {
                    kw_rng.bernoulli(spec.keyword_rate)
                } else {
                    kw_rng.bernoulli(spec.keyword_noise)
                }
            })
            .collect();
        proteins.push(ProteinRecord {
            id,
            sequence: seq.into_iter().collect(),
            keywords,
            family_id: Some(families[f].clone()),
            clan_id: Some(clans[c].clone()),
        });
        family_idx.push(f);
    }

    let mut edge_rng = root.split("edges");
    let mut edges = Vec::new();
    for i in 0..spec.n_proteins {
        for j in i + 1..spec.n_proteins {
            let Some(entry) = table.lookup(&families[family_idx[i]], &families[family_idx[j]]) else {
                continue;
            };
            if !edge_rng.bernoulli(entry.probability) {
                continue;
            }
            let mut labels = entry.labels.clone();
            if spec.label_noise > 0.0 {
                for l in labels.iter_mut() {
                    if edge_rng.bernoulli(spec.label_noise) {
                        *l = !*l;
                    }
                }
                if !labels.iter().any(|&l| l) {
                    labels = entry.labels.clone();
                }
            }
            edges.push(EdgeRecord::new(&proteins[i].id, &proteins[j].id, labels)?);
        }
    }
    edges.sort();

    let tree = HierarchyTree::from_clan_family(
        &proteins
            .iter()
            .map(|p| (p.id.clone(), p.family_id.clone().unwrap(), p.clan_id.clone()))
            .collect::<Vec<_>>(),
    )?;

    Ok(SynthCorpus {
        proteins,
        edges,
        types,
        keyword_vocab,
        tree,
        sites,
        table,
    })
}

pub const FASTA_FILE: &str = "proteins.fasta";
pub const EDGES_FILE: &str = "edges.tsv";
pub const ANNOTATIONS_FILE: &str = "annotations.tsv";
pub const HIERARCHY_FILE: &str = "hierarchy.tsv";
pub const SITES_FILE: &str = "sites.tsv";

pub fn write_sites(sites: &BTreeMap<String, Vec<usize>>) -> String {
    let mut out = String::from("protein_id\tpositions\n");
    for (id, pos) in sites {
        let p: Vec<String> = pos.iter().map(usize::to_string).collect();
        writeln!(out, "{id}\t{}", p.join(",")).expect("write to string");
    }
    out
}

pub fn parse_sites(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<usize>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 && line.starts_with("protein_id") || line.trim().is_empty() {
            continue;
        }
        let (id, pos) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, k + 1, "expected protein_id, positions"))?;
        let positions = pos
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, k + 1, e.to_string()))?;
        out.insert(id.to_string(), positions);
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the five corpus files into `dir`, creating it if needed.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(FASTA_FILE), &write_fasta(&corpus.sequences()))?;
    write_file(&dir.join(EDGES_FILE), &write_edges(&corpus.edges, &corpus.types))?;
    write_file(&dir.join(ANNOTATIONS_FILE), &write_annotations(&corpus.annotations()))?;
    write_file(&dir.join(HIERARCHY_FILE), &write_hierarchy(&corpus.tree))?;
    write_file(&dir.join(SITES_FILE), &write_sites(&corpus.sites))?;
    Ok(())
}

/// Corpus files as read back from disk.
#[derive(Clone, Debug)]
pub struct CorpusFiles {
    pub sequences: Vec<(String, String)>,
    pub edges: Vec<EdgeRecord>,
    pub types: Vec<String>,
    pub annotations: Annotations,
    pub tree: HierarchyTree,
    pub sites: BTreeMap<String, Vec<usize>>,
}

pub fn read_corpus(dir: &Path) -> Result<CorpusFiles> {
    let (edges, types) = parse_edges(dir.join(EDGES_FILE), None)?;
    let sites_path = dir.join(SITES_FILE);
    Ok(CorpusFiles {
        sequences: parse_fasta(dir.join(FASTA_FILE))?,
        edges,
        types,
        annotations: parse_annotations(dir.join(ANNOTATIONS_FILE))?,
        tree: parse_hierarchy(dir.join(HIERARCHY_FILE))?,
        sites: if sites_path.exists() {
            parse_sites(sites_path)?
        } else {
            BTreeMap::new()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            n_proteins: 40,
            n_families: 6,
            n_clans: 2,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthSpec { seed: 2, ..small() }).unwrap();
        assert_ne!(a.proteins, c.proteins);
    }

    #[test]
    fn motifs_are_planted_at_sites() {
        let c = synth_generate(&small()).unwrap();
        for p in &c.proteins {
            p.validate().unwrap();
            let s = &c.sites[&p.id];
            assert_eq!(s.len(), small().motif_length);
            assert!(s.windows(2).all(|w| w[1] == w[0] + 1));
        }
        // Members of one family share the motif text.
        let motif = |p: &ProteinRecord| {
            let s = &c.sites[&p.id];
            p.sequence[s[0]..s[0] + s.len()].to_string()
        };
        assert_eq!(motif(&c.proteins[0]), motif(&c.proteins[6]));
    }

    #[test]
    fn noiseless_labels_follow_the_table() {
        let c = synth_generate(&SynthSpec {
            interaction_probability: 1.0,
            ..small()
        })
        .unwrap();
        let fam: BTreeMap<&str, &str> = c
            .proteins
            .iter()
            .map(|p| (p.id.as_str(), p.family_id.as_deref().unwrap()))
            .collect();
        assert!(!c.edges.is_empty());
        for e in &c.edges {
            let entry = c.table.lookup(fam[e.a.as_str()], fam[e.b.as_str()]).unwrap();
            assert_eq!(e.labels, entry.labels);
        }
    }

    #[test]
    fn unknown_family_in_rule_errors() {
        let spec = SynthSpec {
            interaction_rule: Some(CompatTable {
                entries: vec![CompatEntry {
                    family_a: "PF000".into(),
                    family_b: "nope".into(),
                    probability: 1.0,
                    labels: vec![true; 5],
                }],
            }),
            ..small()
        };
        assert!(matches!(synth_generate(&spec), Err(Error::UnknownId(_))));
    }

    #[test]
    fn spec_invariants() {
        assert!(SynthSpec { n_clans: 7, ..small() }.validate().is_err());
        assert!(SynthSpec { label_noise: 1.0, ..small() }.validate().is_err());
    }
}
