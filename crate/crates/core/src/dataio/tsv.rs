//! The three tab-separated input formats: interaction edges, keyword
//! annotations and family/clan assignments. Each parser accepts an optional
//! header row (the one the matching writer emits) and skips blank lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::records::EdgeRecord;
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;

pub const EDGES_HEADER: &str = "protein_a\tprotein_b\ttype";
pub const ANNOTATIONS_HEADER: &str = "protein_id\tkeywords";
pub const HIERARCHY_HEADER: &str = "protein_id\tfamily_id\tclan_id";

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank data lines with 1-based line numbers, header removed.
fn data_lines<'a>(text: &'a str, header: &str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    let header = header.to_string();
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(move |(k, l)| !l.trim().is_empty() && !(*k == 1 && *l == header))
}

/// Interaction edges and the type vocabulary.
pub fn parse_edges(
    path: impl AsRef<Path>,
    type_vocab: Option<&[String]>,
) -> Result<(Vec<EdgeRecord>, Vec<String>)> {
    let path = path.as_ref();
    parse_edges_str(&read(path)?, path, type_vocab)
}

pub fn parse_edges_str(
    text: &str,
    origin: &Path,
    type_vocab: Option<&[String]>,
) -> Result<(Vec<EdgeRecord>, Vec<String>)> {
    let mut rows: Vec<(usize, String, String, String)> = Vec::new();
    for (line, l) in data_lines(text, EDGES_HEADER) {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::parse(origin, line, "expected protein_a, protein_b, type"));
        }
        if cols[0] == cols[1] {
            return Err(Error::parse(origin, line, format!("self-loop on `{}`", cols[0])));
        }
        rows.push((line, cols[0].into(), cols[1].into(), cols[2].into()));
    }
    let vocab: Vec<String> = match type_vocab {
        Some(v) => v.to_vec(),
        None => rows
            .iter()
            .map(|r| r.3.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let type_index: BTreeMap<&str, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut merged: BTreeMap<(String, String), Vec<bool>> = BTreeMap::new();
    for (line, a, b, t) in rows {
        let &k = type_index
            .get(t.as_str())
            .ok_or_else(|| Error::parse(origin, line, format!("unknown interaction type `{t}`")))?;
        let key = if a < b { (a, b) } else { (b, a) };
        merged.entry(key).or_insert_with(|| vec![false; vocab.len()])[k] = true;
    }
    let edges = merged
        .into_iter()
        .map(|((a, b), labels)| EdgeRecord { a, b, labels })
        .collect();
    Ok((edges, vocab))
}

/// Canonical form: header, then one row per (edge, set label), sorted.
pub fn write_edges(edges: &[EdgeRecord], vocab: &[String]) -> String {
    let mut rows: Vec<(&str, &str, &str)> = Vec::new();
    for e in edges {
        for (k, &on) in e.labels.iter().enumerate() {
            if on {
                rows.push((&e.a, &e.b, &vocab[k]));
            }
        }
    }
    rows.sort_unstable();
    let mut out = format!("{EDGES_HEADER}\n");
    for (a, b, t) in rows {
        writeln!(out, "{a}\t{b}\t{t}").expect("write to string");
    }
    out
}

/// Keyword vocabulary and per-protein indicator vectors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotations {
    pub vocab: Vec<String>,
    pub vectors: BTreeMap<String, Vec<bool>>,
}

impl Annotations {
    pub fn width(&self) -> usize {
        self.vocab.len()
    }

    /// Indicator vector of `id`; all zeros for proteins not in the file.
    pub fn vector(&self, id: &str) -> Vec<bool> {
        self.vectors
            .get(id)
            .cloned()
            .unwrap_or_else(|| vec![false; self.vocab.len()])
    }

    pub fn vector_f64(&self, id: &str) -> Vec<f64> {
        self.vector(id).into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect()
    }
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<Annotations> {
    let path = path.as_ref();
    parse_annotations_str(&read(path)?, path)
}

pub fn parse_annotations_str(text: &str, origin: &Path) -> Result<Annotations> {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut bare: Vec<(usize, String)> = Vec::new();
    for (line, l) in data_lines(text, ANNOTATIONS_HEADER) {
        let mut cols = l.splitn(2, '\t');
        let id = cols.next().unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::parse(origin, line, "missing protein id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let tokens: Vec<String> = cols
            .next()
            .unwrap_or("")
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        if tokens.is_empty() {
            bare.push((line, id.to_string()));
        }
        rows.push((id.to_string(), tokens));
    }
    if let Some((line, id)) = bare.first() {
        log::warn!(
            "{}: {} protein(s) without keywords, first `{id}` on line {line}",
            origin.display(),
            bare.len()
        );
    }
    let vocab: Vec<String> = rows
        .iter()
        .flat_map(|(_, t)| t.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let vectors = rows
        .iter()
        .map(|(id, toks)| {
            let mut v = vec![false; vocab.len()];
            for t in toks {
                v[index[t.as_str()]] = true;
            }
            (id.clone(), v)
        })
        .collect();
    Ok(Annotations { vocab, vectors })
}

/// Header, then `id<TAB>kw1;kw2` per protein in id order, keywords in
/// vocabulary order.
pub fn write_annotations(ann: &Annotations) -> String {
    let mut out = format!("{ANNOTATIONS_HEADER}\n");
    for (id, v) in &ann.vectors {
        let toks: Vec<&str> = v
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(k, _)| ann.vocab[k].as_str())
            .collect();
        writeln!(out, "{id}\t{}", toks.join(";")).expect("write to string");
    }
    out
}

/// Clan → family tree from `protein_id, family_id, clan_id` rows. An empty
/// (or absent) clan column attaches the family to a clan of its own name.
pub fn parse_hierarchy(path: impl AsRef<Path>) -> Result<HierarchyTree> {
    let path = path.as_ref();
    parse_hierarchy_str(&read(path)?, path)
}

pub fn parse_hierarchy_str(text: &str, origin: &Path) -> Result<HierarchyTree> {
    let mut rows = Vec::new();
    for (line, l) in data_lines(text, HIERARCHY_HEADER) {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if cols.len() < 2 || cols.len() > 3 || cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::parse(origin, line, "expected protein_id, family_id[, clan_id]"));
        }
        let clan = cols.get(2).filter(|c| !c.is_empty()).map(|c| c.to_string());
        rows.push((cols[0].to_string(), cols[1].to_string(), clan));
    }
    HierarchyTree::from_clan_family(&rows)
}

/// Header, then one row per protein in id order.
pub fn write_hierarchy(tree: &HierarchyTree) -> String {
    let mut out = format!("{HIERARCHY_HEADER}\n");
    for (p, path) in tree.leaf_paths() {
        writeln!(out, "{p}\t{}\t{}", path[path.len() - 1], path[0]).expect("write to string");
    }
    out
}
