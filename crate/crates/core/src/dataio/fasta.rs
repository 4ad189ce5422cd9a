use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::records::is_residue;
use crate::error::{Error, Result};

/// Reads `(id, sequence)` pairs in file order. The id is the first
/// whitespace-delimited token of the header; sequence lines are joined and
/// upper-cased.
pub fn parse_fasta(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fasta_str(&text, path)
}

pub fn parse_fasta_str(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut header_line = 0;
    let finish = |out: &[(String, String)], header_line: usize| -> Result<()> {
        match out.last() {
            Some((_, seq)) if seq.is_empty() => {
                Err(Error::parse(origin, header_line, "empty sequence"))
            }
            _ => Ok(()),
        }
    };
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            finish(&out, header_line)?;
            let id = header
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::parse(origin, line_no, "header without an id"))?;
            if !seen.insert(id.to_string()) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            out.push((id.to_string(), String::new()));
            header_line = line_no;
        } else {
            let (_, seq) = out
                .last_mut()
                .ok_or_else(|| Error::parse(origin, line_no, "sequence data before the first header"))?;
            for c in line.chars().map(|c| c.to_ascii_uppercase()) {
                if !is_residue(c) {
                    return Err(Error::parse(origin, line_no, format!("invalid residue {c:?}")));
                }
                seq.push(c);
            }
        }
    }
    finish(&out, header_line)?;
    Ok(out)
}

/// One header line and one sequence line per record.
pub fn write_fasta(records: &[(String, String)]) -> String {
    let mut out = String::new();
    for (id, seq) in records {
        writeln!(out, ">{id}\n{seq}").expect("write to string");
    }
    out
}
