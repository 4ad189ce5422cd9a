use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 20 standard amino acids followed by `X`.
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWYX";

pub fn is_residue(c: char) -> bool {
    AMINO_ACIDS.contains(c)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub id: String,
    pub sequence: String,
    /// Binary indicators over the keyword vocabulary.
    pub keywords: Vec<bool>,
    pub family_id: Option<String>,
    pub clan_id: Option<String>,
}

impl ProteinRecord {
    pub fn validate(&self) -> Result<()> {
        if self.sequence.is_empty() {
            return Err(Error::Validation(format!("protein `{}` has an empty sequence", self.id)));
        }
        if let Some(c) = self.sequence.chars().find(|&c| !is_residue(c)) {
            return Err(Error::Validation(format!(
                "protein `{}` has residue {c:?} outside the alphabet",
                self.id
            )));
        }
        Ok(())
    }
}

/// One undirected interaction with its multi-label type vector.
///
/// Endpoints are stored in lexicographic order (`a < b`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: String,
    pub b: String,
    pub labels: Vec<bool>,
}

impl EdgeRecord {
    pub fn new(a: &str, b: &str, labels: Vec<bool>) -> Result<Self> {
        if a == b {
            return Err(Error::Validation(format!("self-loop on `{a}`")));
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Ok(Self {
            a: a.to_string(),
            b: b.to_string(),
            labels,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}
