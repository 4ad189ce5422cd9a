use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
struct TreeNode {
    name: String,
    parent: Option<usize>,
}

/// Multi-level label tree over proteins.
///
/// Level 0 is the one nearest the root (clan for the Pfam tree); deeper
/// levels have larger indices. Proteins are leaves hanging below the
/// deepest level.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyTree {
    level_names: Vec<String>,
    level_weights: Vec<f64>,
    nodes: Vec<Vec<TreeNode>>,
    index: Vec<BTreeMap<String, usize>>,
    leaf_of: BTreeMap<String, usize>,
}

impl HierarchyTree {
    /// Builds a tree from one root-to-leaf label path per protein.
    ///
    /// A label at some level must always have the same parent label.
    pub fn from_paths(level_names: Vec<String>, rows: &[(String, Vec<String>)]) -> Result<Self> {
        let depth = level_names.len();
        if depth == 0 {
            return Err(Error::Param("a hierarchy needs at least one level".into()));
        }
        let mut nodes: Vec<Vec<TreeNode>> = vec![Vec::new(); depth];
        let mut index: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); depth];
        let mut leaf_of = BTreeMap::new();
        for (protein, path) in rows {
            if path.len() != depth {
                return Err(Error::Param(format!(
                    "protein `{protein}` has {} labels, tree has {depth} levels",
                    path.len()
                )));
            }
            let mut parent: Option<usize> = None;
            for (l, label) in path.iter().enumerate() {
                let id = match index[l].get(label) {
                    Some(&id) => {
                        if nodes[l][id].parent != parent {
                            let old = nodes[l][id].parent.map(|p| nodes[l - 1][p].name.clone());
                            let new = parent.map(|p| nodes[l - 1][p].name.clone());
                            return Err(Error::FamilyClanConflict {
                                family: label.clone(),
                                first: old.unwrap_or_default(),
                                second: new.unwrap_or_default(),
                            });
                        }
                        id
                    }
                    None => {
                        nodes[l].push(TreeNode {
                            name: label.clone(),
                            parent,
                        });
                        index[l].insert(label.clone(), nodes[l].len() - 1);
                        nodes[l].len() - 1
                    }
                };
                parent = Some(id);
            }
            if leaf_of.insert(protein.clone(), parent.expect("depth > 0")).is_some() {
                return Err(Error::DuplicateId(protein.clone()));
            }
        }
        Ok(Self {
            level_weights: vec![1.0; depth],
            level_names,
            nodes,
            index,
            leaf_of,
        })
    }

    /// Two-level clan → family tree. Families without a clan get a
    /// singleton clan named after the family.
    pub fn from_clan_family(rows: &[(String, String, Option<String>)]) -> Result<Self> {
        let paths: Vec<(String, Vec<String>)> = rows
            .iter()
            .map(|(p, fam, clan)| {
                let clan = clan.clone().unwrap_or_else(|| fam.clone());
                (p.clone(), vec![clan, fam.clone()])
            })
            .collect();
        Self::from_paths(vec!["clan".into(), "family".into()], &paths)
    }

    pub fn with_level_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.depth() {
            return Err(Error::Param(format!(
                "{} level weights for {} levels",
                weights.len(),
                self.depth()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Param("level weights must be positive".into()));
        }
        self.level_weights = weights;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.level_names.len()
    }

    pub fn level_names(&self) -> &[String] {
        &self.level_names
    }

    pub fn level_weights(&self) -> &[f64] {
        &self.level_weights
    }

    pub fn n_nodes(&self, level: usize) -> usize {
        self.nodes[level].len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn proteins(&self) -> impl Iterator<Item = &String> {
        self.leaf_of.keys()
    }

    pub fn contains(&self, protein: &str) -> bool {
        self.leaf_of.contains_key(protein)
    }

    /// Node indices of the ancestors of `protein`, root level first.
    pub fn ancestors(&self, protein: &str) -> Result<Vec<usize>> {
        let mut node = *self
            .leaf_of
            .get(protein)
            .ok_or_else(|| Error::UnknownId(protein.to_string()))?;
        let mut out = vec![0; self.depth()];
        for l in (0..self.depth()).rev() {
            out[l] = node;
            if let Some(p) = self.nodes[l][node].parent {
                node = p;
            }
        }
        Ok(out)
    }

    pub fn ancestor_name(&self, protein: &str, level: usize) -> Result<&str> {
        let a = self.ancestors(protein)?;
        Ok(&self.nodes[level][a[level]].name)
    }

    pub fn node_index(&self, level: usize, name: &str) -> Option<usize> {
        self.index[level].get(name).copied()
    }

    pub fn node_name(&self, level: usize, idx: usize) -> &str {
        &self.nodes[level][idx].name
    }

    /// Parent label of the node `name` at `level` (level > 0).
    pub fn parent_name(&self, level: usize, name: &str) -> Option<&str> {
        let id = self.node_index(level, name)?;
        let p = self.nodes[level][id].parent?;
        Some(&self.nodes[level - 1][p].name)
    }

    /// Rows `(protein, path...)` in protein order.
    pub fn leaf_paths(&self) -> Vec<(String, Vec<String>)> {
        self.leaf_of
            .keys()
            .map(|p| {
                let anc = self.ancestors(p).expect("known leaf");
                let path = anc
                    .iter()
                    .enumerate()
                    .map(|(l, &n)| self.nodes[l][n].name.clone())
                    .collect();
                (p.clone(), path)
            })
            .collect()
    }
}

/// Positive set of one anchor at one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelPairs {
    pub anchor: usize,
    pub level: usize,
    pub positives: Vec<usize>,
}

/// Batch members whose lowest common ancestor with member `i` sits at
/// `level`: they share the level-`level` ancestor and, when a deeper level
/// exists, differ there. Returned in ascending order.
pub fn positives_at_level(
    tree: &HierarchyTree,
    batch: &[String],
    i: usize,
    level: usize,
) -> Result<Vec<usize>> {
    if i >= batch.len() {
        return Err(Error::Param(format!("anchor {i} outside batch of {}", batch.len())));
    }
    if level >= tree.depth() {
        return Err(Error::Param(format!("level {level} outside tree depth {}", tree.depth())));
    }
    let anc: Vec<Vec<usize>> = batch
        .iter()
        .map(|p| tree.ancestors(p))
        .collect::<Result<_>>()?;
    Ok(positives_from_ancestors(&anc, i, level))
}

fn positives_from_ancestors(anc: &[Vec<usize>], i: usize, level: usize) -> Vec<usize> {
    let depth = anc[i].len();
    (0..anc.len())
        .filter(|&j| {
            j != i
                && anc[j][level] == anc[i][level]
                && (level + 1 == depth || anc[j][level + 1] != anc[i][level + 1])
        })
        .collect()
}

/// Positive sets for every (level, anchor), indexed `[level][anchor]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveSets {
    sets: Vec<Vec<Vec<usize>>>,
}

impl PositiveSets {
    pub fn from_batch(tree: &HierarchyTree, batch: &[String]) -> Result<Self> {
        let anc: Vec<Vec<usize>> = batch
            .iter()
            .map(|p| tree.ancestors(p))
            .collect::<Result<_>>()?;
        let sets = (0..tree.depth())
            .map(|l| {
                (0..batch.len())
                    .map(|i| positives_from_ancestors(&anc, i, l))
                    .collect()
            })
            .collect();
        Ok(Self { sets })
    }

    /// Directly from nested lists (used for synthetic checks).
    pub fn from_sets(sets: Vec<Vec<Vec<usize>>>) -> Self {
        Self { sets }
    }

    pub fn depth(&self) -> usize {
        self.sets.len()
    }

    pub fn batch_size(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    pub fn get(&self, level: usize, anchor: usize) -> &[usize] {
        &self.sets[level][anchor]
    }

    pub fn total_pairs(&self) -> usize {
        self.sets.iter().flatten().map(Vec::len).sum()
    }

    pub fn as_level_pairs(&self) -> Vec<LevelPairs> {
        let mut out = Vec::new();
        for (level, per) in self.sets.iter().enumerate() {
            for (anchor, p) in per.iter().enumerate() {
                out.push(LevelPairs {
                    anchor,
                    level,
                    positives: p.clone(),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> String {
        x.to_string()
    }

    fn toy() -> HierarchyTree {
        HierarchyTree::from_clan_family(&[
            (s("a"), s("F1"), Some(s("C1"))),
            (s("b"), s("F1"), Some(s("C1"))),
            (s("c"), s("F2"), Some(s("C1"))),
            (s("d"), s("F3"), None),
        ])
        .unwrap()
    }

    #[test]
    fn builds_two_levels() {
        let t = toy();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.n_leaves(), 4);
        assert_eq!(t.n_nodes(0), 2);
        assert_eq!(t.n_nodes(1), 3);
        assert_eq!(t.ancestor_name("d", 0).unwrap(), "F3");
        assert_eq!(t.parent_name(1, "F2"), Some("C1"));
    }

    #[test]
    fn family_in_two_clans_is_rejected() {
        let err = HierarchyTree::from_clan_family(&[
            (s("a"), s("F1"), Some(s("C1"))),
            (s("b"), s("F1"), Some(s("C2"))),
        ])
        .unwrap_err();
        match err {
            Error::FamilyClanConflict { family, .. } => assert_eq!(family, "F1"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn same_family_positive_only_at_family_level() {
        let t = toy();
        let batch = vec![s("a"), s("b"), s("c"), s("d")];
        assert_eq!(positives_at_level(&t, &batch, 0, 1).unwrap(), vec![1]);
        assert_eq!(positives_at_level(&t, &batch, 0, 0).unwrap(), vec![2]);
        assert_eq!(positives_at_level(&t, &batch, 2, 1).unwrap(), Vec::<usize>::new());
        assert_eq!(positives_at_level(&t, &batch, 2, 0).unwrap(), vec![0, 1]);
        assert!(positives_at_level(&t, &batch, 3, 0).unwrap().is_empty());
    }

    #[test]
    fn unknown_protein_errors() {
        let t = toy();
        let batch = vec![s("a"), s("zz")];
        assert!(matches!(
            positives_at_level(&t, &batch, 0, 0),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(toy().with_level_weights(vec![1.0, 0.0]).is_err());
        assert!(toy().with_level_weights(vec![1.0]).is_err());
        assert!(toy().with_level_weights(vec![0.5, 2.0]).is_ok());
    }
}
