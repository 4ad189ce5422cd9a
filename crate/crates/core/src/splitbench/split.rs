use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::EdgeRecord;
use crate::error::{Error, Result};
use crate::numcore::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Random,
    Bfs,
    Dfs,
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::Random => "random",
            Self::Bfs => "bfs",
            Self::Dfs => "dfs",
        })
    }
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "bfs" => Ok(Self::Bfs),
            "dfs" => Ok(Self::Dfs),
            other => Err(Error::Config(format!(
                "unknown split method `{other}` (expected random, bfs or dfs)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    /// At least one endpoint occurs in a train or validation edge.
    Easy,
    Hard,
}

/// Partition of an edge list, by index, into train, validation and test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub method: SplitMethod,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
    pub train_edges: Vec<usize>,
    pub val_edges: Vec<usize>,
    pub test_edges: Vec<usize>,
    pub difficulty: BTreeMap<usize, Difficulty>,
}

impl SplitSpec {
    pub fn n_edges(&self) -> usize {
        self.train_edges.len() + self.val_edges.len() + self.test_edges.len()
    }

    /// Fraction of test edges tagged hard; 0 for an empty test set.
    pub fn hard_fraction(&self) -> f64 {
        if self.test_edges.is_empty() {
            return 0.0;
        }
        let hard = self.difficulty.values().filter(|&&d| d == Difficulty::Hard).count();
        hard as f64 / self.test_edges.len() as f64
    }

    /// Checks that the three lists partition `0..n_edges` and every test
    /// edge is tagged.
    pub fn validate(&self, n_edges: usize) -> Result<()> {
        let mut seen = vec![false; n_edges];
        for &e in self.train_edges.iter().chain(&self.val_edges).chain(&self.test_edges) {
            if e >= n_edges {
                return Err(Error::Validation(format!("split references edge {e} of {n_edges}")));
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::Validation(format!("edge {e} appears in two split parts")));
            }
        }
        if let Some(e) = seen.iter().position(|&s| !s) {
            return Err(Error::Validation(format!("edge {e} is in no split part")));
        }
        let tagged: BTreeSet<usize> = self.difficulty.keys().copied().collect();
        let test: BTreeSet<usize> = self.test_edges.iter().copied().collect();
        if tagged != test {
            return Err(Error::Validation("difficulty tags do not match the test edges".into()));
        }
        Ok(())
    }
}

fn check_fractions(test_fraction: f64, val_fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&test_fraction) || !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "fractions must lie in [0, 1): test {test_fraction}, val {val_fraction}"
        )));
    }
    if test_fraction + val_fraction >= 1.0 {
        return Err(Error::Config(format!(
            "test ({test_fraction}) and validation ({val_fraction}) fractions must sum below 1"
        )));
    }
    Ok(())
}

/// `(test quota, validation size)` for `m` edges; the validation share is
/// taken from the total as well and must leave training edges.
fn quotas(m: usize, test_fraction: f64, val_fraction: f64) -> Result<(usize, usize)> {
    check_fractions(test_fraction, val_fraction)?;
    let n_test = (test_fraction * m as f64).round() as usize;
    let n_val = (val_fraction * m as f64).round() as usize;
    if n_test + n_val >= m {
        return Err(Error::Validation(format!(
            "{m} edges are too few for test fraction {test_fraction} and validation fraction \
             {val_fraction}"
        )));
    }
    Ok((n_test, n_val))
}

/// Splits the non-test remainder into train and validation by random slice
/// and tags test edges.
fn finish(
    method: SplitMethod,
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    test: Vec<usize>,
    n_val: usize,
    rng: &mut Rng,
) -> SplitSpec {
    let in_test: BTreeSet<usize> = test.iter().copied().collect();
    let mut rest: Vec<usize> = (0..edges.len()).filter(|e| !in_test.contains(e)).collect();
    rng.shuffle(&mut rest);
    let mut val = rest.split_off(rest.len() - n_val);
    rest.sort_unstable();
    val.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    let mut spec = SplitSpec {
        method,
        test_fraction,
        val_fraction,
        seed: rng.seed(),
        train_edges: rest,
        val_edges: val,
        test_edges: test,
        difficulty: BTreeMap::new(),
    };
    spec.difficulty = stratify_difficulty(&spec, edges);
    spec
}

pub fn split_random(
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<SplitSpec> {
    let (n_test, n_val) = quotas(edges.len(), test_fraction, val_fraction)?;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    rng.shuffle(&mut order);
    order.truncate(n_test);
    Ok(finish(SplitMethod::Random, edges, test_fraction, val_fraction, order, n_val, rng))
}

pub fn split_bfs(
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<SplitSpec> {
    traversal_split(SplitMethod::Bfs, edges, test_fraction, val_fraction, rng)
}

pub fn split_dfs(
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<SplitSpec> {
    traversal_split(SplitMethod::Dfs, edges, test_fraction, val_fraction, rng)
}

pub fn split_edges(
    method: SplitMethod,
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<SplitSpec> {
    match method {
        SplitMethod::Random => split_random(edges, test_fraction, val_fraction, rng),
        SplitMethod::Bfs => split_bfs(edges, test_fraction, val_fraction, rng),
        SplitMethod::Dfs => split_dfs(edges, test_fraction, val_fraction, rng),
    }
}

/// Node index (sorted ids) and, per node, ascending `(neighbor, edge)`
/// pairs.
fn edge_graph(edges: &[EdgeRecord]) -> (Vec<&str>, Vec<Vec<(usize, usize)>>) {
    let ids: Vec<&str> = edges
        .iter()
        .flat_map(|e| [e.a.as_str(), e.b.as_str()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    for (k, e) in edges.iter().enumerate() {
        let (a, b) = (index[e.a.as_str()], index[e.b.as_str()]);
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    (ids, adj)
}

/// Visits nodes in traversal order from seeded random roots. When a node
/// is visited, its edges to already visited nodes join the test set in
/// ascending neighbor order until the quota is met.
fn traversal_split(
    method: SplitMethod,
    edges: &[EdgeRecord],
    test_fraction: f64,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<SplitSpec> {
    let (quota, n_val) = quotas(edges.len(), test_fraction, val_fraction)?;
    let (ids, adj) = edge_graph(edges);
    let n = ids.len();
    let mut visited = vec![false; n];
    let mut test = Vec::with_capacity(quota);
    let mut frontier: VecDeque<usize> = VecDeque::new();
    while test.len() < quota {
        let unvisited: Vec<usize> = (0..n).filter(|&v| !visited[v]).collect();
        if unvisited.is_empty() {
            return Err(Error::Validation(format!(
                "traversal covered the graph with {} of {quota} test edges",
                test.len()
            )));
        }
        frontier.push_back(unvisited[rng.below(unvisited.len())]);
        while test.len() < quota {
            let next = match method {
                SplitMethod::Dfs => frontier.pop_back(),
                _ => frontier.pop_front(),
            };
            let Some(v) = next else { break };
            if visited[v] {
                continue;
            }
            visited[v] = true;
            for &(u, e) in &adj[v] {
                if visited[u] && test.len() < quota {
                    test.push(e);
                }
            }
            let fresh = adj[v].iter().map(|&(u, _)| u).filter(|&u| !visited[u]);
            match method {
                SplitMethod::Dfs => {
                    let f: Vec<usize> = fresh.collect();
                    frontier.extend(f.into_iter().rev());
                }
                _ => frontier.extend(fresh),
            }
        }
        frontier.clear();
    }
    Ok(finish(method, edges, test_fraction, val_fraction, test, n_val, rng))
}

/// Tags each test edge easy (an endpoint occurs in a train or validation
/// edge) or hard.
pub fn stratify_difficulty(split: &SplitSpec, edges: &[EdgeRecord]) -> BTreeMap<usize, Difficulty> {
    let seen: BTreeSet<&str> = split
        .train_edges
        .iter()
        .chain(&split.val_edges)
        .flat_map(|&e| [edges[e].a.as_str(), edges[e].b.as_str()])
        .collect();
    split
        .test_edges
        .iter()
        .map(|&e| {
            let d = if seen.contains(edges[e].a.as_str()) || seen.contains(edges[e].b.as_str()) {
                Difficulty::Easy
            } else {
                Difficulty::Hard
            };
            (e, d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Vec<EdgeRecord> {
        (0..n)
            .map(|i| EdgeRecord::new(&format!("N{i:02}"), &format!("N{:02}", i + 1), vec![true]).unwrap())
            .collect()
    }

    #[test]
    fn random_rounding_and_determinism() {
        let e = chain(10);
        let s = split_random(&e, 0.2, 0.0, &mut Rng::new(3)).unwrap();
        assert_eq!(s.test_edges.len(), 2);
        s.validate(10).unwrap();
        assert_eq!(s, split_random(&e, 0.2, 0.0, &mut Rng::new(3)).unwrap());
        let z = split_random(&e, 0.0, 0.2, &mut Rng::new(3)).unwrap();
        assert!(z.test_edges.is_empty());
        assert_eq!(z.val_edges.len(), 2);
    }

    #[test]
    fn traversal_quota_is_exact() {
        let e = chain(20);
        for m in [SplitMethod::Bfs, SplitMethod::Dfs] {
            let s = split_edges(m, &e, 0.3, 0.1, &mut Rng::new(5)).unwrap();
            assert_eq!(s.test_edges.len(), 6);
            assert_eq!(s.val_edges.len(), 2);
            s.validate(20).unwrap();
        }
        let z = split_bfs(&e, 0.0, 0.0, &mut Rng::new(5)).unwrap();
        assert!(z.test_edges.is_empty());
    }

    #[test]
    fn fraction_errors() {
        let e = chain(3);
        assert!(split_random(&e, 0.6, 0.5, &mut Rng::new(1)).is_err());
        assert!(split_random(&e, 0.9, 0.0, &mut Rng::new(1)).is_err());
        assert!(split_random(&[], 0.2, 0.0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn difficulty_tags() {
        let e = vec![
            EdgeRecord::new("A", "B", vec![true]).unwrap(),
            EdgeRecord::new("A", "C", vec![true]).unwrap(),
            EdgeRecord::new("D", "E", vec![true]).unwrap(),
        ];
        let s = SplitSpec {
            method: SplitMethod::Random,
            test_fraction: 0.0,
            val_fraction: 0.0,
            seed: 0,
            train_edges: vec![0],
            val_edges: vec![],
            test_edges: vec![1, 2],
            difficulty: BTreeMap::new(),
        };
        let d = stratify_difficulty(&s, &e);
        assert_eq!(d[&1], Difficulty::Easy);
        assert_eq!(d[&2], Difficulty::Hard);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("dfs".parse::<SplitMethod>().unwrap(), SplitMethod::Dfs);
        assert!("louvain".parse::<SplitMethod>().is_err());
    }
}
