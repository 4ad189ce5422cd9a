use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::dataio::EdgeRecord;
use crate::error::{Error, Result};
use crate::numcore::{Adjacency, Tensor};

/// A labelled edge between two node indices, `a < b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub labels: Vec<bool>,
}

/// Proteins as nodes (sorted ids), their features, the message-passing
/// adjacency and the full labelled edge list.
#[derive(Clone, Debug)]
pub struct PpiGraph {
    pub ids: Vec<String>,
    index: BTreeMap<String, usize>,
    /// `N×d` node features, rows in `ids` order.
    pub features: Tensor,
    pub adjacency: Rc<Adjacency>,
    /// Every input edge, in input order.
    pub edges: Vec<GraphEdge>,
    pub n_types: usize,
}

impl PpiGraph {
    pub fn n_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Node pairs of the message-passing adjacency, `a < b`.
    pub fn adjacency_pairs(&self) -> BTreeSet<(usize, usize)> {
        let adj = &self.adjacency;
        (0..adj.n_nodes())
            .flat_map(|v| adj.neighbors(v).iter().filter(move |&&u| u > v).map(move |&u| (v, u)))
            .collect()
    }

    pub fn edge_pairs(&self, idx: &[usize]) -> Vec<(usize, usize)> {
        idx.iter().map(|&k| (self.edges[k].a, self.edges[k].b)).collect()
    }

    pub fn edge_labels(&self, idx: &[usize]) -> Vec<Vec<bool>> {
        idx.iter().map(|&k| self.edges[k].labels.clone()).collect()
    }

    /// The same graph with different node features.
    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        if features.dims2()?.0 != self.n_nodes() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.dims2()?.0,
                self.n_nodes()
            )));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }
}

/// Builds the graph over every protein in `embeddings`. Only the edges
/// listed in `message_edges` (indices into `edges`) enter the adjacency.
pub fn build_graph(
    edges: &[EdgeRecord],
    embeddings: &BTreeMap<String, Vec<f64>>,
    message_edges: &[usize],
) -> Result<PpiGraph> {
    let ids: Vec<String> = embeddings.keys().cloned().collect();
    if ids.is_empty() {
        return Err(Error::Param("graph has no nodes".into()));
    }
    let index: BTreeMap<String, usize> =
        ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let width = embeddings.values().next().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(ids.len());
    for (id, v) in embeddings {
        if v.len() != width {
            return Err(Error::Shape(format!(
                "embedding of `{id}` has width {}, expected {width}",
                v.len()
            )));
        }
        rows.push(v.clone());
    }
    let features = Tensor::from_rows(&rows)?;

    let n_types = edges.first().map_or(0, |e| e.labels.len());
    let mut graph_edges = Vec::with_capacity(edges.len());
    for e in edges {
        let node = |p: &str| {
            index.get(p).copied().ok_or_else(|| {
                Error::UnknownId(format!("{p} (edge endpoint without an embedding)"))
            })
        };
        let (a, b) = (node(&e.a)?, node(&e.b)?);
        if e.labels.len() != n_types {
            return Err(Error::Shape("edges carry label vectors of different lengths".into()));
        }
        graph_edges.push(GraphEdge {
            a: a.min(b),
            b: a.max(b),
            labels: e.labels.clone(),
        });
    }

    let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ids.len()];
    for &k in message_edges {
        let e = graph_edges
            .get(k)
            .ok_or_else(|| Error::Param(format!("message edge {k} out of range")))?;
        nbrs[e.a].insert(e.b);
        nbrs[e.b].insert(e.a);
    }
    let adjacency = Adjacency::new(nbrs.into_iter().map(|s| s.into_iter().collect()).collect())?;
    Ok(PpiGraph {
        ids,
        index,
        features,
        adjacency: Rc::new(adjacency),
        edges: graph_edges,
        n_types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(ids: &[&str]) -> BTreeMap<String, Vec<f64>> {
        ids.iter().map(|s| (s.to_string(), vec![1.0, 2.0])).collect()
    }

    #[test]
    fn degrees_and_duplicates() {
        let e = vec![
            EdgeRecord::new("A", "B", vec![true]).unwrap(),
            EdgeRecord::new("B", "C", vec![true]).unwrap(),
            EdgeRecord::new("C", "B", vec![true]).unwrap(),
        ];
        let g = build_graph(&e, &emb(&["A", "B", "C"]), &[0, 1, 2]).unwrap();
        let deg: Vec<usize> = (0..3).map(|v| g.adjacency.degree(v)).collect();
        assert_eq!(deg, vec![1, 2, 1]);
        assert_eq!(g.adjacency.n_edges(), 2);
    }

    #[test]
    fn adjacency_uses_only_listed_edges() {
        let e = vec![
            EdgeRecord::new("A", "B", vec![true]).unwrap(),
            EdgeRecord::new("B", "C", vec![true]).unwrap(),
        ];
        let g = build_graph(&e, &emb(&["A", "B", "C", "D"]), &[1]).unwrap();
        assert_eq!(g.adjacency_pairs(), BTreeSet::from([(1, 2)]));
        assert_eq!(g.n_nodes(), 4);
    }

    #[test]
    fn missing_embedding_names_protein() {
        let e = vec![EdgeRecord::new("A", "Q9", vec![true]).unwrap()];
        let err = build_graph(&e, &emb(&["A"]), &[]).unwrap_err();
        assert!(err.to_string().contains("Q9"));
    }
}
