use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::tree::HierarchyTree;
use crate::error::{Error, Result};
use crate::numcore::{exact_sum, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterRow {
    pub id: String,
    pub pc1: f64,
    pub pc2: f64,
    pub label: String,
}

/// Two-component PCA projection of a batch of embeddings, labeled by their
/// ancestor at one hierarchy level.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub rows: Vec<ClusterRow>,
    /// Mean silhouette by label in the embedding space; `None` when
    /// undefined (fewer than two labels, one label per sample, or all
    /// distances zero).
    pub silhouette: Option<f64>,
}

impl ClusterReport {
    /// `id,pc1,pc2,label` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,pc1,pc2,label\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.id, r.pc1, r.pc2, r.label).expect("write to string");
        }
        out
    }
}

pub fn embedding_cluster_report(
    embeddings: &Tensor,
    ids: &[String],
    tree: &HierarchyTree,
    level: usize,
) -> Result<ClusterReport> {
    let (n, d) = embeddings.dims2()?;
    if n < 2 {
        return Err(Error::Param("cluster report needs at least two samples".into()));
    }
    if ids.len() != n {
        return Err(Error::Shape(format!("{} ids for {n} rows", ids.len())));
    }
    if level >= tree.depth() {
        return Err(Error::Param(format!("level {level} outside tree depth {}", tree.depth())));
    }
    let labels: Vec<String> = ids
        .iter()
        .map(|id| tree.ancestor_name(id, level).map(str::to_string))
        .collect::<Result<_>>()?;

    let comps = principal_axes(embeddings, 2);
    let mean: Vec<f64> = (0..d)
        .map(|j| exact_sum((0..n).map(|i| embeddings.get2(i, j))) / n as f64)
        .collect();
    let project = |i: usize, axis: Option<&Vec<f64>>| {
        axis.map_or(0.0, |a| {
            embeddings
                .row(i)
                .iter()
                .zip(&mean)
                .zip(a)
                .map(|((x, m), v)| (x - m) * v)
                .sum()
        })
    };
    let rows = (0..n)
        .map(|i| ClusterRow {
            id: ids[i].clone(),
            pc1: project(i, comps.first()),
            pc2: project(i, comps.get(1)),
            label: labels[i].clone(),
        })
        .collect();
    Ok(ClusterReport {
        rows,
        silhouette: silhouette(embeddings, &labels),
    })
}

/// Leading eigenvectors of the covariance matrix, each with its
/// largest-magnitude component made positive.
fn principal_axes(x: &Tensor, k: usize) -> Vec<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d)
        .map(|j| exact_sum((0..n).map(|i| x.get2(i, j))) / n as f64)
        .collect();
    let mut cov = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            let v = exact_sum((0..n).map(|i| (x.get2(i, a) - mean[a]) * (x.get2(i, b) - mean[b])))
                / n as f64;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let (vals, vecs) = jacobi_eigen(cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(k)
        .map(|c| {
            let mut v: Vec<f64> = (0..d).map(|r| vecs[r * d + c]).collect();
            let lead = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
                .0;
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric d×d matrix. Returns the
/// eigenvalues and the eigenvectors as columns of a row-major matrix.
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// Mean silhouette coefficient with Euclidean distances.
pub fn silhouette(x: &Tensor, labels: &[String]) -> Option<f64> {
    let n = labels.len();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    if groups.len() < 2 || groups.len() >= n {
        return None;
    }
    let dist = |i: usize, j: usize| -> f64 {
        x.row(i)
            .iter()
            .zip(x.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut any_distance = false;
    let mut total = 0.0;
    for i in 0..n {
        let own = &groups[labels[i].as_str()];
        if own.len() == 1 {
            continue; // singleton clusters score 0
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist(i, j)).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = groups
            .iter()
            .filter(|(l, _)| **l != labels[i].as_str())
            .map(|(_, m)| m.iter().map(|&j| dist(i, j)).sum::<f64>() / m.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            any_distance = true;
            total += (b - a) / denom;
        }
    }
    any_distance.then(|| total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    fn s(x: &str) -> String {
        x.to_string()
    }

    fn two_family_tree(n_each: usize) -> (HierarchyTree, Vec<String>) {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for f in 0..2 {
            for k in 0..n_each {
                let id = format!("p{f}_{k}");
                rows.push((id.clone(), format!("F{f}"), Some(s("C"))));
                ids.push(id);
            }
        }
        (HierarchyTree::from_clan_family(&rows).unwrap(), ids)
    }

    #[test]
    fn separated_clusters_score_high() {
        let (tree, ids) = two_family_tree(10);
        let mut rng = Rng::new(5);
        let mut data = Vec::new();
        for f in 0..2 {
            for _ in 0..10 {
                let center = if f == 0 { -10.0 } else { 10.0 };
                data.push(center + 0.3 * rng.normal());
                data.push(0.3 * rng.normal());
            }
        }
        let x = Tensor::matrix(20, 2, data).unwrap();
        let r = embedding_cluster_report(&x, &ids, &tree, 1).unwrap();
        assert!(r.silhouette.unwrap() > 0.9);
        // The separating direction is the first component.
        assert!(r.rows[0].pc1.abs() > 5.0);
        assert!(r.to_csv().starts_with("id,pc1,pc2,label\np0_0,"));
    }

    #[test]
    fn one_sample_per_family_is_undefined() {
        let tree = HierarchyTree::from_clan_family(&[
            (s("a"), s("F1"), Some(s("C"))),
            (s("b"), s("F2"), Some(s("C"))),
            (s("c"), s("F3"), Some(s("C"))),
        ])
        .unwrap();
        let x = Tensor::matrix(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let r = embedding_cluster_report(&x, &[s("a"), s("b"), s("c")], &tree, 1).unwrap();
        assert_eq!(r.silhouette, None);
    }

    #[test]
    fn identical_embeddings_are_undefined() {
        let (tree, ids) = two_family_tree(3);
        let x = Tensor::full(&[6, 4], 0.5);
        let r = embedding_cluster_report(&x, &ids, &tree, 1).unwrap();
        assert_eq!(r.silhouette, None);
    }

    #[test]
    fn permutation_leaves_coordinates_unchanged() {
        let (tree, ids) = two_family_tree(4);
        let mut rng = Rng::new(11);
        let data: Vec<f64> = (0..8 * 5).map(|_| rng.normal()).collect();
        let x = Tensor::matrix(8, 5, data).unwrap();
        let base = embedding_cluster_report(&x, &ids, &tree, 1).unwrap();
        let perm = [3usize, 7, 0, 5, 1, 6, 2, 4];
        let px: Vec<Vec<f64>> = perm.iter().map(|&i| x.row(i).to_vec()).collect();
        let pids: Vec<String> = perm.iter().map(|&i| ids[i].clone()).collect();
        let r = embedding_cluster_report(&Tensor::from_rows(&px).unwrap(), &pids, &tree, 1).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(r.rows[k], base.rows[i]);
        }
    }

    #[test]
    fn needs_two_samples() {
        let (tree, ids) = two_family_tree(1);
        let x = Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(embedding_cluster_report(&x, &ids[..1], &tree, 1).is_err());
    }
}
