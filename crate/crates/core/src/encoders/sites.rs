use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::numcore::{exact_sum, Tensor};

/// Attention received by each residue, averaged over blocks and heads.
///
/// `maps[block][head]` is an `L×L` matrix whose rows are queries. Only
/// unmasked queries contribute, masked residues score 0 and the scores
/// sum to 1.
pub fn attention_site_scores(maps: &[Vec<Tensor>], mask: &[bool]) -> Result<Vec<f64>> {
    let len = mask.len();
    if !mask.iter().any(|&m| m) {
        return Err(Error::Param("every position is masked".into()));
    }
    let n_maps: usize = maps.iter().map(Vec::len).sum();
    if n_maps == 0 {
        return Err(Error::Param("no attention maps".into()));
    }
    let mut received = vec![Vec::with_capacity(n_maps * len); len];
    for m in maps.iter().flatten() {
        if m.shape() != [len, len] {
            return Err(Error::Shape(format!(
                "attention map of shape {:?} for {len} residues",
                m.shape()
            )));
        }
        for (q, &mq) in mask.iter().enumerate() {
            if mq {
                for (r, &v) in m.row(q).iter().enumerate() {
                    received[r].push(v);
                }
            }
        }
    }
    let mut scores: Vec<f64> = received
        .into_iter()
        .zip(mask)
        .map(|(v, &m)| if m { exact_sum(v) / n_maps as f64 } else { 0.0 })
        .collect();
    let total = exact_sum(scores.iter().copied());
    if !(total > 0.0) {
        return Err(Error::NonFinite("attention scores sum to zero".into()));
    }
    for s in &mut scores {
        *s /= total;
    }
    Ok(scores)
}

/// Indices of the `n` highest scores; ties go to the lower index.
pub fn top_residues(scores: &[f64], n: usize) -> BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter().take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_attention() {
        let m = Tensor::full(&[8, 8], 0.125);
        let s = attention_site_scores(&[vec![m.clone(), m]], &[true; 8]).unwrap();
        assert!(s.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn focused_head_is_one_hot() {
        let mut data = vec![0.0; 36];
        for q in 0..6 {
            data[q * 6 + 3] = 1.0;
        }
        let m = Tensor::matrix(6, 6, data).unwrap();
        let s = attention_site_scores(&[vec![m]], &[true; 6]).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(top_residues(&s, 1), BTreeSet::from([3]));
    }

    #[test]
    fn masked_positions_score_zero() {
        let m = Tensor::full(&[4, 4], 0.25);
        let s = attention_site_scores(&[vec![m]], &[true, true, false, true]).unwrap();
        assert_eq!(s[2], 0.0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(attention_site_scores(&[vec![Tensor::full(&[2, 2], 0.5)]], &[false; 2]).is_err());
    }

    #[test]
    fn top_residue_ties() {
        assert_eq!(top_residues(&[0.2, 0.4, 0.4, 0.0], 2), BTreeSet::from([1, 2]));
        assert_eq!(top_residues(&[0.5, 0.5, 0.5], 1), BTreeSet::from([0]));
    }
}
