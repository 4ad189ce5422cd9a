use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::split::Difficulty;
use crate::error::{Error, Result};

/// Pooled confusion counts over all edges and types.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, or 0 when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn confusion(predicted: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<Counts> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predicted rows vs {} true rows",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = Counts::default();
    for (k, (p, t)) in predicted.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(Error::Shape(format!("row {k}: {} vs {} labels", p.len(), t.len())));
        }
        for (&pv, &tv) in p.iter().zip(t) {
            match (pv, tv) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(c)
}

/// Micro-averaged F1 over every (edge, type) cell.
pub fn micro_f1(predicted: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    Ok(confusion(predicted, truth)?.f1())
}

/// Area under the precision–recall curve with tied scores processed as one
/// threshold. `None` when there is no positive or no negative label.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut area) = (0usize, 0usize, 0.0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let mut block_pos = 0;
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                block_pos += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        tp += block_pos;
        if block_pos > 0 {
            area += (tp as f64 / (tp + fp) as f64) * (block_pos as f64 / n_pos as f64);
        }
    }
    Ok(Some(area))
}

/// `|predicted ∩ annotated| / |annotated|`.
pub fn overlap_rate(predicted: &BTreeSet<usize>, annotated: &BTreeSet<usize>) -> Result<f64> {
    if annotated.is_empty() {
        return Err(Error::Param("overlap rate needs at least one annotated residue".into()));
    }
    Ok(predicted.intersection(annotated).count() as f64 / annotated.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub micro_f1: f64,
    pub micro_f1_easy: f64,
    pub micro_f1_hard: f64,
    /// Per type; `null` when the type has no positive or no negative.
    pub aupr: BTreeMap<String, Option<f64>>,
    pub counts: Counts,
    pub n_easy: usize,
    pub n_hard: usize,
}

/// Scores `probs` (one row per test edge) against `truth`, thresholding at
/// `threshold`, overall and per difficulty stratum.
pub fn evaluate(
    probs: &[Vec<f64>],
    truth: &[Vec<bool>],
    difficulty: &[Difficulty],
    types: &[String],
    threshold: f64,
) -> Result<MetricReport> {
    if probs.len() != truth.len() || probs.len() != difficulty.len() {
        return Err(Error::Shape(format!(
            "{} prediction rows, {} truth rows, {} difficulty tags",
            probs.len(),
            truth.len(),
            difficulty.len()
        )));
    }
    if let Some(r) = probs.iter().find(|r| r.len() != types.len()) {
        return Err(Error::Shape(format!("{} scores for {} types", r.len(), types.len())));
    }
    let predicted: Vec<Vec<bool>> = probs
        .iter()
        .map(|r| r.iter().map(|&p| p >= threshold).collect())
        .collect();
    let subset = |d: Difficulty| -> Result<(f64, usize)> {
        let idx: Vec<usize> = (0..truth.len()).filter(|&k| difficulty[k] == d).collect();
        let p: Vec<Vec<bool>> = idx.iter().map(|&k| predicted[k].clone()).collect();
        let t: Vec<Vec<bool>> = idx.iter().map(|&k| truth[k].clone()).collect();
        Ok((micro_f1(&p, &t)?, idx.len()))
    };
    let counts = confusion(&predicted, truth)?;
    let (micro_f1_easy, n_easy) = subset(Difficulty::Easy)?;
    let (micro_f1_hard, n_hard) = subset(Difficulty::Hard)?;
    let mut per_type = BTreeMap::new();
    for (k, name) in types.iter().enumerate() {
        let s: Vec<f64> = probs.iter().map(|r| r[k]).collect();
        let l: Vec<bool> = truth.iter().map(|r| r[k]).collect();
        per_type.insert(name.clone(), aupr(&s, &l)?);
    }
    Ok(MetricReport {
        micro_f1: counts.f1(),
        micro_f1_easy,
        micro_f1_hard,
        aupr: per_type,
        counts,
        n_easy,
        n_hard,
    })
}
