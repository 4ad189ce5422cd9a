//! Hierarchical multi-label contrastive loss with a parent-level floor.
//!
//! For anchor `i` and positive `p` the pair loss is
//! `ℓ(i,p) = log Σ_{a≠i} exp(s_ia) − s_ip` with `s = f fᵀ / τ` over
//! L2-normalized rows `f`, so `ℓ ≥ 0`. Levels are visited root first; each
//! pair loss is floored at the largest floored pair loss of the parent
//! level, and the level contributions are averaged per anchor, weighted by
//! `λ_l` and divided by the number of levels.

use std::collections::BTreeMap;

use serde::Serialize;

use super::tree::{HierarchyTree, PositiveSets};
use crate::error::{Error, Result};
use crate::numcore::{exact_sum, lse_iter, Tape, Tensor, Var};

/// One positive pair as it entered the loss.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub level: usize,
    pub anchor: usize,
    pub positive: usize,
    /// Unconstrained pair loss.
    pub raw: f64,
    /// Floor in force at this level (the parent level's maximum).
    pub floor: f64,
    /// `max(raw, floor)`.
    pub constrained: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub n_pairs: usize,
    /// Mean constrained pair loss, 0 when the level has no pairs.
    pub mean_pair_loss: f64,
    /// Largest constrained pair loss at this level; the floor passed on to
    /// the next level. Carries the parent's value when the level is empty.
    pub max_pair_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HcLossBreakdown {
    pub total: f64,
    pub per_level: Vec<LevelStats>,
    /// Pairs whose loss was raised to the parent floor.
    pub constraint_activations: usize,
    /// True when no anchor had positives at any level.
    pub no_positives: bool,
    pub pairs: Vec<PairRecord>,
}

impl HcLossBreakdown {
    /// Number of recorded pairs whose constrained loss sits below the
    /// parent level's maximum.
    pub fn constraint_violations(&self) -> usize {
        self.pairs
            .iter()
            .filter(|r| {
                let parent_max = if r.level == 0 {
                    0.0
                } else {
                    self.per_level[r.level - 1].max_pair_loss
                };
                r.constrained < parent_max
            })
            .count()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Param(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// `τ`-scaled cosine similarities `f fᵀ / τ` on the tape.
pub fn similarity_logits(tape: &mut Tape, embeddings: Var, tau: f64) -> Result<Var> {
    check_tau(tau)?;
    let f = tape.l2_normalize_rows(embeddings)?;
    let s = tape.matmul_nt(f, f)?;
    tape.scale(s, 1.0 / tau)
}

fn pair_loss_from_logits(logits: &Tensor, i: usize, p: usize) -> f64 {
    let n = logits.dims2().expect("square logits").0;
    let row = logits.row(i);
    let lse = lse_iter((0..n).filter(move |&a| a != i).map(move |a| row[a]));
    lse - row[p]
}

/// Pair loss `ℓ(i, p)` for rows of `embeddings` (normalized internally).
pub fn pair_loss(i: usize, p: usize, embeddings: &Tensor, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let (n, _) = embeddings.dims2()?;
    if n < 2 {
        return Err(Error::Param("pair loss needs at least two samples".into()));
    }
    if i >= n || p >= n || i == p {
        return Err(Error::Param(format!("invalid pair ({i}, {p}) for {n} samples")));
    }
    let mut tape = Tape::new();
    let e = tape.leaf(embeddings.clone())?;
    let s = similarity_logits(&mut tape, e, tau)?;
    Ok(pair_loss_from_logits(tape.value(s), i, p))
}

/// Loss value, breakdown and gradient with respect to the logit matrix.
///
/// When a floor binds, the gradient flows into the parent-level pair that
/// set the floor; ties between a pair loss and its floor go to the pair.
pub fn hc_loss_from_logits(
    logits: &Tensor,
    positives: &PositiveSets,
    level_weights: &[f64],
) -> Result<(HcLossBreakdown, Tensor)> {
    let (n, n2) = logits.dims2()?;
    if n != n2 {
        return Err(Error::Shape("logits must be square".into()));
    }
    if n == 0 || positives.batch_size() != n {
        return Err(Error::Param("empty batch or positive sets of the wrong size".into()));
    }
    let depth = positives.depth();
    if level_weights.len() != depth {
        return Err(Error::Param(format!(
            "{} level weights for {depth} levels",
            level_weights.len()
        )));
    }

    // (anchor, positive) -> accumulated coefficient on ℓ(anchor, positive)
    let mut coef: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut raw_cache: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut raw = |i: usize, p: usize| *raw_cache.entry((i, p)).or_insert_with(|| pair_loss_from_logits(logits, i, p));

    let mut terms = Vec::new();
    let mut floor = 0.0;
    let mut floor_src: Option<(usize, usize)> = None;
    let mut per_level = Vec::with_capacity(depth);
    let mut pairs = Vec::new();
    let mut activations = 0;

    for (l, &lambda) in level_weights.iter().enumerate() {
        let mut level_max: Option<(f64, Option<(usize, usize)>)> = None;
        let mut level_values = Vec::new();
        for i in 0..n {
            let pos = positives.get(l, i);
            if pos.is_empty() {
                continue;
            }
            let w = lambda / (depth as f64 * pos.len() as f64);
            for &p in pos {
                let r = raw(i, p);
                let (c, src) = if r >= floor {
                    (r, Some((i, p)))
                } else {
                    activations += 1;
                    (floor, floor_src)
                };
                if let Some(key) = src {
                    *coef.entry(key).or_insert(0.0) += w;
                }
                terms.push(w * c);
                level_values.push(c);
                if level_max.is_none_or(|(m, _)| c > m) {
                    level_max = Some((c, src));
                }
                pairs.push(PairRecord {
                    level: l,
                    anchor: i,
                    positive: p,
                    raw: r,
                    floor,
                    constrained: c,
                });
            }
        }
        let n_pairs = level_values.len();
        if let Some((m, src)) = level_max {
            floor = m;
            floor_src = src;
        }
        per_level.push(LevelStats {
            level: l,
            n_pairs,
            mean_pair_loss: if n_pairs > 0 { exact_sum(level_values) / n_pairs as f64 } else { 0.0 },
            max_pair_loss: floor,
        });
    }

    let mut grad = vec![0.0; n * n];
    for (&(i, p), &w) in &coef {
        let row = logits.row(i);
        let lse = lse_iter((0..n).filter(|&a| a != i).map(|a| row[a]));
        for a in (0..n).filter(|&a| a != i) {
            grad[i * n + a] += w * (row[a] - lse).exp();
        }
        grad[i * n + p] -= w;
    }

    let no_positives = pairs.is_empty();
    if no_positives {
        log::warn!("hierarchical loss: no positive pairs at any level in this batch");
    }
    Ok((
        HcLossBreakdown {
            total: exact_sum(terms),
            per_level,
            constraint_activations: activations,
            no_positives,
            pairs,
        },
        Tensor::matrix(n, n, grad)?,
    ))
}

/// Records the hierarchical loss of `embeddings` (one row per batch member)
/// on the tape.
pub fn hc_loss_on_tape(
    tape: &mut Tape,
    embeddings: Var,
    positives: &PositiveSets,
    level_weights: &[f64],
    tau: f64,
) -> Result<(Var, HcLossBreakdown)> {
    let s = similarity_logits(tape, embeddings, tau)?;
    let (breakdown, grad) = hc_loss_from_logits(tape.value(s), positives, level_weights)?;
    let v = tape.fused_scalar(&[s], breakdown.total, vec![grad])?;
    Ok((v, breakdown))
}

/// Hierarchical loss of a batch of protein ids with the given embeddings.
pub fn hc_loss(
    tree: &HierarchyTree,
    batch: &[String],
    embeddings: &Tensor,
    tau: f64,
) -> Result<HcLossBreakdown> {
    if batch.is_empty() {
        return Err(Error::Param("empty batch".into()));
    }
    let (n, _) = embeddings.dims2()?;
    if n != batch.len() {
        return Err(Error::Shape(format!("{} ids for {n} embedding rows", batch.len())));
    }
    let positives = PositiveSets::from_batch(tree, batch)?;
    let mut tape = Tape::new();
    let e = tape.leaf(embeddings.clone())?;
    let (_, b) = hc_loss_on_tape(&mut tape, e, &positives, tree.level_weights(), tau)?;
    Ok(b)
}
