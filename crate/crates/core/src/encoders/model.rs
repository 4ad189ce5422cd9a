//! The joint pretraining model: sequence and annotation encoders, the
//! alignment heads, and the weighted objective tying in the hierarchical
//! loss.

use serde::{Deserialize, Serialize};

use super::alignment::{sac_loss_on_tape, sam_loss_on_tape, sam_pairs, AlignmentHeads};
use super::annotation::{encode_annotations, encode_annotations_on_tape, init_annotation_encoder, AnnotationEncoderConfig};
use super::sequence::{
    encode_sequence, encode_sequence_on_tape, init_sequence_encoder, tokenize, SequenceEncoderConfig, PAD_TOKEN,
};
use crate::error::{Error, Result};
use crate::hierarchy::{hc_loss_on_tape, HcLossBreakdown, HierarchyTree, PositiveSets};
use std::collections::BTreeMap;

use crate::numcore::{par_map, Adam, Bound, Params, Rng, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: SequenceEncoderConfig,
    pub annotation_hidden: usize,
    pub heads: AlignmentHeads,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: SequenceEncoderConfig::default(),
            annotation_hidden: 64,
            heads: AlignmentHeads::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.heads.validate()?;
        if self.annotation_hidden == 0 {
            return Err(Error::Config("annotation_hidden must be positive".into()));
        }
        Ok(())
    }

    fn annotation(&self) -> AnnotationEncoderConfig {
        AnnotationEncoderConfig {
            hidden: self.annotation_hidden,
            d_model: self.encoder.d_model,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub hc: f64,
    pub sac: f64,
    pub sam: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            hc: 1.0,
            sac: 1.0,
            sam: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("hc", self.hc), ("sac", self.sac), ("sam", self.sam)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("loss weight {name} must be ≥ 0, got {w}")));
            }
        }
        Ok(())
    }
}

/// Parameters live under `seq.`, `ann.` and `head.`.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainModel {
    pub config: ModelConfig,
    pub n_keywords: usize,
    pub params: Params,
}

impl PretrainModel {
    pub fn init(config: ModelConfig, n_keywords: usize, rng: &Rng) -> Result<Self> {
        config.validate()?;
        let mut params = Params::new();
        params.extend_prefixed(
            "seq.",
            init_sequence_encoder(&config.encoder, &mut rng.split("seq"))?,
        );
        params.extend_prefixed(
            "ann.",
            init_annotation_encoder(&config.annotation(), n_keywords, &mut rng.split("ann"))?,
        );
        params.extend_prefixed(
            "head.",
            config.heads.init(config.encoder.d_model, &mut rng.split("head"))?,
        );
        Ok(Self {
            config,
            n_keywords,
            params,
        })
    }

    /// Width of [`embed`](Self::embed) rows.
    pub fn feature_dim(&self) -> usize {
        2 * self.config.heads.proj_dim
    }

    /// Pooled sequence embeddings `[N×d_model]` on the tape.
    pub fn pool_on_tape(&self, tape: &mut Tape, bound: &Bound, batch: &PretrainBatch) -> Result<Var> {
        let seq = bound.scoped("seq.");
        let mut pooled = Vec::with_capacity(batch.len());
        for (toks, mask) in batch.tokens.iter().zip(&batch.masks) {
            pooled.push(encode_sequence_on_tape(tape, &self.config.encoder, &seq, toks, mask)?.pooled);
        }
        tape.concat_rows(&pooled)
    }

    /// Pooled sequence embeddings without a tape, one worker per chunk of
    /// sequences.
    pub fn pool(&self, batch: &PretrainBatch, threads: usize) -> Result<Tensor> {
        let seq = self.params.subset("seq.");
        let rows = par_map(batch.len(), threads, |i| {
            let out = encode_sequence(&self.config.encoder, &seq, &batch.tokens[i], &batch.masks[i])?;
            Ok(out.pooled.into_data())
        })?;
        Tensor::from_rows(&rows)
    }

    /// Normalized projections `(z_seq, z_ann)` from pooled sequence
    /// embeddings and the batch keywords.
    pub fn project_pooled_on_tape(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        pooled: Var,
        keywords: &Tensor,
    ) -> Result<(Var, Var)> {
        let kw = tape.leaf(keywords.clone())?;
        let ann = encode_annotations_on_tape(tape, &bound.scoped("ann."), kw)?;
        let head = bound.scoped("head.");
        let z_seq = self.config.heads.project(tape, &head, "seq_proj", pooled)?;
        let z_ann = self.config.heads.project(tape, &head, "ann_proj", ann)?;
        Ok((z_seq, z_ann))
    }

    pub fn project_on_tape(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        batch: &PretrainBatch,
    ) -> Result<(Var, Var)> {
        let pooled = self.pool_on_tape(tape, bound, batch)?;
        self.project_pooled_on_tape(tape, bound, pooled, &batch.keywords)
    }

    /// Raw features `[pooled sequence ∥ annotation embedding]`, `N×2·d_model`.
    pub fn pooled_features(&self, sequences: &[&str], keywords: &Tensor, threads: usize) -> Result<Tensor> {
        let batch = PretrainBatch::unlabelled(sequences, keywords.clone())?;
        let pooled = self.pool(&batch, threads)?;
        let ann = encode_annotations(&self.params.subset("ann."), keywords)?;
        let rows: Vec<Vec<f64>> = (0..batch.len())
            .map(|i| pooled.row(i).iter().chain(ann.row(i)).copied().collect())
            .collect();
        Tensor::from_rows(&rows)
    }

    /// Node features `[z_seq ∥ z_ann]`, `N×2·proj_dim`.
    pub fn embed(&self, sequences: &[&str], keywords: &Tensor, threads: usize) -> Result<Tensor> {
        let raw = self.pooled_features(sequences, keywords, threads)?;
        let d = self.config.encoder.d_model;
        let mut tape = Tape::new();
        let bound = self.params.subset("head.").bind(&mut tape)?;
        let x = tape.leaf(raw)?;
        let mut parts = Vec::with_capacity(2);
        for (k, name) in ["seq_proj", "ann_proj"].iter().enumerate() {
            let cols = tape.slice_cols(x, k * d, d)?;
            parts.push(self.config.heads.project(&mut tape, &bound, name, cols)?);
        }
        let out = tape.concat_cols(&parts)?;
        Ok(tape.value(out).clone())
    }

    /// The `seq_proj`/`ann_proj` tensors.
    pub fn projection_params(&self) -> Params {
        let head = self.params.subset("head.");
        let mut p = Params::new();
        for name in ["seq_proj", "ann_proj"] {
            p.extend_prefixed(&format!("{name}."), head.subset(&format!("{name}.")));
        }
        p
    }
}

/// One minibatch: padded token rows with masks, keyword indicators and the
/// per-level positive sets of the members.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainBatch {
    pub ids: Vec<String>,
    pub tokens: Vec<Vec<usize>>,
    pub masks: Vec<Vec<bool>>,
    /// `N×K` binary matrix.
    pub keywords: Tensor,
    pub positives: PositiveSets,
}

impl PretrainBatch {
    /// Positive sets come from `tree`; without one the hierarchical term is
    /// zero.
    pub fn new(
        ids: Vec<String>,
        sequences: &[&str],
        keywords: Tensor,
        tree: Option<&HierarchyTree>,
    ) -> Result<Self> {
        let positives = match tree {
            Some(t) => PositiveSets::from_batch(t, &ids)?,
            None => PositiveSets::from_sets(Vec::new()),
        };
        let mut b = Self::unlabelled(sequences, keywords)?;
        if ids.len() != b.len() {
            return Err(Error::Shape(format!("{} ids for {} sequences", ids.len(), b.len())));
        }
        b.ids = ids;
        b.positives = positives;
        Ok(b)
    }

    /// A batch without ids or hierarchy positives.
    pub fn unlabelled(sequences: &[&str], keywords: Tensor) -> Result<Self> {
        let (n, _) = keywords.dims2()?;
        if n != sequences.len() || n == 0 {
            return Err(Error::Shape(format!(
                "{} sequences with {n} keyword rows",
                sequences.len()
            )));
        }
        let width = sequences.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut tokens = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        for s in sequences {
            let mut t = tokenize(s);
            let mut m = vec![true; t.len()];
            t.resize(width, PAD_TOKEN);
            m.resize(width, false);
            tokens.push(t);
            masks.push(m);
        }
        Ok(Self {
            ids: Vec::new(),
            tokens,
            masks,
            keywords,
            positives: PositiveSets::from_sets(Vec::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Component values of one evaluation of the objective.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectiveParts {
    pub total: f64,
    pub hc: f64,
    pub sac: f64,
    pub sam: f64,
    pub hc_breakdown: HcLossBreakdown,
}

/// Records `w_hc·L_hc + w_sac·L_sac + w_sam·L_sam` on the tape, given the
/// pooled sequence embeddings of the batch.
///
/// The hierarchical term uses the sequence projections; `level_weights`
/// holds one weight per hierarchy level.
#[allow(clippy::too_many_arguments)]
pub fn objective_from_pooled(
    tape: &mut Tape,
    model: &PretrainModel,
    bound: &Bound,
    pooled: Var,
    batch: &PretrainBatch,
    level_weights: &[f64],
    weights: LossWeights,
    rng: &mut Rng,
) -> Result<(Var, ObjectiveParts)> {
    weights.validate()?;
    if batch.len() < 2 {
        return Err(Error::Param("the objective needs at least 2 samples".into()));
    }
    let heads = &model.config.heads;
    let (z_seq, z_ann) = model.project_pooled_on_tape(tape, bound, pooled, &batch.keywords)?;
    let (hc, hc_breakdown) = if batch.positives.depth() == 0 {
        let empty = HcLossBreakdown {
            total: 0.0,
            per_level: Vec::new(),
            constraint_activations: 0,
            no_positives: true,
            pairs: Vec::new(),
        };
        (tape.leaf(Tensor::scalar(0.0))?, empty)
    } else {
        hc_loss_on_tape(tape, z_seq, &batch.positives, level_weights, heads.tau)?
    };
    let sac = sac_loss_on_tape(tape, z_seq, z_ann, heads.tau)?;
    let pairs = sam_pairs(batch.len(), rng)?;
    let probs = heads.match_probabilities(tape, &bound.scoped("head."), z_seq, z_ann, &pairs)?;
    let sam = sam_loss_on_tape(tape, &pairs, probs, heads.alpha, heads.gamma)?;

    let mut total: Option<Var> = None;
    for (v, w) in [(hc, weights.hc), (sac, weights.sac), (sam, weights.sam)] {
        let t = tape.scale(v, w)?;
        total = Some(match total {
            None => t,
            Some(acc) => tape.add(acc, t)?,
        });
    }
    let total = total.expect("three components");
    let parts = ObjectiveParts {
        total: tape.scalar(total),
        hc: tape.scalar(hc),
        sac: tape.scalar(sac),
        sam: tape.scalar(sam),
        hc_breakdown,
    };
    Ok((total, parts))
}

pub fn pretrain_objective_on_tape(
    tape: &mut Tape,
    model: &PretrainModel,
    bound: &Bound,
    batch: &PretrainBatch,
    level_weights: &[f64],
    weights: LossWeights,
    rng: &mut Rng,
) -> Result<(Var, ObjectiveParts)> {
    let pooled = model.pool_on_tape(tape, bound, batch)?;
    objective_from_pooled(tape, model, bound, pooled, batch, level_weights, weights, rng)
}

pub fn pretrain_objective(
    model: &PretrainModel,
    batch: &PretrainBatch,
    level_weights: &[f64],
    weights: LossWeights,
    rng: &mut Rng,
) -> Result<ObjectiveParts> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape)?;
    let (_, parts) =
        pretrain_objective_on_tape(&mut tape, model, &bound, batch, level_weights, weights, rng)?;
    Ok(parts)
}

/// Objective value and gradient for every parameter, on a single tape.
pub fn pretrain_gradients(
    model: &PretrainModel,
    batch: &PretrainBatch,
    level_weights: &[f64],
    weights: LossWeights,
    rng: &mut Rng,
) -> Result<(ObjectiveParts, BTreeMap<String, Tensor>)> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape)?;
    let (total, parts) =
        pretrain_objective_on_tape(&mut tape, model, &bound, batch, level_weights, weights, rng)?;
    let grads = tape.backward(total)?;
    Ok((parts, bound.gradients(&grads)))
}

/// Same value and gradients as [`pretrain_gradients`], with the sequence
/// encoder run per sequence on `threads` workers. Per-sequence gradients
/// are summed in batch order, so the result does not depend on `threads`.
pub fn pretrain_gradients_parallel(
    model: &PretrainModel,
    batch: &PretrainBatch,
    level_weights: &[f64],
    weights: LossWeights,
    rng: &mut Rng,
    threads: usize,
) -> Result<(ObjectiveParts, BTreeMap<String, Tensor>)> {
    let pooled = model.pool(batch, threads)?;
    let mut tape = Tape::new();
    let rest = Params::from_iter(
        model.params.iter().filter(|(k, _)| !k.starts_with("seq.")).map(|(k, v)| (k.clone(), v.clone())),
    );
    let bound = rest.bind(&mut tape)?;
    let pv = tape.leaf(pooled)?;
    let (total, parts) =
        objective_from_pooled(&mut tape, model, &bound, pv, batch, level_weights, weights, rng)?;
    let grads = tape.backward(total)?;
    let d_pooled = grads.wrt(pv);
    let mut out = bound.gradients(&grads);

    let seq = model.params.subset("seq.");
    let cfg = &model.config.encoder;
    let per_seq = par_map(batch.len(), threads, |i| {
        let mut t = Tape::new();
        let b = seq.bind(&mut t)?;
        let enc = encode_sequence_on_tape(&mut t, cfg, &b, &batch.tokens[i], &batch.masks[i])?;
        let g = t.leaf(Tensor::matrix(1, cfg.d_model, d_pooled.row(i).to_vec())?)?;
        let y = t.mul(enc.pooled, g)?;
        let y = t.sum(y)?;
        Ok(b.gradients(&t.backward(y)?))
    })?;
    for g in per_seq {
        for (name, t) in g {
            match out.get_mut(&format!("seq.{name}")) {
                Some(acc) => acc.add_assign(&t),
                None => {
                    out.insert(format!("seq.{name}"), t);
                }
            }
        }
    }
    Ok((parts, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSchedule {
    /// Optimizer steps, one minibatch each.
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weights: LossWeights,
}

impl Default for PretrainSchedule {
    fn default() -> Self {
        Self {
            steps: 200,
            batch_size: 32,
            lr: 1e-3,
            weights: LossWeights::default(),
        }
    }
}

/// Proteins available for pretraining.
pub struct PretrainData<'a> {
    pub ids: Vec<String>,
    pub sequences: Vec<&'a str>,
    /// `N×K` keyword indicators, rows aligned with `ids`.
    pub keywords: Tensor,
    pub tree: Option<&'a HierarchyTree>,
}

impl PretrainData<'_> {
    pub fn batch(&self, idx: &[usize]) -> Result<PretrainBatch> {
        let k = self.keywords.dims2()?.1;
        let mut kw = Vec::with_capacity(idx.len() * k);
        for &i in idx {
            kw.extend_from_slice(self.keywords.row(i));
        }
        PretrainBatch::new(
            idx.iter().map(|&i| self.ids[i].clone()).collect(),
            &idx.iter().map(|&i| self.sequences[i]).collect::<Vec<_>>(),
            Tensor::matrix(idx.len(), k, kw)?,
            self.tree,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub total: f64,
    pub hc: f64,
    pub sac: f64,
    pub sam: f64,
    /// Pairs lifted to their parent level's floor in this step.
    pub hc_activations: usize,
    pub hc_violations: usize,
}

/// Outcome of [`pretrain`]: the per-step log and the parameters at the end
/// of the pass over the data with the lowest mean total loss (the initial
/// parameters when no step ran).
pub struct PretrainOutcome {
    pub log: Vec<StepLog>,
    pub best: Params,
    pub best_step: usize,
}

/// Minibatch Adam over seeded shuffles of the data; `model` ends at the
/// final step.
pub fn pretrain(
    model: &mut PretrainModel,
    data: &PretrainData,
    schedule: &PretrainSchedule,
    rng: &Rng,
    threads: usize,
) -> Result<PretrainOutcome> {
    schedule.weights.validate()?;
    if schedule.batch_size < 2 {
        return Err(Error::Config("pretraining batch_size must be at least 2".into()));
    }
    let n = data.ids.len();
    if n < 2 {
        return Err(Error::Param("pretraining needs at least 2 proteins".into()));
    }
    let level_weights = data.tree.map_or(Vec::new(), |t| t.level_weights().to_vec());
    let mut opt = Adam::new(schedule.lr);
    let mut log = Vec::with_capacity(schedule.steps);
    let mut best = (f64::INFINITY, model.params.clone(), 0);
    let mut step = 0;
    let mut epoch = 0;
    while step < schedule.steps {
        let mut erng = rng.split_n("epoch", epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        erng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        let mut epoch_steps = 0;
        for chunk in order.chunks(schedule.batch_size) {
            if chunk.len() < 2 || step >= schedule.steps {
                continue;
            }
            let batch = data.batch(chunk)?;
            let (parts, grads) = pretrain_gradients_parallel(
                model,
                &batch,
                &level_weights,
                schedule.weights,
                &mut erng,
                threads,
            )?;
            opt.step(&mut model.params, &grads)?;
            log.push(StepLog {
                step,
                epoch,
                total: parts.total,
                hc: parts.hc,
                sac: parts.sac,
                sam: parts.sam,
                hc_activations: parts.hc_breakdown.constraint_activations,
                hc_violations: parts.hc_breakdown.constraint_violations(),
            });
            epoch_sum += parts.total;
            epoch_steps += 1;
            step += 1;
        }
        if epoch_steps > 0 {
            let mean = epoch_sum / epoch_steps as f64;
            log::debug!("pretrain epoch {epoch}: mean total {mean:.4}");
            if mean < best.0 {
                best = (mean, model.params.clone(), step);
            }
        }
        epoch += 1;
    }
    Ok(PretrainOutcome {
        log,
        best: best.1,
        best_step: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            encoder: SequenceEncoderConfig {
                d_model: 8,
                n_heads: 2,
                conv_widths: (3, 5),
                max_len: 32,
                ..Default::default()
            },
            annotation_hidden: 6,
            heads: AlignmentHeads {
                proj_dim: 4,
                match_hidden: 5,
                ..Default::default()
            },
        }
    }

    fn fixture() -> (PretrainModel, PretrainBatch, HierarchyTree) {
        let rows: Vec<(String, String, Option<String>)> = [
            ("A", "F1", "C1"),
            ("B", "F1", "C1"),
            ("C", "F2", "C1"),
            ("D", "F3", "C2"),
        ]
        .iter()
        .map(|(p, f, c)| (p.to_string(), f.to_string(), Some(c.to_string())))
        .collect();
        let tree = HierarchyTree::from_clan_family(&rows).unwrap();
        let model = PretrainModel::init(tiny(), 3, &Rng::new(11)).unwrap();
        let kw = Tensor::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let ids = ["A", "B", "C", "D"].map(String::from).to_vec();
        let batch = PretrainBatch::new(ids, &["MKVLA", "MKVIAG", "WWPCA", "GHHKDE"], kw, Some(&tree))
            .unwrap();
        (model, batch, tree)
    }

    #[test]
    fn zero_weights_give_zero() {
        let (m, b, t) = fixture();
        let w = LossWeights { hc: 0.0, sac: 0.0, sam: 0.0 };
        let p = pretrain_objective(&m, &b, t.level_weights(), w, &mut Rng::new(1)).unwrap();
        assert_eq!(p.total, 0.0);
        assert!(p.hc > 0.0 && p.sac > 0.0 && p.sam > 0.0);
    }

    #[test]
    fn total_is_weighted_sum() {
        let (m, b, t) = fixture();
        let p = pretrain_objective(&m, &b, t.level_weights(), Default::default(), &mut Rng::new(1))
            .unwrap();
        assert!((p.total - (p.hc + p.sac + p.sam)).abs() < 1e-12);
        let w = LossWeights { hc: 1.0, sac: 0.0, sam: 0.0 };
        let q = pretrain_objective(&m, &b, t.level_weights(), w, &mut Rng::new(1)).unwrap();
        assert_eq!(q.total, q.hc);
        assert!(pretrain_objective(
            &m,
            &b,
            t.level_weights(),
            LossWeights { hc: -1.0, ..w },
            &mut Rng::new(1)
        )
        .is_err());
    }

    #[test]
    fn every_parameter_gets_gradient() {
        let (m, b, t) = fixture();
        let (_, grads) =
            pretrain_gradients(&m, &b, t.level_weights(), Default::default(), &mut Rng::new(1))
                .unwrap();
        assert_eq!(grads.len(), m.params.len());
        for (name, g) in &grads {
            assert!(g.data().iter().any(|v| v.abs() > 0.0), "dead parameter {name}");
        }
    }

    #[test]
    fn parallel_gradients_match_single_tape() {
        let (m, b, t) = fixture();
        let (p1, g1) =
            pretrain_gradients(&m, &b, t.level_weights(), Default::default(), &mut Rng::new(1))
                .unwrap();
        let (p2, g2) = pretrain_gradients_parallel(
            &m,
            &b,
            t.level_weights(),
            Default::default(),
            &mut Rng::new(1),
            3,
        )
        .unwrap();
        assert!((p1.total - p2.total).abs() < 1e-12);
        assert_eq!(g1.keys().collect::<Vec<_>>(), g2.keys().collect::<Vec<_>>());
        for (k, a) in &g1 {
            for (x, y) in a.data().iter().zip(g2[k].data()) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{k}");
            }
        }
        let (_, g3) = pretrain_gradients_parallel(
            &m,
            &b,
            t.level_weights(),
            Default::default(),
            &mut Rng::new(1),
            1,
        )
        .unwrap();
        assert_eq!(g2, g3);
    }

    #[test]
    fn embed_shape() {
        let (m, _, _) = fixture();
        let f = m.embed(&["MKV", "AAAA"], &Tensor::zeros(&[2, 3]), 2).unwrap();
        assert_eq!(f.shape(), &[2, 8]);
        let raw = m.pooled_features(&["MKV", "AAAA"], &Tensor::zeros(&[2, 3]), 1).unwrap();
        assert_eq!(raw.shape(), &[2, 16]);
    }
}
