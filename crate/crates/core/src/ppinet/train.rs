use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::gin::{gin_forward_on_tape, init_gin, BnMode, BnState, GinConfig};
use super::graph::PpiGraph;
use super::head::{bce_on_tape, init_pair_head, pair_logits_on_tape, PairHeadConfig, Reduction};
use crate::error::{Error, Result};
use crate::numcore::{Adam, Bound, Params, Rng, Tape, Tensor, Var};
use crate::splitbench::micro_f1;

/// Trainable projections applied to raw pooled features before the GIN:
/// the first `d_model` columns go through `proj.seq_proj`, the rest through
/// `proj.ann_proj`, each L2-normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStage {
    pub d_model: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpiModel {
    pub gin: GinConfig,
    pub head: PairHeadConfig,
    pub n_types: usize,
    pub projection: Option<ProjectionStage>,
    /// Names under `proj.`, `gin.` and `pair.`.
    pub params: Params,
    pub bn: BnState,
}

impl PpiModel {
    /// `projection` carries the `seq_proj`/`ann_proj` tensors to start from.
    pub fn init(
        gin: GinConfig,
        head: PairHeadConfig,
        d_in: usize,
        n_types: usize,
        projection: Option<(ProjectionStage, Params)>,
        rng: &Rng,
    ) -> Result<Self> {
        let mut params = Params::new();
        let (projection, gin_in) = match projection {
            Some((stage, p)) => {
                if d_in != 2 * stage.d_model {
                    return Err(Error::Shape(format!(
                        "projection expects {} input columns, features have {d_in}",
                        2 * stage.d_model
                    )));
                }
                let w = p.get("seq_proj.w")?.dims2()?.1 + p.get("ann_proj.w")?.dims2()?.1;
                params.extend_prefixed("proj.", p);
                (Some(stage), w)
            }
            None => (None, d_in),
        };
        params.extend_prefixed("gin.", init_gin(&gin, gin_in, &mut rng.split("gin"))?);
        params.extend_prefixed(
            "pair.",
            init_pair_head(&head, gin.hidden, n_types, &mut rng.split("pair"))?,
        );
        let bn = BnState::new(&gin);
        Ok(Self {
            gin,
            head,
            n_types,
            projection,
            params,
            bn,
        })
    }

    fn inputs(&self, tape: &mut Tape, bound: &Bound, features: &Tensor) -> Result<Var> {
        let x = tape.leaf(features.clone())?;
        let Some(stage) = &self.projection else {
            return Ok(x);
        };
        let p = bound.scoped("proj.");
        let mut parts = Vec::with_capacity(2);
        for (k, name) in ["seq_proj", "ann_proj"].iter().enumerate() {
            let cols = tape.slice_cols(x, k * stage.d_model, stage.d_model)?;
            let z = tape.linear(cols, p.get(&format!("{name}.w"))?, p.get(&format!("{name}.b"))?)?;
            parts.push(tape.l2_normalize_rows(z)?);
        }
        tape.concat_cols(&parts)
    }

    /// Node embeddings and pair logits for `pairs`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        graph: &PpiGraph,
        pairs: &[(usize, usize)],
        mode: BnMode,
    ) -> Result<(Var, Vec<(Vec<f64>, Vec<f64>)>)> {
        let x = self.inputs(tape, bound, &graph.features)?;
        let (g, stats) =
            gin_forward_on_tape(tape, &self.gin, &bound.scoped("gin."), x, &graph.adjacency, mode)?;
        let logits = pair_logits_on_tape(tape, &self.head, &bound.scoped("pair."), g, pairs)?;
        Ok((logits, stats))
    }
}

/// Probabilities `[|pairs|×T]` with running batch-norm statistics.
pub fn predict(model: &PpiModel, graph: &PpiGraph, pairs: &[(usize, usize)]) -> Result<Tensor> {
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= graph.n_nodes() || b >= graph.n_nodes()) {
        return Err(Error::UnknownId(format!("node pair ({a}, {b})")));
    }
    if pairs.is_empty() {
        return Err(Error::Param("no pairs to predict".into()));
    }
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape)?;
    let (logits, _) = model.forward_on_tape(&mut tape, &bound, graph, pairs, BnMode::Eval(&model.bn))?;
    let probs = tape.sigmoid(logits)?;
    Ok(tape.value(probs).clone())
}

/// [`predict`] for protein id pairs.
pub fn predict_ids(model: &PpiModel, graph: &PpiGraph, pairs: &[(String, String)]) -> Result<Tensor> {
    let idx = pairs
        .iter()
        .map(|(a, b)| Ok((graph.node(a)?, graph.node(b)?)))
        .collect::<Result<Vec<_>>>()?;
    predict(model, graph, &idx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpiTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Probability at or above which a type is predicted.
    pub threshold: f64,
    /// Keep the `proj.` tensors fixed.
    pub freeze_projection: bool,
}

impl Default for PpiTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            threshold: 0.5,
            freeze_projection: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training BCE before this epoch's update.
    pub loss: f64,
    pub val_micro_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// First epoch with the highest score.
pub fn select_best_epoch(val_f1: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (e, &f) in val_f1.iter().enumerate() {
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((e, f));
        }
    }
    best.map(|(e, _)| e)
}

pub fn thresholded(probs: &Tensor, threshold: f64) -> Vec<Vec<bool>> {
    let (m, _) = probs.dims2().expect("probability matrix");
    (0..m)
        .map(|i| probs.row(i).iter().map(|&p| p >= threshold).collect())
        .collect()
}

/// Full-batch Adam on the training edges. After every epoch the model is
/// scored on the validation edges and the best-scoring state is returned.
/// Without validation edges the last epoch is kept.
pub fn train_ppi(
    model: &PpiModel,
    graph: &PpiGraph,
    train: &[usize],
    val: &[usize],
    cfg: &PpiTrainConfig,
) -> Result<(PpiModel, TrainLog)> {
    if train.is_empty() {
        return Err(Error::Param("empty training split".into()));
    }
    let train_pairs = graph.edge_pairs(train);
    let train_labels = graph.edge_labels(train);
    let val_pairs = graph.edge_pairs(val);
    let val_labels = graph.edge_labels(val);

    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut log = TrainLog::default();
    let mut opt = Adam::new(cfg.lr);
    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let bound = current.params.bind(&mut tape)?;
        let (logits, stats) =
            current.forward_on_tape(&mut tape, &bound, graph, &train_pairs, BnMode::Train)?;
        let loss = bce_on_tape(&mut tape, logits, &train_labels, Reduction::Mean)?;
        let grads = tape.backward(loss)?;
        let mut g: BTreeMap<String, Tensor> = bound.gradients(&grads);
        if cfg.freeze_projection {
            g.retain(|k, _| !k.starts_with("proj."));
        }
        let loss = tape.scalar(loss);
        opt.step(&mut current.params, &g)?;
        current.bn.update(&stats, current.gin.bn_momentum);

        let val_f1 = if val_pairs.is_empty() {
            0.0
        } else {
            let p = predict(&current, graph, &val_pairs)?;
            micro_f1(&thresholded(&p, cfg.threshold), &val_labels)?
        };
        log::debug!("ppi epoch {epoch}: loss {loss:.5} val micro-F1 {val_f1:.4}");
        log.epochs.push(EpochRecord {
            epoch,
            loss,
            val_micro_f1: val_f1,
        });
        if val_pairs.is_empty() || val_f1 > best_f1 {
            best_f1 = val_f1;
            best = current.clone();
            log.best_epoch = Some(epoch);
        }
    }
    Ok((best, log))
}

/// `protein_a  protein_b  p_<type>…` with a header row.
pub fn write_predictions(
    graph: &PpiGraph,
    pairs: &[(usize, usize)],
    probs: &Tensor,
    types: &[String],
) -> Result<String> {
    let (m, t) = probs.dims2()?;
    if m != pairs.len() || t != types.len() {
        return Err(Error::Shape(format!(
            "{m}×{t} probabilities for {} pairs and {} types",
            pairs.len(),
            types.len()
        )));
    }
    let mut out = String::from("protein_a\tprotein_b");
    for ty in types {
        write!(out, "\tp_{ty}").expect("write to string");
    }
    out.push('\n');
    for (k, &(a, b)) in pairs.iter().enumerate() {
        write!(out, "{}\t{}", graph.ids[a], graph.ids[b]).expect("write to string");
        for p in probs.row(k) {
            write!(out, "\t{p:.6}").expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Label frequencies of the training edges incident to either endpoint of
/// each pair, or of all training edges when there are none. Sampling each
/// type from its frequency gives the degree-based random-guess baseline.
pub fn degree_baseline_probabilities(
    graph: &PpiGraph,
    train: &[usize],
    pairs: &[(usize, usize)],
) -> Vec<Vec<f64>> {
    let t = graph.n_types;
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); graph.n_nodes()];
    let mut global = vec![0.0; t];
    for &k in train {
        let e = &graph.edges[k];
        incident[e.a].push(k);
        incident[e.b].push(k);
        for (g, &y) in global.iter_mut().zip(&e.labels) {
            *g += if y { 1.0 } else { 0.0 };
        }
    }
    let n_train = train.len().max(1) as f64;
    global.iter_mut().for_each(|g| *g /= n_train);
    pairs
        .iter()
        .map(|&(a, b)| {
            let mut ks: Vec<usize> = incident[a].iter().chain(&incident[b]).copied().collect();
            ks.sort_unstable();
            ks.dedup();
            if ks.is_empty() {
                return global.clone();
            }
            let mut f = vec![0.0; t];
            for k in &ks {
                for (v, &y) in f.iter_mut().zip(&graph.edges[*k].labels) {
                    *v += if y { 1.0 } else { 0.0 };
                }
            }
            f.into_iter().map(|v| v / ks.len() as f64).collect()
        })
        .collect()
}

pub fn degree_baseline(
    graph: &PpiGraph,
    train: &[usize],
    pairs: &[(usize, usize)],
    rng: &mut Rng,
) -> Vec<Vec<bool>> {
    degree_baseline_probabilities(graph, train, pairs)
        .into_iter()
        .map(|row| row.into_iter().map(|p| rng.bernoulli(p)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::EdgeRecord;
    use crate::ppinet::build_graph;

    fn toy() -> PpiGraph {
        let ids = ["A", "B", "C", "D", "E", "F"];
        let mut rng = Rng::new(9);
        let emb: BTreeMap<String, Vec<f64>> = ids
            .iter()
            .map(|s| (s.to_string(), (0..4).map(|_| rng.normal()).collect()))
            .collect();
        let e = vec![
            EdgeRecord::new("A", "B", vec![true, false]).unwrap(),
            EdgeRecord::new("B", "C", vec![false, true]).unwrap(),
            EdgeRecord::new("C", "D", vec![true, true]).unwrap(),
            EdgeRecord::new("D", "E", vec![true, false]).unwrap(),
            EdgeRecord::new("E", "F", vec![false, true]).unwrap(),
        ];
        build_graph(&e, &emb, &[0, 1, 2]).unwrap()
    }

    fn model(g: &PpiGraph) -> PpiModel {
        let gin = GinConfig {
            hidden: 8,
            n_blocks: 2,
            ..Default::default()
        };
        PpiModel::init(gin, PairHeadConfig::default(), 4, g.n_types, None, &Rng::new(3)).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initial() {
        let g = toy();
        let m = model(&g);
        let cfg = PpiTrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (out, log) = train_ppi(&m, &g, &[0, 1, 2], &[3], &cfg).unwrap();
        assert_eq!(out, m);
        assert_eq!(log.best_epoch, None);
        assert!(train_ppi(&m, &g, &[], &[3], &cfg).is_err());
    }

    #[test]
    fn best_epoch_rule() {
        assert_eq!(select_best_epoch(&[0.1, 0.3, 0.5, 0.5, 0.2]), Some(2));
        assert_eq!(select_best_epoch(&[]), None);
    }

    #[test]
    fn predictions_are_probabilities_and_symmetric() {
        let g = toy();
        let m = model(&g);
        let p = predict(&m, &g, &[(0, 4), (4, 0), (0, 4)]).unwrap();
        assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(p.row(0), p.row(1));
        assert_eq!(p.row(0), p.row(2));
        assert!(predict_ids(&m, &g, &[("A".into(), "ZZ".into())]).is_err());
    }

    #[test]
    fn loss_decreases() {
        let g = toy();
        let cfg = PpiTrainConfig {
            epochs: 5,
            lr: 1e-2,
            ..Default::default()
        };
        let (_, log) = train_ppi(&model(&g), &g, &[0, 1, 2], &[3], &cfg).unwrap();
        assert!(log.epochs[1].loss < log.epochs[0].loss);
    }

    #[test]
    fn baseline_frequencies() {
        let g = toy();
        let p = degree_baseline_probabilities(&g, &[0, 1], &[(0, 1), (4, 5)]);
        assert_eq!(p[0], vec![0.5, 0.5]);
        assert_eq!(p[1], vec![0.5, 0.5]);
        let p = degree_baseline_probabilities(&g, &[0, 1, 2], &[(0, 5)]);
        assert_eq!(p[0], vec![1.0, 0.0]);
    }

    #[test]
    fn prediction_tsv() {
        let g = toy();
        let probs = Tensor::matrix(1, 2, vec![0.25, 0.5]).unwrap();
        let s = write_predictions(&g, &[(0, 1)], &probs, &["x".into(), "y".into()]).unwrap();
        assert_eq!(s, "protein_a\tprotein_b\tp_x\tp_y\nA\tB\t0.250000\t0.500000\n");
    }
}
