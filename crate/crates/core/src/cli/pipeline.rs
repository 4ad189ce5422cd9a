//! In-memory stages of a run: pretraining, node features, downstream
//! training, evaluation, baselines and site analysis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RunConfig;
use crate::dataio::{Annotations, Checkpoint, CorpusFiles, EdgeRecord, SynthCorpus};
use crate::encoders::{
    attention_site_scores, encode_sequence, pretrain, tokenize, PretrainData, PretrainModel,
    StepLog,
};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;
use crate::numcore::{Params, Rng, Tensor};
use crate::ppinet::{
    build_graph, degree_baseline, predict, train_ppi, BnState, PpiGraph, PpiModel,
    ProjectionStage, TrainLog,
};
use crate::splitbench::{evaluate, overlap_rate, split_edges, MetricReport, SplitSpec};

/// Everything a run reads.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub sequences: Vec<(String, String)>,
    pub edges: Vec<EdgeRecord>,
    pub types: Vec<String>,
    pub annotations: Annotations,
    pub tree: Option<HierarchyTree>,
    pub sites: BTreeMap<String, Vec<usize>>,
}

impl From<SynthCorpus> for Corpus {
    fn from(c: SynthCorpus) -> Self {
        Self {
            sequences: c.sequences(),
            annotations: c.annotations(),
            edges: c.edges,
            types: c.types,
            tree: Some(c.tree),
            sites: c.sites,
        }
    }
}

impl From<CorpusFiles> for Corpus {
    fn from(c: CorpusFiles) -> Self {
        Self {
            sequences: c.sequences,
            edges: c.edges,
            types: c.types,
            annotations: c.annotations,
            tree: Some(c.tree),
            sites: c.sites,
        }
    }
}

impl Corpus {
    pub fn ids(&self) -> Vec<String> {
        self.sequences.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn sequence_refs(&self) -> Vec<&str> {
        self.sequences.iter().map(|(_, s)| s.as_str()).collect()
    }
}

/// `N×K` indicators of `ids` over `vocab`; keywords outside `vocab` are
/// dropped.
pub fn keyword_matrix(ann: &Annotations, vocab: &[String], ids: &[String]) -> Result<Tensor> {
    if vocab.is_empty() {
        return Err(Error::Validation("the keyword vocabulary is empty".into()));
    }
    let pos: BTreeMap<&str, usize> = ann.vocab.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let mut data = Vec::with_capacity(ids.len() * vocab.len());
    for id in ids {
        let v = ann.vector(id);
        for k in vocab {
            let on = pos.get(k.as_str()).is_some_and(|&i| v[i]);
            data.push(if on { 1.0 } else { 0.0 });
        }
    }
    Tensor::matrix(ids.len(), vocab.len(), data)
}

pub struct PretrainResult {
    /// Holds the best parameters.
    pub model: PretrainModel,
    pub keyword_vocab: Vec<String>,
    pub log: Vec<StepLog>,
    pub best_step: usize,
}

pub fn run_pretrain(cfg: &RunConfig, corpus: &Corpus, threads: usize) -> Result<PretrainResult> {
    cfg.validate()?;
    let tree = match (&corpus.tree, &cfg.alignment.level_weights) {
        (Some(t), Some(w)) => Some(t.clone().with_level_weights(w.clone())?),
        (Some(t), None) => Some(t.clone()),
        (None, _) if cfg.alignment.w_hc > 0.0 => {
            return Err(Error::Config(
                "the hierarchical loss (w_hc > 0) needs a hierarchy file; pass --hierarchy or \
                 set alignment.w_hc to 0"
                    .into(),
            ))
        }
        (None, _) => None,
    };
    let vocab = corpus.annotations.vocab.clone();
    let ids = corpus.ids();
    if let Some(t) = &tree {
        if let Some(missing) = ids.iter().find(|id| !t.contains(id)) {
            return Err(Error::UnknownId(format!("{missing} (absent from the hierarchy)")));
        }
    }
    let data = PretrainData {
        keywords: keyword_matrix(&corpus.annotations, &vocab, &ids)?,
        ids,
        sequences: corpus.sequence_refs(),
        tree: tree.as_ref(),
    };
    let root = Rng::new(cfg.training.seed).split("pretrain");
    let mut model = PretrainModel::init(cfg.model(), vocab.len(), &root.split("init"))?;
    let out = pretrain(&mut model, &data, &cfg.schedule(), &root.split("batches"), threads)?;
    model.params = out.best;
    Ok(PretrainResult {
        model,
        keyword_vocab: vocab,
        log: out.log,
        best_step: out.best_step,
    })
}

pub fn pretrain_checkpoint(cfg: &RunConfig, r: &PretrainResult) -> Checkpoint {
    let mut c = Checkpoint::new(cfg.hash(), cfg.training.seed, r.best_step as u64, r.model.params.clone());
    c.meta.extra = json!({
        "kind": "pretrain",
        "keyword_vocab": r.keyword_vocab,
    });
    c
}

/// Rebuilds the pretrained model and its keyword vocabulary.
pub fn pretrained_from_checkpoint(cfg: &RunConfig, c: &Checkpoint) -> Result<(PretrainModel, Vec<String>)> {
    if c.meta.extra["kind"] != "pretrain" {
        return Err(Error::Validation("not a pretraining checkpoint".into()));
    }
    let vocab: Vec<String> = serde_json::from_value(c.meta.extra["keyword_vocab"].clone())?;
    let mut model = PretrainModel::init(cfg.model(), vocab.len(), &Rng::new(0))?;
    for name in model.params.names().cloned().collect::<Vec<_>>() {
        let t = c.params.get(&name)?;
        if t.shape() != model.params.get(&name)?.shape() {
            return Err(Error::Validation(format!("checkpoint tensor `{name}` has the wrong shape")));
        }
        model.params.insert(name, t.clone());
    }
    Ok((model, vocab))
}

/// Node features per protein and, when the projection is trainable, the
/// projection stage to start from.
pub struct NodeFeatures {
    pub rows: BTreeMap<String, Vec<f64>>,
    pub projection: Option<(ProjectionStage, Params)>,
}

pub fn node_features(
    cfg: &RunConfig,
    model: &PretrainModel,
    vocab: &[String],
    corpus: &Corpus,
    threads: usize,
) -> Result<NodeFeatures> {
    let ids = corpus.ids();
    let kw = keyword_matrix(&corpus.annotations, vocab, &ids)?;
    let seqs = corpus.sequence_refs();
    let (x, projection) = if cfg.training.freeze_projection {
        (model.embed(&seqs, &kw, threads)?, None)
    } else {
        let stage = ProjectionStage {
            d_model: model.config.encoder.d_model,
        };
        (
            model.pooled_features(&seqs, &kw, threads)?,
            Some((stage, model.projection_params())),
        )
    };
    let rows = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, x.row(i).to_vec()))
        .collect();
    Ok(NodeFeatures { rows, projection })
}

pub struct Downstream {
    pub model: PpiModel,
    pub log: TrainLog,
    pub graph: PpiGraph,
}

pub fn run_downstream(
    cfg: &RunConfig,
    features: &NodeFeatures,
    corpus: &Corpus,
    split: &SplitSpec,
) -> Result<Downstream> {
    split.validate(corpus.edges.len())?;
    let graph = build_graph(&corpus.edges, &features.rows, &split.train_edges)?;
    let d_in = graph.features.dims2()?.1;
    let model = PpiModel::init(
        cfg.gin.clone(),
        cfg.pair_head.clone(),
        d_in,
        graph.n_types,
        features.projection.clone(),
        &Rng::new(cfg.training.seed).split("ppi"),
    )?;
    let (model, log) = train_ppi(&model, &graph, &split.train_edges, &split.val_edges, &cfg.ppi_training())?;
    Ok(Downstream { model, log, graph })
}

fn test_rows(graph: &PpiGraph, split: &SplitSpec) -> (Vec<(usize, usize)>, Vec<Vec<bool>>, Vec<crate::splitbench::Difficulty>) {
    let pairs = graph.edge_pairs(&split.test_edges);
    let truth = graph.edge_labels(&split.test_edges);
    let diff = split.test_edges.iter().map(|e| split.difficulty[e]).collect();
    (pairs, truth, diff)
}

/// Metrics of `model` on the test edges of `split`.
pub fn evaluate_model(
    model: &PpiModel,
    graph: &PpiGraph,
    split: &SplitSpec,
    types: &[String],
    threshold: f64,
) -> Result<MetricReport> {
    let (pairs, truth, diff) = test_rows(graph, split);
    if pairs.is_empty() {
        return evaluate(&[], &[], &[], types, threshold);
    }
    let p = predict(model, graph, &pairs)?;
    let (m, _) = p.dims2()?;
    let probs: Vec<Vec<f64>> = (0..m).map(|i| p.row(i).to_vec()).collect();
    evaluate(&probs, &truth, &diff, types, threshold)
}

/// Metrics of the degree-based random guess on the test edges.
pub fn evaluate_baseline(graph: &PpiGraph, split: &SplitSpec, types: &[String], seed: u64) -> Result<MetricReport> {
    let (pairs, truth, diff) = test_rows(graph, split);
    let guess = degree_baseline(graph, &split.train_edges, &pairs, &mut Rng::new(seed).split("baseline"));
    let probs: Vec<Vec<f64>> = guess
        .into_iter()
        .map(|r| r.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
        .collect();
    evaluate(&probs, &truth, &diff, types, 0.5)
}

/// Trained downstream model, its graph features and metadata.
pub fn ppi_checkpoint(cfg: &RunConfig, d: &Downstream, types: &[String]) -> Checkpoint {
    let mut params = Params::new();
    params.extend_prefixed("model.", d.model.params.clone());
    for (k, (m, v)) in d.model.bn.mean.iter().zip(&d.model.bn.var).enumerate() {
        params.insert(format!("bn.mean.{k}"), Tensor::vector(m.clone()));
        params.insert(format!("bn.var.{k}"), Tensor::vector(v.clone()));
    }
    params.insert("graph.features", d.graph.features.clone());
    let mut c = Checkpoint::new(
        cfg.hash(),
        cfg.training.seed,
        d.log.best_epoch.unwrap_or(0) as u64,
        params,
    );
    c.meta.extra = json!({
        "kind": "ppi",
        "ids": d.graph.ids,
        "types": types,
        "projection": d.model.projection,
        "n_types": d.model.n_types,
    });
    c
}

#[derive(Deserialize)]
struct PpiMeta {
    ids: Vec<String>,
    types: Vec<String>,
    projection: Option<ProjectionStage>,
    n_types: usize,
}

/// Restores the downstream model and the node features it was trained on.
pub fn ppi_from_checkpoint(
    cfg: &RunConfig,
    c: &Checkpoint,
) -> Result<(PpiModel, BTreeMap<String, Vec<f64>>, Vec<String>)> {
    if c.meta.extra["kind"] != "ppi" {
        return Err(Error::Validation("not a downstream model checkpoint".into()));
    }
    let meta: PpiMeta = serde_json::from_value(c.meta.extra.clone())?;
    let feats = c.params.get("graph.features")?;
    let (n, _) = feats.dims2()?;
    if n != meta.ids.len() {
        return Err(Error::Validation("feature rows do not match node ids".into()));
    }
    let mut bn = BnState::new(&cfg.gin);
    for k in 0..cfg.gin.n_blocks {
        if cfg.gin.batch_norm {
            bn.mean[k] = c.params.get(&format!("bn.mean.{k}"))?.data().to_vec();
            bn.var[k] = c.params.get(&format!("bn.var.{k}"))?.data().to_vec();
        }
    }
    let model = PpiModel {
        gin: cfg.gin.clone(),
        head: cfg.pair_head.clone(),
        n_types: meta.n_types,
        projection: meta.projection,
        params: c.params.subset("model."),
        bn,
    };
    let rows = meta
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), feats.row(i).to_vec()))
        .collect();
    Ok((model, rows, meta.types))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteOverlap {
    pub protein: String,
    pub n_annotated: usize,
    pub overlap: f64,
}

/// Overlap between the top-N attention residues and the annotated sites of
/// each protein with sites, N being the number of annotated residues.
pub fn site_overlaps(model: &PretrainModel, corpus: &Corpus) -> Result<Vec<SiteOverlap>> {
    let seqs: BTreeMap<&str, &str> = corpus
        .sequences
        .iter()
        .map(|(i, s)| (i.as_str(), s.as_str()))
        .collect();
    let enc = model.params.subset("seq.");
    let mut out = Vec::new();
    for (id, residues) in &corpus.sites {
        let seq = seqs
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownId(format!("{id} (site entry without a sequence)")))?;
        let annotated: BTreeSet<usize> = residues.iter().copied().collect();
        if annotated.is_empty() {
            continue;
        }
        let toks = tokenize(seq);
        let mask = vec![true; toks.len()];
        let e = encode_sequence(&model.config.encoder, &enc, &toks, &mask)?;
        let scores = attention_site_scores(&e.attention, &mask)?;
        let predicted = crate::encoders::top_residues(&scores, annotated.len());
        out.push(SiteOverlap {
            protein: id.clone(),
            n_annotated: annotated.len(),
            overlap: overlap_rate(&predicted, &annotated)?,
        });
    }
    Ok(out)
}

/// Edge split from the training section of `cfg`.
pub fn make_split(cfg: &RunConfig, edges: &[EdgeRecord]) -> Result<SplitSpec> {
    let t = &cfg.training;
    let mut rng = Rng::new(t.seed).split("split");
    split_edges(t.split_method, edges, t.test_fraction, t.val_fraction, &mut rng)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub model: MetricReport,
    pub baseline: MetricReport,
    pub pretrain_best_step: usize,
    pub ppi_best_epoch: Option<usize>,
    /// Summed over every pretraining step.
    pub hc_activations: usize,
    pub hc_violations: usize,
}

/// Split, pretraining, downstream training and evaluation in one go.
pub fn run_end_to_end(cfg: &RunConfig, corpus: &Corpus, threads: usize) -> Result<RunSummary> {
    let split = make_split(cfg, &corpus.edges)?;
    let pre = run_pretrain(cfg, corpus, threads)?;
    let feats = node_features(cfg, &pre.model, &pre.keyword_vocab, corpus, threads)?;
    let d = run_downstream(cfg, &feats, corpus, &split)?;
    let model = evaluate_model(&d.model, &d.graph, &split, &corpus.types, cfg.training.threshold)?;
    let baseline = evaluate_baseline(&d.graph, &split, &corpus.types, cfg.training.seed)?;
    Ok(RunSummary {
        model,
        baseline,
        pretrain_best_step: pre.best_step,
        ppi_best_epoch: d.log.best_epoch,
        hc_activations: pre.log.iter().map(|s| s.hc_activations).sum(),
        hc_violations: pre.log.iter().map(|s| s.hc_violations).sum(),
    })
}
