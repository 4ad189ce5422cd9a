//! Finite-difference checks of every differentiable loss and forward pass
//! on small random fixtures.

use std::rc::Rc;

use serde::Serialize;

use crate::encoders::{
    encode_annotations_on_tape, encode_sequence_on_tape, init_annotation_encoder,
    init_sequence_encoder, sac_loss_on_tape, sam_loss_on_tape, sam_pairs, AlignmentHeads,
    AnnotationEncoderConfig, SequenceEncoderConfig,
};
use crate::error::Result;
use crate::hierarchy::{hc_loss, hc_loss_on_tape, HcLossBreakdown, HierarchyTree, PositiveSets};
use crate::numcore::{grad_check, Adjacency, GradCheckReport, Params, Rng, Tape, Tensor};
use crate::ppinet::{bce_on_tape, gin_forward_on_tape, init_gin, BnMode, GinConfig, Reduction};

pub const SUITE_STEP: f64 = 1e-5;
pub const SUITE_TOL: f64 = 1e-4;

pub const SUITE_OPS: [&str; 7] = [
    "hc_loss",
    "sac_loss",
    "sam_loss",
    "bce_multilabel",
    "encode_sequence",
    "encode_annotations",
    "gin_forward",
];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub op: String,
    pub fixture: usize,
    /// Batch size, node count or sequence length.
    pub n: usize,
    /// Embedding or model width.
    pub d: usize,
    pub max_rel_err: f64,
    /// Parameter tensor with the largest error.
    pub worst: Option<String>,
    pub passed: bool,
    pub diagnostic: Option<String>,
}

fn gaussian(r: usize, c: usize, rng: &mut Rng) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.normal()).collect()).expect("matching size")
}

fn entry(op: &str, fixture: usize, n: usize, d: usize, r: GradCheckReport) -> SuiteEntry {
    SuiteEntry {
        op: op.to_string(),
        fixture,
        n,
        d,
        max_rel_err: r.max_rel_err,
        worst: r
            .per_parameter_errors
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(name, _)| name.clone()),
        passed: r.passed,
        diagnostic: r.diagnostic,
    }
}

/// Runs `fixtures` random fixtures of every operation in [`SUITE_OPS`].
pub fn gradient_suite(seed: u64, fixtures: usize) -> Result<Vec<SuiteEntry>> {
    let root = Rng::new(seed);
    let mut out = Vec::with_capacity(fixtures * SUITE_OPS.len());
    for op in SUITE_OPS {
        for k in 0..fixtures {
            let mut rng = root.split(op).split_n("fixture", k as u64);
            out.push(match op {
                "hc_loss" => check_hc(k, &mut rng)?,
                "sac_loss" => check_sac(k, &mut rng)?,
                "sam_loss" => check_sam(k, &mut rng)?,
                "bce_multilabel" => check_bce(k, &mut rng)?,
                "encode_sequence" => check_sequence(k, &mut rng)?,
                "encode_annotations" => check_annotations(k, &mut rng)?,
                _ => check_gin(k, &mut rng)?,
            });
        }
    }
    Ok(out)
}

/// Random clan/family tree over `n` proteins with at least one positive
/// pair.
fn random_tree(n: usize, rng: &mut Rng) -> Result<(HierarchyTree, Vec<String>)> {
    loop {
        let rows: Vec<(String, String, Option<String>)> = (0..n)
            .map(|i| {
                let fam = rng.below(3);
                (format!("p{i}"), format!("F{fam}"), Some(format!("C{}", fam % 2)))
            })
            .collect();
        let tree = HierarchyTree::from_clan_family(&rows)?
            .with_level_weights(vec![rng.uniform_range(0.5, 1.5), rng.uniform_range(0.5, 1.5)])?;
        let ids: Vec<String> = rows.into_iter().map(|r| r.0).collect();
        let pos = PositiveSets::from_batch(&tree, &ids)?;
        if (0..2).any(|l| (0..n).any(|i| !pos.get(l, i).is_empty())) {
            return Ok((tree, ids));
        }
    }
}

/// True when a pair loss sits within `margin` of its floor or two pairs
/// tie for a level maximum, where the loss is not differentiable.
pub fn near_kink(b: &HcLossBreakdown, margin: f64) -> bool {
    let close_to_floor = b
        .pairs
        .iter()
        .any(|p| p.floor > 0.0 && (p.raw - p.floor).abs() < margin);
    let tied_max = b.per_level.iter().any(|s| {
        let vals: Vec<f64> = b
            .pairs
            .iter()
            .filter(|p| p.level == s.level)
            .map(|p| p.constrained)
            .collect();
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut first = true;
        vals.iter().any(|&v| {
            if (top - v).abs() < margin {
                if first {
                    first = false;
                    return false;
                }
                return true;
            }
            false
        })
    });
    close_to_floor || tied_max
}

fn normalized(t: &Tensor) -> Tensor {
    let (r, c) = t.dims2().expect("matrix");
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        let row = t.row(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(row.iter().map(|x| x / norm));
    }
    Tensor::matrix(r, c, data).expect("same shape")
}

fn check_hc(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 4 + rng.below(5);
    let d = 2 + rng.below(15);
    let (tree, ids) = random_tree(n, rng)?;
    let tau = rng.uniform_range(0.3, 1.0);
    let mut e = gaussian(n, d, rng);
    while near_kink(&hc_loss(&tree, &ids, &normalized(&e), tau)?, 1e-3) {
        e = gaussian(n, d, rng);
    }
    let pos = PositiveSets::from_batch(&tree, &ids)?;
    let point: Params = [("e".to_string(), e)].into_iter().collect();
    let r = grad_check(
        "hc_loss",
        |tape, b| {
            let z = tape.l2_normalize_rows(b.get("e")?)?;
            Ok(hc_loss_on_tape(tape, z, &pos, tree.level_weights(), tau)?.0)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("hc_loss", k, n, d, r))
}

fn check_sac(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 2 + rng.below(7);
    let d = 2 + rng.below(15);
    let tau = rng.uniform_range(0.1, 1.0);
    let point: Params = [("zs".to_string(), gaussian(n, d, rng)), ("za".to_string(), gaussian(n, d, rng))]
        .into_iter()
        .collect();
    let r = grad_check(
        "sac_loss",
        |tape, b| {
            let zs = tape.l2_normalize_rows(b.get("zs")?)?;
            let za = tape.l2_normalize_rows(b.get("za")?)?;
            sac_loss_on_tape(tape, zs, za, tau)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("sac_loss", k, n, d, r))
}

fn check_sam(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 2 + rng.below(7);
    let d = 2 + rng.below(15);
    let heads = AlignmentHeads {
        proj_dim: 2 + rng.below(7),
        match_hidden: 2 + rng.below(7),
        alpha: rng.uniform_range(0.1, 0.9),
        gamma: rng.uniform_range(0.0, 3.0),
        ..AlignmentHeads::default()
    };
    let mut point = heads.init(d, rng)?;
    point.insert("xs", gaussian(n, d, rng));
    point.insert("xa", gaussian(n, d, rng));
    let pairs = sam_pairs(n, rng)?;
    let r = grad_check(
        "sam_loss",
        |tape, b| {
            let zs = heads.project(tape, b, "seq_proj", b.get("xs")?)?;
            let za = heads.project(tape, b, "ann_proj", b.get("xa")?)?;
            let p = heads.match_probabilities(tape, b, zs, za, &pairs)?;
            sam_loss_on_tape(tape, &pairs, p, heads.alpha, heads.gamma)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("sam_loss", k, n, d, r))
}

fn check_bce(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 1 + rng.below(8);
    let t = 1 + rng.below(6);
    let labels: Vec<Vec<bool>> = (0..n).map(|_| (0..t).map(|_| rng.bernoulli(0.4)).collect()).collect();
    let reduction = if k.is_multiple_of(2) { Reduction::Mean } else { Reduction::Sum };
    let logits = gaussian(n, t, rng).map(|v| 2.0 * v);
    let point: Params = [("logits".to_string(), logits)].into_iter().collect();
    let r = grad_check(
        "bce_multilabel",
        |tape, b| bce_on_tape(tape, b.get("logits")?, &labels, reduction),
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("bce_multilabel", k, n, t, r))
}

fn check_sequence(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n_heads = 1 + rng.below(2);
    let cfg = SequenceEncoderConfig {
        d_model: 2 * n_heads * (2 + rng.below(3)),
        n_blocks: 1 + rng.below(2),
        conv_widths: (3, 5),
        n_heads,
        max_len: 16,
        ff_mult: 2,
    };
    let len = 3 + rng.below(6);
    let toks: Vec<usize> = (0..len).map(|_| rng.below(21)).collect();
    let valid = len - rng.below(2);
    let mask: Vec<bool> = (0..len).map(|i| i < valid).collect();
    let point = init_sequence_encoder(&cfg, rng)?;
    let probe = gaussian(cfg.d_model, 1, rng);
    let r = grad_check(
        "encode_sequence",
        |tape, b| {
            let out = encode_sequence_on_tape(tape, &cfg, b, &toks, &mask)?;
            let w = tape.leaf(probe.clone())?;
            let y = tape.matmul(out.pooled, w)?;
            tape.sum(y)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("encode_sequence", k, len, cfg.d_model, r))
}

fn check_annotations(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 1 + rng.below(8);
    let kw = 2 + rng.below(10);
    let cfg = AnnotationEncoderConfig {
        hidden: 2 + rng.below(15),
        d_model: 2 + rng.below(15),
    };
    let x = Tensor::matrix(
        n,
        kw,
        (0..n * kw).map(|_| if rng.bernoulli(0.4) { 1.0 } else { 0.0 }).collect(),
    )?;
    let point = init_annotation_encoder(&cfg, kw, rng)?;
    let probe = gaussian(n, cfg.d_model, rng);
    let r = grad_check(
        "encode_annotations",
        |tape, b| {
            let xv = tape.leaf(x.clone())?;
            let y = encode_annotations_on_tape(tape, b, xv)?;
            let w = tape.leaf(probe.clone())?;
            let y = tape.mul(y, w)?;
            tape.sum(y)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("encode_annotations", k, n, cfg.d_model, r))
}

/// Bias that puts the ReLU kink in the widest gap between the sorted
/// pre-activations of each column, so every column is partly active and
/// no unit sits near its kink.
fn gap_bias(pre: &Tensor) -> Result<Tensor> {
    let (n, width) = pre.dims2()?;
    let bias = (0..width)
        .map(|c| {
            let mut col: Vec<f64> = (0..n).map(|i| pre.get2(i, c)).collect();
            col.sort_by(f64::total_cmp);
            let i = (0..n - 1)
                .max_by(|&a, &b| (col[a + 1] - col[a]).total_cmp(&(col[b + 1] - col[b])))
                .expect("n >= 2");
            -(col[i] + col[i + 1]) / 2.0
        })
        .collect();
    Ok(Tensor::vector(bias))
}

/// Sets both biases of every block with [`gap_bias`], block by block.
fn place_gin_biases(cfg: &GinConfig, point: &mut Params, adj: &Rc<Adjacency>) -> Result<()> {
    for k in 0..cfg.n_blocks {
        for layer in ["l1", "l2"] {
            let mut tape = Tape::new();
            let b = point.bind(&mut tape)?;
            let mut h = b.get("x")?;
            if k > 0 {
                let head = GinConfig { n_blocks: k, ..cfg.clone() };
                h = gin_forward_on_tape(&mut tape, &head, &b, h, adj, BnMode::Train)?.0;
            }
            let p = b.scoped(&format!("b{k}."));
            let agg = tape.neighbor_sum(h, adj, 1.0 + cfg.eps)?;
            let mut z = tape.matmul(agg, p.get("l1.w")?)?;
            if layer == "l2" {
                let b1 = p.get("l1.b")?;
                z = tape.add_row(z, b1)?;
                z = tape.relu(z)?;
                z = tape.matmul(z, p.get("l2.w")?)?;
            }
            let bias = gap_bias(tape.value(z))?;
            point.insert(format!("b{k}.{layer}.b"), bias);
        }
    }
    Ok(())
}

fn check_gin(k: usize, rng: &mut Rng) -> Result<SuiteEntry> {
    let n = 3 + rng.below(6);
    let d_in = 2 + rng.below(15);
    let cfg = GinConfig {
        n_blocks: 1 + rng.below(3),
        hidden: 2 + rng.below(15),
        eps: rng.uniform_range(0.0, 1.0),
        batch_norm: k % 3 != 2,
        ..GinConfig::default()
    };
    let mut nbrs = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.bernoulli(0.4) {
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
    }
    let adj = Rc::new(Adjacency::new(nbrs)?);
    let mut point = init_gin(&cfg, d_in, rng)?;
    point.insert("x", gaussian(n, d_in, rng));
    place_gin_biases(&cfg, &mut point, &adj)?;
    let probe = gaussian(n, cfg.hidden, rng);
    let r = grad_check(
        "gin_forward",
        |tape, b| {
            let x = b.get("x")?;
            let (g, _) = gin_forward_on_tape(tape, &cfg, b, x, &adj, BnMode::Train)?;
            let w = tape.leaf(probe.clone())?;
            let y = tape.mul(g, w)?;
            tape.sum(y)
        },
        &point,
        SUITE_STEP,
        SUITE_TOL,
    );
    Ok(entry("gin_forward", k, n, d_in, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let out = gradient_suite(1, 8).unwrap();
        assert_eq!(out.len(), 8 * SUITE_OPS.len());
        let bad: Vec<_> = out.iter().filter(|e| !e.passed).collect();
        assert!(bad.is_empty(), "{bad:#?}");
    }

    fn breakdown(pairs: &[(usize, f64, f64)]) -> HcLossBreakdown {
        use crate::hierarchy::{LevelStats, PairRecord};
        let pairs: Vec<PairRecord> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(level, raw, floor))| PairRecord {
                level,
                anchor: i,
                positive: i + 1,
                raw,
                floor,
                constrained: raw.max(floor),
            })
            .collect();
        let per_level = (0..2)
            .map(|level| LevelStats { level, n_pairs: 0, mean_pair_loss: 0.0, max_pair_loss: 0.0 })
            .collect();
        HcLossBreakdown { total: 0.0, per_level, constraint_activations: 0, no_positives: false, pairs }
    }

    #[test]
    fn near_kink_cases() {
        assert!(!near_kink(&breakdown(&[(0, 1.0, 0.0), (0, 0.5, 0.0), (1, 2.0, 1.0)]), 1e-3));
        assert!(near_kink(&breakdown(&[(0, 1.0, 0.0), (0, 1.0 + 1e-6, 0.0)]), 1e-3));
        assert!(near_kink(&breakdown(&[(0, 1.0, 0.0), (1, 1.0005, 1.0)]), 1e-3));
    }
}
