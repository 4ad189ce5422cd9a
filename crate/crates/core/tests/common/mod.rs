//! Independent straight-line oracles shared by the integration tests and
//! the acceptance runner.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use hippo::dataio::EdgeRecord;
use hippo::hierarchy::{HcLossBreakdown, HierarchyTree};
use hippo::numcore::{Adjacency, Rng, Tensor};
use hippo::ppinet::{gin_forward, init_gin, BnMode, BnState, GinConfig};
use hippo::splitbench::{Difficulty, SplitSpec};

pub struct HcFixture {
    pub tree: HierarchyTree,
    pub clan: Vec<String>,
    pub family: Vec<String>,
    pub batch: Vec<String>,
    pub emb: Tensor,
    pub tau: f64,
    pub weights: Vec<f64>,
}

/// Random two-level clan/family tree and a batch drawn from it.
pub fn hc_fixture(rng: &mut Rng) -> HcFixture {
    let n_clans = 1 + rng.below(3);
    let n_fams = n_clans + rng.below(4);
    let n_prot = 6 + rng.below(8);
    let fam_clan: Vec<usize> = (0..n_fams).map(|f| if f < n_clans { f } else { rng.below(n_clans) }).collect();
    let mut rows = Vec::new();
    for p in 0..n_prot {
        let f = rng.below(n_fams);
        rows.push((format!("p{p}"), format!("F{f}"), Some(format!("C{}", fam_clan[f]))));
    }
    let weights = vec![rng.uniform_range(0.2, 2.0), rng.uniform_range(0.2, 2.0)];
    let tree = HierarchyTree::from_clan_family(&rows)
        .unwrap()
        .with_level_weights(weights.clone())
        .unwrap();
    let n = 3 + rng.below(6);
    let mut pool: Vec<usize> = (0..n_prot).collect();
    rng.shuffle(&mut pool);
    let picks = &pool[..n.min(n_prot)];
    let batch: Vec<String> = picks.iter().map(|&p| rows[p].0.clone()).collect();
    let family = picks.iter().map(|&p| rows[p].1.clone()).collect();
    let clan = picks.iter().map(|&p| rows[p].2.clone().unwrap()).collect();
    let d = 2 + rng.below(5);
    let data = (0..batch.len() * d).map(|_| rng.normal()).collect();
    HcFixture {
        tree,
        clan,
        family,
        emb: Tensor::matrix(batch.len(), d, data).unwrap(),
        batch,
        tau: rng.uniform_range(0.1, 1.0),
        weights,
    }
}

/// Whether `j` is a positive of `i` at `level` (0 = clan, 1 = family).
pub fn hc_positive(f: &HcFixture, level: usize, i: usize, j: usize) -> bool {
    if i == j {
        return false;
    }
    match level {
        0 => f.clan[i] == f.clan[j] && f.family[i] != f.family[j],
        _ => f.family[i] == f.family[j],
    }
}

/// Hierarchical loss evaluated from clan and family labels.
pub fn hc_brute_force(f: &HcFixture) -> f64 {
    let n = f.batch.len();
    let (_, d) = f.emb.dims2().unwrap();
    let unit: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r: Vec<f64> = (0..d).map(|k| f.emb.get2(i, k)).collect();
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|x| x / norm).collect()
        })
        .collect();
    let sim = |i: usize, j: usize| -> f64 { (0..d).map(|k| unit[i][k] * unit[j][k]).sum::<f64>() / f.tau };
    let pair = |i: usize, p: usize| -> f64 {
        let others: Vec<f64> = (0..n).filter(|&a| a != i).map(|a| sim(i, a)).collect();
        let m = others.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = others.iter().map(|v| (v - m).exp()).sum();
        m + s.ln() - sim(i, p)
    };
    let mut total = 0.0;
    let mut floor = 0.0;
    for level in 0..2 {
        let mut level_max: Option<f64> = None;
        for i in 0..n {
            let pos: Vec<usize> = (0..n).filter(|&j| hc_positive(f, level, i, j)).collect();
            if pos.is_empty() {
                continue;
            }
            let mut s = 0.0;
            for &p in &pos {
                let c = pair(i, p).max(floor);
                s += c;
                level_max = Some(level_max.map_or(c, |m: f64| m.max(c)));
            }
            total += f.weights[level] / 2.0 / pos.len() as f64 * s;
        }
        if let Some(m) = level_max {
            floor = m;
        }
    }
    total
}

/// Pairs whose constrained loss falls below the parent level's maximum or
/// below their own raw loss.
pub fn hc_violations(b: &HcLossBreakdown) -> usize {
    let own = b
        .pairs
        .iter()
        .filter(|r| {
            let parent = if r.level == 0 { 0.0 } else { b.per_level[r.level - 1].max_pair_loss };
            r.constrained < parent || r.constrained < r.raw
        })
        .count();
    own + b.constraint_violations()
}

/// Area by sweeping every distinct score as a threshold, highest first.
pub fn aupr_sweep(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_tp = 0;
    for t in thresholds {
        let tp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i]).count();
        let called = (0..scores.len()).filter(|&i| scores[i] >= t).count();
        if tp > prev_tp {
            area += (tp as f64 / called as f64) * ((tp - prev_tp) as f64 / n_pos as f64);
        }
        prev_tp = tp;
    }
    Some(area)
}

/// Tied scores on a coarse grid with random labels.
pub fn aupr_fixture(rng: &mut Rng) -> (Vec<f64>, Vec<bool>) {
    let n = 2 + rng.below(30);
    let levels = 1 + rng.below(6);
    let scores = (0..n).map(|_| rng.below(levels) as f64 / levels as f64).collect();
    let labels = (0..n).map(|_| rng.bernoulli(0.4)).collect();
    (scores, labels)
}

/// Summed binary cross-entropy through the sigmoid.
pub fn naive_bce(logits: &Tensor, labels: &[Vec<bool>]) -> f64 {
    let (m, t) = logits.dims2().unwrap();
    let mut total = 0.0;
    for i in 0..m {
        for k in 0..t {
            let z = logits.get2(i, k);
            let p = 1.0 / (1.0 + (-z).exp());
            total += if labels[i][k] { -p.ln() } else { -(1.0 - p).ln() };
        }
    }
    total
}

pub fn bce_fixture(rng: &mut Rng) -> (Tensor, Vec<Vec<bool>>) {
    let m = 1 + rng.below(10);
    let t = 1 + rng.below(6);
    let logits = Tensor::matrix(m, t, (0..m * t).map(|_| 3.0 * rng.normal()).collect()).unwrap();
    let labels = (0..m).map(|_| (0..t).map(|_| rng.bernoulli(0.5)).collect()).collect();
    (logits, labels)
}

pub fn random_unit_rows(n: usize, d: usize, rng: &mut Rng) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    Tensor::from_rows(&rows).unwrap()
}

/// Symmetric contrastive loss as two explicit softmax loops.
pub fn naive_sac(zs: &Tensor, za: &Tensor, tau: f64) -> f64 {
    let (n, d) = zs.dims2().unwrap();
    let sim = |i: usize, j: usize| (0..d).map(|k| zs.get2(i, k) * za.get2(j, k)).sum::<f64>() / tau;
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| sim(i, j).exp()).sum();
        let col: f64 = (0..n).map(|j| sim(j, i).exp()).sum();
        total += (sim(i, i).exp() / row).ln() + (sim(i, i).exp() / col).ln();
    }
    -total / (2.0 * n as f64)
}

/// Random simple graph on `n_nodes` with `m` labelled edges, shuffled.
pub fn random_edges(rng: &mut Rng, n_nodes: usize, m: usize) -> Vec<EdgeRecord> {
    let mut pairs = BTreeSet::new();
    while pairs.len() < m {
        let a = rng.below(n_nodes);
        let b = rng.below(n_nodes);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let mut edges: Vec<EdgeRecord> = pairs
        .into_iter()
        .map(|(a, b)| EdgeRecord::new(&format!("n{a}"), &format!("n{b}"), vec![rng.bernoulli(0.5)]).unwrap())
        .collect();
    rng.shuffle(&mut edges);
    edges
}

/// A test edge is easy when either endpoint appears in any train or
/// validation edge.
pub fn brute_force_tags(s: &SplitSpec, edges: &[EdgeRecord]) -> BTreeMap<usize, Difficulty> {
    let mut tags = BTreeMap::new();
    for &t in &s.test_edges {
        let mut easy = false;
        for &o in s.train_edges.iter().chain(&s.val_edges) {
            for end in [&edges[t].a, &edges[t].b] {
                easy |= *end == edges[o].a || *end == edges[o].b;
            }
        }
        tags.insert(t, if easy { Difficulty::Easy } else { Difficulty::Hard });
    }
    tags
}

/// Whether the three parts cover `0..m` exactly once.
pub fn is_partition(s: &SplitSpec, m: usize) -> bool {
    let mut all: Vec<usize> = s.train_edges.iter().chain(&s.val_edges).chain(&s.test_edges).copied().collect();
    all.sort_unstable();
    all == (0..m).collect::<Vec<_>>()
}

fn adjacency(nbrs: &[BTreeSet<usize>]) -> Rc<Adjacency> {
    Rc::new(Adjacency::new(nbrs.iter().map(|s| s.iter().copied().collect()).collect()).unwrap())
}

/// Runs a random GIN on a random graph of at most 20 nodes and on a
/// random relabelling of it; true when every embedding row matches its
/// relabelled row bit for bit, in both batch-norm modes.
pub fn gin_equivariant(rng: &mut Rng) -> bool {
    let n = 2 + rng.below(19);
    let d = 1 + rng.below(5);
    let cfg = GinConfig {
        n_blocks: 1 + rng.below(3),
        hidden: 2 + rng.below(6),
        eps: rng.uniform_range(-0.5, 3.0),
        batch_norm: rng.bernoulli(0.7),
        ..Default::default()
    };
    let params = init_gin(&cfg, d, rng).unwrap();
    let p = rng.uniform_range(0.05, 0.5);
    let mut nbrs = vec![BTreeSet::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.bernoulli(p) {
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
        }
    }
    let x = Tensor::matrix(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap();

    // perm[new] = old
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let p_nbrs: Vec<BTreeSet<usize>> = perm.iter().map(|&old| nbrs[old].iter().map(|&u| inv[u]).collect()).collect();
    let p_x = Tensor::from_rows(&perm.iter().map(|&old| x.row(old).to_vec()).collect::<Vec<_>>()).unwrap();

    let mut state = BnState::new(&cfg);
    for v in state.mean.iter_mut().flatten() {
        *v = rng.normal();
    }
    let modes = [BnMode::Train, BnMode::Eval(&state)];
    let same = modes.into_iter().all(|mode| {
        let h = gin_forward(&cfg, &params, &x, &adjacency(&nbrs), mode).unwrap();
        let p_h = gin_forward(&cfg, &params, &p_x, &adjacency(&p_nbrs), mode).unwrap();
        perm.iter().enumerate().all(|(new, &old)| p_h.row(new) == h.row(old))
    });
    same
}
