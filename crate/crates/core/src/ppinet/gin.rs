use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{seeded_init, Adjacency, Bound, InitScheme, Params, Rng, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GinConfig {
    pub n_blocks: usize,
    pub hidden: usize,
    /// Self weight is `1 + eps`.
    pub eps: f64,
    pub batch_norm: bool,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for GinConfig {
    fn default() -> Self {
        Self {
            n_blocks: 3,
            hidden: 64,
            eps: 0.0,
            batch_norm: true,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl GinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.hidden == 0 {
            return Err(Error::Config("gin: n_blocks and hidden must be positive".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps > 0.0) {
            return Err(Error::Config("gin: bn_momentum in (0, 1] and bn_eps > 0".into()));
        }
        if !self.eps.is_finite() {
            return Err(Error::Config("gin: eps must be finite".into()));
        }
        Ok(())
    }
}

/// Running batch-norm statistics, one `(mean, var)` pair per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnState {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl BnState {
    pub fn new(cfg: &GinConfig) -> Self {
        Self {
            mean: vec![vec![0.0; cfg.hidden]; cfg.n_blocks],
            var: vec![vec![1.0; cfg.hidden]; cfg.n_blocks],
        }
    }

    /// Exponential moving average towards the batch statistics.
    pub fn update(&mut self, batch: &[(Vec<f64>, Vec<f64>)], momentum: f64) {
        for (k, (m, v)) in batch.iter().enumerate() {
            for (r, b) in self.mean[k].iter_mut().zip(m) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
            for (r, b) in self.var[k].iter_mut().zip(v) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BnMode<'a> {
    /// Batch statistics.
    Train,
    /// Running statistics.
    Eval(&'a BnState),
}

pub fn init_gin(cfg: &GinConfig, d_in: usize, rng: &mut Rng) -> Result<Params> {
    cfg.validate()?;
    let mut p = Params::new();
    for k in 0..cfg.n_blocks {
        let fan_in = if k == 0 { d_in } else { cfg.hidden };
        let h = cfg.hidden;
        p.insert(format!("b{k}.l1.w"), seeded_init(&[fan_in, h], InitScheme::UniformScaled, rng)?);
        p.insert(format!("b{k}.l1.b"), Tensor::zeros(&[h]));
        p.insert(format!("b{k}.l2.w"), seeded_init(&[h, h], InitScheme::UniformScaled, rng)?);
        p.insert(format!("b{k}.l2.b"), Tensor::zeros(&[h]));
        if cfg.batch_norm {
            p.insert(format!("b{k}.bn.g"), Tensor::full(&[h], 1.0));
            p.insert(format!("b{k}.bn.b"), Tensor::zeros(&[h]));
        }
    }
    Ok(p)
}

/// Records the GIN stack. Returns node embeddings and, in training mode,
/// each block's batch `(mean, var)`.
pub fn gin_forward_on_tape(
    tape: &mut Tape,
    cfg: &GinConfig,
    params: &Bound,
    x: Var,
    adj: &Rc<Adjacency>,
    mode: BnMode,
) -> Result<(Var, Vec<(Vec<f64>, Vec<f64>)>)> {
    cfg.validate()?;
    let mut h = x;
    let mut stats = Vec::new();
    for k in 0..cfg.n_blocks {
        let p = params.scoped(&format!("b{k}."));
        let agg = tape.neighbor_sum(h, adj, 1.0 + cfg.eps)?;
        let z = tape.linear(agg, p.get("l1.w")?, p.get("l1.b")?)?;
        let z = tape.relu(z)?;
        let z = tape.linear(z, p.get("l2.w")?, p.get("l2.b")?)?;
        let z = tape.relu(z)?;
        h = if cfg.batch_norm {
            let normed = match mode {
                BnMode::Train => {
                    let (v, m, var) = tape.batch_norm(z, cfg.bn_eps)?;
                    stats.push((m, var));
                    v
                }
                BnMode::Eval(state) => {
                    let neg_mean = Tensor::vector(state.mean[k].iter().map(|m| -m).collect());
                    let inv_std = Tensor::vector(
                        state.var[k].iter().map(|v| 1.0 / (v + cfg.bn_eps).sqrt()).collect(),
                    );
                    let nm = tape.leaf(neg_mean)?;
                    let is = tape.leaf(inv_std)?;
                    let c = tape.add_row(z, nm)?;
                    tape.mul_row(c, is)?
                }
            };
            let y = tape.mul_row(normed, p.get("bn.g")?)?;
            tape.add_row(y, p.get("bn.b")?)?
        } else {
            z
        };
    }
    Ok((h, stats))
}

/// Node embeddings `[N×hidden]` of `features` under `adj`.
pub fn gin_forward(
    cfg: &GinConfig,
    params: &Params,
    features: &Tensor,
    adj: &Rc<Adjacency>,
    mode: BnMode,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let b = params.bind(&mut tape)?;
    let x = tape.leaf(features.clone())?;
    let (h, _) = gin_forward_on_tape(&mut tape, cfg, &b, x, adj, mode)?;
    Ok(tape.value(h).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> Rc<Adjacency> {
        Rc::new(Adjacency::new(vec![vec![1], vec![0, 2], vec![1]]).unwrap())
    }

    #[test]
    fn path_graph_center_sums_neighbors() {
        let cfg = GinConfig {
            n_blocks: 1,
            hidden: 2,
            batch_norm: false,
            ..Default::default()
        };
        let mut p = init_gin(&cfg, 2, &mut Rng::new(1)).unwrap();
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        p.insert("b0.l1.w", eye.clone());
        p.insert("b0.l2.w", eye);
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0], vec![7.0, 11.0]]).unwrap();
        let h = gin_forward(&cfg, &p, &x, &path(), BnMode::Train).unwrap();
        assert_eq!(h.row(1), &[11.0, 18.0]);
        assert_eq!(h.row(0), &[4.0, 7.0]);
    }

    #[test]
    fn edgeless_rows_are_independent() {
        let cfg = GinConfig {
            n_blocks: 2,
            hidden: 4,
            ..Default::default()
        };
        let p = init_gin(&cfg, 3, &mut Rng::new(2)).unwrap();
        let adj = Rc::new(Adjacency::new(vec![vec![]; 3]).unwrap());
        let state = BnState::new(&cfg);
        let x = Tensor::from_rows(&[vec![1.0, 0.5, -1.0], vec![0.1, 0.2, 0.3], vec![2.0, -2.0, 0.0]])
            .unwrap();
        let full = gin_forward(&cfg, &p, &x, &adj, BnMode::Eval(&state)).unwrap();
        let single = Rc::new(Adjacency::new(vec![vec![]]).unwrap());
        for i in 0..3 {
            let xi = Tensor::matrix(1, 3, x.row(i).to_vec()).unwrap();
            let hi = gin_forward(&cfg, &p, &xi, &single, BnMode::Eval(&state)).unwrap();
            assert_eq!(hi.row(0), full.row(i));
        }
    }

    #[test]
    fn running_stats_move_towards_batch() {
        let cfg = GinConfig {
            n_blocks: 1,
            hidden: 1,
            ..Default::default()
        };
        let mut s = BnState::new(&cfg);
        s.update(&[(vec![2.0], vec![3.0])], 0.5);
        assert_eq!(s.mean[0], vec![1.0]);
        assert_eq!(s.var[0], vec![2.0]);
    }
}
