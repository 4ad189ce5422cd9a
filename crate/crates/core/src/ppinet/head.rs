use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{exact_sum, seeded_init, sigmoid, Bound, InitScheme, Params, Rng, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// FC applied to `g_i ⊙ g_j`.
    #[default]
    Hadamard,
    /// `½ (FC([g_i ∥ g_j]) + FC([g_j ∥ g_i]))`.
    Concat,
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hadamard => "hadamard",
            Self::Concat => "concat",
        })
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(Self::Hadamard),
            "concat" => Ok(Self::Concat),
            other => Err(Error::Config(format!(
                "unknown pair combine mode `{other}` (expected hadamard or concat)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairHeadConfig {
    pub combine: Combine,
}

pub fn init_pair_head(cfg: &PairHeadConfig, width: usize, n_types: usize, rng: &mut Rng) -> Result<Params> {
    if n_types == 0 {
        return Err(Error::Config("pair head needs at least one interaction type".into()));
    }
    let fan_in = match cfg.combine {
        Combine::Hadamard => width,
        Combine::Concat => 2 * width,
    };
    let mut p = Params::new();
    p.insert("fc.w", seeded_init(&[fan_in, n_types], InitScheme::UniformScaled, rng)?);
    p.insert("fc.b", Tensor::zeros(&[n_types]));
    Ok(p)
}

/// `P×T` logits for node pairs of the `N×h` embeddings `g`.
pub fn pair_logits_on_tape(
    tape: &mut Tape,
    cfg: &PairHeadConfig,
    params: &Bound,
    g: Var,
    pairs: &[(usize, usize)],
) -> Result<Var> {
    let (w, b) = (params.get("fc.w")?, params.get("fc.b")?);
    let left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let gi = tape.gather_rows(g, &left)?;
    let gj = tape.gather_rows(g, &right)?;
    match cfg.combine {
        Combine::Hadamard => {
            let x = tape.mul(gi, gj)?;
            tape.linear(x, w, b)
        }
        Combine::Concat => {
            let ij = tape.concat_cols(&[gi, gj])?;
            let ji = tape.concat_cols(&[gj, gi])?;
            let a = tape.linear(ij, w, b)?;
            let c = tape.linear(ji, w, b)?;
            let s = tape.add(a, c)?;
            tape.scale(s, 0.5)
        }
    }
}

/// Logits for one pair of node embeddings.
pub fn pair_logits(cfg: &PairHeadConfig, params: &Params, g_i: &[f64], g_j: &[f64]) -> Result<Vec<f64>> {
    if g_i.len() != g_j.len() {
        return Err(Error::Shape(format!(
            "pair embeddings of widths {} and {}",
            g_i.len(),
            g_j.len()
        )));
    }
    let mut tape = Tape::new();
    let b = params.bind(&mut tape)?;
    let g = tape.leaf(Tensor::from_rows(&[g_i.to_vec(), g_j.to_vec()])?)?;
    let out = pair_logits_on_tape(&mut tape, cfg, &b, g, &[(0, 1)])?;
    Ok(tape.value(out).data().to_vec())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

/// `softplus(z) - y z`, evaluated without overflow.
fn bce_term(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if y { z } else { 0.0 }
}

/// Multi-label binary cross-entropy of `logits` (`m×T`) against `labels`,
/// with its gradient.
pub fn bce_with_grad(
    logits: &Tensor,
    labels: &[Vec<bool>],
    reduction: Reduction,
) -> Result<(f64, Tensor)> {
    let (m, t) = logits.dims2()?;
    if labels.len() != m || labels.iter().any(|r| r.len() != t) {
        return Err(Error::Shape(format!("labels do not match {m}×{t} logits")));
    }
    let scale = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / (m * t) as f64,
    };
    let mut terms = Vec::with_capacity(m * t);
    let mut grad = Vec::with_capacity(m * t);
    for (i, row) in labels.iter().enumerate() {
        for (k, &y) in row.iter().enumerate() {
            let z = logits.get2(i, k);
            terms.push(bce_term(z, y));
            grad.push((sigmoid(z) - if y { 1.0 } else { 0.0 }) * scale);
        }
    }
    Ok((exact_sum(terms) * scale, Tensor::matrix(m, t, grad)?))
}

pub fn bce_multilabel(logits: &Tensor, labels: &[Vec<bool>], reduction: Reduction) -> Result<f64> {
    Ok(bce_with_grad(logits, labels, reduction)?.0)
}

pub fn bce_on_tape(
    tape: &mut Tape,
    logits: Var,
    labels: &[Vec<bool>],
    reduction: Reduction,
) -> Result<Var> {
    let (v, g) = bce_with_grad(tape.value(logits), labels, reduction)?;
    tape.fused_scalar(&[logits], v, vec![g])
}
