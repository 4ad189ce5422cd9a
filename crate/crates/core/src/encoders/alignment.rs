//! Projection heads and the two sequence–annotation alignment losses: the
//! symmetric InfoNCE loss (SAC) and the focal matching loss (SAM).

use serde::{Deserialize, Serialize};

use super::layers::{init_linear, linear};
use crate::error::{Error, Result};
use crate::numcore::{exact_sum, lse_iter, Bound, Params, Rng, Tape, Tensor, Var};

/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` inside the SAM loss.
pub const P_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentHeads {
    /// Width of the shared projection space.
    pub proj_dim: usize,
    /// Hidden width of the matching perceptron.
    pub match_hidden: usize,
    pub tau: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for AlignmentHeads {
    fn default() -> Self {
        Self {
            proj_dim: 64,
            match_hidden: 64,
            tau: 0.07,
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

impl AlignmentHeads {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_focal(self.alpha, self.gamma)?;
        if self.proj_dim == 0 || self.match_hidden == 0 {
            return Err(Error::Config("projection widths must be positive".into()));
        }
        Ok(())
    }

    /// `seq_proj`, `ann_proj` (`d_model → proj_dim`) and the two match layers.
    pub fn init(&self, d_model: usize, rng: &mut Rng) -> Result<Params> {
        self.validate()?;
        let mut p = Params::new();
        init_linear(&mut p, "seq_proj", d_model, self.proj_dim, rng)?;
        init_linear(&mut p, "ann_proj", d_model, self.proj_dim, rng)?;
        init_linear(&mut p, "match1", 2 * self.proj_dim, self.match_hidden, rng)?;
        init_linear(&mut p, "match2", self.match_hidden, 1, rng)?;
        Ok(p)
    }

    /// L2-normalized projection of pooled embeddings through `seq_proj` or
    /// `ann_proj`.
    pub fn project(&self, tape: &mut Tape, p: &Bound, head: &str, x: Var) -> Result<Var> {
        let z = linear(tape, p, head, x)?;
        tape.l2_normalize_rows(z)
    }

    /// Matching probability for each `(seq, ann)` pair, as a column.
    pub fn match_probabilities(
        &self,
        tape: &mut Tape,
        p: &Bound,
        z_seq: Var,
        z_ann: Var,
        pairs: &[SamPair],
    ) -> Result<Var> {
        let s_idx: Vec<usize> = pairs.iter().map(|q| q.seq).collect();
        let a_idx: Vec<usize> = pairs.iter().map(|q| q.ann).collect();
        let zs = tape.gather_rows(z_seq, &s_idx)?;
        let za = tape.gather_rows(z_ann, &a_idx)?;
        let h = tape.concat_cols(&[zs, za])?;
        let h = linear(tape, p, "match1", h)?;
        let h = tape.gelu(h)?;
        let logit = linear(tape, p, "match2", h)?;
        tape.sigmoid(logit)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Param(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn check_focal(alpha: f64, gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Param(format!("focal alpha must lie in (0, 1), got {alpha}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Param(format!("focal gamma must be non-negative, got {gamma}")));
    }
    Ok(())
}

/// SAC value and gradient with respect to the `N×N` logits `z_s z_aᵀ / τ`.
pub fn sac_from_logits(s: &Tensor) -> Result<(f64, Tensor)> {
    let (n, m) = s.dims2()?;
    if n != m || n == 0 {
        return Err(Error::Shape(format!("SAC logits must be square and non-empty, got {n}×{m}")));
    }
    let nf = n as f64;
    let row_lse: Vec<f64> = (0..n).map(|i| lse_iter(s.row(i).iter().copied())).collect();
    let col_lse: Vec<f64> = (0..n)
        .map(|j| lse_iter((0..n).map(|i| s.get2(i, j))))
        .collect();
    let mut terms = Vec::with_capacity(2 * n);
    for i in 0..n {
        terms.push(row_lse[i] - s.get2(i, i));
        terms.push(col_lse[i] - s.get2(i, i));
    }
    let value = exact_sum(terms) / (2.0 * nf);
    let mut grad = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = s.get2(i, j);
            let mut g = ((v - row_lse[i]).exp() + (v - col_lse[j]).exp()) / (2.0 * nf);
            if i == j {
                g -= 1.0 / nf;
            }
            grad[i * n + j] = g;
        }
    }
    Ok((value, Tensor::matrix(n, n, grad)?))
}

pub fn sac_loss_on_tape(tape: &mut Tape, z_seq: Var, z_ann: Var, tau: f64) -> Result<Var> {
    check_tau(tau)?;
    let (ns, ds) = tape.value(z_seq).dims2()?;
    let (na, da) = tape.value(z_ann).dims2()?;
    if ns != na || ds != da {
        return Err(Error::Shape(format!("SAC inputs {ns}×{ds} and {na}×{da}")));
    }
    let s = tape.matmul_nt(z_seq, z_ann)?;
    let s = tape.scale(s, 1.0 / tau)?;
    let (value, grad) = sac_from_logits(tape.value(s))?;
    tape.fused_scalar(&[s], value, vec![grad])
}

/// Symmetric InfoNCE over matching rows of two `N×d` L2-normalized batches.
pub fn sac_loss(z_seq: &Tensor, z_ann: &Tensor, tau: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.leaf(z_seq.clone())?;
    let b = tape.leaf(z_ann.clone())?;
    let v = sac_loss_on_tape(&mut tape, a, b, tau)?;
    Ok(tape.scalar(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SamPair {
    pub seq: usize,
    pub ann: usize,
    /// 1 for a true sequence–annotation pair, 0 for a mismatch.
    pub label: u8,
}

/// All `n` matching pairs followed by one uniformly drawn mismatch per
/// sequence.
pub fn sam_pairs(n: usize, rng: &mut Rng) -> Result<Vec<SamPair>> {
    if n < 2 {
        return Err(Error::Param(format!("matching needs at least 2 samples, got {n}")));
    }
    let mut pairs: Vec<SamPair> = (0..n).map(|i| SamPair { seq: i, ann: i, label: 1 }).collect();
    for i in 0..n {
        let mut j = rng.below(n - 1);
        if j >= i {
            j += 1;
        }
        pairs.push(SamPair { seq: i, ann: j, label: 0 });
    }
    Ok(pairs)
}

/// Focal SAM value and its derivative with respect to each probability.
/// Clamped probabilities get a zero derivative.
pub fn sam_loss_with_grad(
    pairs: &[SamPair],
    probs: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_focal(alpha, gamma)?;
    if pairs.is_empty() || pairs.len() != probs.len() {
        return Err(Error::Shape(format!(
            "{} pairs with {} probabilities",
            pairs.len(),
            probs.len()
        )));
    }
    let m = pairs.len() as f64;
    let mut terms = Vec::with_capacity(pairs.len());
    let mut grad = Vec::with_capacity(pairs.len());
    for (q, &raw) in pairs.iter().zip(probs) {
        if !raw.is_finite() {
            return Err(Error::NonFinite("matching probability".into()));
        }
        let p = raw.clamp(P_CLAMP, 1.0 - P_CLAMP);
        let inside = p == raw;
        let (t, dt) = if q.label == 1 {
            let w = (1.0 - p).powf(gamma);
            let dw = if gamma == 0.0 { 0.0 } else { -gamma * (1.0 - p).powf(gamma - 1.0) };
            (-alpha * w * p.ln(), -alpha * (dw * p.ln() + w / p))
        } else {
            let w = p.powf(gamma);
            let dw = if gamma == 0.0 { 0.0 } else { gamma * p.powf(gamma - 1.0) };
            let l = (1.0 - p).ln();
            (-(1.0 - alpha) * w * l, -(1.0 - alpha) * (dw * l - w / (1.0 - p)))
        };
        terms.push(t);
        grad.push(if inside { dt / m } else { 0.0 });
    }
    Ok((exact_sum(terms) / m, grad))
}

pub fn sam_loss(pairs: &[SamPair], probs: &[f64], alpha: f64, gamma: f64) -> Result<f64> {
    Ok(sam_loss_with_grad(pairs, probs, alpha, gamma)?.0)
}

/// `probs` is the `M×1` column from [`AlignmentHeads::match_probabilities`].
pub fn sam_loss_on_tape(
    tape: &mut Tape,
    pairs: &[SamPair],
    probs: Var,
    alpha: f64,
    gamma: f64,
) -> Result<Var> {
    let pv = tape.value(probs).clone();
    let (value, grad) = sam_loss_with_grad(pairs, pv.data(), alpha, gamma)?;
    let g = Tensor::new(pv.shape().to_vec(), grad)?;
    tape.fused_scalar(&[probs], value, vec![g])
}
