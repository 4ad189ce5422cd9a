use serde::{Deserialize, Serialize};

use super::layers::{init_layer_norm, init_linear, layer_norm_affine, linear};
use crate::dataio::AMINO_ACIDS;
use crate::error::{Error, Result};
use crate::numcore::{seeded_init, Bound, InitScheme, Params, Rng, Tape, Tensor, Var};

/// Token id used for padding; residues use their index in [`AMINO_ACIDS`].
pub const PAD_TOKEN: usize = 21;
pub const VOCAB_SIZE: usize = 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceEncoderConfig {
    pub d_model: usize,
    pub n_blocks: usize,
    /// (narrow, wide) convolution widths; both odd.
    pub conv_widths: (usize, usize),
    pub n_heads: usize,
    pub max_len: usize,
    /// Feed-forward hidden width as a multiple of `d_model`.
    pub ff_mult: usize,
}

impl Default for SequenceEncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_blocks: 2,
            conv_widths: (3, 15),
            n_heads: 4,
            max_len: 512,
            ff_mult: 2,
        }
    }
}

impl SequenceEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("sequence encoder: {m}")));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        let (a, b) = self.conv_widths;
        if a % 2 == 0 || b % 2 == 0 {
            return bad(format!("conv widths ({a}, {b}) must be odd"));
        }
        if self.n_blocks == 0 || self.max_len == 0 || self.ff_mult == 0 {
            return bad("n_blocks, max_len and ff_mult must be positive".into());
        }
        Ok(())
    }
}

/// Token ids of a sequence over [`AMINO_ACIDS`]; unknown letters map to `X`.
pub fn tokenize(seq: &str) -> Vec<usize> {
    let x = AMINO_ACIDS.len() - 1;
    seq.chars()
        .map(|c| AMINO_ACIDS.find(c.to_ascii_uppercase()).unwrap_or(x))
        .collect()
}

pub fn init_sequence_encoder(cfg: &SequenceEncoderConfig, rng: &mut Rng) -> Result<Params> {
    cfg.validate()?;
    let d = cfg.d_model;
    let (nw, ww) = cfg.conv_widths;
    let mut p = Params::new();
    p.insert("embed", seeded_init(&[VOCAB_SIZE, d], InitScheme::UniformScaled, rng)?);
    for b in 0..cfg.n_blocks {
        let pre = format!("b{b}.");
        init_linear(&mut p, &format!("{pre}conv_narrow"), nw * d, d, rng)?;
        init_linear(&mut p, &format!("{pre}conv_wide"), ww * d, d, rng)?;
        init_layer_norm(&mut p, &format!("{pre}ln_conv"), d);
        for m in ["q", "v", "o"] {
            init_linear(&mut p, &format!("{pre}attn_{m}"), d, d, rng)?;
        }
        // Keys carry no bias.
        p.insert(
            format!("{pre}attn_k.w"),
            seeded_init(&[d, d], InitScheme::UniformScaled, rng)?,
        );
        init_layer_norm(&mut p, &format!("{pre}ln_attn"), d);
        init_linear(&mut p, &format!("{pre}ff1"), d, d * cfg.ff_mult, rng)?;
        init_linear(&mut p, &format!("{pre}ff2"), d * cfg.ff_mult, d, rng)?;
        init_layer_norm(&mut p, &format!("{pre}ln_ff"), d);
    }
    Ok(p)
}

/// Sinusoidal position table for `len` positions.
fn positions(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = pos as f64 * rate;
            data[pos * d + i] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    Tensor::matrix(len, d, data).expect("position table")
}

/// Tape handles for one encoded sequence.
pub struct SequenceVars {
    /// L×d residue states.
    pub states: Var,
    /// 1×d masked mean of the states.
    pub pooled: Var,
    /// `[block][head]` L×L attention maps.
    pub attention: Vec<Vec<Var>>,
}

fn check_inputs(cfg: &SequenceEncoderConfig, tokens: &[usize], mask: &[bool]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Param("empty token sequence".into()));
    }
    if tokens.len() > cfg.max_len {
        return Err(Error::Param(format!(
            "sequence length {} exceeds max_len {} (no truncation is applied)",
            tokens.len(),
            cfg.max_len
        )));
    }
    if mask.len() != tokens.len() {
        return Err(Error::Shape(format!(
            "mask length {} vs {} tokens",
            mask.len(),
            tokens.len()
        )));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t >= VOCAB_SIZE) {
        return Err(Error::Param(format!("token id {t} outside vocabulary")));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Param("every position is masked".into()));
    }
    Ok(())
}

/// Records the encoder on `tape`. `params` must be scoped to the encoder.
///
/// Each block: narrow and wide convolutions (summed), multi-head
/// self-attention, then a feed-forward layer, each wrapped in a skip
/// connection followed by layer normalization.
pub fn encode_sequence_on_tape(
    tape: &mut Tape,
    cfg: &SequenceEncoderConfig,
    params: &Bound,
    tokens: &[usize],
    mask: &[bool],
) -> Result<SequenceVars> {
    cfg.validate()?;
    check_inputs(cfg, tokens, mask)?;
    let len = tokens.len();
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let (nw, ww) = cfg.conv_widths;

    let row_mask: Vec<f64> = mask
        .iter()
        .flat_map(|&m| std::iter::repeat_n(if m { 1.0 } else { 0.0 }, d))
        .collect();
    let row_mask = tape.leaf(Tensor::matrix(len, d, row_mask)?)?;
    let pos = tape.leaf(positions(len, d))?;

    let emb = tape.gather_rows(params.get("embed")?, tokens)?;
    let mut x = tape.add(emb, pos)?;
    let mut attention = Vec::with_capacity(cfg.n_blocks);

    for b in 0..cfg.n_blocks {
        let p = params.scoped(&format!("b{b}."));

        let xm = tape.mul(x, row_mask)?;
        let un = tape.unfold(xm, nw)?;
        let cn = linear(tape, &p, "conv_narrow", un)?;
        let cn = tape.gelu(cn)?;
        let uw = tape.unfold(xm, ww)?;
        let cw = linear(tape, &p, "conv_wide", uw)?;
        let cw = tape.gelu(cw)?;
        let c = tape.add(cn, cw)?;
        let r = tape.add(x, c)?;
        x = layer_norm_affine(tape, &p, "ln_conv", r)?;

        let q = linear(tape, &p, "attn_q", x)?;
        let k = tape.matmul(x, p.get("attn_k.w")?)?;
        let v = linear(tape, &p, "attn_v", x)?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        let mut maps = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let s = tape.matmul_nt(qh, kh)?;
            let s = tape.scale(s, 1.0 / (dh as f64).sqrt())?;
            let a = tape.softmax_rows(s, Some(mask))?;
            heads.push(tape.matmul(a, vh)?);
            maps.push(a);
        }
        attention.push(maps);
        let o = tape.concat_cols(&heads)?;
        let o = linear(tape, &p, "attn_o", o)?;
        let r = tape.add(x, o)?;
        x = layer_norm_affine(tape, &p, "ln_attn", r)?;

        let f = linear(tape, &p, "ff1", x)?;
        let f = tape.gelu(f)?;
        let f = linear(tape, &p, "ff2", f)?;
        let r = tape.add(x, f)?;
        x = layer_norm_affine(tape, &p, "ln_ff", r)?;
    }

    let n_valid = mask.iter().filter(|&&m| m).count() as f64;
    let weights: Vec<f64> = mask.iter().map(|&m| if m { 1.0 / n_valid } else { 0.0 }).collect();
    let pooled = tape.weighted_row_sum(x, &weights)?;
    Ok(SequenceVars {
        states: x,
        pooled,
        attention,
    })
}

/// Plain-value output of [`encode_sequence`].
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEncoding {
    pub states: Tensor,
    pub pooled: Tensor,
    pub attention: Vec<Vec<Tensor>>,
}

pub fn encode_sequence(
    cfg: &SequenceEncoderConfig,
    params: &Params,
    tokens: &[usize],
    mask: &[bool],
) -> Result<SequenceEncoding> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape)?;
    let vars = encode_sequence_on_tape(&mut tape, cfg, &bound, tokens, mask)?;
    let d = cfg.d_model;
    Ok(SequenceEncoding {
        states: tape.value(vars.states).clone(),
        pooled: tape.value(vars.pooled).clone().reshape(vec![d])?,
        attention: vars
            .attention
            .iter()
            .map(|hs| hs.iter().map(|&a| tape.value(a).clone()).collect())
            .collect(),
    })
}
