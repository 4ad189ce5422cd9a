use serde::{Deserialize, Serialize};

use super::layers::{init_linear, linear};
use crate::error::{Error, Result};
use crate::numcore::{Bound, Params, Rng, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationEncoderConfig {
    pub hidden: usize,
    pub d_model: usize,
}

impl Default for AnnotationEncoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            d_model: 64,
        }
    }
}

/// Two-layer perceptron from `n_keywords` indicators to `d_model`.
pub fn init_annotation_encoder(
    cfg: &AnnotationEncoderConfig,
    n_keywords: usize,
    rng: &mut Rng,
) -> Result<Params> {
    if n_keywords == 0 || cfg.hidden == 0 || cfg.d_model == 0 {
        return Err(Error::Config("annotation encoder widths must be positive".into()));
    }
    let mut p = Params::new();
    init_linear(&mut p, "l1", n_keywords, cfg.hidden, rng)?;
    init_linear(&mut p, "l2", cfg.hidden, cfg.d_model, rng)?;
    Ok(p)
}

pub fn encode_annotations_on_tape(tape: &mut Tape, params: &Bound, keywords: Var) -> Result<Var> {
    let width = tape.value(params.get("l1.w")?).dims2()?.0;
    let (_, k) = tape.value(keywords).dims2()?;
    if k != width {
        return Err(Error::Shape(format!(
            "keyword vectors have width {k}, the encoder expects {width}"
        )));
    }
    let h = linear(tape, params, "l1", keywords)?;
    let h = tape.gelu(h)?;
    linear(tape, params, "l2", h)
}

/// Embeds an `N×K` binary keyword matrix.
pub fn encode_annotations(params: &Params, keyword_vectors: &Tensor) -> Result<Tensor> {
    if let Some(v) = keyword_vectors.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Param(format!("keyword vectors must be binary, found {v}")));
    }
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape)?;
    let x = tape.leaf(keyword_vectors.clone())?;
    let y = encode_annotations_on_tape(&mut tape, &bound, x)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_identical_rows() {
        let p = init_annotation_encoder(&Default::default(), 5, &mut Rng::new(4)).unwrap();
        let x = Tensor::from_rows(&[
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0; 5],
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let y = encode_annotations(&p, &x).unwrap();
        assert_eq!(y.shape(), &[3, 64]);
        assert_eq!(y.row(0), y.row(2));
    }

    #[test]
    fn zero_vector_maps_to_bias_image() {
        let mut p = init_annotation_encoder(&Default::default(), 3, &mut Rng::new(4)).unwrap();
        p.insert("l2.b", Tensor::full(&[64], 0.5));
        let y = encode_annotations(&p, &Tensor::zeros(&[1, 3])).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn width_mismatch_and_non_binary() {
        let p = init_annotation_encoder(&Default::default(), 3, &mut Rng::new(4)).unwrap();
        assert!(matches!(
            encode_annotations(&p, &Tensor::zeros(&[2, 4])),
            Err(Error::Shape(_))
        ));
        assert!(encode_annotations(&p, &Tensor::full(&[1, 3], 0.5)).is_err());
    }
}
