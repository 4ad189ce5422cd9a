use crate::error::Result;
use crate::numcore::{seeded_init, Bound, InitScheme, Params, Rng, Tape, Tensor, Var};

/// Adds `{name}.w` (`fan_in×fan_out`) and a zero `{name}.b`.
pub(crate) fn init_linear(
    p: &mut Params,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Result<()> {
    p.insert(format!("{name}.w"), seeded_init(&[fan_in, fan_out], InitScheme::UniformScaled, rng)?);
    p.insert(format!("{name}.b"), Tensor::zeros(&[fan_out]));
    Ok(())
}

pub(crate) fn init_layer_norm(p: &mut Params, name: &str, width: usize) {
    p.insert(format!("{name}.g"), Tensor::full(&[width], 1.0));
    p.insert(format!("{name}.b"), Tensor::zeros(&[width]));
}

pub(crate) fn linear(tape: &mut Tape, p: &Bound, name: &str, x: Var) -> Result<Var> {
    let w = p.get(&format!("{name}.w"))?;
    let b = p.get(&format!("{name}.b"))?;
    tape.linear(x, w, b)
}

pub(crate) fn layer_norm_affine(tape: &mut Tape, p: &Bound, name: &str, x: Var) -> Result<Var> {
    let g = p.get(&format!("{name}.g"))?;
    let b = p.get(&format!("{name}.b"))?;
    let y = tape.layer_norm(x)?;
    let y = tape.mul_row(y, g)?;
    tape.add_row(y, b)
}
