use std::collections::BTreeMap;

use super::rng::Rng;
use super::tape::{Grads, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named trainable tensors, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    tensors: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Param(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Moves every tensor of `other` in, under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: Params) {
        for (k, v) in other.tensors {
            self.tensors.insert(format!("{prefix}{k}"), v);
        }
    }

    /// Tensors whose name starts with `prefix`, with the prefix removed.
    pub fn subset(&self, prefix: &str) -> Params {
        Params {
            tensors: self
                .tensors
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Records every tensor on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<Bound> {
        let mut vars = BTreeMap::new();
        for (k, v) in &self.tensors {
            vars.insert(k.clone(), tape.leaf(v.clone())?);
        }
        Ok(Bound { vars })
    }
}

impl FromIterator<(String, Tensor)> for Params {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Params {
            tensors: iter.into_iter().collect(),
        }
    }
}

/// Tape handles of a bound [`Params`].
#[derive(Clone, Debug, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Param(format!("missing parameter `{name}`")))
    }

    /// Handles under `prefix`, with the prefix removed.
    pub fn scoped(&self, prefix: &str) -> Bound {
        Bound {
            vars: self
                .vars
                .iter()
                .filter_map(|(k, &v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v)))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    /// Gradient for every bound name.
    pub fn gradients(&self, grads: &Grads) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(k, &v)| (k.clone(), grads.wrt(v)))
            .collect()
    }
}

/// Initialization schemes for [`seeded_init`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// `U(-s, s)` with `s = sqrt(6 / (fan_in + fan_out))`.
    UniformScaled,
    Zeros,
    Ones,
}

/// Fan-in is the product of all but the last dimension, fan-out the last
/// dimension; a vector of length n uses n for both.
pub fn seeded_init(shape: &[usize], scheme: InitScheme, rng: &mut Rng) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Shape(format!("invalid init shape {shape:?}")));
    }
    Ok(match scheme {
        InitScheme::Zeros => Tensor::zeros(shape),
        InitScheme::Ones => Tensor::full(shape, 1.0),
        InitScheme::UniformScaled => {
            let (fan_in, fan_out) = match shape {
                [n] => (*n, *n),
                _ => (
                    shape[..shape.len() - 1].iter().product(),
                    shape[shape.len() - 1],
                ),
            };
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.uniform_range(-s, s)).collect();
            Tensor::new(shape.to_vec(), data)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_examples() {
        let mut rng = Rng::new(0);
        let z = seeded_init(&[2, 2], InitScheme::Zeros, &mut rng).unwrap();
        assert_eq!(z.data(), &[0.0; 4]);
        let a = seeded_init(&[3, 5], InitScheme::UniformScaled, &mut Rng::new(9)).unwrap();
        let b = seeded_init(&[3, 5], InitScheme::UniformScaled, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(seeded_init(&[], InitScheme::Ones, &mut rng).is_err());
    }

    #[test]
    fn uniform_scaled_bound() {
        let t = seeded_init(&[4, 8], InitScheme::UniformScaled, &mut Rng::new(42)).unwrap();
        let s = (6.0f64 / 12.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= s));
        assert!(t.max_abs() > 0.5 * s);
    }

    #[test]
    fn subset_and_prefix() {
        let mut p = Params::new();
        let mut q = Params::new();
        q.insert("w", Tensor::scalar(1.0));
        p.extend_prefixed("enc.", q);
        assert!(p.contains("enc.w"));
        assert_eq!(p.subset("enc.").get("w").unwrap().data(), &[1.0]);
        assert!(p.get("w").is_err());
    }
}
