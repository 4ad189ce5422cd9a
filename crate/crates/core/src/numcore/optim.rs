use std::collections::BTreeMap;

use super::params::Params;
use super::tensor::Tensor;
use crate::error::Result;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter with a gradient entry.
    pub fn step(&mut self, params: &mut Params, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, g) in grads {
            let Some(p) = params.get_mut(name) else { continue };
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            for k in 0..g.len() {
                let gk = g.data()[k];
                let mk = &mut m.data_mut()[k];
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                let vk = &mut v.data_mut()[k];
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let mhat = m.data()[k] / c1;
                let vhat = v.data()[k] / c2;
                p.data_mut()[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            p.check_finite(name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Params::new();
        p.insert("w", Tensor::vector(vec![1.0, -1.0]));
        let mut g = BTreeMap::new();
        g.insert("w".to_string(), Tensor::vector(vec![0.5, -2.0]));
        let mut opt = Adam::new(0.1);
        opt.step(&mut p, &g).unwrap();
        let w = p.get("w").unwrap().data();
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Params::new();
        p.insert("w", Tensor::vector(vec![3.0]));
        let mut opt = Adam::new(0.05);
        for _ in 0..500 {
            let w = p.get("w").unwrap().data()[0];
            let mut g = BTreeMap::new();
            g.insert("w".to_string(), Tensor::vector(vec![2.0 * w]));
            opt.step(&mut p, &g).unwrap();
        }
        assert!(p.get("w").unwrap().data()[0].abs() < 1e-2);
    }
}
