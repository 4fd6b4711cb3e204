use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps.is_finite()
            && self.eps > 0.0
            && self.weight_decay.is_finite()
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|(_, p)| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one update. `grads` is indexed like the store. Nothing is
    /// modified when any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Matrix]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.m.len()
            )));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.shape() != params.get(id).shape() {
                return Err(Error::Config(format!(
                    "gradient shape {:?} does not match parameter `{}` {:?}",
                    g.shape(),
                    params.name(id),
                    params.get(id).shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(params.name(id).to_owned()));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let p = params.get_mut(id).as_mut_slice();
            let m = self.m[k].as_mut_slice();
            let v = self.v[k].as_mut_slice();
            for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(grads[k].as_slice()) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
                *p -= c.lr * (update + c.weight_decay * *p);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Matrix::scalar(x));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = store(1.5);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &[Matrix::scalar(0.0)]).unwrap();
        assert_eq!(p.get(p.ids().next().unwrap()).item(), 1.5);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn descends_on_square() {
        let mut p = store(1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let mut adam = Adam::new(cfg, &p);
        let id = p.ids().next().unwrap();
        let g = 2.0 * p.get(id).item();
        adam.step(&mut p, &[Matrix::scalar(g)]).unwrap();
        assert!(p.get(id).item() < 1.0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = store(0.7);
            let mut adam = Adam::new(AdamConfig::default(), &p);
            let id = p.ids().next().unwrap();
            for _ in 0..50 {
                let g = 2.0 * p.get(id).item() + 0.1;
                adam.step(&mut p, &[Matrix::scalar(g)]).unwrap();
            }
            p.get(id).item().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = store(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let err = adam.step(&mut p, &[Matrix::scalar(f64::NAN)]).unwrap_err();
        assert!(matches!(&err, Error::NonFiniteGradient(name) if name == "x"));
        assert_eq!(adam.steps(), 0);
    }
}
