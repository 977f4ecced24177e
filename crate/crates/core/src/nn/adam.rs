use std::collections::BTreeMap;

use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are keyed by parameter
/// name and created lazily on the first step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    /// Applies update number `t` (1-based) using the gradients stored in `params`.
    pub fn step(&mut self, params: &mut ParamSet, t: u64) -> Result<()> {
        if t == 0 {
            return Err(Error::Parameter("adam step index must be >= 1".into()));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powf(t as f64);
        let c2 = 1.0 - beta2.powf(t as f64);
        for (name, p) in params.iter_mut() {
            let n = p.value.len();
            let m = self.first.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
            let v = self.second.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
            if m.len() != n {
                return Err(Error::Shape(format!("adam state for {name:?} has the wrong size")));
            }
            for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
            p.value.check_finite("adam")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn single(w: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::from_vec(&[1], vec![w]).unwrap()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = single(0.7);
        let mut opt = Adam::new(AdamConfig::default());
        for t in 1..=10 {
            opt.step(&mut p, t).unwrap();
        }
        assert_eq!(p.value("w").unwrap().data()[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -5.0] {
            let mut p = single(1.0);
            p.grad_mut("w").unwrap().data_mut()[0] = g;
            let mut opt = Adam::new(AdamConfig { lr: 0.01, ..Default::default() });
            opt.step(&mut p, 1).unwrap();
            let delta = p.value("w").unwrap().data()[0] - 1.0;
            assert!((delta + 0.01 * f64::signum(g)).abs() < 1e-8, "{delta}");
        }
    }

    #[test]
    fn minimises_a_quadratic_bowl() {
        let mut p = single(1.0);
        let mut opt = Adam::new(AdamConfig { lr: 0.01, ..Default::default() });
        for t in 1..=2000 {
            let w = p.value("w").unwrap().data()[0];
            p.grad_mut("w").unwrap().data_mut()[0] = 2.0 * w;
            opt.step(&mut p, t).unwrap();
        }
        assert!(p.value("w").unwrap().data()[0].abs() < 1e-3);
    }

    #[test]
    fn step_zero_rejected() {
        let mut p = single(1.0);
        assert!(matches!(Adam::new(AdamConfig::default()).step(&mut p, 0), Err(Error::Parameter(_))));
    }
}
