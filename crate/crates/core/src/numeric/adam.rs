use serde::{Deserialize, Serialize};

use super::mlp::{MlpGrads, MlpNet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// Zero moments for parameter blocks of the given lengths.
    pub fn new(block_lens: &[usize], config: AdamConfig) -> Self {
        Self {
            config,
            first: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_net(net: &MlpNet, config: AdamConfig) -> Self {
        let lens: Vec<usize> = net.blocks().iter().map(|(_, b)| b.len()).collect();
        Self::new(&lens, config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second
    }

    /// One update over named parameter blocks. Every gradient is checked for
    /// finiteness before any parameter is touched.
    pub fn step(&mut self, params: &mut [(String, &mut [f64])], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                context: "adam parameter blocks",
                expected: self.first.len(),
                actual: params.len().min(grads.len()),
            });
        }
        for (i, ((name, p), g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != p.len() {
                return Err(Error::Shape {
                    context: "adam block length",
                    expected: self.first[i].len(),
                    actual: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_net(&mut self, net: &mut MlpNet, grads: &MlpGrads, lr: f64) -> Result<()> {
        let g = grads.blocks();
        let mut p = net.blocks_mut();
        self.step(&mut p, &g, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(grad: f64, steps: usize, lr: f64) -> (f64, AdamState) {
        let mut w = vec![0.5];
        let mut adam = AdamState::new(&[1], AdamConfig::default());
        for _ in 0..steps {
            let mut params = [("w".to_string(), w.as_mut_slice())];
            adam.step(&mut params, &[&[grad]], lr).unwrap();
        }
        (w[0], adam)
    }

    #[test]
    fn single_step_matches_hand_computation() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1
        let (w, adam) = run(1.0, 1, 1e-3);
        let expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((w - expected).abs() < 1e-15, "{w} vs {expected}");
        assert_eq!(adam.step_count(), 1);
        assert!((adam.first_moment()[0][0] - 0.1).abs() < 1e-15);
        assert!((adam.second_moment()[0][0] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_descends() {
        let (w_pos, _) = run(2.0, 50, 1e-2);
        let (w_neg, _) = run(-2.0, 50, 1e-2);
        assert!(w_pos < 0.5);
        assert!(w_neg > 0.5);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut w = vec![0.5];
        let mut adam = AdamState::new(&[1], AdamConfig::default());
        {
            let mut params = [("w".to_string(), w.as_mut_slice())];
            adam.step(&mut params, &[&[1.0]], 1e-3).unwrap();
        }
        let after_first = w[0];
        let m1 = adam.first_moment()[0][0];
        let v1 = adam.second_moment()[0][0];
        let mut params = [("w".to_string(), w.as_mut_slice())];
        adam.step(&mut params, &[&[0.0]], 0.0).unwrap();
        assert_eq!(w[0], after_first);
        assert!(adam.first_moment()[0][0] < m1);
        assert!(adam.second_moment()[0][0] < v1);
    }

    #[test]
    fn zero_gradient_from_zero_moments_is_a_no_op() {
        let (w, _) = run(0.0, 10, 1e-2);
        assert_eq!(w, 0.5);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut w = vec![0.0, 0.0];
        let mut adam = AdamState::new(&[2], AdamConfig::default());
        let mut params = [("layer3.bias".to_string(), w.as_mut_slice())];
        let err = adam.step(&mut params, &[&[1.0, f64::NAN]], 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "layer3.bias"));
        assert_eq!(adam.step_count(), 0);
        assert_eq!(w, vec![0.0, 0.0]);
    }
}
