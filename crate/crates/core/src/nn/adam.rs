use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one network, with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &Mlp<T>, cfg: AdamConfig) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .collect();
        Self {
            cfg,
            step: 0,
            first: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut Mlp<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        if grads.weights.len() != self.first.len() {
            return Err(Error::Shape("gradient layer count differs from optimizer state".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(self.cfg.beta1), T::lit(self.cfg.beta2));
        let correction1 = T::one() - b1.powi(t);
        let correction2 = T::one() - b2.powi(t);
        let lr = T::lit(lr);
        let eps = T::lit(self.cfg.epsilon);
        let one = T::one();
        let update = |params: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for (((p, &g), m), v) in params.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (l, layer) in model.layers_mut().iter_mut().enumerate() {
            let n = layer.weights.as_slice().len();
            if grads.weights[l].as_slice().len() != n || grads.biases[l].len() != layer.bias.len() {
                return Err(Error::Shape(format!("gradient shape differs from layer {l}")));
            }
            let (m_w, m_b) = self.first[l].split_at_mut(n);
            let (v_w, v_b) = self.second[l].split_at_mut(n);
            update(layer.weights.as_mut_slice(), grads.weights[l].as_slice(), m_w, v_w);
            update(&mut layer.bias, &grads.biases[l], m_b, v_b);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{Activation, Architecture};

    fn net() -> Mlp<f64> {
        Mlp::new(&Architecture::dense(&[3, 2], Activation::Identity), 9).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = net();
        let before = m.clone();
        let mut adam = Adam::new(&m, AdamConfig::default());
        let g = Gradients::zeros_like(&m);
        adam.step(&mut m, &g, 1e-3).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = net();
        let before: Vec<f64> = m.parameters().collect();
        let mut adam = Adam::new(&m, AdamConfig::default());
        let mut g = Gradients::zeros_like(&m);
        g.weights[0].set(0, 1, 3.7);
        g.biases[0][1] = -0.002;
        adam.step(&mut m, &g, 1e-4).unwrap();
        let after: Vec<f64> = m.parameters().collect();
        let dw = after[1] - before[1];
        assert!((dw + 1e-4).abs() < 1e-10, "{dw}");
        let db = after[7] - before[7];
        assert!((db - 1e-4).abs() < 1e-8, "{db}");
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let run = || {
            let mut m = net();
            let mut adam = Adam::new(&m, AdamConfig::default());
            for s in 0..5 {
                let mut g = Gradients::zeros_like(&m);
                for (i, w) in g.weights[0].as_mut_slice().iter_mut().enumerate() {
                    *w = ((s * 7 + i) as f64).sin();
                }
                adam.step(&mut m, &g, 1e-2).unwrap();
            }
            m.parameters().collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
