use serde::{Deserialize, Serialize};

use super::{NeuralError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.00025, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self { config, step: 0, m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![self.m.len()],
                got: vec![params.len(), grads.len()],
            });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let one = T::one();
        let step_size = T::from_f64(c.lr / (1.0 - c.beta1.powi(t)));
        let v_corr = T::from_f64(1.0 / (1.0 - c.beta2.powi(t)));
        let eps = T::from_f64(c.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - step_size * *m / ((*v * v_corr).sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = AdamState::<f64>::new(3, AdamConfig::default());
        let mut p = vec![0.5, -1.0, 2.0];
        for _ in 0..5 {
            s.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::<f64>::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.00025).abs() < 1e-11);
        assert!(s.step(&mut p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fits_a_quadratic() {
        let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
        let mut s = AdamState::<f64>::new(2, cfg);
        let mut p = vec![3.0, -2.0];
        let loss = |p: &[f64]| (p[0] - 1.0).powi(2) + (p[1] + 0.5).powi(2);
        let mut last = loss(&p);
        for _ in 0..100 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            s.step(&mut p, &g).unwrap();
            let l = loss(&p);
            assert!(l < last);
            last = l;
        }
    }
}
