use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{shape_err, Result};

/// Adam optimizer state for one parameter bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state with zeroed moments shaped like `params`.
    pub fn new<P: ParamSet + ?Sized>(params: &P, learning_rate: f64) -> Self {
        let shapes = params.shape_signature();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Default hyperparameters: lr 0.001, β₁ 0.9, β₂ 0.999, ε 1e−8.
    pub fn with_defaults<P: ParamSet + ?Sized>(params: &P) -> Self {
        Self::new(params, 0.001)
    }

    /// One bias-corrected Adam update of `params` with `grads`.
    pub fn step<P: ParamSet + ?Sized, G: ParamSet + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &G,
    ) -> Result<()> {
        let shapes = params.shape_signature();
        let moment_shapes: Vec<usize> = self.first.iter().map(Vec::len).collect();
        if shapes != grads.shape_signature() || shapes != moment_shapes {
            return shape_err("adam: parameter, gradient and moment shapes disagree");
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let grad_slices = grads.param_slices();
        for (((p, g), m), v) in params
            .param_slices_mut()
            .into_iter()
            .zip(grad_slices)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Flat(Vec<f64>);

    impl ParamSet for Flat {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Flat(vec![0.3, -1.2, 4.0]);
        let before = p.0.clone();
        let mut adam = AdamState::with_defaults(&p);
        for _ in 0..10 {
            adam.step(&mut p, &Flat(vec![0.0; 3])).unwrap();
        }
        assert_eq!(p.0, before);
        assert_eq!(adam.step, 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Flat(vec![0.0]);
        let mut adam = AdamState::with_defaults(&p);
        adam.step(&mut p, &Flat(vec![1.0])).unwrap();
        assert!((p.0[0] + 0.001).abs() < 1e-10, "{}", p.0[0]);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut p = Flat(vec![1.0]);
        let mut adam = AdamState::with_defaults(&p);
        let mut prev = p.0[0];
        for _ in 0..100 {
            adam.step(&mut p, &Flat(vec![-0.5])).unwrap();
            assert!(p.0[0] > prev);
            prev = p.0[0];
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Flat(vec![0.0; 2]);
        let mut adam = AdamState::with_defaults(&p);
        assert!(adam.step(&mut p, &Flat(vec![0.0; 3])).is_err());
    }
}
