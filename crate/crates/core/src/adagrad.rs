use serde::{Deserialize, Serialize};

/// AdaGrad with a per-coordinate squared-gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGrad {
    pub lr: f64,
    pub eps: f64,
    accumulator: Vec<f64>,
}

impl AdaGrad {
    pub const DEFAULT_LR: f64 = 1e-2;
    pub const DEFAULT_EPS: f64 = 1e-8;

    pub fn new(params: usize, lr: f64) -> Self {
        AdaGrad {
            lr,
            eps: Self::DEFAULT_EPS,
            accumulator: vec![0.0; params],
        }
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.accumulator.len());
        assert_eq!(grad.len(), self.accumulator.len());
        for ((p, g), acc) in params.iter_mut().zip(grad).zip(&mut self.accumulator) {
            *acc += g * g;
            *p -= self.lr * g / (acc.sqrt() + self.eps);
        }
    }
}
