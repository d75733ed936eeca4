//! Plain SGD and bias-corrected Adam over a [`ParamStore`].

use alloc::vec::Vec;

use crate::autodiff::ParamStore;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl OptimizerState {
    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::adam(), lr)
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        OptimizerState { kind, lr, step: 0, first_moment: Vec::new(), second_moment: Vec::new() }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the store's accumulated gradients. Gradients
    /// are left in place.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let (values, grads) = store.split_mut();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in values.iter_mut().zip(grads) {
                    p.add_scaled(g, -self.lr);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first_moment.len() != values.len() {
                    self.first_moment = values.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
                    self.second_moment = self.first_moment.clone();
                }
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                for (((p, g), m), v) in
                    values.iter_mut().zip(grads).zip(&mut self.first_moment).zip(&mut self.second_moment)
                {
                    let iter = p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice());
                    for (((p, &g), m), v) in iter {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p -= self.lr * m_hat / (libm::sqrt(v_hat) + eps);
                    }
                }
            }
        }
    }
}
