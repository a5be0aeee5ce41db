use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for every parameter of a store, in store order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros(p.value().shape())).collect();
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update of every trainable parameter from its gradient accumulator.
pub fn adam_step(store: &mut ParamStore, opt: &mut OptimizerState, lr: f64) {
    opt.t += 1;
    let t = opt.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (i, p) in store.iter_mut().enumerate() {
        if !p.trainable {
            continue;
        }
        let (theta, grad) = p.value_and_grad_mut();
        let m = opt.m[i].data_mut();
        let v = opt.v[i].data_mut();
        for j in 0..theta.len() {
            let g = grad[j];
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}

/// Scales every gradient by `clip_norm / g` when the global norm `g` exceeds
/// `clip_norm`; returns the factor applied.
pub fn clip_gradients(store: &mut ParamStore, clip_norm: f64) -> f64 {
    let g = store.grad_norm();
    if g <= clip_norm {
        return 1.0;
    }
    let factor = clip_norm / g;
    for p in store.iter_mut().filter(|p| p.trainable) {
        for x in p.grad_mut() {
            *x *= factor;
        }
    }
    factor
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[f64], grads: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.register("w", Tensor::row(values), true).unwrap();
        s.get_mut(id).grad_mut().copy_from_slice(grads);
        s
    }

    #[test]
    fn clip_examples() {
        let mut s = store_with(&[0.0, 0.0], &[6.0, 8.0]);
        assert_eq!(clip_gradients(&mut s, 20.0), 1.0);
        assert_eq!(s.by_name("w").unwrap().grad().data(), &[6.0, 8.0]);

        let mut s = store_with(&[0.0, 0.0], &[24.0, 32.0]);
        assert_eq!(clip_gradients(&mut s, 20.0), 0.5);
        assert_eq!(s.by_name("w").unwrap().grad().data(), &[12.0, 16.0]);

        let mut s = store_with(&[0.0], &[0.0]);
        assert_eq!(clip_gradients(&mut s, 20.0), 1.0);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = store_with(&[0.3, -1.7], &[0.0, 0.0]);
        let mut opt = OptimizerState::new(&s);
        for _ in 0..3 {
            adam_step(&mut s, &mut opt, 0.1);
        }
        assert_eq!(s.by_name("w").unwrap().value().data(), &[0.3, -1.7]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut s = store_with(&[1.0, 1.0], &[0.5, -3.0]);
        let mut opt = OptimizerState::new(&s);
        adam_step(&mut s, &mut opt, 0.01);
        let v = s.by_name("w").unwrap().value().data().to_vec();
        assert!((v[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((v[1] - (1.0 + 0.01)).abs() < 1e-9);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        // Independent scalar implementation of the same recurrences.
        let (g1, g2, lr) = (0.25f64, -0.75f64, 0.003f64);
        let (mut th, mut m, mut v) = (0.4f64, 0.0f64, 0.0f64);
        for (t, g) in [(1, g1), (2, g2)] {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            th -= lr * mh / (vh.sqrt() + 1e-8);
        }
        let mut s = store_with(&[0.4], &[g1]);
        let mut opt = OptimizerState::new(&s);
        adam_step(&mut s, &mut opt, lr);
        s.get_mut(s.id("w").unwrap()).grad_mut()[0] = g2;
        adam_step(&mut s, &mut opt, lr);
        assert_eq!(s.by_name("w").unwrap().value().data()[0].to_bits(), th.to_bits());
    }

    #[test]
    fn frozen_parameters_are_untouched() {
        let mut s = ParamStore::new();
        let id = s.register("frozen", Tensor::row(&[1.0]), false).unwrap();
        s.get_mut(id).grad_mut()[0] = 100.0;
        let mut opt = OptimizerState::new(&s);
        adam_step(&mut s, &mut opt, 0.1);
        assert_eq!(s.get(id).value().data(), &[1.0]);
        assert_eq!(clip_gradients(&mut s, 1.0), 1.0);
    }
}
