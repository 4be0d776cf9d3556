//! Adam optimizer with bias correction and the linear-tail learning-rate
//! schedule: constant for the first 40% of epochs, then linear descent to
//! zero at the final epoch.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::Tensor;

use super::param::{Grads, Vars};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub first_moment: Vec<Tensor<S>>,
    pub second_moment: Vec<Tensor<S>>,
    pub step_count: u64,
    pub base_lr: f64,
}

impl<S: Real> Adam<S> {
    pub fn new(vars: &Vars<S>, base_lr: f64) -> Self {
        let first: Vec<Tensor<S>> = vars.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let second = first.clone();
        Adam {
            first_moment: first,
            second_moment: second,
            step_count: 0,
            base_lr,
        }
    }

    /// One bias-corrected update at the given learning rate.
    pub fn step(&mut self, vars: &mut Vars<S>, grads: &Grads<S>, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient("adam_update".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1: S = real(ADAM_BETA1);
        let b2: S = real(ADAM_BETA2);
        let eps: S = real(ADAM_EPS);
        let one = S::one();
        let corr1 = one - b1.powi(t);
        let corr2 = one - b2.powi(t);
        let alpha: S = real(lr);

        for ((idx, g), (m, v)) in grads
            .iter()
            .enumerate()
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let param = vars.get_mut(super::param::ParamId(idx));
            for (((p, &gv), mv), vv) in param
                .data_mut()
                .iter_mut()
                .zip(g.data().iter())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / corr1;
                let v_hat = *vv / corr2;
                *p = *p - alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Learning rate at `epoch` of `total_epochs`: `base_lr` while
/// `epoch < 0.4·total`, then linear descent reaching zero at `total`.
pub fn lr_at(epoch: usize, total_epochs: usize, base_lr: f64) -> f64 {
    assert!(epoch < total_epochs, "epoch out of range");
    let start = 0.4 * total_epochs as f64;
    if (epoch as f64) < start {
        base_lr
    } else {
        base_lr * (total_epochs - epoch) as f64 / (total_epochs as f64 - start)
    }
}

/// Scale gradients down when their global norm exceeds `max_norm`.
pub fn clip_global_norm<S: Real>(grads: &mut Grads<S>, max_norm: f64) {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(real(max_norm / norm));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param::Vars;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lr_at(0, 50, 1e-4), 1e-4);
        assert_eq!(lr_at(19, 50, 1e-4), 1e-4);
        assert_eq!(lr_at(20, 50, 1e-4), 1e-4); // boundary of the 40% mark
        let lr35 = lr_at(35, 50, 1e-4);
        assert!((lr35 - 1e-4 * 15.0 / 30.0).abs() < 1e-18);
        assert!((lr35 - 5e-5).abs() < 1e-18);
    }

    #[test]
    fn schedule_non_increasing() {
        let mut prev = f64::INFINITY;
        for e in 0..50 {
            let lr = lr_at(e, 50, 1e-4);
            assert!(lr <= prev + 1e-18);
            prev = lr;
        }
    }

    #[test]
    fn first_step_approaches_signed_unit_step() {
        let mut vars = Vars::<f64>::new();
        let id = vars.add_zeros("x", &[1]);
        vars.get_mut(id).data_mut()[0] = 1.0;
        let mut grads = Grads::zeros_like(&vars);
        grads.get_mut(id).data_mut()[0] = 0.3;
        let mut opt = Adam::new(&vars, 0.1);
        opt.step(&mut vars, &grads, 0.1).unwrap();
        // bias-corrected first step is −lr·g/(|g|+ε') ≈ −lr·sign(g)
        let got = vars.get(id).data()[0];
        assert!((got - (1.0 - 0.1)).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut vars = Vars::<f64>::new();
        let id = vars.add_zeros("x", &[3]);
        vars.get_mut(id).data_mut().copy_from_slice(&[1.0, -2.0, 0.5]);
        let before = vars.flatten();
        let grads = Grads::zeros_like(&vars);
        let mut opt = Adam::new(&vars, 0.1);
        opt.step(&mut vars, &grads, 0.1).unwrap();
        assert_eq!(vars.flatten(), before);
    }

    #[test]
    fn quadratic_descends() {
        // 10 steps on f(x)=x² from x=1 with lr 0.1: |x| strictly decreases.
        let mut vars = Vars::<f64>::new();
        let id = vars.add_zeros("x", &[1]);
        vars.get_mut(id).data_mut()[0] = 1.0;
        let mut opt = Adam::new(&vars, 0.1);
        let mut prev = 1.0f64;
        for _ in 0..10 {
            let x = vars.get(id).data()[0];
            let mut grads = Grads::zeros_like(&vars);
            grads.get_mut(id).data_mut()[0] = 2.0 * x;
            opt.step(&mut vars, &grads, 0.1).unwrap();
            let now = vars.get(id).data()[0].abs();
            assert!(now < prev, "|x| must strictly decrease: {now} vs {prev}");
            prev = now;
        }
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut vars = Vars::<f64>::new();
        let id = vars.add_zeros("x", &[1]);
        let mut grads = Grads::zeros_like(&vars);
        grads.get_mut(id).data_mut()[0] = f64::NAN;
        let mut opt = Adam::new(&vars, 0.1);
        assert!(matches!(
            opt.step(&mut vars, &grads, 0.1),
            Err(Error::NonFiniteGradient(_))
        ));
    }
}
