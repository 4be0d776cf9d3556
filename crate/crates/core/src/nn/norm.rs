//! Per-channel batch normalization over channel-major maps `(C, N·L)`.
//! Training mode normalizes with batch statistics and folds them into running
//! estimates; eval mode uses the stored running statistics.

use super::param::{Grads, ParamId, StateId, States, Vars};
use crate::scalar::{real, Real};
use crate::tensor::Tensor;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: StateId,
    pub running_var: StateId,
    pub channels: usize,
}

#[derive(Debug)]
pub struct BnCache<S> {
    x_hat: Tensor<S>,
    inv_std: Vec<S>,
    training: bool,
}

impl BatchNorm1d {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        states: &mut States<S>,
        path: &str,
        channels: usize,
    ) -> Self {
        let gamma = vars.add(format!("{path}.gamma"), Tensor::filled(&[channels], S::one()));
        let beta = vars.add_zeros(format!("{path}.beta"), &[channels]);
        let running_mean = states.add(format!("{path}.running_mean"), Tensor::zeros(&[channels]));
        let running_var = states.add(
            format!("{path}.running_var"),
            Tensor::filled(&[channels], S::one()),
        );
        BatchNorm1d {
            gamma,
            beta,
            running_mean,
            running_var,
            channels,
        }
    }

    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        states: &mut States<S>,
        x: &Tensor<S>,
        training: bool,
    ) -> (Tensor<S>, BnCache<S>) {
        assert_eq!(x.shape()[0], self.channels, "batchnorm channel mismatch");
        let m = x.shape()[1];
        let eps: S = real(BN_EPS);
        let gamma = vars.get(self.gamma).data().to_vec();
        let beta = vars.get(self.beta).data().to_vec();

        let mut y = Tensor::zeros(x.shape());
        let mut x_hat = Tensor::zeros(x.shape());
        let mut inv_std = vec![S::zero(); self.channels];

        if training {
            let count = real::<S>(m as f64);
            let mut batch_mean = vec![S::zero(); self.channels];
            let mut batch_var = vec![S::zero(); self.channels];
            for c in 0..self.channels {
                let row = x.row(c);
                let mean = row.iter().copied().sum::<S>() / count;
                let var = row
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<S>()
                    / count;
                batch_mean[c] = mean;
                batch_var[c] = var;
                let istd = S::one() / (var + eps).sqrt();
                inv_std[c] = istd;
                let xh_row = x_hat.row_mut(c);
                for (o, &v) in xh_row.iter_mut().zip(row.iter()) {
                    *o = (v - mean) * istd;
                }
                let y_row = y.row_mut(c);
                for (o, &h) in y_row.iter_mut().zip(x_hat.row(c).iter()) {
                    *o = gamma[c] * h + beta[c];
                }
            }
            let mom: S = real(BN_MOMENTUM);
            let one_m = S::one() - mom;
            let rm = states.get_mut(self.running_mean).data_mut();
            for (r, &b) in rm.iter_mut().zip(batch_mean.iter()) {
                *r = one_m * *r + mom * b;
            }
            let rv = states.get_mut(self.running_var).data_mut();
            for (r, &b) in rv.iter_mut().zip(batch_var.iter()) {
                *r = one_m * *r + mom * b;
            }
        } else {
            let rm = states.get(self.running_mean).data().to_vec();
            let rv = states.get(self.running_var).data().to_vec();
            for c in 0..self.channels {
                let istd = S::one() / (rv[c] + eps).sqrt();
                inv_std[c] = istd;
                let row = x.row(c);
                let xh_row = x_hat.row_mut(c);
                for (o, &v) in xh_row.iter_mut().zip(row.iter()) {
                    *o = (v - rm[c]) * istd;
                }
                let y_row = y.row_mut(c);
                for (o, &h) in y_row.iter_mut().zip(x_hat.row(c).iter()) {
                    *o = gamma[c] * h + beta[c];
                }
            }
        }

        (
            y,
            BnCache {
                x_hat,
                inv_std,
                training,
            },
        )
    }

    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &BnCache<S>,
        dy: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let m = dy.shape()[1];
        let count = real::<S>(m as f64);
        let gamma = vars.get(self.gamma).data().to_vec();
        let mut dx = Tensor::zeros(dy.shape());

        for c in 0..self.channels {
            let dy_row = dy.row(c);
            let xh_row = cache.x_hat.row(c);
            let mut dgamma = S::zero();
            let mut dbeta = S::zero();
            for (&d, &h) in dy_row.iter().zip(xh_row.iter()) {
                dgamma = dgamma + d * h;
                dbeta = dbeta + d;
            }
            grads.get_mut(self.gamma).data_mut()[c] += dgamma;
            grads.get_mut(self.beta).data_mut()[c] += dbeta;

            let g = gamma[c];
            let istd = cache.inv_std[c];
            let dx_row = dx.row_mut(c);
            if cache.training {
                // dx = γ/√v · (dy − mean(dy) − x̂·mean(dy·x̂))
                let mean_dy = dbeta / count;
                let mean_dyxh = dgamma / count;
                for ((o, &d), &h) in dx_row.iter_mut().zip(dy_row.iter()).zip(xh_row.iter()) {
                    *o = g * istd * (d - mean_dy - h * mean_dyxh);
                }
            } else {
                for (o, &d) in dx_row.iter_mut().zip(dy_row.iter()) {
                    *o = g * istd * d;
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_mode_output_is_standardized() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let bn = BatchNorm1d::new(&mut vars, &mut states, "bn", 1);
        let x = Tensor::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        let (y, _) = bn.forward(&vars, &mut states, &x, true);
        let mean: f64 = y.data().iter().sum::<f64>() / 4.0;
        let var: f64 = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_input_stays_zero_in_train_mode() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let bn = BatchNorm1d::new(&mut vars, &mut states, "bn", 2);
        let x = Tensor::zeros(&[2, 6]);
        let (y, _) = bn.forward(&vars, &mut states, &x, true);
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let bn = BatchNorm1d::new(&mut vars, &mut states, "bn", 1);
        let x = Tensor::from_vec(&[1, 2], vec![10.0, 10.0]);
        bn.forward(&vars, &mut states, &x, true);
        let rm = states.get(bn.running_mean).data()[0];
        assert!((rm - 1.0).abs() < 1e-12, "0.9·0 + 0.1·10 = 1");
    }
}
