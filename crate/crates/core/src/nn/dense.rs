//! Fully connected layer over batches of row vectors.

use rand_chacha::ChaCha8Rng;

use super::act::Activation;
use super::kernel::{matmul_nn, matmul_nt, matmul_tn};
use super::param::{Grads, ParamId, Vars};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug)]
pub struct DenseCache<S> {
    /// Input rows (N × in), kept for the weight gradient.
    x: Tensor<S>,
    /// Post-activation output rows (N × out).
    y: Tensor<S>,
}

impl Dense {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> Self {
        let w = vars.add_uniform(format!("{path}.w"), &[out_dim, in_dim], in_dim, rng);
        let b = vars.add_uniform(format!("{path}.b"), &[out_dim], in_dim, rng);
        Dense {
            w,
            b,
            in_dim,
            out_dim,
            activation,
        }
    }

    /// x: (N × in) → y: (N × out), y = act(x·Wᵀ + b)
    pub fn forward<S: Real>(&self, vars: &Vars<S>, x: &Tensor<S>) -> Result<(Tensor<S>, DenseCache<S>)> {
        if x.shape().len() != 2 || x.cols() != self.in_dim {
            return Err(Error::ShapeMismatch {
                op: "dense_forward",
                expected: format!("(N, {})", self.in_dim),
                got: format!("{:?}", x.shape()),
            });
        }
        let n = x.rows();
        let w = vars.get(self.w);
        let b = vars.get(self.b);
        let mut y = Tensor::zeros(&[n, self.out_dim]);
        for r in 0..n {
            y.row_mut(r).copy_from_slice(b.data());
        }
        matmul_nt(x.data(), w.data(), y.data_mut(), n, self.in_dim, self.out_dim);
        self.activation.apply(y.data_mut());
        let cache = DenseCache { x: x.clone(), y: y.clone() };
        Ok((y, cache))
    }

    /// dy: (N × out) → dx: (N × in); accumulates dW, db into `grads`.
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &DenseCache<S>,
        dy: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let n = cache.x.rows();
        let mut dz = dy.clone();
        self.activation.backprop(cache.y.data(), dz.data_mut());

        // dW (out × in) += dzᵀ · x
        matmul_tn(
            dz.data(),
            cache.x.data(),
            grads.get_mut(self.w).data_mut(),
            self.out_dim,
            n,
            self.in_dim,
        );
        // db += column sums of dz
        {
            let db = grads.get_mut(self.b).data_mut();
            for r in 0..n {
                for (d, &v) in db.iter_mut().zip(dz.row(r).iter()) {
                    *d = *d + v;
                }
            }
        }
        // dx (N × in) = dz · W
        let w = vars.get(self.w);
        let mut dx = Tensor::zeros(&[n, self.in_dim]);
        matmul_nn(dz.data(), w.data(), dx.data_mut(), n, self.out_dim, self.in_dim);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Identity weights, zero bias, no activation reproduces the input.
    #[test]
    fn identity_configuration() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Dense::new(&mut vars, &mut rng, "id", 3, 3, Activation::None);
        let w = vars.get_mut(layer.w);
        w.fill(0.0);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        vars.get_mut(layer.b).fill(0.0);
        let x = Tensor::from_vec(&[2, 3], vec![1., -2., 3., 0.5, 0., -0.5]);
        let (y, _) = layer.forward(&vars, &x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn relu_definition() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Dense::new(&mut vars, &mut rng, "r", 2, 2, Activation::Relu);
        let w = vars.get_mut(layer.w);
        w.fill(0.0);
        w.data_mut()[0] = 1.0;
        w.data_mut()[3] = 1.0;
        vars.get_mut(layer.b).fill(0.0);
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]);
        let (y, _) = layer.forward(&vars, &x).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Dense::new(&mut vars, &mut rng, "m", 4, 2, Activation::None);
        let x = Tensor::from_vec(&[1, 3], vec![1., 2., 3.]);
        assert!(matches!(
            layer.forward(&vars, &x),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
