//! 1D convolution over channel-major feature maps.
//!
//! Feature maps are stored as rank-2 tensors `(C, N·L)`: channel rows, with
//! `N` batch items of length `L` laid out back to back inside each row. The
//! convolution lowers to im2col plus one matrix product, so the kernels in
//! [`super::kernel`] carry all the arithmetic.

use rand_chacha::ChaCha8Rng;

use super::act::Activation;
use super::kernel::{matmul_nn, matmul_nt, matmul_tn};
use super::param::{Grads, ParamId, Vars};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub activation: Activation,
}

#[derive(Debug)]
pub struct ConvCache<S> {
    cols: Tensor<S>,
    /// Post-activation output, kept only when the layer owns an activation.
    y_act: Option<Tensor<S>>,
    n: usize,
    l_in: usize,
    l_out: usize,
}

/// Output length under half-kernel padding: `ceil(l_in / stride)`.
pub fn conv_out_len(l_in: usize, kernel: usize, stride: usize) -> usize {
    let pad = kernel / 2;
    (l_in + 2 * pad - kernel) / stride + 1
}

impl Conv1d {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    ) -> Self {
        let fan_in = c_in * kernel;
        let w = vars.add_uniform(format!("{path}.w"), &[c_out, c_in * kernel], fan_in, rng);
        let b = vars.add_uniform(format!("{path}.b"), &[c_out], fan_in, rng);
        Conv1d {
            w,
            b,
            c_in,
            c_out,
            kernel,
            stride,
            activation,
        }
    }

    /// x: (C_in, N·L_in) → y: (C_out, N·L_out)
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        x: &Tensor<S>,
        n: usize,
        l_in: usize,
    ) -> Result<(Tensor<S>, ConvCache<S>)> {
        if x.shape() != [self.c_in, n * l_in] {
            return Err(Error::ShapeMismatch {
                op: "conv1d_forward",
                expected: format!("({}, {}·{})", self.c_in, n, l_in),
                got: format!("{:?}", x.shape()),
            });
        }
        let l_out = conv_out_len(l_in, self.kernel, self.stride);
        let cols = im2col(x, n, l_in, l_out, self.kernel, self.stride);
        let w = vars.get(self.w);
        let b = vars.get(self.b);
        let mut y = Tensor::zeros(&[self.c_out, n * l_out]);
        for (c, bv) in b.data().iter().enumerate() {
            y.row_mut(c).iter_mut().for_each(|v| *v = *bv);
        }
        matmul_nn(
            w.data(),
            cols.data(),
            y.data_mut(),
            self.c_out,
            self.c_in * self.kernel,
            n * l_out,
        );
        self.activation.apply(y.data_mut());
        let y_act = if self.activation == Activation::None {
            None
        } else {
            Some(y.clone())
        };
        Ok((
            y,
            ConvCache {
                cols,
                y_act,
                n,
                l_in,
                l_out,
            },
        ))
    }

    /// dy: (C_out, N·L_out) → dx: (C_in, N·L_in); accumulates dW, db.
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &ConvCache<S>,
        dy: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let (n, l_in, l_out) = (cache.n, cache.l_in, cache.l_out);
        let mut dz = dy.clone();
        if let Some(y) = &cache.y_act {
            self.activation.backprop(y.data(), dz.data_mut());
        }

        // dW += dz · colsᵀ
        matmul_nt(
            dz.data(),
            cache.cols.data(),
            grads.get_mut(self.w).data_mut(),
            self.c_out,
            n * l_out,
            self.c_in * self.kernel,
        );
        // db += row sums of dz
        {
            let db = grads.get_mut(self.b).data_mut();
            for (c, d) in db.iter_mut().enumerate() {
                let row = dz.row(c);
                *d = *d + row.iter().copied().sum();
            }
        }
        // dcols = Wᵀ · dz, then scatter back to input positions.
        let w = vars.get(self.w);
        let mut dcols = Tensor::zeros(&[self.c_in * self.kernel, n * l_out]);
        matmul_tn(
            w.data(),
            dz.data(),
            dcols.data_mut(),
            self.c_in * self.kernel,
            self.c_out,
            n * l_out,
        );
        col2im(
            &dcols,
            self.c_in,
            n,
            l_in,
            l_out,
            self.kernel,
            self.stride,
        )
    }
}

fn im2col<S: Real>(
    x: &Tensor<S>,
    n: usize,
    l_in: usize,
    l_out: usize,
    kernel: usize,
    stride: usize,
) -> Tensor<S> {
    let c_in = x.shape()[0];
    let pad = (kernel / 2) as isize;
    let mut cols = Tensor::zeros(&[c_in * kernel, n * l_out]);
    for c in 0..c_in {
        let x_row = x.row(c);
        for j in 0..kernel {
            let dst = cols.row_mut(c * kernel + j);
            for item in 0..n {
                let src = &x_row[item * l_in..(item + 1) * l_in];
                let out = &mut dst[item * l_out..(item + 1) * l_out];
                for (l, o) in out.iter_mut().enumerate() {
                    let pos = (l * stride) as isize + j as isize - pad;
                    if pos >= 0 && (pos as usize) < l_in {
                        *o = src[pos as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<S: Real>(
    dcols: &Tensor<S>,
    c_in: usize,
    n: usize,
    l_in: usize,
    l_out: usize,
    kernel: usize,
    stride: usize,
) -> Tensor<S> {
    let pad = (kernel / 2) as isize;
    let mut dx = Tensor::zeros(&[c_in, n * l_in]);
    for c in 0..c_in {
        let dx_row = dx.row_mut(c);
        for j in 0..kernel {
            let src = dcols.row(c * kernel + j);
            for item in 0..n {
                let sin = &src[item * l_out..(item + 1) * l_out];
                let out = &mut dx_row[item * l_in..(item + 1) * l_in];
                for (l, &v) in sin.iter().enumerate() {
                    let pos = (l * stride) as isize + j as isize - pad;
                    if pos >= 0 && (pos as usize) < l_in {
                        out[pos as usize] = out[pos as usize] + v;
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn stride_two_lengths_match_ceil_halving() {
        for (l, want) in [(39usize, 20usize), (20, 10), (10, 5), (5, 3)] {
            assert_eq!(conv_out_len(l, 3, 2), want);
        }
    }

    #[test]
    fn identity_kernel_preserves_signal() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::new(&mut vars, &mut rng, "c", 1, 1, 3, 1, Activation::None);
        // kernel [0, 1, 0] with zero bias copies the input
        let w = vars.get_mut(conv.w);
        w.data_mut().copy_from_slice(&[0.0, 1.0, 0.0]);
        vars.get_mut(conv.b).fill(0.0);
        let x = Tensor::from_vec(&[1, 5], vec![1., 2., 3., 4., 5.]);
        let (y, _) = conv.forward(&vars, &x, 1, 5).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn batch_items_do_not_leak_across_boundaries() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::new(&mut vars, &mut rng, "c", 1, 1, 3, 1, Activation::None);
        // Summing kernel [1,1,1]: edges must see zero padding, not the
        // neighboring batch item.
        let w = vars.get_mut(conv.w);
        w.data_mut().copy_from_slice(&[1.0, 1.0, 1.0]);
        vars.get_mut(conv.b).fill(0.0);
        let x = Tensor::from_vec(&[1, 6], vec![1., 1., 1., 10., 10., 10.]);
        let (y, _) = conv.forward(&vars, &x, 2, 3).unwrap();
        assert_eq!(y.data(), &[2., 3., 2., 20., 30., 20.]);
    }
}
