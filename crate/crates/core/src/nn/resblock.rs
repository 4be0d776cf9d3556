//! Residual convolution block: two conv–norm–ReLU stages with the second
//! ReLU applied after adding a skip path. The skip is the identity unless the
//! channel count or stride changes, in which case a 1×1 strided projection
//! aligns it.

use rand_chacha::ChaCha8Rng;

use super::act::Activation;
use super::conv::{conv_out_len, Conv1d, ConvCache};
use super::norm::{BatchNorm1d, BnCache};
use super::param::{Grads, States, Vars};
use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ResidualBlock {
    conv1: Conv1d,
    bn1: BatchNorm1d,
    conv2: Conv1d,
    bn2: BatchNorm1d,
    projection: Option<Conv1d>,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
}

#[derive(Debug)]
pub struct ResBlockCache<S> {
    conv1: ConvCache<S>,
    bn1: BnCache<S>,
    relu1: Tensor<S>,
    conv2: ConvCache<S>,
    bn2: BnCache<S>,
    projection: Option<ConvCache<S>>,
    /// Final post-ReLU output (for the output ReLU mask).
    y: Tensor<S>,
}

impl ResidualBlock {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        states: &mut States<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        c_in: usize,
        c_out: usize,
        downsample: bool,
    ) -> Self {
        let stride = if downsample { 2 } else { 1 };
        let conv1 = Conv1d::new(
            vars,
            rng,
            &format!("{path}.conv1"),
            c_in,
            c_out,
            3,
            stride,
            Activation::None,
        );
        let bn1 = BatchNorm1d::new(vars, states, &format!("{path}.bn1"), c_out);
        let conv2 = Conv1d::new(
            vars,
            rng,
            &format!("{path}.conv2"),
            c_out,
            c_out,
            3,
            1,
            Activation::None,
        );
        let bn2 = BatchNorm1d::new(vars, states, &format!("{path}.bn2"), c_out);
        let projection = if c_in != c_out || stride != 1 {
            Some(Conv1d::new(
                vars,
                rng,
                &format!("{path}.proj"),
                c_in,
                c_out,
                1,
                stride,
                Activation::None,
            ))
        } else {
            None
        };
        ResidualBlock {
            conv1,
            bn1,
            conv2,
            bn2,
            projection,
            c_in,
            c_out,
            stride,
        }
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        conv_out_len(l_in, 3, self.stride)
    }

    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        states: &mut States<S>,
        x: &Tensor<S>,
        n: usize,
        l_in: usize,
        training: bool,
    ) -> Result<(Tensor<S>, ResBlockCache<S>)> {
        let (z1, conv1_cache) = self.conv1.forward(vars, x, n, l_in)?;
        let (mut a1, bn1_cache) = self.bn1.forward(vars, states, &z1, training);
        Activation::Relu.apply(a1.data_mut());
        let relu1 = a1.clone();
        let l_mid = self.out_len(l_in);
        let (z2, conv2_cache) = self.conv2.forward(vars, &a1, n, l_mid)?;
        let (main, bn2_cache) = self.bn2.forward(vars, states, &z2, training);

        let (skip, projection_cache) = match &self.projection {
            Some(proj) => {
                let (s, c) = proj.forward(vars, x, n, l_in)?;
                (s, Some(c))
            }
            None => (x.clone(), None),
        };

        let mut y = main;
        for (o, &s) in y.data_mut().iter_mut().zip(skip.data().iter()) {
            *o = *o + s;
        }
        Activation::Relu.apply(y.data_mut());

        let cache = ResBlockCache {
            conv1: conv1_cache,
            bn1: bn1_cache,
            relu1,
            conv2: conv2_cache,
            bn2: bn2_cache,
            projection: projection_cache,
            y: y.clone(),
        };
        Ok((y, cache))
    }

    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &ResBlockCache<S>,
        dy: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let mut d_sum = dy.clone();
        Activation::Relu.backprop(cache.y.data(), d_sum.data_mut());

        // main branch
        let d_bn2 = self.bn2.backward(vars, &cache.bn2, &d_sum, grads);
        let mut d_relu1 = self.conv2.backward(vars, &cache.conv2, &d_bn2, grads);
        Activation::Relu.backprop(cache.relu1.data(), d_relu1.data_mut());
        let d_bn1 = self.bn1.backward(vars, &cache.bn1, &d_relu1, grads);
        let mut dx = self.conv1.backward(vars, &cache.conv1, &d_bn1, grads);

        // skip branch
        match (&self.projection, &cache.projection) {
            (Some(proj), Some(pc)) => {
                let d_skip = proj.backward(vars, pc, &d_sum, grads);
                for (a, &b) in dx.data_mut().iter_mut().zip(d_skip.data().iter()) {
                    *a = *a + b;
                }
            }
            _ => {
                for (a, &b) in dx.data_mut().iter_mut().zip(d_sum.data().iter()) {
                    *a = *a + b;
                }
            }
        }
        dx
    }
}
