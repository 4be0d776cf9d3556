//! Temporal U-net over (channels, time) maps: two stride-2 encoder convs, a
//! bottleneck, and two decoder stages with nearest-neighbor upsampling and
//! skip concatenation, followed by a per-frame linear head.

use rand_chacha::ChaCha8Rng;

use super::act::Activation;
use super::conv::{Conv1d, ConvCache};
use super::dense::{Dense, DenseCache};
use super::param::{Grads, States, Vars};
use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TemporalUnet {
    down1: Conv1d,
    down2: Conv1d,
    bottleneck: Conv1d,
    up1: Conv1d,
    up2: Conv1d,
    head: Dense,
    pub c_in: usize,
}

#[derive(Debug)]
pub struct UnetCache<S> {
    x: Tensor<S>,
    down1: ConvCache<S>,
    d1: Tensor<S>,
    down2: ConvCache<S>,
    bottleneck: ConvCache<S>,
    up1: ConvCache<S>,
    u1: Tensor<S>,
    up2: ConvCache<S>,
    head: DenseCache<S>,
    l_full: usize,
    l_half: usize,
    l_quarter: usize,
}

impl TemporalUnet {
    /// `c_in` is both the input and output channel width; `c1`, `c2` the
    /// encoder widths at half and quarter temporal resolution.
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        _states: &mut States<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        c_in: usize,
        c1: usize,
        c2: usize,
    ) -> Self {
        let down1 = Conv1d::new(vars, rng, &format!("{path}.down1"), c_in, c1, 3, 2, Activation::Relu);
        let down2 = Conv1d::new(vars, rng, &format!("{path}.down2"), c1, c2, 3, 2, Activation::Relu);
        let bottleneck = Conv1d::new(
            vars,
            rng,
            &format!("{path}.bottleneck"),
            c2,
            c2,
            3,
            1,
            Activation::Relu,
        );
        let up1 = Conv1d::new(
            vars,
            rng,
            &format!("{path}.up1"),
            c2 + c1,
            c1,
            3,
            1,
            Activation::Relu,
        );
        let up2 = Conv1d::new(
            vars,
            rng,
            &format!("{path}.up2"),
            c1 + c_in,
            c_in,
            3,
            1,
            Activation::Relu,
        );
        let head = Dense::new(vars, rng, &format!("{path}.head"), c_in, c_in, Activation::None);
        TemporalUnet {
            down1,
            down2,
            bottleneck,
            up1,
            up2,
            head,
            c_in,
        }
    }

    /// x: (C, T) → logits: (T, C) per-frame rows.
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        x: &Tensor<S>,
    ) -> Result<(Tensor<S>, UnetCache<S>)> {
        let l_full = x.shape()[1];
        let (d1, down1_cache) = self.down1.forward(vars, x, 1, l_full)?;
        let l_half = d1.shape()[1];
        let (d2, down2_cache) = self.down2.forward(vars, &d1, 1, l_half)?;
        let l_quarter = d2.shape()[1];
        let (b, bottleneck_cache) = self.bottleneck.forward(vars, &d2, 1, l_quarter)?;

        let b_up = upsample_nearest(&b, l_half);
        let cat1 = concat_channels(&b_up, &d1);
        let (u1, up1_cache) = self.up1.forward(vars, &cat1, 1, l_half)?;

        let u1_up = upsample_nearest(&u1, l_full);
        let cat2 = concat_channels(&u1_up, x);
        let (u2, up2_cache) = self.up2.forward(vars, &cat2, 1, l_full)?;

        // Per-frame linear head wants (T, C) rows.
        let frames = transpose(&u2);
        let (logits, head_cache) = self.head.forward(vars, &frames)?;

        let cache = UnetCache {
            x: x.clone(),
            down1: down1_cache,
            d1,
            down2: down2_cache,
            bottleneck: bottleneck_cache,
            up1: up1_cache,
            u1,
            up2: up2_cache,
            head: head_cache,
            l_full,
            l_half,
            l_quarter,
        };
        Ok((logits, cache))
    }

    /// d_logits: (T, C) → dx: (C, T)
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &UnetCache<S>,
        d_logits: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let d_frames = self.head.backward(vars, &cache.head, d_logits, grads);
        let d_u2 = transpose(&d_frames);

        let d_cat2 = self.up2.backward(vars, &cache.up2, &d_u2, grads);
        let (d_u1_up, mut dx) = split_channels(&d_cat2, self.up1.c_out);
        let d_u1 = downsample_sum(&d_u1_up, cache.u1.shape()[1]);

        let d_cat1 = self.up1.backward(vars, &cache.up1, &d_u1, grads);
        let (d_b_up, d_d1_skip) = split_channels(&d_cat1, self.bottleneck.c_out);
        let d_b = downsample_sum(&d_b_up, cache.l_quarter);

        let d_d2 = self.bottleneck.backward(vars, &cache.bottleneck, &d_b, grads);
        let mut d_d1 = self.down2.backward(vars, &cache.down2, &d_d2, grads);
        for (a, &b) in d_d1.data_mut().iter_mut().zip(d_d1_skip.data().iter()) {
            *a = *a + b;
        }
        let d_x_main = self.down1.backward(vars, &cache.down1, &d_d1, grads);
        for (a, &b) in dx.data_mut().iter_mut().zip(d_x_main.data().iter()) {
            *a = *a + b;
        }
        let _ = cache.l_full;
        dx
    }
}

/// Nearest-neighbor ×2 upsampling truncated to `target`: y[·, l] = x[·, l/2].
fn upsample_nearest<S: Real>(x: &Tensor<S>, target: usize) -> Tensor<S> {
    let c = x.shape()[0];
    let mut y = Tensor::zeros(&[c, target]);
    for ch in 0..c {
        let src = x.row(ch);
        let dst = y.row_mut(ch);
        for (l, o) in dst.iter_mut().enumerate() {
            *o = src[l / 2];
        }
    }
    y
}

/// Adjoint of [`upsample_nearest`]: sums each input's copies.
fn downsample_sum<S: Real>(dy: &Tensor<S>, source_len: usize) -> Tensor<S> {
    let c = dy.shape()[0];
    let target = dy.shape()[1];
    let mut dx = Tensor::zeros(&[c, source_len]);
    for ch in 0..c {
        let src = dy.row(ch);
        let dst = dx.row_mut(ch);
        for l in 0..target {
            dst[l / 2] = dst[l / 2] + src[l];
        }
    }
    dx
}

fn concat_channels<S: Real>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.shape()[1], b.shape()[1]);
    let mut data = Vec::with_capacity(a.numel() + b.numel());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[a.shape()[0] + b.shape()[0], a.shape()[1]], data)
}

fn split_channels<S: Real>(x: &Tensor<S>, c_first: usize) -> (Tensor<S>, Tensor<S>) {
    let c = x.shape()[0];
    let l = x.shape()[1];
    let (first, second) = x.data().split_at(c_first * l);
    (
        Tensor::from_vec(&[c_first, l], first.to_vec()),
        Tensor::from_vec(&[c - c_first, l], second.to_vec()),
    )
}

/// (R, C) → (C, R)
pub fn transpose<S: Real>(x: &Tensor<S>) -> Tensor<S> {
    let r = x.shape()[0];
    let c = x.shape()[1];
    let mut y = Tensor::zeros(&[c, r]);
    let xd = x.data();
    let yd = y.data_mut();
    for i in 0..r {
        for j in 0..c {
            yd[j * r + i] = xd[i * c + j];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn output_shape_matches_input_frames() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let unet = TemporalUnet::new(&mut vars, &mut states, &mut rng, "u", 8, 4, 2);
        for t in [12usize, 13, 7] {
            let x = Tensor::from_vec(
                &[8, t],
                (0..8 * t).map(|i| (i as f64 * 0.1).sin()).collect(),
            );
            let (y, _) = unet.forward(&vars, &x).unwrap();
            assert_eq!(y.shape(), &[t, 8]);
        }
    }

    #[test]
    fn upsample_then_sum_are_adjoint() {
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]);
        let y = upsample_nearest(&x, 5);
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0, 3.0]);
        let back = downsample_sum(&y, 3);
        assert_eq!(back.data(), &[2.0, 4.0, 3.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let x = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(transpose(&transpose(&x)), x);
    }
}
