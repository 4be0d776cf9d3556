//! Clip realism discriminator: a strided 1D conv stack over per-frame rows of
//! [voice MFCC (26), music MFCC (26), pose (6), eye state (1)] = 59 channels,
//! halving the 128-frame window four times down to length 8 and emitting an
//! 8-long score vector per clip.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::act::Activation;
use crate::nn::conv::ConvCache;
use crate::nn::norm::BnCache;
use crate::nn::{BatchNorm1d, Conv1d, Grads, States, Vars};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscConfig {
    /// Per-frame input channels (26 voice + 26 music + pose dims + 1 eye).
    pub in_channels: usize,
    /// Channel widths of the five hidden conv stages.
    pub channels: Vec<usize>,
}

impl DiscConfig {
    pub fn full(pose_dim: usize) -> Self {
        DiscConfig {
            in_channels: 26 + 26 + pose_dim + 1,
            channels: vec![32, 64, 128, 224, 224],
        }
    }

    pub fn tiny(in_channels: usize) -> Self {
        DiscConfig {
            in_channels,
            channels: vec![4, 6, 6, 8, 8],
        }
    }
}

/// One hidden stage: strided conv, optional batch norm, leaky ReLU.
#[derive(Debug, Clone)]
struct Stage {
    conv: Conv1d,
    bn: Option<BatchNorm1d>,
}

#[derive(Debug)]
struct StageCache<S> {
    conv: ConvCache<S>,
    bn: Option<BnCache<S>>,
    /// Post-activation output for the leaky mask.
    y: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    stages: Vec<Stage>,
    score: Conv1d,
    pub cfg: DiscConfig,
}

#[derive(Debug)]
pub struct DiscCache<S> {
    stages: Vec<StageCache<S>>,
    score: ConvCache<S>,
    lens: Vec<usize>,
}

impl Discriminator {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        states: &mut States<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        cfg: &DiscConfig,
    ) -> Self {
        let mut stages = Vec::new();
        let mut c_prev = cfg.in_channels;
        for (i, &c) in cfg.channels.iter().enumerate() {
            // first four stages halve the time axis; the fifth keeps it
            let stride = if i < 4 { 2 } else { 1 };
            let conv = Conv1d::new(
                vars,
                rng,
                &format!("{path}.conv{i}"),
                c_prev,
                c,
                3,
                stride,
                Activation::None,
            );
            // the first stage has no normalization
            let bn = if i == 0 {
                None
            } else {
                Some(BatchNorm1d::new(vars, states, &format!("{path}.bn{i}"), c))
            };
            stages.push(Stage { conv, bn });
            c_prev = c;
        }
        let score = Conv1d::new(
            vars,
            rng,
            &format!("{path}.score"),
            c_prev,
            1,
            3,
            1,
            Activation::None,
        );
        Discriminator {
            stages,
            score,
            cfg: cfg.clone(),
        }
    }

    /// x: (in_channels, T) → per-clip score vector (1 × T/16).
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        states: &mut States<S>,
        x: &Tensor<S>,
        training: bool,
    ) -> Result<(Tensor<S>, DiscCache<S>)> {
        if x.shape()[0] != self.cfg.in_channels {
            return Err(Error::ShapeMismatch {
                op: "discriminator_forward",
                expected: format!("{} channels", self.cfg.in_channels),
                got: format!("{}", x.shape()[0]),
            });
        }
        let mut len = x.shape()[1];
        let mut lens = vec![len];
        let mut cur = x.clone();
        let mut stage_caches = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (z, conv_cache) = stage.conv.forward(vars, &cur, 1, len)?;
            len = crate::nn::conv::conv_out_len(len, 3, stage.conv.stride);
            lens.push(len);
            let (mut y, bn_cache) = match &stage.bn {
                Some(bn) => {
                    let (y, c) = bn.forward(vars, states, &z, training);
                    (y, Some(c))
                }
                None => (z, None),
            };
            Activation::LeakyRelu(LEAKY_SLOPE).apply(y.data_mut());
            stage_caches.push(StageCache {
                conv: conv_cache,
                bn: bn_cache,
                y: y.clone(),
            });
            cur = y;
        }
        let (scores, score_cache) = self.score.forward(vars, &cur, 1, len)?;
        Ok((
            scores,
            DiscCache {
                stages: stage_caches,
                score: score_cache,
                lens,
            },
        ))
    }

    /// d_scores: (1 × T/16) → gradient w.r.t. the input map (in_channels, T);
    /// parameter gradients accumulate into `grads`.
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &DiscCache<S>,
        d_scores: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let mut d = self.score.backward(vars, &cache.score, d_scores, grads);
        for (stage, sc) in self.stages.iter().zip(cache.stages.iter()).rev() {
            Activation::LeakyRelu(LEAKY_SLOPE).backprop(sc.y.data(), d.data_mut());
            if let (Some(bn), Some(bn_cache)) = (&stage.bn, &sc.bn) {
                d = bn.backward(vars, bn_cache, &d, grads);
            }
            d = stage.conv.backward(vars, &sc.conv, &d, grads);
        }
        d
    }

    /// Temporal lengths after the input and each stage.
    pub fn length_trace(&self, t: usize) -> Vec<usize> {
        let mut lens = vec![t];
        let mut len = t;
        for (i, _) in self.stages.iter().enumerate() {
            let stride = if i < 4 { 2 } else { 1 };
            len = crate::nn::conv::conv_out_len(len, 3, stride);
            lens.push(len);
        }
        lens
    }
}

/// Assemble the discriminator input map from per-frame tracks: center MFCC
/// rows of both streams (subject channels stripped), pose rows, eye values.
pub fn disc_input<S: Real>(
    voice_centers: &Tensor<S>,
    music_centers: &Tensor<S>,
    pose: &Tensor<S>,
    eye_long: &[S],
    mfcc_width: usize,
) -> Result<Tensor<S>> {
    let t = pose.rows();
    if voice_centers.rows() != t || music_centers.rows() != t || eye_long.len() != t {
        return Err(Error::LengthMismatch {
            op: "disc_input",
            left: t,
            right: voice_centers.rows().min(music_centers.rows()).min(eye_long.len()),
        });
    }
    let pose_dim = pose.cols();
    let channels = 2 * mfcc_width + pose_dim + 1;
    let mut x = Tensor::zeros(&[channels, t]);
    for f in 0..t {
        for c in 0..mfcc_width {
            x.row_mut(c)[f] = voice_centers.row(f)[c];
        }
        for c in 0..mfcc_width {
            x.row_mut(mfcc_width + c)[f] = music_centers.row(f)[c];
        }
        for c in 0..pose_dim {
            x.row_mut(2 * mfcc_width + c)[f] = pose.row(f)[c];
        }
        x.row_mut(2 * mfcc_width + pose_dim)[f] = eye_long[f];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn full_config_halves_lengths_to_eight() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let disc = Discriminator::new(&mut vars, &mut states, &mut rng, "d", &DiscConfig::full(6));
        assert_eq!(disc.length_trace(128), vec![128, 64, 32, 16, 8, 8]);
        assert_eq!(disc.cfg.in_channels, 59);
    }

    #[test]
    fn forward_emits_8_scores_for_128_frames() {
        let mut vars = Vars::<f32>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = DiscConfig::tiny(9);
        let disc = Discriminator::new(&mut vars, &mut states, &mut rng, "d", &cfg);
        let x = Tensor::from_vec(
            &[9, 128],
            (0..9 * 128).map(|i| ((i % 17) as f32) * 0.05 - 0.4).collect(),
        );
        let (scores, _) = disc.forward(&vars, &mut states, &x, true).unwrap();
        assert_eq!(scores.shape(), &[1, 8]);
    }

    #[test]
    fn zero_weights_zero_score() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = DiscConfig::tiny(5);
        let disc = Discriminator::new(&mut vars, &mut states, &mut rng, "d", &cfg);
        let flat = vec![0.0; vars.total_elements()];
        vars.load_flat(&flat);
        let x = Tensor::filled(&[5, 64], 0.3);
        let (scores, _) = disc.forward(&vars, &mut states, &x, true).unwrap();
        assert!(scores.data().iter().all(|v| *v == 0.0));
    }
}
