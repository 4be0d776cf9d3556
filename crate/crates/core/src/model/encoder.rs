//! Single-stream audio encoder: a 1D residual conv stack over each 39-row
//! MFCC window, flattened into fully connected layers that emit one embedding
//! per video frame. Two independently parameterized copies (voice and music)
//! form the two-stream encoder.

use rand_chacha::ChaCha8Rng;

use crate::audio::{FeatureTrack, WINDOW_ROWS};
use crate::error::{Error, Result};
use crate::nn::act::Activation;
use crate::nn::conv::conv_out_len;
use crate::nn::dense::DenseCache;
use crate::nn::resblock::ResBlockCache;
use crate::nn::{Conv1d, Dense, Grads, ResidualBlock, States, Vars};
use crate::nn::conv::ConvCache;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Channel/width plan for one audio encoder.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AeConfig {
    /// Stem conv output channels.
    pub stem: usize,
    /// Residual blocks as (output channels, downsample).
    pub blocks: Vec<(usize, bool)>,
    /// Hidden fully connected widths after flattening.
    pub fc: Vec<usize>,
    /// Final embedding width.
    pub embed: usize,
}

impl AeConfig {
    /// Channel and length progression from the reference architecture:
    /// 32×39 → (32,64,64,128,128,256,256,512) with stride-2 halving at every
    /// other block (39→20→10→5→3), flatten 1536, FC 768 → 256 → embedding.
    pub fn full() -> Self {
        AeConfig {
            stem: 32,
            blocks: vec![
                (32, false),
                (64, true),
                (64, false),
                (128, true),
                (128, false),
                (256, true),
                (256, false),
                (512, true),
            ],
            fc: vec![768, 256],
            embed: 128,
        }
    }

    /// Small variant for gradient checks and fast tests.
    pub fn tiny(embed: usize) -> Self {
        AeConfig {
            stem: 6,
            blocks: vec![(6, false), (8, true)],
            fc: vec![12],
            embed,
        }
    }

    /// (channels, length) after the stem and each block, starting from the
    /// input, plus the flatten width.
    pub fn shape_trace(&self, in_channels: usize, in_len: usize) -> (Vec<(usize, usize)>, usize) {
        let mut trace = vec![(in_channels, in_len)];
        let mut len = in_len;
        trace.push((self.stem, len));
        for &(c, ds) in &self.blocks {
            if ds {
                len = conv_out_len(len, 3, 2);
            }
            trace.push((c, len));
        }
        let flat = trace.last().unwrap().0 * len;
        (trace, flat)
    }
}

#[derive(Debug, Clone)]
pub struct AudioEncoder {
    stem: Conv1d,
    blocks: Vec<ResidualBlock>,
    fcs: Vec<Dense>,
    head: Dense,
    pub in_channels: usize,
    pub cfg: AeConfig,
}

#[derive(Debug)]
pub struct AeCache<S> {
    stem: ConvCache<S>,
    blocks: Vec<ResBlockCache<S>>,
    /// Flattened per-window features (N × C·L).
    flat: Tensor<S>,
    fcs: Vec<DenseCache<S>>,
    head: DenseCache<S>,
    n: usize,
    lens: Vec<usize>,
    final_channels: usize,
}

impl AudioEncoder {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        states: &mut States<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_channels: usize,
        cfg: &AeConfig,
    ) -> Self {
        let stem = Conv1d::new(
            vars,
            rng,
            &format!("{path}.stem"),
            in_channels,
            cfg.stem,
            3,
            1,
            Activation::Relu,
        );
        let mut blocks = Vec::new();
        let mut c_prev = cfg.stem;
        for (i, &(c, ds)) in cfg.blocks.iter().enumerate() {
            blocks.push(ResidualBlock::new(
                vars,
                states,
                rng,
                &format!("{path}.block{i}"),
                c_prev,
                c,
                ds,
            ));
            c_prev = c;
        }
        let (_, flat) = cfg.shape_trace(in_channels, WINDOW_ROWS);
        let mut fcs = Vec::new();
        let mut w_prev = flat;
        for (i, &w) in cfg.fc.iter().enumerate() {
            fcs.push(Dense::new(
                vars,
                rng,
                &format!("{path}.fc{i}"),
                w_prev,
                w,
                Activation::Relu,
            ));
            w_prev = w;
        }
        let head = Dense::new(
            vars,
            rng,
            &format!("{path}.embed"),
            w_prev,
            cfg.embed,
            Activation::None,
        );
        AudioEncoder {
            stem,
            blocks,
            fcs,
            head,
            in_channels,
            cfg: cfg.clone(),
        }
    }

    /// Encode a feature track: (n_frames windows of 39×C) → (n_frames × embed).
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        states: &mut States<S>,
        track: &FeatureTrack<S>,
        training: bool,
    ) -> Result<(Tensor<S>, AeCache<S>)> {
        if track.width() != self.in_channels {
            return Err(Error::ShapeMismatch {
                op: "audio_encoder_forward",
                expected: format!("window width {}", self.in_channels),
                got: format!("{}", track.width()),
            });
        }
        let n = track.n_frames();
        if n == 0 {
            return Err(Error::EmptyTrack("feature track".into()));
        }
        let x = windows_to_mat(track);
        let mut lens = vec![WINDOW_ROWS];
        let (mut cur, stem_cache) = self.stem.forward(vars, &x, n, WINDOW_ROWS)?;
        let mut len = WINDOW_ROWS;
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (next, cache) = block.forward(vars, states, &cur, n, len, training)?;
            len = block.out_len(len);
            lens.push(len);
            block_caches.push(cache);
            cur = next;
        }
        let final_channels = self.blocks.last().map(|b| b.c_out).unwrap_or(self.cfg.stem);
        let flat = channels_to_rows(&cur, n, len);
        let mut fc_caches = Vec::with_capacity(self.fcs.len());
        let mut rows = flat.clone();
        for fc in &self.fcs {
            let (next, cache) = fc.forward(vars, &rows)?;
            fc_caches.push(cache);
            rows = next;
        }
        let (embed, head_cache) = self.head.forward(vars, &rows)?;
        embed.assert_finite("audio encoder embedding")?;
        Ok((
            embed,
            AeCache {
                stem: stem_cache,
                blocks: block_caches,
                flat,
                fcs: fc_caches,
                head: head_cache,
                n,
                lens,
                final_channels,
            },
        ))
    }

    /// d_embed: (n_frames × embed) → gradient accumulation; the input
    /// gradient is discarded (features are data, not parameters).
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &AeCache<S>,
        d_embed: &Tensor<S>,
        grads: &mut Grads<S>,
    ) {
        let mut d_rows = self.head.backward(vars, &cache.head, d_embed, grads);
        for (fc, fc_cache) in self.fcs.iter().zip(cache.fcs.iter()).rev() {
            d_rows = fc.backward(vars, fc_cache, &d_rows, grads);
        }
        let final_len = *cache.lens.last().unwrap();
        let mut d_cur = rows_to_channels(&d_rows, cache.n, cache.final_channels, final_len);
        for (block, block_cache) in self.blocks.iter().zip(cache.blocks.iter()).rev() {
            d_cur = block.backward(vars, block_cache, &d_cur, grads);
        }
        let _ = self.stem.backward(vars, &cache.stem, &d_cur, grads);
        let _ = &cache.flat;
    }
}

/// Feature windows (N, 39·C row-major over (row, coeff)) → conv layout
/// (C, N·39).
pub fn windows_to_mat<S: Real>(track: &FeatureTrack<S>) -> Tensor<S> {
    let n = track.n_frames();
    let width = track.width();
    let mut mat = Tensor::zeros(&[width, n * WINDOW_ROWS]);
    for f in 0..n {
        let w = track.window(f);
        for r in 0..WINDOW_ROWS {
            for c in 0..width {
                mat.row_mut(c)[f * WINDOW_ROWS + r] = w[r * width + c];
            }
        }
    }
    mat
}

/// (C, N·L) conv layout → per-window rows (N, C·L), channel-major per window.
fn channels_to_rows<S: Real>(x: &Tensor<S>, n: usize, l: usize) -> Tensor<S> {
    let c = x.shape()[0];
    let mut rows = Tensor::zeros(&[n, c * l]);
    for item in 0..n {
        let dst = rows.row_mut(item);
        for ch in 0..c {
            let src = &x.row(ch)[item * l..(item + 1) * l];
            dst[ch * l..(ch + 1) * l].copy_from_slice(src);
        }
    }
    rows
}

/// Adjoint of [`channels_to_rows`].
fn rows_to_channels<S: Real>(rows: &Tensor<S>, n: usize, c: usize, l: usize) -> Tensor<S> {
    let mut x = Tensor::zeros(&[c, n * l]);
    for item in 0..n {
        let src = rows.row(item);
        for ch in 0..c {
            x.row_mut(ch)[item * l..(item + 1) * l].copy_from_slice(&src[ch * l..(ch + 1) * l]);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::window_features;
    use crate::audio::mfcc::MfccTrack;
    use rand::SeedableRng;

    fn demo_track(frames: usize) -> FeatureTrack<f64> {
        let rows = frames * 10 / 3 + 40;
        let mut t = Tensor::zeros(&[rows, 26]);
        for r in 0..rows {
            for c in 0..26 {
                t.row_mut(r)[c] = ((r * 26 + c) as f64 * 0.01).sin();
            }
        }
        window_features(&MfccTrack::from_tensor(t), frames as f64 / 30.0).unwrap()
    }

    #[test]
    fn full_config_shape_trace_matches_reference_table() {
        let cfg = AeConfig::full();
        let (trace, flat) = cfg.shape_trace(26, 39);
        assert_eq!(
            trace,
            vec![
                (26, 39),
                (32, 39),
                (32, 39),
                (64, 20),
                (64, 20),
                (128, 10),
                (128, 10),
                (256, 5),
                (256, 5),
                (512, 3),
            ]
        );
        assert_eq!(flat, 1536);
    }

    #[test]
    fn tiny_encoder_emits_embedding_per_frame() {
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = AudioEncoder::new(&mut vars, &mut states, &mut rng, "ae", 26, &AeConfig::tiny(16));
        let track = demo_track(7);
        let (embed, _) = enc.forward(&vars, &mut states, &track, true).unwrap();
        assert_eq!(embed.shape(), &[7, 16]);
    }

    #[test]
    fn permuting_windows_permutes_embeddings() {
        // The encoder is per-frame: temporal context lives inside each
        // window, so reordering windows reorders outputs identically.
        let mut vars = Vars::<f64>::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = AudioEncoder::new(&mut vars, &mut states, &mut rng, "ae", 26, &AeConfig::tiny(8));
        let track = demo_track(6);
        let (a, _) = enc.forward(&vars, &mut states.clone(), &track, false).unwrap();

        // reversed frame order
        let mut rev = Tensor::zeros(&[6, 39 * 26]);
        for t in 0..6 {
            rev.row_mut(t).copy_from_slice(track.window(5 - t));
        }
        let rev_track = FeatureTrack::from_parts(rev, 26, 0);
        let (b, _) = enc.forward(&vars, &mut states.clone(), &rev_track, false).unwrap();
        for t in 0..6 {
            assert_eq!(a.row(t), b.row(5 - t), "frame {t}");
        }
    }
}
