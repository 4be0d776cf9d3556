//! Full parameter-generation model: two-stream audio encoder, one attention
//! modulator per task, and the expression/pose/eye decoders, plus the clip
//! discriminator. Training uses teacher forcing for the pose context;
//! inference rolls the pose out autoregressively from a seed pose.

pub mod atm;
pub mod decoders;
pub mod discriminator;
pub mod encoder;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{FeatureTrack, MFCC_WIDTH};
use crate::error::{Error, Result};
use crate::nn::{Grads, States, Vars};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub use atm::{Atm, AtmCache, ModulatedPair, Task};
pub use decoders::{
    composite_eye, decompose_pose, integrate_pose, rasterize_blinks, sample_blink_events,
    sample_blinks, smooth_eye, BlinkEvent, BlinkParams, Egn, EsgnLong, EyeKind, EyeTrack,
    PgnDirection, PgnSpeed,
};
pub use discriminator::{disc_input, DiscConfig, Discriminator};
pub use encoder::{AeConfig, AudioEncoder};

/// Architecture hyperparameters. `full()` is the reference architecture;
/// smaller variants exist for tests.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub n_subjects: usize,
    /// Append the subject one-hot to the gated embeddings as well as the
    /// MFCC input rows. Off by default: the reference decoder widths
    /// (LSTM input 268) leave no room for it.
    pub subject_at_latent: bool,
    /// Per-stream embedding width.
    pub embed: usize,
    pub ae: AeConfig,
    pub unet_mid: usize,
    pub unet_low: usize,
    pub mlp_hidden: usize,
    pub expr_dim: usize,
    pub pose_dim: usize,
    pub lstm_hidden: usize,
    pub disc_channels: Vec<usize>,
}

impl ModelConfig {
    pub fn full(n_subjects: usize) -> Self {
        ModelConfig {
            n_subjects,
            subject_at_latent: false,
            embed: 128,
            ae: AeConfig::full(),
            unet_mid: 128,
            unet_low: 64,
            mlp_hidden: 128,
            expr_dim: 64,
            pose_dim: 6,
            lstm_hidden: 128,
            disc_channels: vec![32, 64, 128, 224, 224],
        }
    }

    /// Small configuration for tests and gradient checks.
    pub fn tiny(n_subjects: usize) -> Self {
        ModelConfig {
            n_subjects,
            subject_at_latent: false,
            embed: 8,
            ae: AeConfig::tiny(8),
            unet_mid: 6,
            unet_low: 4,
            mlp_hidden: 6,
            expr_dim: 5,
            pose_dim: 6,
            lstm_hidden: 6,
            disc_channels: vec![4, 4, 6, 6, 6],
        }
    }

    /// MFCC window width seen by the encoders (26 + subject channels).
    pub fn in_channels(&self) -> usize {
        MFCC_WIDTH + self.n_subjects
    }

    /// Width of l_t (and m_t) as seen by the decoders.
    pub fn latent_width(&self) -> usize {
        self.embed + if self.subject_at_latent { self.n_subjects } else { 0 }
    }

    /// Decoder MLP input width: l ⊕ m.
    pub fn decoder_in(&self) -> usize {
        2 * self.latent_width()
    }

    /// LSTM input width: l ⊕ m ⊕ p̂_{t−1} ⊕ v̂_{t−1}.
    pub fn lstm_in(&self) -> usize {
        self.decoder_in() + 2 * self.pose_dim
    }

    pub fn disc(&self) -> DiscConfig {
        DiscConfig {
            in_channels: 2 * MFCC_WIDTH + self.pose_dim + 1,
            channels: self.disc_channels.clone(),
        }
    }

    /// Stable hash of the architecture, stored in checkpoints so an
    /// incompatible load fails loudly.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Generator: all trainable pieces except the discriminator.
#[derive(Debug)]
pub struct Generator<S> {
    pub cfg: ModelConfig,
    pub vars: Vars<S>,
    pub states: States<S>,
    pub ae_voice: AudioEncoder,
    pub ae_music: AudioEncoder,
    pub atm_exp: Atm,
    pub atm_pose: Atm,
    pub atm_eye: Atm,
    pub egn: Egn,
    pub pgn_speed: PgnSpeed,
    pub pgn_dir: PgnDirection,
    pub esgn: EsgnLong,
}

/// Everything a training step needs from the generator forward pass.
#[derive(Debug)]
pub struct GenForward<S> {
    pub f_v: Tensor<S>,
    pub f_b: Tensor<S>,
    pub att_exp: Tensor<S>,
    pub att_pose: Tensor<S>,
    pub att_eye: Tensor<S>,
    pub expr: Tensor<S>,
    pub speed: Tensor<S>,
    /// Directions; row 0 is zero (no prediction for the seed frame).
    pub dirs: Tensor<S>,
    /// Teacher-forced predicted poses; row 0 equals the ground-truth seed.
    pub pose: Tensor<S>,
    pub eye_long: EyeTrack<S>,
}

pub struct GenCaches<S> {
    ae_voice: encoder::AeCache<S>,
    ae_music: encoder::AeCache<S>,
    atm_exp: AtmCache<S>,
    atm_pose: AtmCache<S>,
    atm_eye: AtmCache<S>,
    egn: decoders::EgnCache<S>,
    speed: decoders::PgnSpeedCache<S>,
    dir: decoders::PgnDirectionCache<S>,
    esgn: decoders::EsgnCache<S>,
    pairs: [ModulatedPair<S>; 3],
    subject: usize,
}

/// Gradients flowing back into the generator outputs.
pub struct GenOutputGrads<S> {
    pub d_expr: Tensor<S>,
    /// Gradient on the teacher-forced predicted poses (row 0 ignored).
    pub d_pose: Tensor<S>,
    /// Gradient on |v̂| = ŝ·|d̂| (row 0 ignored).
    pub d_vabs: Tensor<S>,
    /// Extra gradient directly on ŝ (beyond the pose/velocity chains).
    pub d_speed: Tensor<S>,
    pub d_eye_long: Vec<S>,
    pub d_att_exp: Tensor<S>,
    pub d_att_pose: Tensor<S>,
    pub d_att_eye: Tensor<S>,
}

impl<S: Real> Generator<S> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Self {
        let mut vars = Vars::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let in_ch = cfg.in_channels();
        let ae_voice = AudioEncoder::new(&mut vars, &mut states, &mut rng, "ae_v", in_ch, &cfg.ae);
        let ae_music = AudioEncoder::new(&mut vars, &mut states, &mut rng, "ae_b", in_ch, &cfg.ae);
        let atm_exp = Atm::new(
            &mut vars, &mut states, &mut rng, "atm_exp", Task::Exp, cfg.embed, cfg.unet_mid,
            cfg.unet_low,
        );
        let atm_pose = Atm::new(
            &mut vars, &mut states, &mut rng, "atm_pose", Task::Pose, cfg.embed, cfg.unet_mid,
            cfg.unet_low,
        );
        let atm_eye = Atm::new(
            &mut vars, &mut states, &mut rng, "atm_eye", Task::Eye, cfg.embed, cfg.unet_mid,
            cfg.unet_low,
        );
        let egn = Egn::new(
            &mut vars,
            &mut rng,
            "egn",
            cfg.decoder_in(),
            cfg.mlp_hidden,
            cfg.expr_dim,
        );
        let pgn_speed = PgnSpeed::new(
            &mut vars,
            &mut rng,
            "pgn_speed",
            cfg.decoder_in(),
            cfg.mlp_hidden,
            cfg.pose_dim,
        );
        let pgn_dir = PgnDirection::new(
            &mut vars,
            &mut rng,
            "pgn_dir",
            cfg.decoder_in(),
            cfg.lstm_hidden,
            cfg.pose_dim,
        );
        let esgn = EsgnLong::new(&mut vars, &mut rng, "esgn", cfg.decoder_in(), cfg.mlp_hidden);
        Generator {
            cfg,
            vars,
            states,
            ae_voice,
            ae_music,
            atm_exp,
            atm_pose,
            atm_eye,
            egn,
            pgn_speed,
            pgn_dir,
            esgn,
        }
    }

    /// Encode both streams; tracks must be frame-aligned with identical
    /// subject suffix width.
    pub fn tsae_forward(
        &mut self,
        voice: &FeatureTrack<S>,
        music: &FeatureTrack<S>,
        training: bool,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        check_streams(voice, music)?;
        let (f_v, _) = self
            .ae_voice
            .forward(&self.vars, &mut self.states, voice, training)?;
        let (f_b, _) = self
            .ae_music
            .forward(&self.vars, &mut self.states, music, training)?;
        Ok((f_v, f_b))
    }

    /// Full teacher-forced training pass over one clip.
    pub fn forward_train(
        &mut self,
        voice: &FeatureTrack<S>,
        music: &FeatureTrack<S>,
        gt_pose: &Tensor<S>,
        subject: usize,
    ) -> Result<(GenForward<S>, GenCaches<S>)> {
        check_streams(voice, music)?;
        let (f_v, cache_v) = self
            .ae_voice
            .forward(&self.vars, &mut self.states, voice, true)?;
        let (f_b, cache_b) = self
            .ae_music
            .forward(&self.vars, &mut self.states, music, true)?;

        let (att_exp, pair_exp, atm_exp_cache) = self.atm_exp.forward(&self.vars, &f_v, &f_b)?;
        let (att_pose, pair_pose, atm_pose_cache) = self.atm_pose.forward(&self.vars, &f_v, &f_b)?;
        let (att_eye, pair_eye, atm_eye_cache) = self.atm_eye.forward(&self.vars, &f_v, &f_b)?;

        let pair_exp = attach_subject_latent(&pair_exp, subject, &self.cfg)?;
        let pair_pose = attach_subject_latent(&pair_pose, subject, &self.cfg)?;
        let pair_eye = attach_subject_latent(&pair_eye, subject, &self.cfg)?;

        let (expr, egn_cache) = self.egn.forward(&self.vars, &pair_exp)?;
        let (speed, speed_cache) = self.pgn_speed.forward(&self.vars, &pair_pose)?;
        let (dirs, dir_cache) = self
            .pgn_dir
            .forward_teacher(&self.vars, &pair_pose, gt_pose)?;
        let (eye_long, esgn_cache) = self.esgn.forward(&self.vars, &pair_eye)?;

        // teacher-forced pose: p̂_t = p_{t−1} + ŝ_t·d̂_t, seeded by gt row 0
        let t = f_v.rows();
        let dim = self.cfg.pose_dim;
        let mut pose = Tensor::zeros(&[t, dim]);
        pose.row_mut(0).copy_from_slice(gt_pose.row(0));
        for step in 1..t {
            for j in 0..dim {
                pose.row_mut(step)[j] =
                    gt_pose.row(step - 1)[j] + speed.row(step)[j] * dirs.row(step)[j];
            }
        }
        expr.assert_finite("generator expression output")?;
        pose.assert_finite("generator pose output")?;

        let forward = GenForward {
            f_v,
            f_b,
            att_exp,
            att_pose,
            att_eye,
            expr,
            speed,
            dirs,
            pose,
            eye_long,
        };
        let caches = GenCaches {
            ae_voice: cache_v,
            ae_music: cache_b,
            atm_exp: atm_exp_cache,
            atm_pose: atm_pose_cache,
            atm_eye: atm_eye_cache,
            egn: egn_cache,
            speed: speed_cache,
            dir: dir_cache,
            esgn: esgn_cache,
            pairs: [pair_exp, pair_pose, pair_eye],
            subject,
        };
        Ok((forward, caches))
    }

    /// Backward through the whole generator given output gradients.
    pub fn backward_train(
        &self,
        fwd: &GenForward<S>,
        caches: &GenCaches<S>,
        out_grads: &GenOutputGrads<S>,
        grads: &mut Grads<S>,
    ) {
        let t = fwd.f_v.rows();
        let dim = self.cfg.pose_dim;

        // chain pose/velocity gradients into speed and direction heads
        let mut d_speed = out_grads.d_speed.clone();
        let mut d_dirs = Tensor::zeros(&[t, dim]);
        for step in 1..t {
            let s = fwd.speed.row(step);
            let d = fwd.dirs.row(step);
            let dp = out_grads.d_pose.row(step);
            let dv = out_grads.d_vabs.row(step);
            let ds_row = d_speed.row_mut(step);
            for j in 0..dim {
                ds_row[j] = ds_row[j] + dp[j] * d[j] + dv[j] * d[j].abs();
            }
            let dd_row = d_dirs.row_mut(step);
            for j in 0..dim {
                let sign_d = if d[j] > S::zero() {
                    S::one()
                } else if d[j] < S::zero() {
                    -S::one()
                } else {
                    S::zero()
                };
                dd_row[j] = dp[j] * s[j] + dv[j] * s[j] * sign_d;
            }
        }

        // decoders → (l ⊕ m) gradients per task
        let d_lm_exp = self.egn.backward(&self.vars, &caches.egn, &out_grads.d_expr, grads);
        let mut d_lm_pose = self
            .pgn_speed
            .backward(&self.vars, &caches.speed, &d_speed, grads);
        let d_lm_dir = self
            .pgn_dir
            .backward_teacher(&self.vars, &caches.dir, &d_dirs, grads);
        for (a, &b) in d_lm_pose
            .data_mut()
            .iter_mut()
            .zip(d_lm_dir.data().iter())
        {
            *a = *a + b;
        }
        let d_lm_eye = self
            .esgn
            .backward(&self.vars, &caches.esgn, &out_grads.d_eye_long, grads);

        // strip any subject suffix, split into (l, m), run ATMs backward
        let lw = self.cfg.latent_width();
        let (d_l_exp, d_m_exp) = split_latent(&d_lm_exp, lw, self.cfg.embed);
        let (d_l_pose, d_m_pose) = split_latent(&d_lm_pose, lw, self.cfg.embed);
        let (d_l_eye, d_m_eye) = split_latent(&d_lm_eye, lw, self.cfg.embed);

        let (mut d_f_v, mut d_f_b) = self.atm_exp.backward(
            &self.vars,
            &caches.atm_exp,
            &d_l_exp,
            &d_m_exp,
            Some(&out_grads.d_att_exp),
            grads,
        );
        let (v2, b2) = self.atm_pose.backward(
            &self.vars,
            &caches.atm_pose,
            &d_l_pose,
            &d_m_pose,
            Some(&out_grads.d_att_pose),
            grads,
        );
        let (v3, b3) = self.atm_eye.backward(
            &self.vars,
            &caches.atm_eye,
            &d_l_eye,
            &d_m_eye,
            Some(&out_grads.d_att_eye),
            grads,
        );
        for (a, &b) in d_f_v.data_mut().iter_mut().zip(v2.data().iter()) {
            *a = *a + b;
        }
        for (a, &b) in d_f_v.data_mut().iter_mut().zip(v3.data().iter()) {
            *a = *a + b;
        }
        for (a, &b) in d_f_b.data_mut().iter_mut().zip(b2.data().iter()) {
            *a = *a + b;
        }
        for (a, &b) in d_f_b.data_mut().iter_mut().zip(b3.data().iter()) {
            *a = *a + b;
        }

        self.ae_voice
            .backward(&self.vars, &caches.ae_voice, &d_f_v, grads);
        self.ae_music
            .backward(&self.vars, &caches.ae_music, &d_f_b, grads);
        let _ = caches.subject;
    }

    /// Inference: encode, modulate, decode, roll the pose out from `p0`, and
    /// composite eye state with sampled blinks plus Gaussian smoothing.
    #[allow(clippy::too_many_arguments)]
    pub fn infer(
        &mut self,
        voice: &FeatureTrack<S>,
        music: &FeatureTrack<S>,
        subject: usize,
        p0: &[S],
        blink: &BlinkParams,
        smooth_sigma_frames: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<InferenceOutput<S>> {
        check_streams(voice, music)?;
        let (f_v, _) = self
            .ae_voice
            .forward(&self.vars, &mut self.states, voice, false)?;
        let (f_b, _) = self
            .ae_music
            .forward(&self.vars, &mut self.states, music, false)?;
        let (att_exp, pair_exp, _) = self.atm_exp.forward(&self.vars, &f_v, &f_b)?;
        let (att_pose, pair_pose, _) = self.atm_pose.forward(&self.vars, &f_v, &f_b)?;
        let (att_eye, pair_eye, _) = self.atm_eye.forward(&self.vars, &f_v, &f_b)?;
        let pair_exp = attach_subject_latent(&pair_exp, subject, &self.cfg)?;
        let pair_pose = attach_subject_latent(&pair_pose, subject, &self.cfg)?;
        let pair_eye = attach_subject_latent(&pair_eye, subject, &self.cfg)?;

        let (expr, _) = self.egn.forward(&self.vars, &pair_exp)?;
        let (speed, _) = self.pgn_speed.forward(&self.vars, &pair_pose)?;
        let (dirs, pose) = self.pgn_dir.rollout(&self.vars, &pair_pose, &speed, p0)?;
        let (eye_long, _) = self.esgn.forward(&self.vars, &pair_eye)?;

        let t = expr.rows();
        let fps = crate::audio::VIDEO_FPS as f64;
        let (blink_track, events) =
            sample_blinks::<S>(t as f64 / fps, fps, blink, rng)?;
        let composite = composite_eye(&blink_track, &eye_long)?;
        let eye = smooth_eye(&composite, smooth_sigma_frames);

        expr.assert_finite("inference expression")?;
        pose.assert_finite("inference pose")?;

        Ok(InferenceOutput {
            expr,
            pose,
            speed,
            dirs,
            eye_long,
            blink_events: events,
            eye,
            att_exp,
            att_pose,
            att_eye,
        })
    }
}

/// Inference products for one stem pair.
#[derive(Debug)]
pub struct InferenceOutput<S> {
    pub expr: Tensor<S>,
    pub pose: Tensor<S>,
    pub speed: Tensor<S>,
    pub dirs: Tensor<S>,
    pub eye_long: EyeTrack<S>,
    pub blink_events: Vec<BlinkEvent>,
    /// Smoothed composite eye track.
    pub eye: EyeTrack<S>,
    pub att_exp: Tensor<S>,
    pub att_pose: Tensor<S>,
    pub att_eye: Tensor<S>,
}

fn check_streams<S: Real>(voice: &FeatureTrack<S>, music: &FeatureTrack<S>) -> Result<()> {
    if voice.n_frames() != music.n_frames() {
        return Err(Error::LengthMismatch {
            op: "tsae_forward",
            left: voice.n_frames(),
            right: music.n_frames(),
        });
    }
    if voice.width() != music.width() {
        return Err(Error::ShapeMismatch {
            op: "tsae_forward",
            expected: format!("matching stream widths ({})", voice.width()),
            got: format!("{}", music.width()),
        });
    }
    Ok(())
}

/// Append the subject one-hot to both halves of a modulated pair when the
/// config enables it; otherwise return the pair unchanged.
pub fn attach_subject_latent<S: Real>(
    pair: &ModulatedPair<S>,
    subject: usize,
    cfg: &ModelConfig,
) -> Result<ModulatedPair<S>> {
    if !cfg.subject_at_latent {
        return Ok(pair.clone());
    }
    if subject >= cfg.n_subjects {
        return Err(Error::SubjectOutOfRange {
            subject,
            n_subjects: cfg.n_subjects,
        });
    }
    let extend = |x: &Tensor<S>| {
        let t = x.rows();
        let w = x.cols();
        let mut out = Tensor::zeros(&[t, w + cfg.n_subjects]);
        for r in 0..t {
            out.row_mut(r)[..w].copy_from_slice(x.row(r));
            out.row_mut(r)[w + subject] = S::one();
        }
        out
    };
    Ok(ModulatedPair {
        l: extend(&pair.l),
        m: extend(&pair.m),
        task: pair.task,
    })
}

/// Split decoder-input gradients (2·latent wide) back into per-stream
/// embedding gradients, dropping any subject-suffix columns.
fn split_latent<S: Real>(d_lm: &Tensor<S>, latent_w: usize, embed: usize) -> (Tensor<S>, Tensor<S>) {
    let t = d_lm.rows();
    let mut d_l = Tensor::zeros(&[t, embed]);
    let mut d_m = Tensor::zeros(&[t, embed]);
    for r in 0..t {
        let row = d_lm.row(r);
        d_l.row_mut(r).copy_from_slice(&row[..embed]);
        d_m.row_mut(r)
            .copy_from_slice(&row[latent_w..latent_w + embed]);
    }
    (d_l, d_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::mfcc::MfccTrack;
    use crate::audio::{attach_subject, window_features};

    fn demo_tracks(frames: usize, n_subjects: usize) -> (FeatureTrack<f64>, FeatureTrack<f64>) {
        let rows = frames * 10 / 3 + 40;
        let mut base = Tensor::zeros(&[rows, 26]);
        for r in 0..rows {
            for c in 0..26 {
                base.row_mut(r)[c] = ((r * 31 + c * 7) as f64 * 0.01).sin();
            }
        }
        let t = window_features(&MfccTrack::from_tensor(base), frames as f64 / 30.0).unwrap();
        let v = attach_subject(&t, 0, n_subjects).unwrap();
        (v.clone(), v)
    }

    #[test]
    fn tiny_model_forward_shapes() {
        let cfg = ModelConfig::tiny(2);
        let mut gen = Generator::<f64>::new(cfg.clone(), 3);
        let (voice, music) = demo_tracks(6, 2);
        let gt_pose = Tensor::from_vec(
            &[6, 6],
            (0..36).map(|i| (i as f64 * 0.05).sin() * 0.1).collect(),
        );
        let (fwd, _) = gen.forward_train(&voice, &music, &gt_pose, 0).unwrap();
        assert_eq!(fwd.f_v.shape(), &[6, cfg.embed]);
        assert_eq!(fwd.att_exp.shape(), &[6, 2 * cfg.embed]);
        assert_eq!(fwd.expr.shape(), &[6, cfg.expr_dim]);
        assert_eq!(fwd.speed.shape(), &[6, 6]);
        assert_eq!(fwd.pose.shape(), &[6, 6]);
        assert_eq!(fwd.eye_long.len(), 6);
        assert!(fwd.speed.data().iter().all(|v| *v >= 0.0));
        assert!(fwd.dirs.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(fwd.att_pose.data().iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(fwd.pose.row(0), gt_pose.row(0));
    }

    #[test]
    fn identical_streams_and_params_give_identical_embeddings() {
        // The two encoders share structure but not parameters; force the
        // music encoder's parameters equal to the voice encoder's and feed
        // the same track: embeddings must coincide.
        let cfg = ModelConfig::tiny(1);
        let mut gen = Generator::<f64>::new(cfg, 7);
        // copy voice params onto music params by name correspondence
        let names: Vec<String> = gen
            .vars
            .iter()
            .map(|(n, _)| n.to_string())
            .collect();
        for (idx, name) in names.iter().enumerate() {
            if let Some(suffix) = name.strip_prefix("ae_v") {
                let target = format!("ae_b{suffix}");
                if let Some(tidx) = names.iter().position(|n| *n == target) {
                    let src = gen.vars.get(crate::nn::ParamId(idx)).clone();
                    *gen.vars.get_mut(crate::nn::ParamId(tidx)) = src;
                }
            }
        }
        let (voice, music) = demo_tracks(5, 1);
        let (f_v, f_b) = gen.tsae_forward(&voice, &music, false).unwrap();
        assert_eq!(f_v, f_b);
    }

    #[test]
    fn mismatched_stream_lengths_rejected() {
        let cfg = ModelConfig::tiny(1);
        let mut gen = Generator::<f64>::new(cfg, 1);
        let (voice, _) = demo_tracks(5, 1);
        let (music, _) = demo_tracks(6, 1);
        assert!(matches!(
            gen.tsae_forward(&voice, &music, false),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn subject_latent_attach_widths() {
        let mut cfg = ModelConfig::tiny(3);
        cfg.subject_at_latent = true;
        let pair = ModulatedPair {
            l: Tensor::<f64>::zeros(&[4, 8]),
            m: Tensor::zeros(&[4, 8]),
            task: Task::Exp,
        };
        let out = attach_subject_latent(&pair, 1, &cfg).unwrap();
        assert_eq!(out.l.cols(), 11);
        assert_eq!(out.l.row(2)[9], 1.0);
        assert_eq!(out.l.row(2)[8], 0.0);

        // disabled: unchanged
        cfg.subject_at_latent = false;
        let same = attach_subject_latent(&pair, 1, &cfg).unwrap();
        assert_eq!(same.l, pair.l);
    }

    #[test]
    fn config_hash_distinguishes_architectures() {
        let a = ModelConfig::full(2).config_hash();
        let b = ModelConfig::full(3).config_hash();
        let c = ModelConfig::tiny(2).config_hash();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, ModelConfig::full(2).config_hash());
    }

    #[test]
    fn three_atms_share_structure_not_parameters() {
        let cfg = ModelConfig::tiny(1);
        let gen = Generator::<f64>::new(cfg, 5);
        // parameter shape lists per ATM must be identical
        let shapes = |prefix: &str| -> Vec<Vec<usize>> {
            gen.vars
                .iter()
                .filter(|(n, _)| n.starts_with(prefix))
                .map(|(_, t)| t.shape().to_vec())
                .collect()
        };
        let e = shapes("atm_exp");
        let p = shapes("atm_pose");
        let y = shapes("atm_eye");
        assert!(!e.is_empty());
        assert_eq!(e, p);
        assert_eq!(p, y);
        // but the values differ (independent draws)
        let val = |prefix: &str| -> f64 {
            gen.vars
                .iter()
                .find(|(n, _)| n.starts_with(prefix))
                .unwrap()
                .1
                .data()[0]
        };
        assert_ne!(val("atm_exp"), val("atm_pose"));
    }
}
