//! Attention-based modulator: concatenates the two stream embeddings per
//! frame, runs a temporal U-net over time to produce per-channel logits,
//! gates the concatenation with the sigmoid of those logits, and splits the
//! result back into lyric/melody halves. One independently parameterized
//! modulator exists per generation task.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::act::Activation;
use crate::nn::unet::{transpose, UnetCache};
use crate::nn::{Grads, States, TemporalUnet, Vars};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Generation task a modulated pair is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Task {
    Exp,
    Pose,
    Eye,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Exp => "exp",
            Task::Pose => "pose",
            Task::Eye => "eye",
        }
    }
}

/// Task-gated embeddings: `l` from the voice stream, `m` from the music
/// stream, both (T × embed).
#[derive(Debug, Clone)]
pub struct ModulatedPair<S> {
    pub l: Tensor<S>,
    pub m: Tensor<S>,
    pub task: Task,
}

impl<S: Real> ModulatedPair<S> {
    pub fn frames(&self) -> usize {
        self.l.rows()
    }

    /// Per-frame concatenation l_t ⊕ m_t as (T × 2·embed) rows.
    pub fn concat_rows(&self) -> Tensor<S> {
        concat_cols(&self.l, &self.m)
    }
}

#[derive(Debug, Clone)]
pub struct Atm {
    unet: TemporalUnet,
    pub task: Task,
    pub embed: usize,
}

#[derive(Debug)]
pub struct AtmCache<S> {
    concat: Tensor<S>,
    att: Tensor<S>,
    unet: UnetCache<S>,
}

impl Atm {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        states: &mut States<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        task: Task,
        embed: usize,
        unet_mid: usize,
        unet_low: usize,
    ) -> Self {
        let unet = TemporalUnet::new(
            vars,
            states,
            rng,
            &format!("{path}.unet"),
            2 * embed,
            unet_mid,
            unet_low,
        );
        Atm { unet, task, embed }
    }

    /// f_v, f_b: (T × embed) each → attention (T × 2·embed) in (0,1) and the
    /// gated (l, m) pair.
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        f_v: &Tensor<S>,
        f_b: &Tensor<S>,
    ) -> Result<(Tensor<S>, ModulatedPair<S>, AtmCache<S>)> {
        if f_v.rows() != f_b.rows() {
            return Err(Error::LengthMismatch {
                op: "atm_forward",
                left: f_v.rows(),
                right: f_b.rows(),
            });
        }
        let t = f_v.rows();
        let concat = concat_cols(f_v, f_b);
        let x = transpose(&concat); // (2·embed, T)
        let (logits, unet_cache) = self.unet.forward(vars, &x)?;
        let mut att = logits;
        Activation::Sigmoid.apply(att.data_mut());

        let mut gated = concat.clone();
        for (g, &a) in gated.data_mut().iter_mut().zip(att.data().iter()) {
            *g = *g * a;
        }
        let (l, m) = split_cols(&gated, self.embed);
        let pair = ModulatedPair {
            l,
            m,
            task: self.task,
        };
        debug_assert_eq!(att.shape(), &[t, 2 * self.embed]);
        let cache = AtmCache {
            concat,
            att: att.clone(),
            unet: unet_cache,
        };
        Ok((att, pair, cache))
    }

    /// Backward from gradients on (l, m) and on the attention mask itself
    /// (the sparsity loss differentiates through `att` directly). Returns
    /// (d_f_v, d_f_b).
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &AtmCache<S>,
        d_l: &Tensor<S>,
        d_m: &Tensor<S>,
        d_att_extra: Option<&Tensor<S>>,
        grads: &mut Grads<S>,
    ) -> (Tensor<S>, Tensor<S>) {
        let d_gated = concat_cols(d_l, d_m);

        // d_att = d_gated ⊙ concat (+ external), d_concat (direct) = d_gated ⊙ att
        let mut d_att = d_gated.clone();
        for (d, &c) in d_att.data_mut().iter_mut().zip(cache.concat.data().iter()) {
            *d = *d * c;
        }
        if let Some(extra) = d_att_extra {
            for (d, &e) in d_att.data_mut().iter_mut().zip(extra.data().iter()) {
                *d = *d + e;
            }
        }
        let mut d_concat = d_gated;
        for (d, &a) in d_concat.data_mut().iter_mut().zip(cache.att.data().iter()) {
            *d = *d * a;
        }

        // through the sigmoid into U-net logits
        let mut d_logits = d_att;
        Activation::Sigmoid.backprop(cache.att.data(), d_logits.data_mut());
        let d_x = self.unet.backward(vars, &cache.unet, &d_logits, grads);
        let d_concat_unet = transpose(&d_x);
        for (d, &u) in d_concat
            .data_mut()
            .iter_mut()
            .zip(d_concat_unet.data().iter())
        {
            *d = *d + u;
        }
        split_cols(&d_concat, self.embed)
    }
}

pub fn concat_cols<S: Real>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.rows(), b.rows());
    let t = a.rows();
    let (wa, wb) = (a.cols(), b.cols());
    let mut out = Tensor::zeros(&[t, wa + wb]);
    for r in 0..t {
        out.row_mut(r)[..wa].copy_from_slice(a.row(r));
        out.row_mut(r)[wa..].copy_from_slice(b.row(r));
    }
    out
}

pub fn split_cols<S: Real>(x: &Tensor<S>, w_first: usize) -> (Tensor<S>, Tensor<S>) {
    let t = x.rows();
    let w = x.cols();
    let mut a = Tensor::zeros(&[t, w_first]);
    let mut b = Tensor::zeros(&[t, w - w_first]);
    for r in 0..t {
        a.row_mut(r).copy_from_slice(&x.row(r)[..w_first]);
        b.row_mut(r).copy_from_slice(&x.row(r)[w_first..]);
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn make_atm(embed: usize) -> (Vars<f64>, States<f64>, Atm) {
        let mut vars = Vars::new();
        let mut states = States::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let atm = Atm::new(&mut vars, &mut states, &mut rng, "atm", Task::Pose, embed, 4, 2);
        (vars, states, atm)
    }

    fn demo_inputs(t: usize, embed: usize) -> (Tensor<f64>, Tensor<f64>) {
        let f_v = Tensor::from_vec(
            &[t, embed],
            (0..t * embed).map(|i| ((i as f64) * 0.37).sin()).collect(),
        );
        let f_b = Tensor::from_vec(
            &[t, embed],
            (0..t * embed).map(|i| ((i as f64) * 0.71).cos()).collect(),
        );
        (f_v, f_b)
    }

    #[test]
    fn attention_strictly_inside_unit_interval() {
        let (vars, _states, atm) = make_atm(6);
        let (f_v, f_b) = demo_inputs(9, 6);
        let (att, _, _) = atm.forward(&vars, &f_v, &f_b).unwrap();
        assert!(att.data().iter().all(|&a| a > 0.0 && a < 1.0));
    }

    /// Forcing the U-net head to zero output makes att ≡ 0.5 and the gated
    /// output exactly half the concatenation.
    #[test]
    fn zero_logits_gate_at_one_half() {
        let (mut vars, _states, atm) = make_atm(5);
        // zero every parameter: logits become 0 regardless of input
        let flat = vec![0.0; vars.total_elements()];
        vars.load_flat(&flat);
        let (f_v, f_b) = demo_inputs(7, 5);
        let (att, pair, _) = atm.forward(&vars, &f_v, &f_b).unwrap();
        assert!(att.data().iter().all(|&a| (a - 0.5).abs() < 1e-15));
        for r in 0..7 {
            for c in 0..5 {
                assert!((pair.l.row(r)[c] - 0.5 * f_v.row(r)[c]).abs() < 1e-15);
                assert!((pair.m.row(r)[c] - 0.5 * f_b.row(r)[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let (vars, _states, atm) = make_atm(4);
        let (f_v, _) = demo_inputs(6, 4);
        let (_, f_b) = demo_inputs(5, 4);
        assert!(matches!(
            atm.forward(&vars, &f_v, &f_b),
            Err(Error::LengthMismatch { .. })
        ));
    }

    /// Gradients reach both streams through the modulator.
    #[test]
    fn gradient_flows_to_both_streams() {
        let (vars, _states, atm) = make_atm(4);
        let (f_v, f_b) = demo_inputs(6, 4);
        let (_, pair, cache) = atm.forward(&vars, &f_v, &f_b).unwrap();
        let d_l = Tensor::filled(pair.l.shape(), 1.0);
        let d_m = Tensor::filled(pair.m.shape(), 1.0);
        let mut grads = Grads::zeros_like(&vars);
        let (d_f_v, d_f_b) = atm.backward(&vars, &cache, &d_l, &d_m, None, &mut grads);
        let nv: f64 = d_f_v.data().iter().map(|v| v.abs()).sum();
        let nb: f64 = d_f_b.data().iter().map(|v| v.abs()).sum();
        assert!(nv > 0.0, "voice stream receives no gradient");
        assert!(nb > 0.0, "music stream receives no gradient");
    }
}
