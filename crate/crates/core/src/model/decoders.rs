//! Downstream generators.
//!
//! - Expression: per-frame MLP on the gated embeddings → 64 coefficients.
//! - Pose: per-frame speed MLP (absolute-valued) plus a direction LSTM whose
//!   tanh output is integrated as p̂_t = p̂_{t−1} + ŝ_t·d̂_t.
//! - Eye state: per-frame MLP for long closes (clamped to [0,1]), a seeded
//!   uniform blink sampler, branch compositing, and Gaussian smoothing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::act::Activation;
use crate::nn::dense::DenseCache;
use crate::nn::{Dense, Grads, Vars};
use crate::scalar::{real, Real};
use crate::tensor::Tensor;

use super::atm::{ModulatedPair, Task};

// ---------------------------------------------------------------------
// eye-track domain types
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeKind {
    Blink,
    Long,
    Composite,
}

/// Scalar-per-frame eye closure signal in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EyeTrack<S> {
    pub values: Vec<S>,
    pub kind: EyeKind,
}

impl<S: Real> EyeTrack<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform blink-distribution bounds in seconds: open gaps from
/// U(interval_min, interval_max), closures from U(duration_min, duration_max).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlinkParams {
    pub interval_min_s: f64,
    pub interval_max_s: f64,
    pub duration_min_s: f64,
    pub duration_max_s: f64,
}

impl Default for BlinkParams {
    fn default() -> Self {
        BlinkParams {
            interval_min_s: 1.2,
            interval_max_s: 2.0,
            duration_min_s: 0.10,
            duration_max_s: 0.45,
        }
    }
}

impl BlinkParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.interval_min_s
            && self.interval_min_s < self.interval_max_s
            && 0.0 < self.duration_min_s
            && self.duration_min_s < self.duration_max_s;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("blink params {self:?}")))
        }
    }
}

/// One sampled closure event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkEvent {
    /// Open-gap length before this closure, seconds.
    pub interval_s: f64,
    /// Closure start time, seconds.
    pub start_s: f64,
    /// Closure length, seconds.
    pub duration_s: f64,
}

// ---------------------------------------------------------------------
// expression generator
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Egn {
    fc1: Dense,
    fc2: Dense,
}

#[derive(Debug)]
pub struct EgnCache<S> {
    fc1: DenseCache<S>,
    fc2: DenseCache<S>,
}

impl Egn {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
    ) -> Self {
        Egn {
            fc1: Dense::new(vars, rng, &format!("{path}.fc1"), in_dim, hidden, Activation::Relu),
            fc2: Dense::new(vars, rng, &format!("{path}.fc2"), hidden, out_dim, Activation::None),
        }
    }

    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        pair: &ModulatedPair<S>,
    ) -> Result<(Tensor<S>, EgnCache<S>)> {
        require_task(pair, Task::Exp)?;
        let x = pair.concat_rows();
        let (h, fc1) = self.fc1.forward(vars, &x)?;
        let (y, fc2) = self.fc2.forward(vars, &h)?;
        Ok((y, EgnCache { fc1, fc2 }))
    }

    /// Returns the gradient w.r.t. the concatenated (l ⊕ m) rows.
    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &EgnCache<S>,
        dy: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let dh = self.fc2.backward(vars, &cache.fc2, dy, grads);
        self.fc1.backward(vars, &cache.fc1, &dh, grads)
    }
}

// ---------------------------------------------------------------------
// pose: speed head
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PgnSpeed {
    fc1: Dense,
    fc2: Dense,
}

#[derive(Debug)]
pub struct PgnSpeedCache<S> {
    fc1: DenseCache<S>,
    fc2: DenseCache<S>,
    /// Pre-ABS outputs, for the sign mask.
    raw: Tensor<S>,
}

impl PgnSpeed {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_dim: usize,
        hidden: usize,
        pose_dim: usize,
    ) -> Self {
        PgnSpeed {
            fc1: Dense::new(vars, rng, &format!("{path}.fc1"), in_dim, hidden, Activation::Relu),
            fc2: Dense::new(vars, rng, &format!("{path}.fc2"), hidden, pose_dim, Activation::None),
        }
    }

    /// ŝ_t = |MLP(l_t ⊕ m_t)|, entrywise nonnegative.
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        pair: &ModulatedPair<S>,
    ) -> Result<(Tensor<S>, PgnSpeedCache<S>)> {
        require_task(pair, Task::Pose)?;
        let x = pair.concat_rows();
        let (h, fc1) = self.fc1.forward(vars, &x)?;
        let (raw, fc2) = self.fc2.forward(vars, &h)?;
        let mut speed = raw.clone();
        for v in speed.data_mut() {
            *v = v.abs();
        }
        Ok((speed, PgnSpeedCache { fc1, fc2, raw }))
    }

    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &PgnSpeedCache<S>,
        d_speed: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let mut d_raw = d_speed.clone();
        for (d, &r) in d_raw.data_mut().iter_mut().zip(cache.raw.data().iter()) {
            *d = *d * sign(r);
        }
        let dh = self.fc2.backward(vars, &cache.fc2, &d_raw, grads);
        self.fc1.backward(vars, &cache.fc1, &dh, grads)
    }
}

#[inline]
fn sign<S: Real>(x: S) -> S {
    if x > S::zero() {
        S::one()
    } else if x < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

// ---------------------------------------------------------------------
// pose: direction LSTM
// ---------------------------------------------------------------------

use crate::nn::lstm::{lstm_sequence_backward, LstmStepCache};
use crate::nn::{LstmCell, LstmState};

/// Direction head: an LSTM over [l_t ⊕ m_t ⊕ p̂_{t−1} ⊕ v̂_{t−1}] followed by
/// a tanh-bounded linear layer, so d̂_t ∈ [−1, 1] per coordinate.
#[derive(Debug, Clone)]
pub struct PgnDirection {
    pub lstm: LstmCell,
    head: Dense,
    pub pose_dim: usize,
}

#[derive(Debug)]
pub struct PgnDirectionCache<S> {
    steps: Vec<LstmStepCache<S>>,
    head: DenseCache<S>,
    t: usize,
}

impl PgnDirection {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        embed2: usize,
        hidden: usize,
        pose_dim: usize,
    ) -> Self {
        let lstm = LstmCell::new(
            vars,
            rng,
            &format!("{path}.lstm"),
            embed2 + 2 * pose_dim,
            hidden,
        );
        let head = Dense::new(
            vars,
            rng,
            &format!("{path}.fc"),
            hidden,
            pose_dim,
            Activation::Tanh,
        );
        PgnDirection {
            lstm,
            head,
            pose_dim,
        }
    }

    /// One autoregressive step from explicit context.
    pub fn step<S: Real>(
        &self,
        vars: &Vars<S>,
        lm_row: &[S],
        p_prev: &[S],
        v_prev: &[S],
        state: &LstmState<S>,
    ) -> Result<(Vec<S>, LstmState<S>)> {
        let mut input = Vec::with_capacity(lm_row.len() + 2 * self.pose_dim);
        input.extend_from_slice(lm_row);
        input.extend_from_slice(p_prev);
        input.extend_from_slice(v_prev);
        let (o, next, _cache) = self.lstm.step(vars, &input, state)?;
        let (d, _) = self
            .head
            .forward(vars, &Tensor::from_vec(&[1, o.len()], o))?;
        Ok((d.into_data(), next))
    }

    /// Teacher-forced pass over a clip: the pose/velocity context comes from
    /// the ground-truth track (row t−1 and its backward difference, zero at
    /// the first step). Returns (T × pose_dim) directions with row 0 zeroed
    /// (no prediction exists for the seed frame).
    pub fn forward_teacher<S: Real>(
        &self,
        vars: &Vars<S>,
        pair: &ModulatedPair<S>,
        gt_pose: &Tensor<S>,
    ) -> Result<(Tensor<S>, PgnDirectionCache<S>)> {
        require_task(pair, Task::Pose)?;
        let t = pair.frames();
        if gt_pose.rows() != t {
            return Err(Error::LengthMismatch {
                op: "pgn_direction_teacher",
                left: gt_pose.rows(),
                right: t,
            });
        }
        let lm = pair.concat_rows();
        let dim = self.pose_dim;
        let mut inputs = Tensor::zeros(&[t - 1, lm.cols() + 2 * dim]);
        for step in 1..t {
            let row = inputs.row_mut(step - 1);
            row[..lm.cols()].copy_from_slice(lm.row(step));
            row[lm.cols()..lm.cols() + dim].copy_from_slice(gt_pose.row(step - 1));
            if step >= 2 {
                for j in 0..dim {
                    row[lm.cols() + dim + j] = gt_pose.row(step - 1)[j] - gt_pose.row(step - 2)[j];
                }
            }
        }
        let (outputs, steps) = crate::nn::lstm::lstm_sequence(&self.lstm, vars, &inputs)?;
        let (dirs_part, head_cache) = self.head.forward(vars, &outputs)?;
        let mut dirs = Tensor::zeros(&[t, dim]);
        for step in 1..t {
            dirs.row_mut(step).copy_from_slice(dirs_part.row(step - 1));
        }
        Ok((
            dirs,
            PgnDirectionCache {
                steps,
                head: head_cache,
                t,
            },
        ))
    }

    /// Backward of the teacher-forced pass: returns the gradient w.r.t. the
    /// concatenated (l ⊕ m) rows, (T × 2·embed) with row 0 zero. Gradients
    /// into the teacher-forced pose context are discarded (ground truth).
    pub fn backward_teacher<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &PgnDirectionCache<S>,
        d_dirs: &Tensor<S>,
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let t = cache.t;
        let dim = self.pose_dim;
        let mut d_part = Tensor::zeros(&[t - 1, dim]);
        for step in 1..t {
            d_part.row_mut(step - 1).copy_from_slice(d_dirs.row(step));
        }
        let d_out = self.head.backward(vars, &cache.head, &d_part, grads);
        let dx = lstm_sequence_backward(&self.lstm, vars, &cache.steps, &d_out, grads);
        let lm_width = dx.cols() - 2 * dim;
        let mut d_lm = Tensor::zeros(&[t, lm_width]);
        for step in 1..t {
            d_lm.row_mut(step)
                .copy_from_slice(&dx.row(step - 1)[..lm_width]);
        }
        d_lm
    }

    /// Autoregressive rollout from `p0` given per-frame speeds: produces the
    /// direction track (row 0 zero) and the integrated pose track whose row 0
    /// is `p0`.
    pub fn rollout<S: Real>(
        &self,
        vars: &Vars<S>,
        pair: &ModulatedPair<S>,
        speeds: &Tensor<S>,
        p0: &[S],
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        require_task(pair, Task::Pose)?;
        let t = pair.frames();
        if speeds.rows() != t {
            return Err(Error::LengthMismatch {
                op: "pgn_rollout",
                left: speeds.rows(),
                right: t,
            });
        }
        let lm = pair.concat_rows();
        let dim = self.pose_dim;
        let mut dirs = Tensor::zeros(&[t, dim]);
        let mut poses = Tensor::zeros(&[t, dim]);
        poses.row_mut(0).copy_from_slice(p0);
        let mut state = LstmState::zeros(self.lstm.hidden);
        let mut v_prev = vec![S::zero(); dim];
        for step in 1..t {
            let p_prev = poses.row(step - 1).to_vec();
            let (d, next) = self.step(vars, lm.row(step), &p_prev, &v_prev, &state)?;
            state = next;
            for j in 0..dim {
                let delta = speeds.row(step)[j] * d[j];
                poses.row_mut(step)[j] = p_prev[j] + delta;
                v_prev[j] = delta;
            }
            dirs.row_mut(step).copy_from_slice(&d);
        }
        Ok((dirs, poses))
    }
}

// ---------------------------------------------------------------------
// eye: long-close head
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EsgnLong {
    fc1: Dense,
    fc2: Dense,
}

#[derive(Debug)]
pub struct EsgnCache<S> {
    fc1: DenseCache<S>,
    fc2: DenseCache<S>,
    raw: Tensor<S>,
}

impl EsgnLong {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        EsgnLong {
            fc1: Dense::new(vars, rng, &format!("{path}.fc1"), in_dim, hidden, Activation::Relu),
            fc2: Dense::new(vars, rng, &format!("{path}.fc2"), hidden, 1, Activation::None),
        }
    }

    /// ê_long per frame, clamped into [0,1] so the composite rule's
    /// "positive means closed" test is meaningful.
    pub fn forward<S: Real>(
        &self,
        vars: &Vars<S>,
        pair: &ModulatedPair<S>,
    ) -> Result<(EyeTrack<S>, EsgnCache<S>)> {
        require_task(pair, Task::Eye)?;
        let x = pair.concat_rows();
        let (h, fc1) = self.fc1.forward(vars, &x)?;
        let (raw, fc2) = self.fc2.forward(vars, &h)?;
        let values: Vec<S> = raw
            .data()
            .iter()
            .map(|&v| v.max(S::zero()).min(S::one()))
            .collect();
        Ok((
            EyeTrack {
                values,
                kind: EyeKind::Long,
            },
            EsgnCache { fc1, fc2, raw },
        ))
    }

    pub fn backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &EsgnCache<S>,
        d_values: &[S],
        grads: &mut Grads<S>,
    ) -> Tensor<S> {
        let mut d_raw = Tensor::zeros(cache.raw.shape());
        for ((d, &g), &r) in d_raw
            .data_mut()
            .iter_mut()
            .zip(d_values.iter())
            .zip(cache.raw.data().iter())
        {
            // clamp subgradient: zero outside the open interval (0, 1)
            if r > S::zero() && r < S::one() {
                *d = g;
            }
        }
        let dh = self.fc2.backward(vars, &cache.fc2, &d_raw, grads);
        self.fc1.backward(vars, &cache.fc1, &dh, grads)
    }
}

fn require_task<S>(pair: &ModulatedPair<S>, want: Task) -> Result<()> {
    if pair.task == want {
        Ok(())
    } else {
        Err(Error::TaskMismatch {
            expected: want.name().into(),
            got: pair.task.name().into(),
        })
    }
}

// ---------------------------------------------------------------------
// pose integration and decomposition
// ---------------------------------------------------------------------

/// p̂_t = p̂_{t−1} + ŝ_t ⊙ d̂_t for t = 1..T, seeded by p0; returns T rows.
pub fn integrate_pose<S: Real>(
    p0: &[S],
    speeds: &Tensor<S>,
    dirs: &Tensor<S>,
) -> Result<Tensor<S>> {
    if speeds.rows() != dirs.rows() {
        return Err(Error::LengthMismatch {
            op: "integrate_pose",
            left: speeds.rows(),
            right: dirs.rows(),
        });
    }
    let t = speeds.rows();
    let dim = speeds.cols();
    assert_eq!(dirs.cols(), dim);
    assert_eq!(p0.len(), dim);
    let mut out = Tensor::zeros(&[t, dim]);
    let mut prev = p0.to_vec();
    for step in 0..t {
        let s = speeds.row(step);
        let d = dirs.row(step);
        let row = out.row_mut(step);
        for j in 0..dim {
            prev[j] = prev[j] + s[j] * d[j];
            row[j] = prev[j];
        }
    }
    Ok(out)
}

/// Decompose a pose track into (|Δp|, sign(Δp)) with d = 0 where Δp = 0;
/// feeding the result back into [`integrate_pose`] from `track[0]`
/// reproduces rows 1.. of the track.
pub fn decompose_pose<S: Real>(track: &Tensor<S>) -> (Tensor<S>, Tensor<S>) {
    let t = track.rows();
    let dim = track.cols();
    assert!(t >= 2, "need at least two poses to decompose");
    let mut speeds = Tensor::zeros(&[t - 1, dim]);
    let mut dirs = Tensor::zeros(&[t - 1, dim]);
    for step in 1..t {
        let prev = track.row(step - 1);
        let cur = track.row(step);
        let s = speeds.row_mut(step - 1);
        for j in 0..dim {
            s[j] = (cur[j] - prev[j]).abs();
        }
        let d = dirs.row_mut(step - 1);
        for j in 0..dim {
            d[j] = sign(cur[j] - prev[j]);
        }
    }
    (speeds, dirs)
}

// ---------------------------------------------------------------------
// blink sampling, compositing, smoothing
// ---------------------------------------------------------------------

/// Draw alternating open gaps and closures until `duration_s` is covered.
pub fn sample_blink_events(
    duration_s: f64,
    params: &BlinkParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BlinkEvent>> {
    params.validate()?;
    let mut events = Vec::new();
    let mut t = 0.0f64;
    loop {
        let interval = rng.gen_range(params.interval_min_s..params.interval_max_s);
        let duration = rng.gen_range(params.duration_min_s..params.duration_max_s);
        let start = t + interval;
        if start >= duration_s {
            break;
        }
        events.push(BlinkEvent {
            interval_s: interval,
            start_s: start,
            duration_s: duration,
        });
        t = start + duration;
    }
    Ok(events)
}

/// Rasterize closure events to a binary track: frame k is closed when its
/// center time (k + 0.5)/fps falls inside a closure.
pub fn rasterize_blinks<S: Real>(
    events: &[BlinkEvent],
    n_frames: usize,
    fps: f64,
) -> EyeTrack<S> {
    let mut values = vec![S::zero(); n_frames];
    for ev in events {
        let from = (ev.start_s * fps - 0.5).ceil().max(0.0) as usize;
        let to = ((ev.start_s + ev.duration_s) * fps - 0.5).ceil() as usize;
        for v in values.iter_mut().take(to.min(n_frames)).skip(from) {
            *v = S::one();
        }
    }
    EyeTrack {
        values,
        kind: EyeKind::Blink,
    }
}

/// Sampled binary blink track at 30 fps, deterministic given the rng seed.
pub fn sample_blinks<S: Real>(
    duration_s: f64,
    fps: f64,
    params: &BlinkParams,
    rng: &mut ChaCha8Rng,
) -> Result<(EyeTrack<S>, Vec<BlinkEvent>)> {
    let events = sample_blink_events(duration_s, params, rng)?;
    let n_frames = (duration_s * fps + 1e-9).floor() as usize;
    Ok((rasterize_blinks(&events, n_frames, fps), events))
}

/// ê_t = ê_long_t when it is positive, otherwise the blink branch.
pub fn composite_eye<S: Real>(blink: &EyeTrack<S>, long: &EyeTrack<S>) -> Result<EyeTrack<S>> {
    if blink.len() != long.len() {
        return Err(Error::LengthMismatch {
            op: "composite_eye",
            left: blink.len(),
            right: long.len(),
        });
    }
    let values = blink
        .values
        .iter()
        .zip(long.values.iter())
        .map(|(&b, &l)| if l > S::zero() { l } else { b })
        .collect();
    Ok(EyeTrack {
        values,
        kind: EyeKind::Composite,
    })
}

/// Gaussian smoothing over time: kernel truncated at 3σ, edge replication,
/// output clamped to [0,1].
pub fn smooth_eye<S: Real>(track: &EyeTrack<S>, sigma_frames: f64) -> EyeTrack<S> {
    assert!(sigma_frames > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma_frames).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for j in -radius..=radius {
        kernel.push((-((j * j) as f64) / (2.0 * sigma_frames * sigma_frames)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<S> = kernel.into_iter().map(|k| real(k / norm)).collect();

    let n = track.len() as isize;
    let mut values = Vec::with_capacity(track.len());
    for i in 0..n {
        let mut acc = S::zero();
        for (idx, &k) in kernel.iter().enumerate() {
            let j = (i + idx as isize - radius).clamp(0, n - 1);
            acc = acc + k * track.values[j as usize];
        }
        values.push(acc.max(S::zero()).min(S::one()));
    }
    EyeTrack {
        values,
        kind: track.kind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pair(task: Task, t: usize, embed: usize) -> ModulatedPair<f64> {
        let l = Tensor::from_vec(
            &[t, embed],
            (0..t * embed).map(|i| (i as f64 * 0.3).sin()).collect(),
        );
        let m = Tensor::from_vec(
            &[t, embed],
            (0..t * embed).map(|i| (i as f64 * 0.7).cos()).collect(),
        );
        ModulatedPair { l, m, task }
    }

    #[test]
    fn egn_zero_weights_zero_track() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let egn = Egn::new(&mut vars, &mut rng, "egn", 8, 5, 4);
        vars.load_flat(&vec![0.0; vars.total_elements()]);
        let (y, _) = egn.forward(&vars, &pair(Task::Exp, 3, 4)).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));
        assert_eq!(y.shape(), &[3, 4]);
    }

    #[test]
    fn egn_rejects_wrong_task() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let egn = Egn::new(&mut vars, &mut rng, "egn", 8, 5, 4);
        assert!(matches!(
            egn.forward(&vars, &pair(Task::Pose, 3, 4)),
            Err(Error::TaskMismatch { .. })
        ));
    }

    #[test]
    fn speed_is_nonnegative_for_random_params() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = PgnSpeed::new(&mut vars, &mut rng, "speed", 8, 6, 6);
        let (speed, _) = head.forward(&vars, &pair(Task::Pose, 10, 4)).unwrap();
        assert!(speed.data().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn esgn_clamps_into_unit_interval() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let head = EsgnLong::new(&mut vars, &mut rng, "eye", 8, 5);
        // scale weights up to force saturation on both sides
        let mut flat = vars.flatten();
        for v in flat.iter_mut() {
            *v *= 40.0;
        }
        vars.load_flat(&flat);
        let (track, _) = head.forward(&vars, &pair(Task::Eye, 12, 4)).unwrap();
        assert!(track.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(track.values.iter().any(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn integrate_constant_zero_speed() {
        let speeds = Tensor::zeros(&[5, 3]);
        let dirs = Tensor::filled(&[5, 3], 1.0);
        let p0 = [0.5, -0.2, 0.0];
        let track = integrate_pose(&p0, &speeds, &dirs).unwrap();
        for r in 0..5 {
            assert_eq!(track.row(r), &p0[..]);
        }
    }

    #[test]
    fn integrate_unit_ramp() {
        let speeds = Tensor::filled(&[4, 2], 1.0);
        let dirs = Tensor::filled(&[4, 2], 1.0);
        let track = integrate_pose(&[0.0, 0.0], &speeds, &dirs).unwrap();
        for r in 0..4 {
            assert_eq!(track.row(r), &[(r + 1) as f64, (r + 1) as f64]);
        }
    }

    #[test]
    fn roundtrip_reproduces_track_bitwise() {
        // poses on a dyadic grid: all additions and differences are exact
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = 60;
        let mut track = Tensor::zeros(&[t, 6]);
        for r in 0..t {
            for c in 0..6 {
                let q: i64 = rng.gen_range(-(1 << 20)..(1 << 20));
                track.row_mut(r)[c] = q as f64 / (1u64 << 20) as f64;
            }
        }
        let (speeds, dirs) = decompose_pose(&track);
        let rebuilt = integrate_pose(track.row(0), &speeds, &dirs).unwrap();
        for r in 1..t {
            for c in 0..6 {
                assert!(
                    rebuilt.row(r - 1)[c].to_bits() == track.row(r)[c].to_bits(),
                    "row {r} col {c}"
                );
            }
        }
    }

    #[test]
    fn blink_events_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = BlinkParams::default();
        let events = sample_blink_events(120.0, &params, &mut rng).unwrap();
        assert!(!events.is_empty());
        for ev in &events {
            assert!(ev.interval_s >= 1.2 && ev.interval_s <= 2.0);
            assert!(ev.duration_s >= 0.10 && ev.duration_s <= 0.45);
        }
    }

    #[test]
    fn blink_sampling_deterministic() {
        let params = BlinkParams::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let (a, ea) = sample_blinks::<f64>(20.0, 30.0, &params, &mut r1).unwrap();
        let (b, eb) = sample_blinks::<f64>(20.0, 30.0, &params, &mut r2).unwrap();
        assert_eq!(a, b);
        assert_eq!(ea, eb);
    }

    #[test]
    fn composite_prefers_positive_long() {
        let blink = EyeTrack {
            values: vec![0.0, 1.0, 1.0],
            kind: EyeKind::Blink,
        };
        let long = EyeTrack {
            values: vec![0.7, 0.0, 0.4],
            kind: EyeKind::Long,
        };
        let c = composite_eye(&blink, &long).unwrap();
        assert_eq!(c.values, vec![0.7, 1.0, 0.4]);
    }

    #[test]
    fn composite_equals_blink_when_long_zero() {
        let blink = EyeTrack {
            values: vec![0.0, 1.0, 0.0, 1.0],
            kind: EyeKind::Blink,
        };
        let long = EyeTrack {
            values: vec![0.0; 4],
            kind: EyeKind::Long,
        };
        let c = composite_eye(&blink, &long).unwrap();
        assert_eq!(c.values, blink.values);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let track = EyeTrack {
            values: vec![0.6f64; 50],
            kind: EyeKind::Composite,
        };
        let sm = smooth_eye(&track, 2.0);
        for v in sm.values {
            assert!((v - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_smooths_to_symmetric_bell() {
        let mut values = vec![0.0f64; 41];
        values[20] = 1.0;
        let track = EyeTrack {
            values,
            kind: EyeKind::Composite,
        };
        let sm = smooth_eye(&track, 2.0);
        let peak = sm
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 20);
        for d in 1..6 {
            assert!((sm.values[20 - d] - sm.values[20 + d]).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let track = EyeTrack {
            values: values.clone(),
            kind: EyeKind::Composite,
        };
        let sigma = 1.7;
        let sm = smooth_eye(&track, sigma);

        // independent direct convolution
        let radius = (3.0 * sigma).ceil() as isize;
        let weights: Vec<f64> = (-radius..=radius)
            .map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = weights.iter().sum();
        for i in 0..values.len() as isize {
            let mut acc = 0.0;
            for (w_idx, j) in (-radius..=radius).enumerate() {
                let src = (i + j).clamp(0, values.len() as i64 as isize - 1);
                acc += weights[w_idx] / norm * values[src as usize];
            }
            let acc = acc.clamp(0.0, 1.0);
            assert!((sm.values[i as usize] - acc).abs() < 1e-9);
        }
    }
}
