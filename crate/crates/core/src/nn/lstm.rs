//! Single-layer LSTM cell with explicit backward-through-time.

use rand_chacha::ChaCha8Rng;

use super::kernel::{axpy, matvec, matvec_t};
use super::param::{Grads, ParamId, Vars};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::nn::act::sigmoid;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LstmCell {
    /// Input weights (4H × in), gate order i, f, g, o.
    pub w_ih: ParamId,
    /// Recurrent weights (4H × H).
    pub w_hh: ParamId,
    /// Bias (4H).
    pub b: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

/// Hidden and cell state of one LSTM instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<S> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Real> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![S::zero(); hidden],
            c: vec![S::zero(); hidden],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Debug)]
pub struct LstmStepCache<S> {
    x: Vec<S>,
    h_prev: Vec<S>,
    c_prev: Vec<S>,
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
    c: Vec<S>,
    tanh_c: Vec<S>,
}

impl LstmCell {
    pub fn new<S: Real>(
        vars: &mut Vars<S>,
        rng: &mut ChaCha8Rng,
        path: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        let w_ih = vars.add_uniform(format!("{path}.w_ih"), &[4 * hidden, in_dim], hidden, rng);
        let w_hh = vars.add_uniform(format!("{path}.w_hh"), &[4 * hidden, hidden], hidden, rng);
        let b = vars.add_uniform(format!("{path}.b"), &[4 * hidden], hidden, rng);
        LstmCell {
            w_ih,
            w_hh,
            b,
            in_dim,
            hidden,
        }
    }

    /// One step: returns the output h (the LSTM output o_t in the usual
    /// formulation equals the new hidden state) plus the new state.
    pub fn step<S: Real>(
        &self,
        vars: &Vars<S>,
        x: &[S],
        state: &LstmState<S>,
    ) -> Result<(Vec<S>, LstmState<S>, LstmStepCache<S>)> {
        if x.len() != self.in_dim {
            return Err(Error::ShapeMismatch {
                op: "lstm_step",
                expected: format!("input width {}", self.in_dim),
                got: format!("{}", x.len()),
            });
        }
        if state.h.len() != self.hidden || state.c.len() != self.hidden {
            return Err(Error::ShapeMismatch {
                op: "lstm_step",
                expected: format!("state width {}", self.hidden),
                got: format!("{}/{}", state.h.len(), state.c.len()),
            });
        }
        let h = self.hidden;
        let mut z = vars.get(self.b).data().to_vec();
        matvec(vars.get(self.w_ih).data(), x, &mut z, 4 * h, self.in_dim);
        matvec(vars.get(self.w_hh).data(), &state.h, &mut z, 4 * h, h);

        let mut i = vec![S::zero(); h];
        let mut f = vec![S::zero(); h];
        let mut g = vec![S::zero(); h];
        let mut o = vec![S::zero(); h];
        for j in 0..h {
            i[j] = sigmoid(z[j]);
            f[j] = sigmoid(z[h + j]);
            g[j] = z[2 * h + j].tanh();
            o[j] = sigmoid(z[3 * h + j]);
        }
        let mut c = vec![S::zero(); h];
        let mut tanh_c = vec![S::zero(); h];
        let mut h_new = vec![S::zero(); h];
        for j in 0..h {
            c[j] = f[j] * state.c[j] + i[j] * g[j];
            tanh_c[j] = c[j].tanh();
            h_new[j] = o[j] * tanh_c[j];
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            i,
            f,
            g,
            o,
            c: c.clone(),
            tanh_c,
        };
        Ok((
            h_new.clone(),
            LstmState { h: h_new, c },
            cache,
        ))
    }

    /// Backward through one step. `dh` is the gradient w.r.t. the step output
    /// plus any gradient flowing back into the next step's h; `dc_next` the
    /// gradient w.r.t. the outgoing cell state. Returns (dx, dh_prev, dc_prev).
    pub fn step_backward<S: Real>(
        &self,
        vars: &Vars<S>,
        cache: &LstmStepCache<S>,
        dh: &[S],
        dc_next: &[S],
        grads: &mut Grads<S>,
    ) -> (Vec<S>, Vec<S>, Vec<S>) {
        let h = self.hidden;
        let mut dc = vec![S::zero(); h];
        let mut dz = vec![S::zero(); 4 * h];
        for j in 0..h {
            let d_tanh_c = dh[j] * cache.o[j];
            dc[j] = dc_next[j] + d_tanh_c * (S::one() - cache.tanh_c[j] * cache.tanh_c[j]);
            let di = dc[j] * cache.g[j];
            let df = dc[j] * cache.c_prev[j];
            let dg = dc[j] * cache.i[j];
            let do_ = dh[j] * cache.tanh_c[j];
            dz[j] = di * cache.i[j] * (S::one() - cache.i[j]);
            dz[h + j] = df * cache.f[j] * (S::one() - cache.f[j]);
            dz[2 * h + j] = dg * (S::one() - cache.g[j] * cache.g[j]);
            dz[3 * h + j] = do_ * cache.o[j] * (S::one() - cache.o[j]);
        }

        // dW_ih += dz ⊗ x ; dW_hh += dz ⊗ h_prev ; db += dz
        {
            let dw = grads.get_mut(self.w_ih).data_mut();
            for (j, &d) in dz.iter().enumerate() {
                axpy(d, &cache.x, &mut dw[j * self.in_dim..(j + 1) * self.in_dim]);
            }
        }
        {
            let dw = grads.get_mut(self.w_hh).data_mut();
            for (j, &d) in dz.iter().enumerate() {
                axpy(d, &cache.h_prev, &mut dw[j * h..(j + 1) * h]);
            }
        }
        {
            let db = grads.get_mut(self.b).data_mut();
            for (d, &v) in db.iter_mut().zip(dz.iter()) {
                *d = *d + v;
            }
        }

        let mut dx = vec![S::zero(); self.in_dim];
        matvec_t(vars.get(self.w_ih).data(), &dz, &mut dx, 4 * h, self.in_dim);
        let mut dh_prev = vec![S::zero(); h];
        matvec_t(vars.get(self.w_hh).data(), &dz, &mut dh_prev, 4 * h, h);
        let dc_prev: Vec<S> = dc.iter().zip(cache.f.iter()).map(|(&d, &f)| d * f).collect();
        (dx, dh_prev, dc_prev)
    }
}

/// Convenience: run a full sequence forward, collecting outputs and caches.
pub fn lstm_sequence<S: Real>(
    cell: &LstmCell,
    vars: &Vars<S>,
    inputs: &Tensor<S>,
) -> Result<(Tensor<S>, Vec<LstmStepCache<S>>)> {
    let t = inputs.rows();
    let mut state = LstmState::zeros(cell.hidden);
    let mut outputs = Tensor::zeros(&[t, cell.hidden]);
    let mut caches = Vec::with_capacity(t);
    for step in 0..t {
        let (h, next, cache) = cell.step(vars, inputs.row(step), &state)?;
        outputs.row_mut(step).copy_from_slice(&h);
        caches.push(cache);
        state = next;
    }
    Ok((outputs, caches))
}

/// Backward over a full sequence; `d_out` holds per-step output gradients.
pub fn lstm_sequence_backward<S: Real>(
    cell: &LstmCell,
    vars: &Vars<S>,
    caches: &[LstmStepCache<S>],
    d_out: &Tensor<S>,
    grads: &mut Grads<S>,
) -> Tensor<S> {
    let t = caches.len();
    let mut dx_all = Tensor::zeros(&[t, cell.in_dim]);
    let mut dh = vec![S::zero(); cell.hidden];
    let mut dc = vec![S::zero(); cell.hidden];
    for step in (0..t).rev() {
        for (a, &b) in dh.iter_mut().zip(d_out.row(step).iter()) {
            *a = *a + b;
        }
        let (dx, dh_prev, dc_prev) = cell.step_backward(vars, &caches[step], &dh, &dc, grads);
        dx_all.row_mut(step).copy_from_slice(&dx);
        dh = dh_prev;
        dc = dc_prev;
    }
    dx_all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Zero weights and zero state: gates sit at 0.5, tanh(0)=0, output zero.
    #[test]
    fn zero_weights_zero_output() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut vars, &mut rng, "lstm", 4, 3);
        for id in [cell.w_ih, cell.w_hh, cell.b] {
            vars.get_mut(id).fill(0.0);
        }
        let state = LstmState::zeros(3);
        let (out, next, _) = cell.step(&vars, &[1.0, -2.0, 3.0, 0.5], &state).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        assert!(next.c.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn step_is_deterministic() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = LstmCell::new(&mut vars, &mut rng, "lstm", 5, 4);
        let state = LstmState {
            h: vec![0.1, -0.2, 0.3, 0.0],
            c: vec![0.5, 0.4, -0.1, 0.2],
        };
        let x = [0.3, -0.6, 0.9, 0.1, -0.4];
        let (a, sa, _) = cell.step(&vars, &x, &state).unwrap();
        let (b, sb, _) = cell.step(&vars, &x, &state).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn wrong_input_width_rejected() {
        let mut vars = Vars::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut vars, &mut rng, "lstm", 6, 2);
        let state = LstmState::zeros(2);
        assert!(cell.step(&vars, &[1.0; 5], &state).is_err());
    }
}
