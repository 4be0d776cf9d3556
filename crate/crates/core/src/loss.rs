//! Training objectives: MSE, L1, velocity matching, kernel two-sample (MMD)
//! with an RBF mixture, attention sparsity, and the least-squares adversarial
//! pair, plus the weighted regression assembly and its per-step report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tensor::Tensor;

/// Balancing weights of the regression terms and the total-objective mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub w_exp_mse: f64,
    pub w_exp_vel: f64,
    pub w_pose_mmd: f64,
    pub w_pose_speed_l1: f64,
    pub w_eye_l1: f64,
    pub w_eye_mmd: f64,
    pub lambda_reg: f64,
    pub lambda_adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_exp_mse: 5.0,
            w_exp_vel: 50.0,
            w_pose_mmd: 1.0,
            w_pose_speed_l1: 10.0,
            w_eye_l1: 5.0,
            w_eye_mmd: 1.0,
            lambda_reg: 1.0,
            lambda_adv: 0.1,
        }
    }
}

/// Per-step scalar losses. `total` is λ_reg·l_reg + λ_adv·l_adv_g.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_exp: f64,
    pub l_pose: f64,
    pub l_eye: f64,
    pub l_att: f64,
    pub l_reg: f64,
    pub l_adv_g: f64,
    pub l_adv_d: f64,
    pub total: f64,
}

impl LossReport {
    pub fn assert_finite(&self) -> Result<()> {
        let vals = [
            self.l_exp, self.l_pose, self.l_eye, self.l_att, self.l_reg, self.l_adv_g,
            self.l_adv_d, self.total,
        ];
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteLoss(format!("{self:?}")))
        }
    }
}

fn check_same_shape<S: Real>(op: &'static str, x: &Tensor<S>, y: &Tensor<S>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            op,
            expected: format!("{:?}", x.shape()),
            got: format!("{:?}", y.shape()),
        });
    }
    Ok(())
}

/// (1/T)·Σ_t ‖x_t − x̂_t‖²
pub fn mse_loss<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<S> {
    Ok(mse_with_grad(x, x_hat)?.0)
}

/// Value and gradient w.r.t. `x_hat`.
pub fn mse_with_grad<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    check_same_shape("mse_loss", x, x_hat)?;
    let t = real::<S>(x.shape()[0] as f64);
    let mut grad = Tensor::zeros(x.shape());
    let mut acc = S::zero();
    for ((g, &a), &b) in grad
        .data_mut()
        .iter_mut()
        .zip(x.data().iter())
        .zip(x_hat.data().iter())
    {
        let d = b - a;
        acc = acc + d * d;
        *g = real::<S>(2.0) * d / t;
    }
    Ok((acc / t, grad))
}

/// (1/T)·Σ_t ‖x_t − x̂_t‖₁
pub fn l1_loss<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<S> {
    Ok(l1_with_grad(x, x_hat)?.0)
}

pub fn l1_with_grad<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    check_same_shape("l1_loss", x, x_hat)?;
    let t = real::<S>(x.shape()[0] as f64);
    let mut grad = Tensor::zeros(x.shape());
    let mut acc = S::zero();
    for ((g, &a), &b) in grad
        .data_mut()
        .iter_mut()
        .zip(x.data().iter())
        .zip(x_hat.data().iter())
    {
        let d = b - a;
        acc = acc + d.abs();
        *g = if d > S::zero() {
            S::one() / t
        } else if d < S::zero() {
            -S::one() / t
        } else {
            S::zero()
        };
    }
    Ok((acc / t, grad))
}

/// (1/(T−1))·Σ_{t=1}^{T−1} ‖(x_t−x_{t−1}) − (x̂_t−x̂_{t−1})‖²
pub fn velocity_loss<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<S> {
    Ok(velocity_with_grad(x, x_hat)?.0)
}

pub fn velocity_with_grad<S: Real>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    check_same_shape("velocity_loss", x, x_hat)?;
    let t = x.shape()[0];
    if t < 2 {
        return Err(Error::TooShort(
            "velocity loss needs at least two frames".into(),
        ));
    }
    let d = x.shape()[1];
    let norm = real::<S>((t - 1) as f64);
    // e_t = Δx̂_t − Δx_t, rows 1..T−1; dL/dx̂_t = (2/(T−1))·(e_t − e_{t+1})
    let mut err = Tensor::zeros(&[t, d]);
    let mut acc = S::zero();
    for step in 1..t {
        for j in 0..d {
            let dx = x.row(step)[j] - x.row(step - 1)[j];
            let dxh = x_hat.row(step)[j] - x_hat.row(step - 1)[j];
            let e = dxh - dx;
            err.row_mut(step)[j] = e;
            acc = acc + e * e;
        }
    }
    let mut grad = Tensor::zeros(x.shape());
    let two = real::<S>(2.0);
    for step in 0..t {
        for j in 0..d {
            let e_cur = if step >= 1 { err.row(step)[j] } else { S::zero() };
            let e_next = if step + 1 < t {
                err.row(step + 1)[j]
            } else {
                S::zero()
            };
            grad.row_mut(step)[j] = two * (e_cur - e_next) / norm;
        }
    }
    Ok((acc / norm, grad))
}

// ---------------------------------------------------------------------
// maximum mean discrepancy
// ---------------------------------------------------------------------

/// Bandwidth multipliers applied to the median pairwise distance.
pub const MMD_BANDWIDTH_SCALES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Median pairwise Euclidean distance over the pooled samples; the usual
/// bandwidth heuristic. Falls back to 1 when every distance is zero.
pub fn median_pairwise_distance<S: Real>(x: &Tensor<S>, y: &Tensor<S>) -> f64 {
    let mut pts: Vec<&[S]> = Vec::with_capacity(x.rows() + y.rows());
    for r in 0..x.rows() {
        pts.push(x.row(r));
    }
    for r in 0..y.rows() {
        pts.push(y.row(r));
    }
    let mut dists = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d2: f64 = pts[i]
                .iter()
                .zip(pts[j].iter())
                .map(|(&a, &b)| (a - b).to_f64_c().powi(2))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = dists[dists.len() / 2];
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Unbiased MMD² with an RBF mixture at the given bandwidths, clamped at
/// zero, with the gradient w.r.t. the rows of `y`. Bandwidths are treated as
/// constants (no gradient through the median heuristic).
pub fn mmd_core_with_grad<S: Real>(
    x: &Tensor<S>,
    y: &Tensor<S>,
    sigmas: &[f64],
) -> Result<(S, Tensor<S>)> {
    if x.rows() == 0 {
        return Err(Error::EmptySet("mmd_loss x"));
    }
    if y.rows() == 0 {
        return Err(Error::EmptySet("mmd_loss y"));
    }
    if x.cols() != y.cols() {
        return Err(Error::ShapeMismatch {
            op: "mmd_loss",
            expected: format!("dim {}", x.cols()),
            got: format!("dim {}", y.cols()),
        });
    }
    let n = x.rows();
    let m = y.rows();
    let dim = x.cols();
    let k_count = real::<S>(sigmas.len() as f64);

    // mixture kernel k(a,b) = mean_j exp(−‖a−b‖²/(2σ_j²)), and its
    // derivative factor w.r.t. (a−b)
    let kernel = |a: &[S], b: &[S]| -> (S, S) {
        let mut r2 = S::zero();
        for (&av, &bv) in a.iter().zip(b.iter()) {
            let d = av - bv;
            r2 = r2 + d * d;
        }
        let mut k = S::zero();
        let mut dk_dr2 = S::zero();
        for &s in sigmas {
            let denom = real::<S>(2.0 * s * s);
            let e = (-r2 / denom).exp();
            k = k + e;
            dk_dr2 = dk_dr2 - e / denom;
        }
        (k / k_count, dk_dr2 / k_count)
    };

    let mut grad = Tensor::zeros(y.shape());
    let mut sum_xx = S::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum_xx = sum_xx + kernel(x.row(i), x.row(j)).0;
            }
        }
    }
    let mut sum_yy = S::zero();
    let coef_yy = real::<S>(1.0 / (m as f64 * (m as f64 - 1.0)).max(1.0));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (k, dk) = kernel(y.row(i), y.row(j));
            sum_yy = sum_yy + k;
            // Row i's full gradient for the unordered pair {i,j}: the sum
            // contains k(y_i,y_j) and k(y_j,y_i), each contributing
            // 2·dk·(y_i−y_j), so account 4·dk·(y_i−y_j) here and let the
            // (j,i) visit do the same for row j.
            for c in 0..dim {
                let diff = y.row(i)[c] - y.row(j)[c];
                grad.row_mut(i)[c] = grad.row(i)[c] + coef_yy * dk * real::<S>(4.0) * diff;
            }
        }
    }
    let mut sum_xy = S::zero();
    let coef_xy = real::<S>(2.0 / (n as f64 * m as f64));
    for j in 0..m {
        for i in 0..n {
            let (k, dk) = kernel(x.row(i), y.row(j));
            sum_xy = sum_xy + k;
            for c in 0..dim {
                let diff = y.row(j)[c] - x.row(i)[c];
                grad.row_mut(j)[c] = grad.row(j)[c] - coef_xy * dk * real::<S>(2.0) * diff;
            }
        }
    }

    let term_xx = if n > 1 {
        sum_xx / real::<S>((n * (n - 1)) as f64)
    } else {
        S::zero()
    };
    let term_yy = if m > 1 { sum_yy * coef_yy } else { S::zero() };
    let value = term_xx + term_yy - coef_xy * sum_xy;
    if value <= S::zero() {
        // clamped at zero: flat region, no gradient
        return Ok((S::zero(), Tensor::zeros(y.shape())));
    }
    Ok((value, grad))
}

/// MMD with median-heuristic bandwidths (×{1,2,4,8,16}).
pub fn mmd_loss<S: Real>(x: &Tensor<S>, y: &Tensor<S>) -> Result<S> {
    Ok(mmd_with_grad(x, y)?.0)
}

pub fn mmd_with_grad<S: Real>(x: &Tensor<S>, y: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    if x.rows() == 0 {
        return Err(Error::EmptySet("mmd_loss x"));
    }
    if y.rows() == 0 {
        return Err(Error::EmptySet("mmd_loss y"));
    }
    let med = median_pairwise_distance(x, y);
    let sigmas: Vec<f64> = MMD_BANDWIDTH_SCALES.iter().map(|s| s * med).collect();
    mmd_core_with_grad(x, y, &sigmas)
}

// ---------------------------------------------------------------------
// attention sparsity
// ---------------------------------------------------------------------

/// Sum over the three task masks of the mean absolute attention value.
/// The mean (rather than a raw entry sum) keeps this term O(1) against the
/// other losses regardless of mask size.
pub fn attention_sparsity_loss<S: Real>(masks: &[&Tensor<S>; 3]) -> S {
    masks.iter().map(|m| mean_abs(m)).sum()
}

pub fn attention_sparsity_with_grads<S: Real>(
    masks: &[&Tensor<S>; 3],
) -> (S, [Tensor<S>; 3]) {
    let value = attention_sparsity_loss(masks);
    let grads = [
        mean_abs_grad(masks[0]),
        mean_abs_grad(masks[1]),
        mean_abs_grad(masks[2]),
    ];
    (value, grads)
}

fn mean_abs<S: Real>(x: &Tensor<S>) -> S {
    let n = real::<S>(x.numel() as f64);
    x.data().iter().map(|v| v.abs()).sum::<S>() / n
}

fn mean_abs_grad<S: Real>(x: &Tensor<S>) -> Tensor<S> {
    let n = real::<S>(x.numel() as f64);
    let mut g = Tensor::zeros(x.shape());
    for (gv, &v) in g.data_mut().iter_mut().zip(x.data().iter()) {
        *gv = if v > S::zero() {
            S::one() / n
        } else if v < S::zero() {
            -S::one() / n
        } else {
            S::zero()
        };
    }
    g
}

// ---------------------------------------------------------------------
// least-squares adversarial pair
// ---------------------------------------------------------------------

/// L_D = ½·mean((d_real−1)²) + ½·mean(d_fake²); L_G = ½·mean((d_fake−1)²)
pub fn lsgan_losses<S: Real>(d_real: &[S], d_fake: &[S]) -> (S, S) {
    let half = real::<S>(0.5);
    let nr = real::<S>(d_real.len() as f64);
    let nf = real::<S>(d_fake.len() as f64);
    let one = S::one();
    let l_d = half * d_real.iter().map(|&v| (v - one) * (v - one)).sum::<S>() / nr
        + half * d_fake.iter().map(|&v| v * v).sum::<S>() / nf;
    let l_g = half * d_fake.iter().map(|&v| (v - one) * (v - one)).sum::<S>() / nf;
    (l_d, l_g)
}

/// Gradients of L_D w.r.t. both score vectors.
pub fn lsgan_d_grads<S: Real>(d_real: &[S], d_fake: &[S]) -> (Vec<S>, Vec<S>) {
    let nr = real::<S>(d_real.len() as f64);
    let nf = real::<S>(d_fake.len() as f64);
    let one = S::one();
    (
        d_real.iter().map(|&v| (v - one) / nr).collect(),
        d_fake.iter().map(|&v| v / nf).collect(),
    )
}

/// Gradient of L_G w.r.t. the fake scores.
pub fn lsgan_g_grad<S: Real>(d_fake: &[S]) -> Vec<S> {
    let nf = real::<S>(d_fake.len() as f64);
    let one = S::one();
    d_fake.iter().map(|&v| (v - one) / nf).collect()
}
