//! Dense matrix kernels shared by convolution (via im2col) and fully
//! connected layers. All variants accumulate into `c` so gradient passes can
//! sum contributions without temporaries; callers zero `c` when they need a
//! plain product. Loops are ordered so the innermost dimension walks
//! contiguous memory, which is what the autovectorizer needs.

use crate::scalar::Real;

/// c[M×N] += a[M×K] · b[K×N]
pub fn matmul_nn<S: Real>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        // Unroll k by 4: four b-rows stream through each pass over c_row.
        let mut kk = 0;
        while kk + 4 <= k {
            let (a0, a1, a2, a3) = (a_row[kk], a_row[kk + 1], a_row[kk + 2], a_row[kk + 3]);
            let b0 = &b[kk * n..(kk + 1) * n];
            let b1 = &b[(kk + 1) * n..(kk + 2) * n];
            let b2 = &b[(kk + 2) * n..(kk + 3) * n];
            let b3 = &b[(kk + 3) * n..(kk + 4) * n];
            for ((((cv, &v0), &v1), &v2), &v3) in c_row
                .iter_mut()
                .zip(b0.iter())
                .zip(b1.iter())
                .zip(b2.iter())
                .zip(b3.iter())
            {
                *cv = *cv + a0 * v0 + a1 * v1 + a2 * v2 + a3 * v3;
            }
            kk += 4;
        }
        for kk in kk..k {
            let av = a_row[kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row.iter()) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// c[M×N] += a[M×K] · b[N×K]ᵀ  (dot-product form)
pub fn matmul_nt<S: Real>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (cv, b_row) in c_row.iter_mut().zip(b.chunks_exact(k)) {
            *cv = *cv + dot(a_row, b_row);
        }
    }
}

/// Dot product with eight independent accumulators so the reduction does not
/// serialize on a single dependency chain.
#[inline]
pub fn dot<S: Real>(x: &[S], y: &[S]) -> S {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [S::zero(); 8];
    let mut xc = x.chunks_exact(8);
    let mut yc = y.chunks_exact(8);
    for (xv, yv) in (&mut xc).zip(&mut yc) {
        for i in 0..8 {
            acc[i] = acc[i] + xv[i] * yv[i];
        }
    }
    let mut tail = S::zero();
    for (&xv, &yv) in xc.remainder().iter().zip(yc.remainder().iter()) {
        tail = tail + xv * yv;
    }
    let head = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    head + tail
}

/// c[M×N] += a[K×M]ᵀ · b[K×N]
pub fn matmul_tn<S: Real>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)).take(k) {
        for (&av, c_row) in a_row.iter().zip(c.chunks_exact_mut(n)) {
            for (cv, &bv) in c_row.iter_mut().zip(b_row.iter()) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// y[M] += a[M×N] · x[N]
pub fn matvec<S: Real>(a: &[S], x: &[S], y: &mut [S], m: usize, n: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(y.len(), m);
    for (yv, a_row) in y.iter_mut().zip(a.chunks_exact(n)) {
        let mut acc = S::zero();
        for (&av, &xv) in a_row.iter().zip(x.iter()) {
            acc = acc + av * xv;
        }
        *yv = *yv + acc;
    }
}

/// y[N] += a[M×N]ᵀ · x[M]
pub fn matvec_t<S: Real>(a: &[S], x: &[S], y: &mut [S], m: usize, n: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(x.len(), m);
    debug_assert_eq!(y.len(), n);
    for (&xv, a_row) in x.iter().zip(a.chunks_exact(n)).take(m) {
        for (yv, &av) in y.iter_mut().zip(a_row.iter()) {
            *yv = *yv + xv * av;
        }
    }
}

/// y += x·alpha
pub fn axpy<S: Real>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yv, &xv) in y.iter_mut().zip(x.iter()) {
        *yv = *yv + alpha * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn variants_agree_with_naive() {
        let (m, k, n) = (5, 7, 9);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive(&a, &b, m, k, n);

        let mut c = vec![0.0; m * n];
        matmul_nn(&a, &b, &mut c, m, k, n);
        for (x, y) in c.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-12);
        }

        // b transposed copy for nt
        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_nt(&a, &bt, &mut c, m, k, n);
        for (x, y) in c.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-12);
        }

        // a transposed copy for tn
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_tn(&at, &b, &mut c, m, k, n);
        for (x, y) in c.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_agrees() {
        let (m, n) = (4, 6);
        let a: Vec<f64> = (0..m * n).map(|i| i as f64 * 0.5 - 3.0).collect();
        let x: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let mut y = vec![0.0; m];
        matvec(&a, &x, &mut y, m, n);
        for i in 0..m {
            let want: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12);
        }
        let mut yt = vec![0.0; n];
        let xv: Vec<f64> = (0..m).map(|i| i as f64 - 1.5).collect();
        matvec_t(&a, &xv, &mut yt, m, n);
        for j in 0..n {
            let want: f64 = (0..m).map(|i| a[i * n + j] * xv[i]).sum();
            assert!((yt[j] - want).abs() < 1e-12);
        }
    }
}
