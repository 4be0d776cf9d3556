//! Finite-difference gradient verification.
//!
//! Central differences at two step sizes: coordinates where the two
//! finite-difference estimates disagree sit on (or numerically near) a
//! non-smooth point of the function — a ReLU/ABS/clamp kink — and are
//! excluded from the comparison rather than counted as failures. The
//! remaining coordinates must match the analytic gradient within the given
//! relative tolerance.

/// Default step for f64 checks.
pub const FD_STEP: f64 = 1e-5;
/// Coordinates whose two FD estimates differ relatively by more than this
/// are flagged non-smooth and excluded.
pub const FD_CONSISTENCY_TOL: f64 = 1e-3;
/// Absolute floor below which gradients are compared absolutely. Central
/// differences of an O(1) function at step 1e-5 carry ~1e-10 of roundoff
/// noise, so exactly-zero gradients (a bias feeding straight into batch
/// norm, say) need a floor well above that noise: with tolerance 1e-4 this
/// floor admits absolute deviations up to 1e-8.
pub const FD_ABS_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub excluded: usize,
    pub tolerance: f64,
    pub worst_index: Option<usize>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err <= self.tolerance
    }
}

/// Compare an analytic gradient against central finite differences of a
/// scalar function over a flat parameter vector.
///
/// `coords`: optional subset of coordinate indices to probe (large models);
/// `None` probes every coordinate.
pub fn grad_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
    coords: Option<&[usize]>,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let all: Vec<usize>;
    let idx: &[usize] = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };

    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut checked = 0usize;
    let mut excluded = 0usize;

    for &i in idx {
        let x0 = work[i];
        // Scale the step with the coordinate magnitude for conditioning.
        let h = FD_STEP * (1.0 + x0.abs());

        let fd_at = |work: &mut Vec<f64>, f: &mut F, step: f64| {
            work[i] = x0 + step;
            let fp = f(work);
            work[i] = x0 - step;
            let fm = f(work);
            work[i] = x0;
            (fp - fm) / (2.0 * step)
        };
        let fd1 = fd_at(&mut work, &mut f, h);
        let fd2 = fd_at(&mut work, &mut f, h / 2.0);

        let scale = fd1.abs().max(fd2.abs()).max(1.0);
        if (fd1 - fd2).abs() / scale > FD_CONSISTENCY_TOL {
            excluded += 1;
            continue;
        }

        let ga = analytic[i];
        let denom = ga.abs().max(fd2.abs()).max(FD_ABS_FLOOR);
        let rel = (ga - fd2).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = Some(i);
        }
        checked += 1;
    }

    GradCheckReport {
        max_rel_err: max_rel,
        checked,
        excluded,
        tolerance,
        worst_index: worst,
    }
}
