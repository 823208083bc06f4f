//! Dormand–Prince 5(4) on `dx/dt = f(t, x)` with `x` a `D × D` matrix.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 2_000_000;

/// Integrates from `t0` to `t1 ≥ t0`. The local error of each step, measured
/// as `√D · ‖·‖_F` (an upper bound on the trace norm), is kept below
/// `tol · h / (t1 − t0)` so the accumulated error stays near `tol`.
pub fn dopri_evolve<F>(rhs: F, t0: f64, t1: f64, x0: &CMat, tol: f64, initial_step: Option<f64>) -> Result<CMat>
where
    F: Fn(f64, &CMat) -> CMat,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(x0.clone());
    }
    let scale = (x0.nrows() as f64).sqrt();
    let mut t = t0;
    let mut x = x0.clone();
    let mut h = initial_step.unwrap_or(span / 64.0).min(span);
    let mut k1 = rhs(t, &x);
    let mut k: Vec<CMat> = Vec::with_capacity(7);
    for _ in 0..MAX_STEPS {
        if t >= t1 {
            return Ok(x);
        }
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
        if last {
            h = t1 - t;
        }
        k.clear();
        k.push(k1.clone());
        for stage in 1..7 {
            let mut y = x.clone();
            for (j, &a) in A[stage].iter().enumerate() {
                if a != 0.0 {
                    y += &k[j] * C64::new(h * a, 0.0);
                }
            }
            if stage == 6 {
                // FSAL: the last stage point is the fifth-order solution
                let k7 = rhs(t + h, &y);
                k.push(k7);
                let mut err = CMat::zeros(x.nrows(), x.ncols());
                for (j, &e) in E.iter().enumerate() {
                    if e != 0.0 {
                        err += &k[j] * C64::new(h * e, 0.0);
                    }
                }
                let err_norm = scale * err.norm();
                let target = tol * h / span;
                if !err_norm.is_finite() || !crate::linalg::is_finite(&y) {
                    return Err(Error::NonFinite("reference evolution"));
                }
                let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * (target / err_norm).powf(0.25)).clamp(0.2, 5.0) };
                if err_norm <= target {
                    t = if last { t1 } else { t + h };
                    x = y;
                    k1 = k.pop().expect("seventh stage present");
                    h *= factor;
                } else {
                    h *= factor.min(0.9);
                }
                break;
            }
            k.push(rhs(t + C[stage] * h, &y));
        }
        if h < 1e-14 * span.max(t.abs()) {
            return Err(Error::StepSizeUnderflow { t_reached: t });
        }
    }
    Err(Error::StepSizeUnderflow { t_reached: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_exponential_decay() {
        let x0 = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let x = dopri_evolve(|_, x| -x, 0.0, 3.0, &x0, 1e-11, None).unwrap();
        assert!((x[(0, 0)].re - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn time_dependent_scalar() {
        // dx/dt = i cos(t) x, x(t) = e^{i sin t}
        let x0 = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let x = dopri_evolve(|t, x| x * C64::new(0.0, t.cos()), 0.0, 2.0, &x0, 1e-12, None).unwrap();
        let want = C64::new(0.0, 2f64.sin()).exp();
        assert!((x[(0, 0)] - want).norm() < 1e-11);
    }

    #[test]
    fn stiffness_beyond_budget_reports_time() {
        let x0 = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let res = dopri_evolve(|t, x| x * C64::new(1.0 / (1.0 - t).powi(3), 0.0), 0.0, 1.0, &x0, 1e-12, None);
        match res {
            Err(Error::StepSizeUnderflow { t_reached }) => assert!(t_reached > 0.5 && t_reached < 1.0),
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
