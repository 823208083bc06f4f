//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (Higham 2005 degree selection).

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
    (13, 5.371920351148152),
];

/// Numerator coefficients of the `[m/m]` Padé approximant to `e^x`, `c_0 = 1`.
fn pade_coefficients(m: usize) -> Vec<f64> {
    let mut c = vec![1.0; m + 1];
    for j in 1..=m {
        c[j] = c[j - 1] * (m - j + 1) as f64 / (j as f64 * (2 * m - j + 1) as f64);
    }
    c
}

fn scaled_identity(n: usize, c: f64) -> CMat {
    CMat::from_diagonal_element(n, n, C64::new(c, 0.0))
}

fn axpy(acc: &mut CMat, c: f64, m: &CMat) {
    acc.zip_apply(m, |a, b| *a += b * c);
}

/// `(U, V)` with `r_m(A) = (V − U)⁻¹ (V + U)`.
fn pade_terms(a: &CMat, m: usize) -> (CMat, CMat) {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let a2 = linalg::matmul(a, a);
    if m == 13 {
        let a4 = linalg::matmul(&a2, &a2);
        let a6 = linalg::matmul(&a4, &a2);
        let mut inner_u = &a6 * C64::new(b[13], 0.0);
        axpy(&mut inner_u, b[11], &a4);
        axpy(&mut inner_u, b[9], &a2);
        let mut u = linalg::matmul(&a6, &inner_u);
        axpy(&mut u, b[7], &a6);
        axpy(&mut u, b[5], &a4);
        axpy(&mut u, b[3], &a2);
        u += scaled_identity(n, b[1]);
        let u = linalg::matmul(a, &u);

        let mut inner_v = &a6 * C64::new(b[12], 0.0);
        axpy(&mut inner_v, b[10], &a4);
        axpy(&mut inner_v, b[8], &a2);
        let mut v = linalg::matmul(&a6, &inner_v);
        axpy(&mut v, b[6], &a6);
        axpy(&mut v, b[4], &a4);
        axpy(&mut v, b[2], &a2);
        v += scaled_identity(n, b[0]);
        return (u, v);
    }
    let mut u = scaled_identity(n, b[1]);
    let mut v = scaled_identity(n, b[0]);
    let mut power = a2.clone();
    for k in 1..=m / 2 {
        axpy(&mut v, b[2 * k], &power);
        axpy(&mut u, b[2 * k + 1], &power);
        if k < m / 2 {
            power = linalg::matmul(&power, &a2);
        }
    }
    (linalg::matmul(a, &u), v)
}

/// `e^{scale · a}`.
pub fn expm(a: &CMat, scale: f64) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    if !scale.is_finite() || !linalg::is_finite(a) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let n = a.nrows();
    if n == 0 || scale == 0.0 {
        return Ok(linalg::identity(n));
    }
    let mut x = a * C64::new(scale, 0.0);
    let norm = linalg::one_norm(&x);
    if norm == 0.0 {
        return Ok(linalg::identity(n));
    }
    let (m, squarings) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(m, _)) => (m, 0),
        None => {
            let s = (norm / THETA[4].1).log2().ceil().max(0.0) as i32;
            x *= C64::new(2f64.powi(-s), 0.0);
            (13, s as u32)
        }
    };
    let (u, v) = pade_terms(&x, m);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.lu().solve(&rhs).ok_or(Error::NonFinite("Padé denominator (singular)"))?;
    for _ in 0..squarings {
        r = linalg::matmul(&r, &r);
    }
    if !linalg::is_finite(&r) {
        return Err(Error::NonFinite("matrix exponential (overflow)"));
    }
    Ok(r)
}
