//! Dense complex matrix helpers: norms, logarithm, square root and group
//! projections used by transport and validation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix logarithm needs ||H - I|| < 0.5, got {0:.3e}")]
    TooFarFromIdentity(f64),
    #[error("singular matrix")]
    Singular,
    #[error("matrix square root did not converge")]
    NoConvergence,
}

/// Row-major nested arrays of `[re, im]` pairs.
pub fn to_json(m: &CMat) -> serde_json::Value {
    let rows = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|k| serde_json::json!([m[(r, k)].re, m[(r, k)].im]))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    serde_json::json!(rows)
}

pub fn serialize_cmat<S: serde::Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_json(m), s)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inverse(m: &CMat) -> Result<CMat, LinalgError> {
    m.clone().try_inverse().ok_or(LinalgError::Singular)
}

pub fn determinant(m: &CMat) -> Complex64 {
    m.determinant()
}

/// Principal square root of a matrix near the identity (Denman–Beavers).
pub fn sqrtm(a: &CMat) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yi = inverse(&y)?;
        let zi = inverse(&z)?;
        let y_next = (&y + &zi) * c(0.5);
        let z_next = (&z + &yi) * c(0.5);
        let delta = frobenius(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * frobenius(&y).max(1.0) {
            return Ok(y);
        }
    }
    Err(LinalgError::NoConvergence)
}

/// Matrix logarithm by inverse scaling and squaring.
///
/// Only defined here for `||H - I||_F < 0.5`: repeated square roots bring
/// `H` within `1e-3` of the identity, where the Mercator series for
/// `log(I + X)` converges fast, and the result is scaled back by `2^k`.
pub fn logm(h: &CMat) -> Result<CMat, LinalgError> {
    let n = h.nrows();
    let id = identity(n);
    let dist = frobenius(&(h - &id));
    if dist >= 0.5 {
        return Err(LinalgError::TooFarFromIdentity(dist));
    }
    let mut a = h.clone();
    let mut k = 0;
    while frobenius(&(&a - &id)) > 1e-3 {
        a = sqrtm(&a)?;
        k += 1;
    }
    let x = &a - &id;
    let mut term = x.clone();
    let mut sum = CMat::zeros(n, n);
    for j in 1..=30 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += &term * c(sign / j as f64);
        term = &term * &x;
        if frobenius(&term) < 1e-18 {
            break;
        }
    }
    Ok(sum * c(2f64.powi(k)))
}

/// Nearest unitary matrix (polar factor).
pub fn project_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => m.clone(),
    }
}

/// Nearest rotation: polar factor of the real part, with the sign of the
/// last singular direction flipped when the determinant comes out negative.
pub fn project_special_orthogonal(m: &CMat) -> CMat {
    let re = m.map(|z| z.re);
    let svd = re.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return m.clone();
    };
    let mut r = &u * &v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u.clone();
        let last = u2.ncols() - 1;
        u2.column_mut(last).neg_mut();
        r = u2 * v_t;
    }
    from_real(&r)
}
