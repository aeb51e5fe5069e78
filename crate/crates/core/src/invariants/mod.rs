//! Characteristic numbers by quadrature: the first Chern number of a U(1)
//! bundle over the sphere and the total curvature of its tangent bundle.
//!
//! Each hemisphere is the closed unit disk of its own stereographic chart;
//! the equator is shared and has measure zero. Both charts carry the same
//! orientation, so the two disk integrals simply add.

mod aggregate;
mod csvfield;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{BundleSpec, FiberKind, GroupKind, Sampling};
use crate::connection::{curvature, family_magnitude, torsion, ConnectionError, ConnectionSpec};
use crate::expr::EvalError;
use crate::forms::LocalForm;
use crate::report::Status;

pub use aggregate::{full_report, FullReport, ReportOptions, REPORT_VERSION};
pub use csvfield::{field_csv, FieldKind};

pub const DEFAULT_RESOLUTION: usize = 128;
/// Chern numbers pass when this close to an integer.
pub const CHERN_TOL: f64 = 1e-3;
/// Total curvature passes when this close to `4π`.
pub const GAUSS_BONNET_TOL: f64 = 1e-3;
/// Connections with larger torsion are refused by `total_curvature`.
pub const TORSION_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("the structure group must be U(1), found {0}")]
    NotU1(String),
    #[error("the base must be the built-in sphere atlas, found `{0}`")]
    NotSphere(String),
    #[error("total curvature needs the tangent bundle")]
    NotTangent,
    #[error("torsion {0:.3e} exceeds the guard; total curvature is defined here for torsion-free connections")]
    Torsion(f64),
    #[error("quadrature resolution must be positive")]
    Resolution,
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `∬_{r ≤ 1} f(x, y) dx dy` by product Gauss–Legendre in polar
/// coordinates, `n` nodes in each of `r` and `φ`.
pub fn disk_integral<F>(n: usize, f: F) -> Result<f64, InvariantError>
where
    F: Fn(f64, f64) -> Result<f64, InvariantError> + Sync,
{
    Ok(disk_integral_complex(n, |x, y| Ok(Complex64::new(f(x, y)?, 0.0)))?.re)
}

/// Complex-valued version of [`disk_integral`]; real and imaginary parts
/// are summed separately in the same fixed order.
pub fn disk_integral_complex<F>(n: usize, f: F) -> Result<Complex64, InvariantError>
where
    F: Fn(f64, f64) -> Result<Complex64, InvariantError> + Sync,
{
    if n == 0 {
        return Err(InvariantError::Resolution);
    }
    let (x, w) = gauss_legendre(n);
    let rows: Vec<Result<(f64, f64), InvariantError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let r = 0.5 * (x[i] + 1.0);
            let wr = 0.5 * w[i] * r;
            let mut re = Vec::with_capacity(n);
            let mut im = Vec::with_capacity(n);
            for j in 0..n {
                let phi = PI * (x[j] + 1.0);
                let v = f(r * phi.cos(), r * phi.sin())? * (wr * PI * w[j]);
                re.push(v.re);
                im.push(v.im);
            }
            Ok((pairwise_sum(&re), pairwise_sum(&im)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let re: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let im: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)))
}

fn require_sphere(spec: &BundleSpec) -> Result<(), InvariantError> {
    let a = &spec.atlas;
    let ok = a.name == "sphere"
        && a.charts.len() == 2
        && a.chart("N").is_ok_and(|c| c.coords == ["x", "y"])
        && a.chart("S").is_ok_and(|c| c.coords == ["u", "v"]);
    if ok {
        Ok(())
    } else {
        Err(InvariantError::NotSphere(a.name.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChernReport {
    pub raw: f64,
    /// Imaginary part of `(i/2π)∬R`; zero for a unitary connection.
    pub imaginary: f64,
    pub nearest: i64,
    pub deviation: f64,
    pub resolution: usize,
    pub per_chart: BTreeMap<String, f64>,
    pub status: Status,
}

fn two_form_at(form: &LocalForm, x: f64, y: f64) -> Result<nalgebra::DMatrix<Complex64>, InvariantError> {
    Ok(form.eval_at(&[x, y])?.get(0b11))
}

/// `(i/2π) ∬ R` over the sphere, `R = dΓ + Γ∧Γ`; with `Γ = −iqA` this is
/// `(q/2π) ∬ F`.
pub fn chern_number(spec: &BundleSpec, conn: &ConnectionSpec, resolution: usize) -> Result<ChernReport, InvariantError> {
    if spec.group.kind != GroupKind::U1 {
        return Err(InvariantError::NotU1(spec.group.to_string()));
    }
    require_sphere(spec)?;
    conn.check_shape(spec)?;
    let r = curvature(conn)?;
    let mut per_chart = BTreeMap::new();
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for chart in ["N", "S"] {
        let form = &r.forms[chart];
        let scale = Complex64::new(0.0, 1.0 / (2.0 * PI));
        let part = disk_integral_complex(resolution, |x, y| Ok(scale * two_form_at(form, x, y)?[(0, 0)]))?;
        per_chart.insert(chart.to_string(), part.re);
        re.push(part.re);
        im.push(part.im);
    }
    let raw = re.iter().sum::<f64>();
    let nearest = raw.round() as i64;
    let deviation = (raw - nearest as f64).abs();
    Ok(ChernReport {
        raw,
        imaginary: im.iter().sum(),
        nearest,
        deviation,
        resolution,
        per_chart,
        status: if deviation <= CHERN_TOL { Status::Pass } else { Status::Fail },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TotalCurvatureReport {
    pub value: f64,
    pub expected: f64,
    pub deviation: f64,
    pub resolution: usize,
    pub per_chart: BTreeMap<String, f64>,
    pub torsion_residual: f64,
    pub status: Status,
}

/// `K dA` from the curvature of a torsion-free metric connection: with
/// `A = R(∂_1, ∂_2)`, `det A = K² det g` and `sign A¹₂ = sign K`.
pub fn gauss_density(a: &nalgebra::DMatrix<Complex64>) -> f64 {
    let det = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].re * a[(1, 0)].re;
    a[(0, 1)].re.signum() * det.max(0.0).sqrt()
}

/// `∬ K dA` over both hemispheres.
pub fn total_curvature(spec: &BundleSpec, conn: &ConnectionSpec, resolution: usize) -> Result<TotalCurvatureReport, InvariantError> {
    if spec.fiber.kind != FiberKind::Tangent {
        return Err(InvariantError::NotTangent);
    }
    require_sphere(spec)?;
    let t = torsion(spec, conn)?;
    let torsion_residual = family_magnitude(spec, &t, Sampling::default()).residual();
    if !(torsion_residual <= TORSION_GUARD) {
        return Err(InvariantError::Torsion(torsion_residual));
    }
    let r = curvature(conn)?;
    let mut per_chart = BTreeMap::new();
    let mut parts = Vec::new();
    for chart in ["N", "S"] {
        let form = &r.forms[chart];
        let v = disk_integral(resolution, |x, y| Ok(gauss_density(&two_form_at(form, x, y)?)))?;
        per_chart.insert(chart.to_string(), v);
        parts.push(v);
    }
    let value = parts.iter().sum::<f64>();
    let expected = 4.0 * PI;
    let deviation = (value - expected).abs();
    Ok(TotalCurvatureReport {
        value,
        expected,
        deviation,
        resolution,
        per_chart,
        torsion_residual,
        status: if deviation <= GAUSS_BONNET_TOL { Status::Pass } else { Status::Fail },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        // exact through degree 9
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let (x, _) = gauss_legendre(4);
        assert!((x[3] - (3.0 / 7.0 + 2.0 / 7.0 * 1.2f64.sqrt()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn disk_area() {
        let a = disk_integral(16, |_, _| Ok(1.0)).unwrap();
        assert!((a - PI).abs() < 1e-13);
    }

    #[test]
    fn monopole_charges() {
        for n in -2..=2 {
            let m = catalog::spec(&format!("monopole-{n}")).unwrap().build().unwrap();
            let c = chern_number(&m.bundle, m.connection.as_ref().unwrap(), 64).unwrap();
            assert_eq!(c.nearest, n);
            assert!(c.deviation < 1e-10, "{c:?}");
            assert!(c.imaginary.abs() < 1e-12);
        }
    }

    #[test]
    fn chern_needs_u1_on_the_sphere() {
        let m = catalog::spec("tangent-sphere").unwrap().build().unwrap();
        assert!(matches!(
            chern_number(&m.bundle, m.connection.as_ref().unwrap(), 8),
            Err(InvariantError::NotU1(_))
        ));
    }

    #[test]
    fn round_sphere_total_curvature() {
        let m = catalog::spec("tangent-sphere").unwrap().build().unwrap();
        let t = total_curvature(&m.bundle, m.connection.as_ref().unwrap(), 64).unwrap();
        assert!(t.deviation < 1e-10, "{t:?}");
        assert_eq!(t.per_chart.values().sum::<f64>(), t.value);
    }

    #[test]
    fn torsion_guard_applies() {
        let m = catalog::spec("tangent-sphere").unwrap().build().unwrap();
        let mut conn = m.connection.clone().unwrap();
        let n = conn.gamma["N"].clone();
        let extra = LocalForm::from_components(
            "N",
            &n.coords,
            1,
            n.shape,
            [(0b10, crate::bundle::matrix(&[&["0.1", "0"], &["0", "0"]]))],
        )
        .unwrap();
        conn.gamma.insert("N".into(), n.add(&extra).unwrap());
        assert!(matches!(
            total_curvature(&m.bundle, &conn, 16),
            Err(InvariantError::Torsion(_))
        ));
    }
}
