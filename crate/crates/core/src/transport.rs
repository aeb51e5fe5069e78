//! Parallel transport along piecewise-chart curves by fixed-step RK4.
//!
//! Within a segment the components obey `Ẏ = −Γ(ċ) Y`. At a breakpoint
//! the curve moves from chart `old` to chart `new` and the components are
//! re-expressed by `Y_new = g_{new,old} Y_old`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{BundleError, BundleSpec};
use crate::connection::{ConnectionError, ConnectionSpec};
use crate::expr::{Bindings, EvalError, Expr};
use crate::geometry::{Atlas, GeometryError};
use crate::linalg::{self, c, CMat, LinalgError};

/// Default RK4 step in the curve parameter.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Steps shorter than this are refused.
pub const MIN_STEP: f64 = 1e-12;
/// Breakpoint and closure tolerance.
pub const CONTINUITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("curve leaves chart `{chart}` at t = {t}: {detail}")]
    LeavesChart { chart: String, t: f64, detail: String },
    #[error("step {0:e} is below the minimum step")]
    StepUnderflow(f64),
    #[error("curve jumps by {gap:.3e} at t = {t}")]
    Discontinuous { t: f64, gap: f64 },
    #[error("curve is not closed: {0}")]
    NotClosed(String),
    #[error("invalid curve: {0}")]
    Invalid(String),
    #[error(transparent)]
    Log(#[from] LinalgError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub chart: String,
    pub start: f64,
    pub end: f64,
    /// Chart coordinates as expressions in `t`.
    pub coords: Vec<Expr>,
    velocity: Vec<Expr>,
}

impl Segment {
    pub fn new(chart: impl Into<String>, start: f64, end: f64, coords: Vec<Expr>) -> Self {
        let velocity = coords.iter().map(|e| e.differentiate("t")).collect();
        Self {
            chart: chart.into(),
            start,
            end,
            coords,
            velocity,
        }
    }

    fn eval(exprs: &[Expr], t: f64) -> Result<Vec<f64>, EvalError> {
        let mut b = Bindings::new();
        b.set_real("t", t);
        exprs.iter().map(|e| e.eval_real(&b)).collect()
    }

    pub fn point(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        Self::eval(&self.coords, t)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        Self::eval(&self.velocity, t)
    }
}

/// A curve on `[0, 1]` given as consecutive chart segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub segments: Vec<Segment>,
}

impl Curve {
    /// Segments given as `(chart, end, coords)`; each starts where the
    /// previous one ended, the first at `t = 0`, and the last ends at 1.
    pub fn new(
        name: impl Into<String>,
        atlas: &Atlas,
        pieces: Vec<(String, f64, Vec<Expr>)>,
    ) -> Result<Self, TransportError> {
        let name = name.into();
        if pieces.is_empty() {
            return Err(TransportError::Invalid(format!("curve `{name}` has no segments")));
        }
        let mut segments = Vec::new();
        let mut start = 0.0;
        for (chart, end, coords) in pieces {
            let ch = atlas.chart(&chart)?;
            if coords.len() != ch.dim() {
                return Err(TransportError::Invalid(format!(
                    "segment on `{chart}` needs {} coordinates",
                    ch.dim()
                )));
            }
            if let Some(v) = coords.iter().flat_map(|e| e.free_vars()).find(|v| v != "t") {
                return Err(TransportError::Invalid(format!("segment on `{chart}` uses `{v}`; only `t` is allowed")));
            }
            if !(end > start) {
                return Err(TransportError::Invalid(format!("breakpoints must increase (got {end} after {start})")));
            }
            segments.push(Segment::new(chart, start, end, coords));
            start = end;
        }
        if (start - 1.0).abs() > 1e-15 {
            return Err(TransportError::Invalid(format!("last segment ends at {start}, not 1")));
        }
        Ok(Self { name, segments })
    }

    /// Single-chart curve.
    pub fn in_chart(name: impl Into<String>, atlas: &Atlas, chart: &str, coords: &[&str]) -> Result<Self, TransportError> {
        let coords = coords
            .iter()
            .map(|s| Expr::parse(s).map_err(|e| TransportError::Invalid(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, atlas, vec![(chart.to_string(), 1.0, coords)])
    }

    /// Same path traversed backwards.
    pub fn reversed(&self) -> Self {
        let sub: HashMap<String, Expr> =
            [("t".to_string(), Expr::sub(Expr::one(), Expr::var("t")))].into_iter().collect();
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment::new(s.chart.clone(), 1.0 - s.end, 1.0 - s.start, s.coords.iter().map(|e| e.substitute(&sub)).collect()))
            .collect();
        Self {
            name: format!("{}-reversed", self.name),
            segments,
        }
    }

    pub fn start(&self) -> Result<(String, Vec<f64>), EvalError> {
        let s = &self.segments[0];
        Ok((s.chart.clone(), s.point(0.0)?))
    }

    pub fn end(&self) -> Result<(String, Vec<f64>), EvalError> {
        let s = self.segments.last().unwrap();
        Ok((s.chart.clone(), s.point(1.0)?))
    }

    /// Breakpoint continuity under the overlap maps.
    pub fn check_continuity(&self, atlas: &Atlas) -> Result<(), TransportError> {
        for w in self.segments.windows(2) {
            let t = w[0].end;
            let p = w[0].point(t)?;
            let q = atlas.overlap_apply(&w[0].chart, &w[1].chart, &p)?;
            let r = w[1].point(t)?;
            let gap = max_gap(&q, &r);
            if gap > CONTINUITY_TOL {
                return Err(TransportError::Discontinuous { t, gap });
            }
        }
        Ok(())
    }

    /// Closed in the same chart, endpoints within the continuity tolerance.
    pub fn check_closed(&self) -> Result<(), TransportError> {
        let (c0, p0) = self.start()?;
        let (c1, p1) = self.end()?;
        if c0 != c1 {
            return Err(TransportError::NotClosed(format!("starts in `{c0}`, ends in `{c1}`")));
        }
        let gap = max_gap(&p0, &p1);
        if gap > CONTINUITY_TOL {
            return Err(TransportError::NotClosed(format!("endpoints differ by {gap:.3e}")));
        }
        Ok(())
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub step: f64,
    /// Re-project the frame onto the group every this many steps.
    pub project_every: Option<usize>,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            project_every: None,
        }
    }
}

/// A chart switch applied during transport.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Switch {
    pub t: f64,
    pub from: String,
    pub to: String,
    pub component: Option<String>,
    pub point: Vec<f64>,
    #[serde(serialize_with = "crate::linalg::serialize_cmat")]
    pub transition: CMat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TransportResult {
    pub curve: String,
    pub start_chart: String,
    pub end_chart: String,
    #[serde(serialize_with = "crate::linalg::serialize_cmat")]
    pub value: CMat,
    pub itinerary: Vec<Switch>,
    pub steps: usize,
    pub step: f64,
    /// Largest per-step error estimate (step doubling, divided by 15).
    pub max_local_error: f64,
    /// Sum of the per-step estimates.
    pub error_estimate: f64,
    pub projections: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_residual: Option<f64>,
}

struct Rhs<'a> {
    conn: &'a ConnectionSpec,
    seg: &'a Segment,
    atlas: &'a Atlas,
}

impl Rhs<'_> {
    /// `−Γ(ċ(t))`.
    fn generator(&self, t: f64) -> Result<CMat, TransportError> {
        let p = self.seg.point(t)?;
        let chart = self.atlas.chart(&self.seg.chart)?;
        if let Some(detail) = chart.violation(&p) {
            return Err(TransportError::LeavesChart {
                chart: chart.name.clone(),
                t,
                detail,
            });
        }
        let v = self.seg.velocity(t)?;
        let g = crate::connection::gamma_on(self.conn, &self.seg.chart, &p, &v)?;
        Ok(-g)
    }

    fn rk4_with(a0: &CMat, a1: &CMat, a2: &CMat, h: f64, y: &CMat) -> CMat {
        let k1 = a0 * y;
        let k2 = a1 * (y + &k1 * c(0.5 * h));
        let k3 = a1 * (y + &k2 * c(0.5 * h));
        let k4 = a2 * (y + &k3 * c(h));
        y + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0)
    }
}

/// Transport the columns of `initial` along `curve`.
pub fn transport(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    curve: &Curve,
    initial: &CMat,
    opts: TransportOptions,
) -> Result<TransportResult, TransportError> {
    conn.check_shape(spec)?;
    if initial.nrows() != spec.rank() {
        return Err(TransportError::Invalid(format!(
            "initial value has {} rows, fiber rank is {}",
            initial.nrows(),
            spec.rank()
        )));
    }
    if !(opts.step >= MIN_STEP) {
        return Err(TransportError::StepUnderflow(opts.step));
    }
    curve.check_continuity(&spec.atlas)?;
    let atlas = &*spec.atlas;
    let square = initial.nrows() == initial.ncols();
    let mut y = initial.clone();
    let mut itinerary = Vec::new();
    let mut steps = 0usize;
    let mut max_local = 0.0f64;
    let mut total = 0.0f64;
    let mut projections = 0usize;
    for (k, seg) in curve.segments.iter().enumerate() {
        if k > 0 {
            let prev = &curve.segments[k - 1];
            let p = prev.point(seg.start)?;
            let (g, _, key) = spec.switch_matrix(&prev.chart, &seg.chart, &p)?;
            y = &g * y;
            itinerary.push(Switch {
                t: seg.start,
                from: prev.chart.clone(),
                to: seg.chart.clone(),
                component: key.and_then(|k| k.component),
                point: p,
                transition: g,
            });
        }
        let len = seg.end - seg.start;
        let n = ((len / opts.step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / n as f64;
        if h < MIN_STEP {
            return Err(TransportError::StepUnderflow(h));
        }
        let rhs = Rhs { conn, seg, atlas };
        for s in 0..n {
            let t = seg.start + h * s as f64;
            let a0 = rhs.generator(t)?;
            let aq = rhs.generator(t + 0.25 * h)?;
            let am = rhs.generator(t + 0.5 * h)?;
            let a3q = rhs.generator(t + 0.75 * h)?;
            let a1 = rhs.generator(t + h)?;
            let full = Rhs::rk4_with(&a0, &am, &a1, h, &y);
            let half = Rhs::rk4_with(&a0, &aq, &am, 0.5 * h, &y);
            let two_halves = Rhs::rk4_with(&am, &a3q, &a1, 0.5 * h, &half);
            let local = linalg::max_abs_diff(&full, &two_halves) / 15.0;
            max_local = max_local.max(local);
            total += local;
            y = full;
            steps += 1;
            if let Some(every) = opts.project_every {
                if square && every > 0 && steps.is_multiple_of(every) {
                    if let Some(p) = spec.group.project(&y) {
                        y = p;
                        projections += 1;
                    }
                }
            }
        }
    }
    let membership_residual = square.then(|| spec.group.membership_residual(&y));
    Ok(TransportResult {
        curve: curve.name.clone(),
        start_chart: curve.segments[0].chart.clone(),
        end_chart: curve.segments.last().unwrap().chart.clone(),
        value: y,
        itinerary,
        steps,
        step: opts.step,
        max_local_error: max_local,
        error_estimate: total,
        projections,
        membership_residual,
    })
}

pub fn parallel_transport_vector(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    curve: &Curve,
    v0: &[Complex64],
    opts: TransportOptions,
) -> Result<TransportResult, TransportError> {
    let v = CMat::from_column_slice(v0.len(), 1, v0);
    transport(spec, conn, curve, &v, opts)
}

/// Transport of the identity frame: the matrix carrying any initial
/// components to their transported values.
pub fn transport_frame(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    curve: &Curve,
    opts: TransportOptions,
) -> Result<TransportResult, TransportError> {
    transport(spec, conn, curve, &linalg::identity(spec.rank()), opts)
}

/// Frame transport around a closed curve.
pub fn holonomy(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    curve: &Curve,
    opts: TransportOptions,
) -> Result<TransportResult, TransportError> {
    curve.check_closed()?;
    transport_frame(spec, conn, curve, opts)
}

/// Counter-clockwise `ε×ε` parallelogram in coordinates `u, v` of `chart`,
/// with its first corner at `x`.
pub fn coordinate_square(atlas: &Atlas, chart: &str, x: &[f64], u: usize, v: usize, eps: f64) -> Result<Curve, TransportError> {
    let ch = atlas.chart(chart)?;
    let dim = ch.dim();
    if u >= dim || v >= dim || u == v {
        return Err(TransportError::Invalid(format!("bad coordinate directions {u}, {v}")));
    }
    let corner = |du: f64, dv: f64| -> Vec<f64> {
        let mut p = x.to_vec();
        p[u] += du * eps;
        p[v] += dv * eps;
        p
    };
    let corners = [corner(0.0, 0.0), corner(1.0, 0.0), corner(1.0, 1.0), corner(0.0, 1.0), corner(0.0, 0.0)];
    let mut pieces = Vec::new();
    for k in 0..4 {
        let (a, b) = (&corners[k], &corners[k + 1]);
        let t0 = k as f64 / 4.0;
        // linear in t on [t0, t0 + 1/4]
        let coords = (0..dim)
            .map(|i| {
                let slope = (b[i] - a[i]) * 4.0;
                Expr::add(Expr::num(a[i]), Expr::mul(Expr::num(slope), Expr::sub(Expr::var("t"), Expr::num(t0))))
            })
            .collect();
        pieces.push((chart.to_string(), (k + 1) as f64 / 4.0, coords));
    }
    Curve::new(format!("square@{chart}"), atlas, pieces)
}

/// `logm(H)/ε²` for the holonomy `H` of the counter-clockwise coordinate
/// square at `x`; tends to `−R(∂_u, ∂_v)(x)` as `ε → 0`.
#[allow(clippy::too_many_arguments)]
pub fn loop_curvature_estimate(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    chart: &str,
    x: &[f64],
    u: usize,
    v: usize,
    eps: f64,
    opts: TransportOptions,
) -> Result<CMat, TransportError> {
    let square = coordinate_square(&spec.atlas, chart, x, u, v, eps)?;
    let h = holonomy(spec, conn, &square, opts)?;
    let log = linalg::logm(&h.value)?;
    Ok(log * c(1.0 / (eps * eps)))
}

/// Rotation angle of a 2×2 matrix close to a rotation.
pub fn rotation_angle(m: &CMat) -> f64 {
    (m[(1, 0)].re - m[(0, 1)].re).atan2(m[(0, 0)].re + m[(1, 1)].re)
}

/// `a − b` wrapped into `(−π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = (a - b) % two_pi;
    if d > std::f64::consts::PI {
        d -= two_pi;
    } else if d <= -std::f64::consts::PI {
        d += two_pi;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::specfile::Model;
    use std::f64::consts::PI;

    fn model(name: &str) -> Model {
        catalog::spec(name).unwrap().build().unwrap()
    }

    #[test]
    fn latitude_holonomy_angle() {
        let m = model("tangent-sphere");
        let conn = m.connection.as_ref().unwrap();
        for (name, theta0) in [("latitude-30", PI / 6.0), ("latitude-60", PI / 3.0), ("latitude-90", PI / 2.0)] {
            let h = holonomy(&m.bundle, conn, m.curve(name).unwrap(), TransportOptions::default()).unwrap();
            let want = 2.0 * PI * (1.0 - theta0.cos());
            let err = angle_difference(rotation_angle(&h.value), want);
            assert!(err.abs() < 1e-6, "{name}: {err}");
        }
    }

    #[test]
    fn mobius_flat_holonomy_is_minus_one() {
        let m = model("mobius");
        let flat = ConnectionSpec::flat(&m.bundle);
        let h = holonomy(&m.bundle, &flat, m.curve("around").unwrap(), TransportOptions::default()).unwrap();
        assert_eq!(h.value[(0, 0)].re, -1.0);
        assert_eq!(h.itinerary.len(), 2);
        assert_eq!(h.itinerary[1].component.as_deref(), Some("bottom"));
    }

    #[test]
    fn monopole_equator_phase_agrees_between_charts() {
        for n in [1i32, 2, -1] {
            let m = model(&format!("monopole-{n}"));
            let conn = m.connection.as_ref().unwrap();
            let want = Complex64::from_polar(1.0, PI * n as f64);
            for curve in ["equator", "equator-south"] {
                let h = holonomy(&m.bundle, conn, m.curve(curve).unwrap(), TransportOptions::default()).unwrap();
                assert!((h.value[(0, 0)] - want).norm() < 1e-6, "{n} {curve}: {}", h.value[(0, 0)]);
            }
        }
    }

    #[test]
    fn reversal_returns_to_start() {
        let m = model("tangent-sphere");
        let conn = m.connection.as_ref().unwrap();
        let c = m.curve("equator-mixed").unwrap();
        let fwd = transport_frame(&m.bundle, conn, c, TransportOptions::default()).unwrap();
        let back = transport(&m.bundle, conn, &c.reversed(), &fwd.value, TransportOptions::default()).unwrap();
        assert!(linalg::max_abs_diff(&back.value, &linalg::identity(2)) < 1e-7);
    }

    #[test]
    fn constant_abelian_segment() {
        let atlas = crate::geometry::catalog::interval();
        let spec = BundleSpec::trivial(
            "line",
            std::sync::Arc::new(atlas),
            crate::bundle::Fiber {
                kind: crate::bundle::FiberKind::Vector,
                field: crate::bundle::Field::Real,
                rank: 1,
            },
            crate::bundle::GroupDescriptor::new(crate::bundle::GroupKind::GlR, 1),
        )
        .unwrap();
        let chart = spec.atlas.chart("I").unwrap().clone();
        let gamma = crate::forms::LocalForm::from_components(
            "I",
            &chart.coords,
            1,
            crate::forms::ValueShape::Matrix(1),
            [(1, crate::bundle::matrix(&[&["0.7"]]))],
        )
        .unwrap();
        let conn = ConnectionSpec::new("c", [gamma], crate::connection::AlgebraCheck::None);
        let curve = Curve::in_chart("seg", &spec.atlas, "I", &["0.0001 + 0.9998*t"]).unwrap();
        let r = parallel_transport_vector(&spec, &conn, &curve, &[c(1.0)], TransportOptions::default()).unwrap();
        assert!((r.value[(0, 0)].re - (-0.7f64 * 0.9998).exp()).abs() < 1e-13);
    }

    #[test]
    fn leaving_the_chart_is_an_error() {
        let m = model("tangent-sphere");
        let conn = m.connection.as_ref().unwrap();
        let curve = Curve::in_chart("out", &m.bundle.atlas, "N", &["4*t", "0"]).unwrap();
        let err = transport_frame(&m.bundle, conn, &curve, TransportOptions::default()).unwrap_err();
        assert!(matches!(err, TransportError::LeavesChart { .. }));
    }

    #[test]
    fn open_curve_has_no_holonomy() {
        let m = model("tangent-sphere");
        let conn = m.connection.as_ref().unwrap();
        let curve = Curve::in_chart("open", &m.bundle.atlas, "N", &["t", "0"]).unwrap();
        assert!(matches!(
            holonomy(&m.bundle, conn, &curve, TransportOptions::default()),
            Err(TransportError::NotClosed(_))
        ));
    }

    #[test]
    fn tiny_step_underflows() {
        let m = model("tangent-sphere");
        let conn = m.connection.as_ref().unwrap();
        let opts = TransportOptions { step: 1e-14, project_every: None };
        assert!(matches!(
            transport_frame(&m.bundle, conn, m.curve("latitude-60").unwrap(), opts),
            Err(TransportError::StepUnderflow(_))
        ));
    }

    #[test]
    fn projection_is_recorded() {
        let m = model("torus-u2");
        let conn = m.connection.as_ref().unwrap();
        let opts = TransportOptions { step: 1e-3, project_every: Some(100) };
        let r = transport_frame(&m.bundle, conn, m.curve("meridian").unwrap(), opts).unwrap();
        assert_eq!(r.projections, 10);
        assert!(r.membership_residual.unwrap() < 1e-12);
    }
}
