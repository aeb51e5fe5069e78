//! Connections as matrix-valued 1-forms per chart, and what is built from
//! them: curvature, gauge potentials and field strengths, covariant
//! derivatives, torsion and the two Bianchi residuals.
//!
//! Matrix rows index the fiber component being produced, so for the
//! tangent bundle `Γ^μ_λ = Γ^μ_{λν} dx^ν` sits in row `μ`, column `λ`.

mod torsion;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bundle::{overlap_samples, BundleError, BundleSpec, GaugeTransformation, Sampling};
use crate::expr::{EvalError, Expr};
use crate::forms::{FormError, FormFamily, FormValue, LocalForm, TransformKind, ValueShape};
use crate::geometry::OverlapKey;
use crate::linalg::{self, CMat};
use crate::report::{Check, Observation, Tracker, ValidationReport};
use crate::symmat::ExprMatrix;

pub use torsion::{first_bianchi_residual, solder_family, torsion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no form on chart `{0}`")]
    MissingChart(String),
    #[error("torsion needs the tangent bundle of the atlas")]
    NotTangent,
    #[error("covariant derivative of a {0:?} family is not defined")]
    UnsupportedKind(TransformKind),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Which Lie-algebra condition the connection values must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlgebraCheck {
    /// No condition.
    #[default]
    None,
    /// The structure group's algebra (antisymmetric for SO, anti-hermitian
    /// for U, real for GL(n,R)).
    Group,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionSpec {
    pub name: String,
    pub gamma: BTreeMap<String, LocalForm>,
    pub algebra_check: AlgebraCheck,
}

impl ConnectionSpec {
    pub fn new(name: impl Into<String>, gamma: impl IntoIterator<Item = LocalForm>, algebra_check: AlgebraCheck) -> Self {
        Self {
            name: name.into(),
            gamma: gamma.into_iter().map(|f| (f.chart.clone(), f)).collect(),
            algebra_check,
        }
    }

    /// `Γ = 0` on every chart.
    pub fn flat(spec: &BundleSpec) -> Self {
        let n = spec.rank();
        let forms = spec
            .atlas
            .charts
            .iter()
            .map(|c| LocalForm::on_chart(c, 1, ValueShape::Matrix(n)));
        Self::new("flat", forms, AlgebraCheck::None)
    }

    pub fn get(&self, chart: &str) -> Result<&LocalForm, ConnectionError> {
        self.gamma.get(chart).ok_or_else(|| ConnectionError::MissingChart(chart.to_string()))
    }

    /// Structural agreement with the bundle: every chart present, matrix
    /// 1-forms of the fiber rank.
    pub fn check_shape(&self, spec: &BundleSpec) -> Result<(), ConnectionError> {
        let n = spec.rank();
        for chart in &spec.atlas.charts {
            let g = self.get(&chart.name)?;
            if g.degree != 1 || g.shape != ValueShape::Matrix(n) || g.coords != chart.coords {
                return Err(ConnectionError::Shape(format!(
                    "connection on `{}` must be a {n}x{n} matrix 1-form in ({})",
                    chart.name,
                    chart.coords.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> FormFamily {
        FormFamily {
            kind: TransformKind::Connection,
            forms: self.gamma.clone(),
        }
    }

    fn per_chart(
        &self,
        kind: TransformKind,
        f: impl Fn(&LocalForm) -> Result<LocalForm, FormError>,
    ) -> Result<FormFamily, ConnectionError> {
        let mut forms = BTreeMap::new();
        for (k, g) in &self.gamma {
            forms.insert(k.clone(), f(g)?);
        }
        Ok(FormFamily { kind, forms })
    }
}

/// Physics normalisation: `Γ = −iqA`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    pub q: f64,
    /// When set, `A` must be hermitian.
    pub unitary: bool,
    pub potential: BTreeMap<String, LocalForm>,
}

impl GaugeField {
    fn minus_iq(&self) -> Expr {
        Expr::mul(Expr::neg(Expr::I), Expr::num(self.q))
    }

    pub fn connection(&self, name: impl Into<String>) -> ConnectionSpec {
        let s = self.minus_iq();
        ConnectionSpec::new(
            name,
            self.potential.values().map(|a| a.scale(&s)),
            if self.unitary { AlgebraCheck::Group } else { AlgebraCheck::None },
        )
    }

    /// `F = dA − iq A∧A`.
    pub fn field_strength(&self) -> Result<FormFamily, ConnectionError> {
        let s = self.minus_iq();
        let mut forms = BTreeMap::new();
        for (k, a) in &self.potential {
            forms.insert(k.clone(), a.d().add(&a.wedge(a)?.scale(&s))?);
        }
        Ok(FormFamily {
            kind: TransformKind::Adjoint,
            forms,
        })
    }

    /// Largest `|A − A†|` at chart samples.
    pub fn hermiticity(&self, spec: &BundleSpec, opts: Sampling, tol: f64) -> Check {
        let t = chart_tracker(spec, opts, |chart, p| {
            let a = self.potential.get(chart).ok_or_else(|| format!("no potential on `{chart}`"))?;
            let v = a.eval_at(p).map_err(|e| e.to_string())?;
            Ok(v.components.values().map(|m| linalg::max_abs(&(m - m.adjoint()))).fold(0.0, f64::max))
        });
        t.into_check("gauge_field.hermitian", tol)
    }
}

/// Evaluate `f` at every chart sample point, in parallel, folding in order.
pub(crate) fn chart_tracker(
    spec: &BundleSpec,
    opts: Sampling,
    f: impl Fn(&str, &[f64]) -> Result<f64, String> + Sync + Send,
) -> Tracker {
    let atlas = &*spec.atlas;
    let mut points = Vec::new();
    for chart in &atlas.charts {
        for p in atlas.sample_chart(chart, opts.samples, opts.seed) {
            points.push((chart.name.as_str(), p));
        }
    }
    Tracker::collect_par(&points, |(chart, p)| match f(chart, p) {
        Ok(r) => Observation::new(r, chart, p, chart.to_string()),
        Err(e) => Observation::failed(e, chart, p, chart.to_string()),
    })
}

/// Central-difference step of the `d` cross-check.
pub const D_CHECK_STEP: f64 = 1e-5;

/// Symbolic `d` against central differences of every member of a family,
/// at chart samples.
pub fn d_cross_check(spec: &BundleSpec, family: &FormFamily, opts: Sampling) -> Tracker {
    chart_tracker(spec, opts, |chart, p| {
        let f = family.get(chart).ok_or_else(|| format!("no form on `{chart}`"))?;
        crate::forms::d_finite_difference_residual(f, p, D_CHECK_STEP).map_err(|e| e.to_string())
    })
}

/// Largest entry of a form family at chart samples.
pub fn family_magnitude(spec: &BundleSpec, family: &FormFamily, opts: Sampling) -> Tracker {
    chart_tracker(spec, opts, |chart, p| {
        let f = family.get(chart).ok_or_else(|| format!("no form on `{chart}`"))?;
        Ok(f.eval_at(p).map_err(|e| e.to_string())?.max_abs())
    })
}

/// Largest difference between two families at chart samples.
pub fn family_difference(spec: &BundleSpec, a: &FormFamily, b: &FormFamily, opts: Sampling) -> Tracker {
    chart_tracker(spec, opts, |chart, p| {
        let fa = a.get(chart).ok_or_else(|| format!("no form on `{chart}`"))?;
        let fb = b.get(chart).ok_or_else(|| format!("no form on `{chart}`"))?;
        let va = fa.eval_at(p).map_err(|e| e.to_string())?;
        let vb = fb.eval_at(p).map_err(|e| e.to_string())?;
        Ok(va.max_diff(&vb))
    })
}

/// Residual of a family's overlap law at sampled overlap points.
///
/// The chart-`j` member is evaluated at the image point and pulled back with
/// the overlap Jacobian before the group action is applied.
pub fn check_family(spec: &BundleSpec, family: &FormFamily, opts: Sampling) -> Result<Tracker, ConnectionError> {
    let atlas = &*spec.atlas;
    for chart in atlas.chart_names() {
        if family.get(chart).is_none() {
            return Err(ConnectionError::MissingChart(chart.to_string()));
        }
    }
    let mut dg: BTreeMap<OverlapKey, LocalForm> = BTreeMap::new();
    if family.kind == TransformKind::Connection {
        for ov in &atlas.overlaps {
            let chart = atlas.chart(&ov.key.from).map_err(BundleError::from)?;
            dg.insert(ov.key.clone(), LocalForm::differential(chart, spec.transition(&ov.key)?));
        }
    }
    let samples = overlap_samples(atlas, opts);
    Ok(Tracker::collect_par(&samples, |(ov, p)| {
        let at = ov.key.to_string();
        let res = (|| -> Result<f64, ConnectionError> {
            let q = atlas.apply(ov, p).map_err(BundleError::from)?;
            let jac = atlas.jacobian_on(ov, p).map_err(BundleError::from)?;
            let here = family.forms[&ov.key.from].eval_at(p)?;
            let there = family.forms[&ov.key.to].eval_at(&q)?.pullback(&jac);
            let g = spec.transition_at(ov, p)?;
            let predicted = match family.kind {
                TransformKind::Invariant => there,
                TransformKind::Vector => there.map(there.dims, |v| &g * v),
                TransformKind::Adjoint | TransformKind::Connection => {
                    let gi = linalg::inverse(&g).map_err(|e| BundleError::Group(e.to_string()))?;
                    let conj = there.map(there.dims, |v| &g * v * &gi);
                    if family.kind == TransformKind::Adjoint {
                        conj
                    } else {
                        let d = dg[&ov.key].eval_at(p)?;
                        conj.sub(&d.map(d.dims, |v| v * &gi))
                    }
                }
            };
            Ok(here.max_diff(&predicted))
        })();
        match res {
            Ok(r) => Observation::new(r, &ov.key.from, p, at),
            Err(e) => Observation::failed(e, &ov.key.from, p, at),
        }
    }))
}

/// Algebra membership of `Γ(∂_μ)` for every `μ`, and the overlap law
/// `Γ_i = g Γ_j g⁻¹ − dg g⁻¹`.
pub fn check_connection(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    opts: Sampling,
    tol: f64,
    algebra_tol: f64,
) -> Result<ValidationReport, ConnectionError> {
    conn.check_shape(spec)?;
    let mut report = ValidationReport::default();
    if conn.algebra_check == AlgebraCheck::Group {
        let t = chart_tracker(spec, opts, |chart, p| {
            let v = conn.gamma[chart].eval_at(p).map_err(|e| e.to_string())?;
            Ok(v.components
                .values()
                .map(|m| spec.group.algebra_residual(m))
                .fold(0.0, f64::max))
        });
        report.push(t.into_check("connection.algebra", algebra_tol));
    }
    let t = check_family(spec, &conn.family(), opts)?;
    report.push(t.into_check("connection.overlap", tol));
    Ok(report)
}

/// `Γ'_i = γ_i Γ_i γ_i⁻¹ − dγ_i γ_i⁻¹`, the connection in the new gauge.
pub fn gauge_transform_connection(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    gauge: &GaugeTransformation,
) -> Result<ConnectionSpec, ConnectionError> {
    conn.check_shape(spec)?;
    let mut forms = Vec::new();
    for chart in &spec.atlas.charts {
        let g = gauge.get(&chart.name)?;
        let gi = spec.group.inverse(g);
        let gamma = conn.get(&chart.name)?;
        let conj = gamma.conjugate_by(g, &gi);
        let inhom = LocalForm::differential(chart, g).right_mul(&gi);
        forms.push(conj.sub(&inhom)?);
    }
    Ok(ConnectionSpec::new(
        format!("{}/{}", conn.name, gauge.name),
        forms,
        conn.algebra_check,
    ))
}

/// Per-chart gauge transformation of a vector or adjoint family.
pub fn gauge_transform_family(
    spec: &BundleSpec,
    family: &FormFamily,
    gauge: &GaugeTransformation,
) -> Result<FormFamily, ConnectionError> {
    let mut forms = BTreeMap::new();
    for (chart, f) in &family.forms {
        let g = gauge.get(chart)?;
        let nf = match family.kind {
            TransformKind::Vector => f.left_mul(g),
            TransformKind::Adjoint => f.conjugate_by(g, &spec.group.inverse(g)),
            TransformKind::Invariant => f.clone(),
            TransformKind::Connection => return Err(ConnectionError::UnsupportedKind(family.kind)),
        };
        forms.insert(chart.clone(), nf);
    }
    Ok(FormFamily {
        kind: family.kind,
        forms,
    })
}

/// `R = dΓ + Γ∧Γ` per chart.
pub fn curvature(conn: &ConnectionSpec) -> Result<FormFamily, ConnectionError> {
    conn.per_chart(TransformKind::Adjoint, |g| g.d().add(&g.wedge(g)?))
}

/// `R = dΓ + ½ Γ[∧]Γ` per chart.
pub fn curvature_bracket(conn: &ConnectionSpec) -> Result<FormFamily, ConnectionError> {
    conn.per_chart(TransformKind::Adjoint, |g| {
        g.d().add(&g.bracket_wedge(g)?.scale(&Expr::num(0.5)))
    })
}

/// Agreement of the two structure equations and the curvature overlap law.
pub fn check_curvature(
    spec: &BundleSpec,
    conn: &ConnectionSpec,
    opts: Sampling,
    structure_tol: f64,
    law_tol: f64,
) -> Result<(FormFamily, ValidationReport), ConnectionError> {
    conn.check_shape(spec)?;
    let r = curvature(conn)?;
    let rb = curvature_bracket(conn)?;
    let mut report = ValidationReport::default();
    report.push(family_difference(spec, &r, &rb, opts).into_check("curvature.structure", structure_tol));
    report.push(check_family(spec, &r, opts)?.into_check("curvature.overlap", law_tol));
    Ok((r, report))
}

/// `R = −iqF` against the curvature of the derived connection.
pub fn check_field_strength(
    spec: &BundleSpec,
    field: &GaugeField,
    opts: Sampling,
    tol: f64,
) -> Result<(FormFamily, Check), ConnectionError> {
    let f = field.field_strength()?;
    let r = curvature(&field.connection("from-potential"))?;
    let s = field.minus_iq();
    let scaled = f.map(TransformKind::Adjoint, |x| x.scale(&s));
    let t = family_difference(spec, &r, &scaled, opts);
    Ok((f, t.into_check("field_strength.consistency", tol)))
}

/// `Dφ = dφ + Γ∧φ` for vector families, `DΘ = dΘ + Γ[∧]Θ` for adjoint ones.
pub fn covariant_derivative(family: &FormFamily, conn: &ConnectionSpec) -> Result<FormFamily, ConnectionError> {
    let mut forms = BTreeMap::new();
    for (chart, f) in &family.forms {
        let g = conn.get(chart)?;
        let d = match family.kind {
            TransformKind::Vector => f.d().add(&g.wedge(f)?)?,
            TransformKind::Adjoint => f.d().add(&g.bracket_wedge(f)?)?,
            kind => return Err(ConnectionError::UnsupportedKind(kind)),
        };
        forms.insert(chart.clone(), d);
    }
    Ok(FormFamily {
        kind: family.kind,
        forms,
    })
}

/// `dR + Γ[∧]R` at chart samples.
pub fn second_bianchi_residual(spec: &BundleSpec, conn: &ConnectionSpec, opts: Sampling) -> Result<Tracker, ConnectionError> {
    let r = curvature(conn)?;
    let dr = covariant_derivative(&r, conn)?;
    Ok(family_magnitude(spec, &dr, opts))
}

/// Evaluate a 0-form family (a section) as values.
pub fn section_family(section: &crate::bundle::Section, spec: &BundleSpec) -> Result<FormFamily, ConnectionError> {
    use crate::bundle::SectionKind;
    let n = spec.rank();
    let (kind, shape) = match section.kind {
        SectionKind::Vector => (TransformKind::Vector, ValueShape::Vector(n)),
        SectionKind::Adjoint => (TransformKind::Adjoint, ValueShape::Matrix(n)),
        SectionKind::Principal => (TransformKind::Vector, ValueShape::Matrix(n)),
    };
    let mut forms = BTreeMap::new();
    for chart in &spec.atlas.charts {
        let v: &ExprMatrix = section
            .components
            .get(&chart.name)
            .ok_or_else(|| ConnectionError::MissingChart(chart.name.clone()))?;
        forms.insert(chart.name.clone(), LocalForm::function(chart, shape, v.clone())?);
    }
    Ok(FormFamily { kind, forms })
}

/// A connection 1-form evaluated on a tangent vector.
pub fn gamma_on(conn: &ConnectionSpec, chart: &str, point: &[f64], velocity: &[f64]) -> Result<CMat, ConnectionError> {
    let v: FormValue = conn.get(chart)?.eval_at(point)?;
    Ok(v.on_vector(velocity))
}
