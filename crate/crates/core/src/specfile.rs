//! JSON spec files: strict schema, then conversion to the typed model.
//!
//! Every object rejects unknown fields. Expressions are strings (numbers
//! are accepted as constants). A matrix value is a scalar (1×1), a list
//! (column vector) or a list of rows.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{
    BundleError, BundleSpec, Fiber, FiberKind, GaugeKind, GaugeTransformation, GroupDescriptor, LoopStep, Section,
    SectionKind, TransitionKey,
};
use crate::connection::{AlgebraCheck, ConnectionSpec, GaugeField};
use crate::expr::{Bindings, Expr};
use crate::forms::{parse_multi_index, FormError, LocalForm, ValueShape};
use crate::geometry::{catalog as atlases, Atlas, Chart, GeometryError, OverlapKey, OverlapMap};
use crate::symmat::ExprMatrix;
use crate::transport::{Curve, TransportError};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
}

impl From<GeometryError> for SpecError {
    fn from(e: GeometryError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<BundleError> for SpecError {
    fn from(e: BundleError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<FormError> for SpecError {
    fn from(e: FormError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<TransportError> for SpecError {
    fn from(e: TransportError) -> Self {
        Self::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Scalar(Scalar),
    Column(Vec<Scalar>),
    Rows(Vec<Vec<Scalar>>),
}

/// Per-chart form: multi-index name (`"dx"`, `"dx^dy"`, `"1"`) to value.
pub type FormJson = BTreeMap<String, MatrixJson>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpecFile {
    pub spec_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub atlas: AtlasRef,
    pub bundle: BundleJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge_field: Option<GaugeFieldJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<SectionJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gauge_transformations: Vec<GaugeJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loops: Vec<LoopJson>,
    #[serde(default)]
    pub tasks: TasksJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtlasRef {
    Name(String),
    Inline(AtlasJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AtlasJson {
    pub name: String,
    #[serde(default = "yes")]
    pub orientable: bool,
    pub charts: Vec<ChartJson>,
    #[serde(default)]
    pub overlaps: Vec<OverlapJson>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChartJson {
    pub name: String,
    pub coords: Vec<String>,
    /// `[lower, upper]` per coordinate.
    #[serde(rename = "box")]
    pub bounds: Vec<[Scalar; 2]>,
    /// Expressions required to be positive.
    #[serde(default, rename = "where")]
    pub constraints: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OverlapJson {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub component: Option<String>,
    pub map: Vec<Scalar>,
    #[serde(default, rename = "where")]
    pub domain: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FiberJson {
    pub kind: FiberKind,
    pub field: crate::bundle::Field,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GroupJson {
    pub kind: crate::bundle::GroupKind,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BundleJson {
    pub fiber: FiberJson,
    pub group: GroupJson,
    /// Keys: `"a,b@comp"`, `"a,b"`, `"a,a"` or `"*"`.
    #[serde(default)]
    pub transitions: BTreeMap<String, MatrixJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlgebraCheckJson {
    #[default]
    None,
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConnectionJson {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub algebra_check: AlgebraCheckJson,
    pub forms: BTreeMap<String, FormJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GaugeFieldJson {
    pub q: f64,
    #[serde(default = "yes")]
    pub unitary: bool,
    pub potential: BTreeMap<String, FormJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SectionJson {
    pub name: String,
    pub kind: SectionKind,
    pub components: BTreeMap<String, MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GaugeJson {
    pub name: String,
    pub kind: GaugeKind,
    pub gamma: BTreeMap<String, MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CurveJson {
    pub name: String,
    pub segments: Vec<SegmentJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SegmentJson {
    pub chart: String,
    /// Parameter value where the segment ends; the last one ends at 1.
    pub end: Scalar,
    /// Chart coordinates as expressions in `t`.
    pub coords: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoopJson {
    pub name: String,
    /// Overlap components in order, e.g. `["a,b@top", "b,a@bottom"]`.
    pub itinerary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TasksJson {
    #[serde(default)]
    pub chern: bool,
    #[serde(default)]
    pub total_curvature: bool,
    /// Curves transported (as frames) by the aggregate report.
    #[serde(default)]
    pub transport: Vec<String>,
}

/// A loaded spec with every part converted and structurally checked.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub description: Option<String>,
    pub bundle: BundleSpec,
    pub connection: Option<ConnectionSpec>,
    pub gauge_field: Option<GaugeField>,
    pub sections: Vec<Section>,
    pub gauges: Vec<GaugeTransformation>,
    pub curves: Vec<Curve>,
    pub loops: Vec<(String, Vec<LoopStep>)>,
    pub tasks: TasksJson,
    pub source: SpecFile,
}

impl Model {
    pub fn atlas(&self) -> &Arc<Atlas> {
        &self.bundle.atlas
    }

    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(msg.into())
}

fn expr(s: &Scalar, ctx: &str) -> Result<Expr, SpecError> {
    match s {
        Scalar::Number(x) => Ok(Expr::num(*x)),
        Scalar::Text(t) => Expr::parse(t).map_err(|e| invalid(format!("{ctx}: {e}"))),
    }
}

fn constant(s: &Scalar, ctx: &str) -> Result<f64, SpecError> {
    let e = expr(s, ctx)?;
    if !e.free_vars().is_empty() {
        return Err(invalid(format!("{ctx}: `{e}` must be a constant")));
    }
    e.eval_real(&Bindings::new()).map_err(|err| invalid(format!("{ctx}: {err}")))
}

fn matrix_json(m: &MatrixJson, ctx: &str) -> Result<ExprMatrix, SpecError> {
    match m {
        MatrixJson::Scalar(s) => Ok(ExprMatrix::new(1, 1, vec![expr(s, ctx)?])),
        MatrixJson::Column(v) => {
            let entries = v.iter().map(|s| expr(s, ctx)).collect::<Result<Vec<_>, _>>()?;
            Ok(ExprMatrix::new(entries.len(), 1, entries))
        }
        MatrixJson::Rows(rows) => {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != cols) || cols == 0 {
                return Err(invalid(format!("{ctx}: ragged or empty matrix")));
            }
            let rows = rows
                .iter()
                .map(|r| r.iter().map(|s| expr(s, ctx)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ExprMatrix::from_rows(rows))
        }
    }
}

/// Square matrix: a 1×1 value may be written as a scalar, an `n×n` one as rows.
fn square_json(m: &MatrixJson, n: usize, ctx: &str) -> Result<ExprMatrix, SpecError> {
    let out = matrix_json(m, ctx)?;
    if (out.rows(), out.cols()) != (n, n) {
        return Err(invalid(format!("{ctx}: expected {n}x{n}, got {}x{}", out.rows(), out.cols())));
    }
    Ok(out)
}

fn check_coords(m: &ExprMatrix, chart: &Chart, ctx: &str) -> Result<(), SpecError> {
    for e in m.entries() {
        if let Some(v) = e.free_vars().into_iter().find(|v| !chart.coords.contains(v)) {
            return Err(invalid(format!("{ctx}: `{v}` is not a coordinate of chart `{}`", chart.name)));
        }
    }
    Ok(())
}

fn form_json(chart: &Chart, json: &FormJson, degree: usize, n: usize, ctx: &str) -> Result<LocalForm, SpecError> {
    let mut comps = Vec::new();
    for (name, value) in json {
        let ctx = format!("{ctx}.{name}");
        let mask = parse_multi_index(name, &chart.coords).map_err(|e| invalid(format!("{ctx}: {e}")))?;
        let m = square_json(value, n, &ctx)?;
        check_coords(&m, chart, &ctx)?;
        comps.push((mask, m));
    }
    Ok(LocalForm::from_components(&chart.name, &chart.coords, degree, ValueShape::Matrix(n), comps)?)
}

fn per_chart_forms(atlas: &Atlas, forms: &BTreeMap<String, FormJson>, n: usize, ctx: &str) -> Result<Vec<LocalForm>, SpecError> {
    for name in forms.keys() {
        atlas.chart(name)?;
    }
    atlas
        .charts
        .iter()
        .map(|chart| {
            let json = forms
                .get(&chart.name)
                .ok_or_else(|| invalid(format!("{ctx}: no entry for chart `{}`", chart.name)))?;
            form_json(chart, json, 1, n, &format!("{ctx}.{}", chart.name))
        })
        .collect()
}

fn per_chart_matrices(
    atlas: &Atlas,
    values: &BTreeMap<String, MatrixJson>,
    ctx: &str,
) -> Result<BTreeMap<String, ExprMatrix>, SpecError> {
    for name in values.keys() {
        atlas.chart(name)?;
    }
    atlas
        .charts
        .iter()
        .map(|chart| {
            let v = values
                .get(&chart.name)
                .ok_or_else(|| invalid(format!("{ctx}: no entry for chart `{}`", chart.name)))?;
            let ctx = format!("{ctx}.{}", chart.name);
            let m = matrix_json(v, &ctx)?;
            check_coords(&m, chart, &ctx)?;
            Ok((chart.name.clone(), m))
        })
        .collect()
}

fn build_atlas(json: &AtlasJson) -> Result<Atlas, SpecError> {
    let mut charts = Vec::new();
    for c in &json.charts {
        let ctx = format!("atlas.charts.{}", c.name);
        if c.bounds.len() != c.coords.len() {
            return Err(invalid(format!("{ctx}: one box interval per coordinate")));
        }
        let lower = c.bounds.iter().map(|b| constant(&b[0], &ctx)).collect::<Result<Vec<_>, _>>()?;
        let upper = c.bounds.iter().map(|b| constant(&b[1], &ctx)).collect::<Result<Vec<_>, _>>()?;
        let constraints = c.constraints.iter().map(|s| expr(s, &ctx)).collect::<Result<Vec<_>, _>>()?;
        let coords: Vec<&str> = c.coords.iter().map(String::as_str).collect();
        charts.push(Chart::new(c.name.clone(), &coords, &lower, &upper, constraints));
    }
    let mut overlaps = Vec::new();
    for o in &json.overlaps {
        let key = OverlapKey::new(&o.from, &o.to, o.component.as_deref());
        let ctx = format!("atlas.overlaps.{key}");
        let src = charts
            .iter()
            .find(|c| c.name == o.from)
            .ok_or_else(|| invalid(format!("{ctx}: unknown chart `{}`", o.from)))?;
        let maps = o.map.iter().map(|s| expr(s, &ctx)).collect::<Result<Vec<_>, _>>()?;
        let domain = o.domain.iter().map(|s| expr(s, &ctx)).collect::<Result<Vec<_>, _>>()?;
        overlaps.push(OverlapMap::new(key, src, maps, domain));
    }
    Ok(Atlas::new(json.name.clone(), charts, overlaps, json.orientable)?)
}

fn resolve_atlas(r: &AtlasRef) -> Result<Atlas, SpecError> {
    match r {
        AtlasRef::Name(n) => atlases::atlas(n).ok_or_else(|| invalid(format!("unknown atlas `{n}`"))),
        AtlasRef::Inline(a) => build_atlas(a),
    }
}

impl SpecFile {
    /// Strict parse of the JSON text.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: SpecFile = serde_json::from_str(text).map_err(|e| SpecError::Schema(e.to_string()))?;
        if spec.spec_version != SPEC_VERSION {
            return Err(SpecError::Schema(format!(
                "specVersion {} is not supported (expected {SPEC_VERSION})",
                spec.spec_version
            )));
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec files serialize")
    }

    /// Convert to the typed model; all structural checks happen here.
    pub fn build(&self) -> Result<Model, SpecError> {
        let atlas = Arc::new(resolve_atlas(&self.atlas)?);
        let fiber = Fiber {
            kind: self.bundle.fiber.kind,
            field: self.bundle.fiber.field,
            rank: self.bundle.fiber.rank,
        };
        let group = GroupDescriptor::new(self.bundle.group.kind, self.bundle.group.n);
        let n = fiber.rank;
        let mut raw = Vec::new();
        for (k, v) in &self.bundle.transitions {
            let key = TransitionKey::parse(k).ok_or_else(|| invalid(format!("bad transition key `{k}`")))?;
            raw.push((key, square_json(v, n, &format!("bundle.transitions.{k}"))?));
        }
        let bundle = BundleSpec::new(self.name.clone(), atlas.clone(), fiber, group, raw)?;

        if self.connection.is_some() && self.gauge_field.is_some() {
            return Err(invalid("give either `connection` or `gaugeField`, not both"));
        }
        let gauge_field = match &self.gauge_field {
            Some(g) => Some(GaugeField {
                q: g.q,
                unitary: g.unitary,
                potential: per_chart_forms(&atlas, &g.potential, n, "gaugeField.potential")?
                    .into_iter()
                    .map(|f| (f.chart.clone(), f))
                    .collect(),
            }),
            None => None,
        };
        let connection = match (&self.connection, &gauge_field) {
            (Some(c), _) => {
                let forms = per_chart_forms(&atlas, &c.forms, n, "connection.forms")?;
                let check = match c.algebra_check {
                    AlgebraCheckJson::None => AlgebraCheck::None,
                    AlgebraCheckJson::Group => AlgebraCheck::Group,
                };
                Some(ConnectionSpec::new(c.name.clone().unwrap_or_else(|| self.name.clone()), forms, check))
            }
            (None, Some(g)) => Some(g.connection(self.name.clone())),
            (None, None) => None,
        };

        let mut sections = Vec::new();
        for s in &self.sections {
            let comps = per_chart_matrices(&atlas, &s.components, &format!("sections.{}", s.name))?;
            let section = Section::new(s.name.clone(), s.kind, comps);
            section.check_shape(&bundle)?;
            sections.push(section);
        }
        let mut gauges = Vec::new();
        for g in &self.gauge_transformations {
            let ctx = format!("gaugeTransformations.{}", g.name);
            let gamma = per_chart_matrices(&atlas, &g.gamma, &ctx)?;
            for (c, m) in &gamma {
                if (m.rows(), m.cols()) != (n, n) {
                    return Err(invalid(format!("{ctx}.{c}: expected {n}x{n}")));
                }
            }
            gauges.push(GaugeTransformation::new(g.name.clone(), g.kind, gamma));
        }
        let mut curves = Vec::new();
        for c in &self.curves {
            let ctx = format!("curves.{}", c.name);
            let pieces = c
                .segments
                .iter()
                .map(|s| {
                    let end = constant(&s.end, &ctx)?;
                    let coords = s.coords.iter().map(|e| expr(e, &ctx)).collect::<Result<Vec<_>, _>>()?;
                    Ok((s.chart.clone(), end, coords))
                })
                .collect::<Result<Vec<_>, SpecError>>()?;
            let curve = Curve::new(c.name.clone(), &atlas, pieces)?;
            curve.check_continuity(&atlas)?;
            curves.push(curve);
        }
        let mut loops = Vec::new();
        for l in &self.loops {
            let steps = l
                .itinerary
                .iter()
                .map(|s| LoopStep::parse(s).ok_or_else(|| invalid(format!("loops.{}: bad step `{s}`", l.name))))
                .collect::<Result<Vec<_>, _>>()?;
            loops.push((l.name.clone(), steps));
        }
        for name in &self.tasks.transport {
            if !curves.iter().any(|c| &c.name == name) {
                return Err(invalid(format!("tasks.transport: unknown curve `{name}`")));
            }
        }
        for (what, names) in [
            ("sections", self.sections.iter().map(|s| &s.name).collect::<Vec<_>>()),
            ("curves", self.curves.iter().map(|s| &s.name).collect()),
            ("gaugeTransformations", self.gauge_transformations.iter().map(|s| &s.name).collect()),
            ("loops", self.loops.iter().map(|s| &s.name).collect()),
        ] {
            for (k, a) in names.iter().enumerate() {
                if names[..k].contains(a) {
                    return Err(invalid(format!("{what}: duplicate name `{a}`")));
                }
            }
        }
        if let Some(conn) = &connection {
            conn.check_shape(&bundle).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(Model {
            name: self.name.clone(),
            description: self.description.clone(),
            bundle,
            connection,
            gauge_field,
            sections,
            gauges,
            curves,
            loops,
            tasks: self.tasks.clone(),
            source: self.clone(),
        })
    }
}

/// Load a spec from a path, or from the catalog when written `catalog:NAME`.
pub fn load(path: &str) -> Result<Model, SpecError> {
    load_file(path)?.build()
}

pub fn load_file(path: &str) -> Result<SpecFile, SpecError> {
    if let Some(name) = path.strip_prefix("catalog:") {
        return crate::catalog::spec(name);
    }
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_string(),
        source,
    })?;
    SpecFile::parse(&text)
}
