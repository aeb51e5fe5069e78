//! Base manifolds given as chart atlases.
//!
//! A [`Chart`] is a coordinate box optionally cut down by strict
//! inequalities (`expr > 0`). An [`OverlapMap`] is one connected component
//! of a chart intersection, with the coordinate change written in the
//! source chart's coordinates. Intersections with several components (the
//! two arcs where the halves of a circle meet) carry one map per component,
//! told apart by a component label.

pub mod catalog;
pub mod sampling;

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, Expr};
use sampling::{BoxSampler, DOMAIN_MARGIN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("charts `{from}` and `{to}` do not overlap")]
    NoOverlap { from: String, to: String },
    #[error("point {point:?} is outside overlap {from}->{to}: {violated}")]
    OutsideOverlap {
        from: String,
        to: String,
        point: Vec<f64>,
        violated: String,
    },
    #[error("point {point:?} is outside chart `{chart}`: {violated}")]
    OutsideChart {
        chart: String,
        point: Vec<f64>,
        violated: String,
    },
    #[error("singular Jacobian for {overlap} at {point:?} (|det| = {det:.3e})")]
    SingularJacobian {
        overlap: String,
        point: Vec<f64>,
        det: f64,
    },
    #[error("invalid atlas: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Smallest |det J| accepted for an overlap Jacobian.
pub const SINGULAR_JACOBIAN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub coords: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Each expression must be strictly positive inside the chart.
    pub constraints: Vec<Expr>,
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        coords: &[&str],
        lower: &[f64],
        upper: &[f64],
        constraints: Vec<Expr>,
    ) -> Self {
        Self {
            name: name.into(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            constraints,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn bindings(&self, point: &[f64]) -> Bindings {
        Bindings::from_real(&self.coords, point)
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// First violated domain condition, if any.
    pub fn violation(&self, point: &[f64]) -> Option<String> {
        for (k, p) in point.iter().enumerate() {
            let lo = self.lower[k] + DOMAIN_MARGIN;
            let hi = self.upper[k] - DOMAIN_MARGIN;
            if !(lo..=hi).contains(p) {
                return Some(format!("{} = {p} not in ({lo}, {hi})", self.coords[k]));
            }
        }
        violated_constraint(&self.constraints, &self.bindings(point))
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.violation(point).is_none()
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let dim = self.coords.len();
        if dim == 0 {
            return Err(GeometryError::Invalid(format!("chart `{}` has no coordinates", self.name)));
        }
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(GeometryError::Invalid(format!(
                "chart `{}`: box has wrong dimension",
                self.name
            )));
        }
        for (k, c) in self.coords.iter().enumerate() {
            if self.coords[..k].contains(c) {
                return Err(GeometryError::Invalid(format!(
                    "chart `{}`: duplicate coordinate `{c}`",
                    self.name
                )));
            }
            if c == "pi" || c == "i" {
                return Err(GeometryError::Invalid(format!(
                    "chart `{}`: `{c}` is reserved",
                    self.name
                )));
            }
            if !(self.lower[k] + 2.0 * DOMAIN_MARGIN < self.upper[k]) {
                return Err(GeometryError::Invalid(format!(
                    "chart `{}`: empty range for `{c}`",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn violated_constraint(constraints: &[Expr], b: &Bindings) -> Option<String> {
    for c in constraints {
        match c.eval(b) {
            Ok(v) if v.re > 0.0 => {}
            Ok(v) => return Some(format!("{c} > 0 fails ({})", v.re)),
            Err(e) => return Some(format!("{c} > 0 not evaluable: {e}")),
        }
    }
    None
}

/// Identifies one component of an ordered chart overlap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OverlapKey {
    pub from: String,
    pub to: String,
    pub component: Option<String>,
}

impl OverlapKey {
    pub fn new(from: &str, to: &str, component: Option<&str>) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            component: component.map(str::to_string),
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            from: self.to.clone(),
            to: self.from.clone(),
            component: self.component.clone(),
        }
    }

    /// Parse `"a,b"` or `"a,b@component"`.
    pub fn parse(text: &str) -> Option<Self> {
        let (pair, component) = match text.split_once('@') {
            Some((p, c)) => (p, Some(c.trim())),
            None => (text, None),
        };
        let (from, to) = pair.split_once(',')?;
        let (from, to) = (from.trim(), to.trim());
        if from.is_empty() || to.is_empty() || component == Some("") {
            return None;
        }
        Some(Self::new(from, to, component))
    }
}

impl fmt::Display for OverlapKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.from, self.to)?;
        if let Some(c) = &self.component {
            write!(f, "@{c}")?;
        }
        Ok(())
    }
}

/// Coordinate change on one overlap component, written in source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMap {
    pub key: OverlapKey,
    /// One expression per target coordinate.
    pub maps: Vec<Expr>,
    /// Strict inequalities (`expr > 0`) in source coordinates selecting the component.
    pub domain: Vec<Expr>,
    /// `jacobian[r][c] = ∂ target_r / ∂ source_c`.
    jacobian: Vec<Vec<Expr>>,
}

impl OverlapMap {
    pub fn new(key: OverlapKey, source: &Chart, maps: Vec<Expr>, domain: Vec<Expr>) -> Self {
        let jacobian = maps
            .iter()
            .map(|m| source.coords.iter().map(|c| m.differentiate(c)).collect())
            .collect();
        Self {
            key,
            maps,
            domain,
            jacobian,
        }
    }

    pub fn jacobian_exprs(&self) -> &[Vec<Expr>] {
        &self.jacobian
    }

    /// Substitution taking target coordinates to their source expressions.
    pub fn substitution(&self, target: &Chart) -> HashMap<String, Expr> {
        target
            .coords
            .iter()
            .cloned()
            .zip(self.maps.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub name: String,
    pub charts: Vec<Chart>,
    pub overlaps: Vec<OverlapMap>,
    pub orientable: bool,
}

impl Atlas {
    /// Assemble and structurally check an atlas.
    pub fn new(
        name: impl Into<String>,
        charts: Vec<Chart>,
        overlaps: Vec<OverlapMap>,
        orientable: bool,
    ) -> Result<Self, GeometryError> {
        let atlas = Self {
            name: name.into(),
            charts,
            overlaps,
            orientable,
        };
        atlas.check_structure()?;
        Ok(atlas)
    }

    fn check_structure(&self) -> Result<(), GeometryError> {
        if self.charts.is_empty() {
            return Err(GeometryError::Invalid("atlas has no charts".into()));
        }
        let dim = self.charts[0].dim();
        for (k, chart) in self.charts.iter().enumerate() {
            chart.validate()?;
            if chart.dim() != dim {
                return Err(GeometryError::Invalid(format!(
                    "chart `{}` has dimension {} but the atlas has dimension {dim}",
                    chart.name,
                    chart.dim()
                )));
            }
            if self.charts[..k].iter().any(|c| c.name == chart.name) {
                return Err(GeometryError::Invalid(format!("duplicate chart `{}`", chart.name)));
            }
        }
        for (k, ov) in self.overlaps.iter().enumerate() {
            let src = self.chart(&ov.key.from)?;
            let dst = self.chart(&ov.key.to)?;
            if ov.key.from == ov.key.to {
                return Err(GeometryError::Invalid(format!("self-overlap {}", ov.key)));
            }
            if ov.maps.len() != dst.dim() {
                return Err(GeometryError::Invalid(format!(
                    "overlap {} needs {} map expressions",
                    ov.key,
                    dst.dim()
                )));
            }
            for e in ov.maps.iter().chain(&ov.domain) {
                if let Some(v) = e.free_vars().iter().find(|v| src.coord_index(v).is_none()) {
                    return Err(GeometryError::Invalid(format!(
                        "overlap {} mentions `{v}`, not a coordinate of `{}`",
                        ov.key, src.name
                    )));
                }
            }
            if self.overlaps[..k].iter().any(|o| o.key == ov.key) {
                return Err(GeometryError::Invalid(format!("duplicate overlap {}", ov.key)));
            }
            if !self.overlaps.iter().any(|o| o.key == ov.key.reversed()) {
                return Err(GeometryError::Invalid(format!(
                    "overlap {} has no reverse map",
                    ov.key
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    pub fn chart(&self, name: &str) -> Result<&Chart, GeometryError> {
        self.charts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| GeometryError::UnknownChart(name.to_string()))
    }

    pub fn chart_names(&self) -> impl Iterator<Item = &str> {
        self.charts.iter().map(|c| c.name.as_str())
    }

    pub fn overlap(&self, key: &OverlapKey) -> Option<&OverlapMap> {
        self.overlaps.iter().find(|o| &o.key == key)
    }

    pub fn components(&self, from: &str, to: &str) -> Vec<&OverlapMap> {
        self.overlaps
            .iter()
            .filter(|o| o.key.from == from && o.key.to == to)
            .collect()
    }

    /// Why `point` (in source coordinates) is not in this overlap component.
    pub fn overlap_violation(&self, ov: &OverlapMap, point: &[f64]) -> Option<String> {
        let src = match self.chart(&ov.key.from) {
            Ok(c) => c,
            Err(e) => return Some(e.to_string()),
        };
        if let Some(v) = src.violation(point) {
            return Some(v);
        }
        let b = src.bindings(point);
        if let Some(v) = violated_constraint(&ov.domain, &b) {
            return Some(v);
        }
        let image = match self.apply_unchecked(ov, point) {
            Ok(p) => p,
            Err(e) => return Some(e.to_string()),
        };
        match self.chart(&ov.key.to) {
            Ok(dst) => dst.violation(&image).map(|v| format!("image {v}")),
            Err(e) => Some(e.to_string()),
        }
    }

    pub fn overlap_contains(&self, ov: &OverlapMap, point: &[f64]) -> bool {
        self.overlap_violation(ov, point).is_none()
    }

    /// The overlap component from `from` to `to` containing `point`.
    pub fn locate(&self, from: &str, to: &str, point: &[f64]) -> Result<&OverlapMap, GeometryError> {
        self.chart(from)?;
        self.chart(to)?;
        let mut last = None;
        for ov in self.components(from, to) {
            match self.overlap_violation(ov, point) {
                None => return Ok(ov),
                Some(v) => last = Some(v),
            }
        }
        match last {
            None => Err(GeometryError::NoOverlap {
                from: from.to_string(),
                to: to.to_string(),
            }),
            Some(violated) => Err(GeometryError::OutsideOverlap {
                from: from.to_string(),
                to: to.to_string(),
                point: point.to_vec(),
                violated,
            }),
        }
    }

    fn apply_unchecked(&self, ov: &OverlapMap, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let src = self.chart(&ov.key.from)?;
        let b = src.bindings(point);
        Ok(ov
            .maps
            .iter()
            .map(|m| m.eval_real(&b))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Image of a point under a specific overlap component.
    pub fn apply(&self, ov: &OverlapMap, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if let Some(violated) = self.overlap_violation(ov, point) {
            return Err(GeometryError::OutsideOverlap {
                from: ov.key.from.clone(),
                to: ov.key.to.clone(),
                point: point.to_vec(),
                violated,
            });
        }
        self.apply_unchecked(ov, point)
    }

    /// Coordinates in chart `to` of the base point with coordinates `point` in `from`.
    pub fn overlap_apply(&self, from: &str, to: &str, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if from == to {
            self.chart(from)?;
            return Ok(point.to_vec());
        }
        let ov = self.locate(from, to, point)?;
        self.apply_unchecked(ov, point)
    }

    pub fn jacobian_on(&self, ov: &OverlapMap, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let src = self.chart(&ov.key.from)?;
        let b = src.bindings(point);
        let n_out = ov.maps.len();
        let n_in = src.dim();
        let mut j = DMatrix::zeros(n_out, n_in);
        for r in 0..n_out {
            for c in 0..n_in {
                j[(r, c)] = ov.jacobian[r][c].eval_real(&b)?;
            }
        }
        if n_out == n_in {
            let det = j.determinant();
            if det.abs() < SINGULAR_JACOBIAN {
                return Err(GeometryError::SingularJacobian {
                    overlap: ov.key.to_string(),
                    point: point.to_vec(),
                    det: det.abs(),
                });
            }
        }
        Ok(j)
    }

    /// `∂x_to / ∂x_from` at `point` (source coordinates).
    pub fn jacobian(&self, from: &str, to: &str, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        if from == to {
            let n = self.chart(from)?.dim();
            return Ok(DMatrix::identity(n, n));
        }
        let ov = self.locate(from, to, point)?;
        self.jacobian_on(ov, point)
    }

    /// Up to `count` deterministic sample points of an overlap component,
    /// in source coordinates.
    pub fn sample_overlap(&self, ov: &OverlapMap, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let Ok(src) = self.chart(&ov.key.from) else {
            return Vec::new();
        };
        let max_tries = count.saturating_mul(400).max(1000);
        BoxSampler::new(&src.lower, &src.upper, seed)
            .take(max_tries)
            .filter(|p| self.overlap_contains(ov, p))
            .take(count)
            .collect()
    }

    pub fn sample_chart(&self, chart: &Chart, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let max_tries = count.saturating_mul(400).max(1000);
        BoxSampler::new(&chart.lower, &chart.upper, seed)
            .take(max_tries)
            .filter(|p| chart.contains(p))
            .take(count)
            .collect()
    }

    /// All other charts containing the point, with the component used and
    /// the point's coordinates there.
    pub fn charts_containing<'a>(
        &'a self,
        from: &str,
        point: &[f64],
    ) -> Vec<(&'a OverlapMap, Vec<f64>)> {
        self.overlaps
            .iter()
            .filter(|o| o.key.from == from)
            .filter(|o| self.overlap_contains(o, point))
            .filter_map(|o| self.apply_unchecked(o, point).ok().map(|p| (o, p)))
            .collect()
    }

    /// Numerical self-check of the atlas on sampled overlap points.
    pub fn check(&self, samples: usize, seed: u64) -> AtlasCheck {
        let mut out = AtlasCheck::default();
        for ov in &self.overlaps {
            let pts = self.sample_overlap(ov, samples, seed);
            if pts.is_empty() {
                out.empty_overlaps.push(ov.key.to_string());
                continue;
            }
            let rev = match self.overlap(&ov.key.reversed()) {
                Some(r) => r,
                None => continue,
            };
            for p in pts {
                out.points += 1;
                let q = match self.apply_unchecked(ov, &p) {
                    Ok(q) => q,
                    Err(e) => {
                        out.failures.push(format!("{}: {e}", ov.key));
                        continue;
                    }
                };
                match self.apply_unchecked(rev, &q) {
                    Ok(back) => {
                        let r = back
                            .iter()
                            .zip(&p)
                            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                        out.round_trip = out.round_trip.max(r);
                    }
                    Err(e) => out.failures.push(format!("{}: {e}", rev.key)),
                }
                match (self.jacobian_on(ov, &p), self.jacobian_on(rev, &q)) {
                    (Ok(j1), Ok(j2)) => {
                        let n = j1.nrows();
                        let prod = j2 * &j1 - DMatrix::<f64>::identity(n, n);
                        out.jacobian_product = out.jacobian_product.max(prod.amax());
                        let det = j1.determinant();
                        out.min_det = out.min_det.min(det);
                    }
                    (Err(e), _) | (_, Err(e)) => out.failures.push(e.to_string()),
                }
            }
        }
        out
    }
}

/// Result of [`Atlas::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasCheck {
    pub points: usize,
    pub round_trip: f64,
    pub jacobian_product: f64,
    pub min_det: f64,
    pub empty_overlaps: Vec<String>,
    pub failures: Vec<String>,
}

impl Default for AtlasCheck {
    fn default() -> Self {
        Self {
            points: 0,
            round_trip: 0.0,
            jacobian_product: 0.0,
            min_det: f64::INFINITY,
            empty_overlaps: Vec::new(),
            failures: Vec::new(),
        }
    }
}

impl AtlasCheck {
    pub fn orientation_consistent(&self) -> bool {
        self.min_det > 0.0
    }
}
