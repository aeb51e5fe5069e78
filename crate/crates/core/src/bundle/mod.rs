//! Bundles given by transition functions on an atlas.
//!
//! The transition for overlap component `i → j` is written in chart `i`
//! coordinates and relates fiber components by `v_i = g_ij v_j`. The total
//! space is never built: the transitions are the bundle.

pub mod gauge;
pub mod group;
pub mod ops;
pub mod section;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::forms::FormError;
use crate::geometry::{Atlas, GeometryError, OverlapKey, OverlapMap};
use crate::linalg::{self, CMat};
use crate::report::{Check, Observation, Tracker, ValidationReport};
use crate::symmat::ExprMatrix;

pub use gauge::{apply_gauge, check_gauge, transform_section, GaugeKind, GaugeTransformation};
pub use group::{GroupDescriptor, GroupKind};
pub use ops::{arcs_itinerary, loop_class, pullback_bundle, whitney_sum, LoopClass, LoopStep, PullbackMap};
pub use section::{check_section, Section, SectionKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("no transition for overlap {0}")]
    MissingTransition(String),
    #[error("transition key `{0}` matches no overlap of the atlas")]
    UnusedTransition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bundles live on different atlases (`{0}` and `{1}`)")]
    AtlasMismatch(String, String),
    #[error("{0}")]
    Group(String),
    #[error("point {point:?} of chart `{chart}` maps outside its assigned chart: {detail}")]
    ChartAssignmentGap {
        chart: String,
        point: Vec<f64>,
        detail: String,
    },
    #[error("itinerary is not closed: {0}")]
    NotClosed(String),
    #[error("transition {key} is not constant along the itinerary (residual {residual:.3e})")]
    NotLocallyConstant { key: String, residual: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    Vector,
    Principal,
    Tangent,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fiber {
    pub kind: FiberKind,
    pub field: Field,
    pub rank: usize,
}

/// How a user-supplied transition is attached to overlaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKey {
    /// One component: `"a,b@top"`.
    Exact(OverlapKey),
    /// Every component of an ordered pair: `"a,b"`.
    Pair(String, String),
    /// Explicit `g_ii`: `"a,a"`.
    Diagonal(String),
    /// All overlaps not otherwise listed: `"*"`.
    Wildcard,
}

impl TransitionKey {
    pub fn parse(text: &str) -> Option<Self> {
        if text.trim() == "*" {
            return Some(Self::Wildcard);
        }
        let key = OverlapKey::parse(text)?;
        Some(match key.component {
            Some(_) => Self::Exact(key),
            None if key.from == key.to => Self::Diagonal(key.from),
            None => Self::Pair(key.from, key.to),
        })
    }
}

impl fmt::Display for TransitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact(k) => write!(f, "{k}"),
            Self::Pair(a, b) => write!(f, "{a},{b}"),
            Self::Diagonal(a) => write!(f, "{a},{a}"),
            Self::Wildcard => write!(f, "*"),
        }
    }
}

/// Sampling options shared by validators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            samples: crate::geometry::sampling::DEFAULT_SAMPLES,
            seed: crate::geometry::sampling::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleSpec {
    pub name: String,
    pub atlas: Arc<Atlas>,
    pub fiber: Fiber,
    pub group: GroupDescriptor,
    transitions: BTreeMap<OverlapKey, ExprMatrix>,
    diagonal: BTreeMap<String, ExprMatrix>,
}

impl BundleSpec {
    /// Attach user transitions to every overlap component of the atlas.
    /// Exact keys beat pair keys, which beat the wildcard.
    pub fn new(
        name: impl Into<String>,
        atlas: Arc<Atlas>,
        fiber: Fiber,
        group: GroupDescriptor,
        raw: Vec<(TransitionKey, ExprMatrix)>,
    ) -> Result<Self, BundleError> {
        group.validate().map_err(BundleError::Group)?;
        if fiber.rank != group.n {
            return Err(BundleError::Shape(format!(
                "fiber rank {} does not match group dimension {}",
                fiber.rank, group.n
            )));
        }
        if fiber.kind == FiberKind::Tangent {
            if !raw.is_empty() {
                return Err(BundleError::Invalid(
                    "tangent bundles take their transitions from the atlas".into(),
                ));
            }
            return Self::tangent(name, atlas);
        }
        let n = group.n;
        let mut used: BTreeSet<TransitionKey> = BTreeSet::new();
        let mut exact = BTreeMap::new();
        let mut pair = BTreeMap::new();
        let mut diagonal = BTreeMap::new();
        let mut wildcard = None;
        for (key, m) in raw {
            if (m.rows(), m.cols()) != (n, n) {
                return Err(BundleError::Shape(format!(
                    "transition {key} is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
            let dup = match &key {
                TransitionKey::Exact(k) => exact.insert(k.clone(), m).is_some(),
                TransitionKey::Pair(a, b) => pair.insert((a.clone(), b.clone()), m).is_some(),
                TransitionKey::Diagonal(a) => {
                    let chart = atlas.chart(a)?;
                    check_vars(&m, &chart.coords, &key)?;
                    diagonal.insert(a.clone(), m).is_some()
                }
                TransitionKey::Wildcard => wildcard.replace(m).is_some(),
            };
            if dup {
                return Err(BundleError::Invalid(format!("transition {key} given twice")));
            }
        }
        let mut transitions = BTreeMap::new();
        for ov in &atlas.overlaps {
            let k = &ov.key;
            let (m, used_key) = if let Some(m) = exact.get(k) {
                (m, TransitionKey::Exact(k.clone()))
            } else if let Some(m) = pair.get(&(k.from.clone(), k.to.clone())) {
                (m, TransitionKey::Pair(k.from.clone(), k.to.clone()))
            } else if let Some(m) = &wildcard {
                (m, TransitionKey::Wildcard)
            } else {
                return Err(BundleError::MissingTransition(k.to_string()));
            };
            let src = atlas.chart(&k.from)?;
            check_vars(m, &src.coords, &used_key)?;
            used.insert(used_key);
            transitions.insert(k.clone(), m.clone());
        }
        for k in exact.keys() {
            if !used.contains(&TransitionKey::Exact(k.clone())) {
                return Err(BundleError::UnusedTransition(k.to_string()));
            }
        }
        for (a, b) in pair.keys() {
            if !used.contains(&TransitionKey::Pair(a.clone(), b.clone())) {
                return Err(BundleError::UnusedTransition(format!("{a},{b}")));
            }
        }
        Ok(Self {
            name: name.into(),
            atlas,
            fiber,
            group,
            transitions,
            diagonal,
        })
    }

    /// Bundle with identity transitions on every overlap.
    pub fn trivial(name: impl Into<String>, atlas: Arc<Atlas>, fiber: Fiber, group: GroupDescriptor) -> Result<Self, BundleError> {
        let id = ExprMatrix::identity(group.n);
        Self::new(name, atlas, fiber, group, vec![(TransitionKey::Wildcard, id)])
    }

    /// Tangent bundle: `g_ij = ∂x_i/∂x_j`, written in chart `i` coordinates.
    pub fn tangent(name: impl Into<String>, atlas: Arc<Atlas>) -> Result<Self, BundleError> {
        let n = atlas.dim();
        let mut transitions = BTreeMap::new();
        for ov in &atlas.overlaps {
            let rev = atlas
                .overlap(&ov.key.reversed())
                .ok_or_else(|| BundleError::MissingTransition(ov.key.reversed().to_string()))?;
            let target = atlas.chart(&ov.key.to)?;
            let subst = ov.substitution(target);
            let j = ExprMatrix::from_rows(rev.jacobian_exprs().to_vec()).substitute(&subst);
            transitions.insert(ov.key.clone(), j);
        }
        Ok(Self {
            name: name.into(),
            atlas,
            fiber: Fiber {
                kind: FiberKind::Tangent,
                field: Field::Real,
                rank: n,
            },
            group: GroupDescriptor::new(GroupKind::GlR, n),
            transitions,
            diagonal: BTreeMap::new(),
        })
    }

    pub(crate) fn from_parts(
        name: String,
        atlas: Arc<Atlas>,
        fiber: Fiber,
        group: GroupDescriptor,
        transitions: BTreeMap<OverlapKey, ExprMatrix>,
        diagonal: BTreeMap<String, ExprMatrix>,
    ) -> Self {
        Self {
            name,
            atlas,
            fiber,
            group,
            transitions,
            diagonal,
        }
    }

    pub fn rank(&self) -> usize {
        self.group.n
    }

    pub fn transitions(&self) -> &BTreeMap<OverlapKey, ExprMatrix> {
        &self.transitions
    }

    pub fn diagonal(&self) -> &BTreeMap<String, ExprMatrix> {
        &self.diagonal
    }

    pub fn transition(&self, key: &OverlapKey) -> Result<&ExprMatrix, BundleError> {
        self.transitions
            .get(key)
            .ok_or_else(|| BundleError::MissingTransition(key.to_string()))
    }

    /// `g_ij` at a point of chart `i` lying in overlap component `ov`.
    pub fn transition_at(&self, ov: &OverlapMap, point: &[f64]) -> Result<CMat, BundleError> {
        let src = self.atlas.chart(&ov.key.from)?;
        Ok(self.transition(&ov.key)?.eval(&src.bindings(point))?)
    }

    /// `g_{to,from}` for a point given in chart `from`, choosing the
    /// component that contains it. Identity when the charts agree.
    pub fn switch_matrix(&self, from: &str, to: &str, point: &[f64]) -> Result<(CMat, Vec<f64>, Option<OverlapKey>), BundleError> {
        if from == to {
            return Ok((linalg::identity(self.rank()), point.to_vec(), None));
        }
        let ov = self.atlas.locate(from, to, point)?;
        let q = self.atlas.apply(ov, point)?;
        let rev = self
            .atlas
            .overlap(&ov.key.reversed())
            .ok_or_else(|| BundleError::MissingTransition(ov.key.reversed().to_string()))?;
        Ok((self.transition_at(rev, &q)?, q, Some(rev.key.clone())))
    }

    /// Symbolic `g_ij⁻¹` for the transition of `key`.
    pub fn transition_inverse(&self, key: &OverlapKey) -> Result<ExprMatrix, BundleError> {
        Ok(self.group.inverse(self.transition(key)?))
    }

    /// Same bundle with every transition replaced by `f(key, g)`.
    pub fn map_transitions(
        &self,
        name: impl Into<String>,
        mut f: impl FnMut(&OverlapKey, &ExprMatrix) -> Result<ExprMatrix, BundleError>,
    ) -> Result<Self, BundleError> {
        let mut transitions = BTreeMap::new();
        for (k, g) in &self.transitions {
            transitions.insert(k.clone(), f(k, g)?);
        }
        let mut out = self.clone();
        out.name = name.into();
        out.transitions = transitions;
        Ok(out)
    }

    /// Transition keys with their expressions, diagonal ones included.
    pub fn transition_table(&self) -> Vec<(String, ExprMatrix)> {
        let mut out: Vec<(String, ExprMatrix)> = self
            .diagonal
            .iter()
            .map(|(k, m)| (format!("{k},{k}"), m.clone()))
            .collect();
        out.extend(self.transitions.iter().map(|(k, m)| (k.to_string(), m.clone())));
        out
    }
}

fn check_vars(m: &ExprMatrix, coords: &[String], key: &TransitionKey) -> Result<(), BundleError> {
    for e in m.entries() {
        if let Some(v) = e.free_vars().into_iter().find(|v| !coords.contains(v)) {
            return Err(BundleError::Invalid(format!(
                "transition {key} uses `{v}`, which is not a coordinate of its source chart"
            )));
        }
    }
    Ok(())
}

pub(crate) fn eval_in(chart: &crate::geometry::Chart, e: &ExprMatrix, point: &[f64]) -> Result<CMat, EvalError> {
    e.eval(&chart.bindings(point))
}

/// Sample points for every overlap component, in atlas order.
pub fn overlap_samples(atlas: &Atlas, opts: Sampling) -> Vec<(&OverlapMap, Vec<f64>)> {
    let mut out = Vec::new();
    for ov in &atlas.overlaps {
        for p in atlas.sample_overlap(ov, opts.samples, opts.seed) {
            out.push((ov, p));
        }
    }
    out
}

/// Check `g_ii = e`, `g_ji = g_ij⁻¹`, `g_ij g_jk = g_ik` and group
/// membership at sampled points.
pub fn validate_cocycle(spec: &BundleSpec, opts: Sampling, tol: f64, membership_tol: f64) -> ValidationReport {
    let atlas = &*spec.atlas;
    let n = spec.rank();
    let id = linalg::identity(n);
    let mut report = ValidationReport::default();

    if spec.diagonal.is_empty() {
        let mut check = Check::pass("cocycle.identity").with_detail("g_ii implicit");
        check.residual = Some(0.0);
        check.tolerance = Some(tol);
        report.push(check);
    } else {
        let mut items = Vec::new();
        for (name, g) in &spec.diagonal {
            if let Ok(chart) = atlas.chart(name) {
                for p in atlas.sample_chart(chart, opts.samples, opts.seed) {
                    items.push((chart, g, p));
                }
            }
        }
        let t = Tracker::collect_par(&items, |(chart, g, p)| match eval_in(chart, g, p) {
            Ok(v) => Observation::new(linalg::max_abs_diff(&v, &id), &chart.name, p, format!("{0},{0}", chart.name)),
            Err(e) => Observation::failed(e, &chart.name, p, format!("{0},{0}", chart.name)),
        });
        report.push(t.into_check("cocycle.identity", tol));
    }

    let samples = overlap_samples(atlas, opts);
    let inverse = Tracker::collect_par(&samples, |(ov, p)| {
        let at = ov.key.to_string();
        let res = (|| -> Result<f64, BundleError> {
            let g = spec.transition_at(ov, p)?;
            let q = atlas.apply(ov, p)?;
            let rev = atlas
                .overlap(&ov.key.reversed())
                .ok_or_else(|| BundleError::MissingTransition(ov.key.reversed().to_string()))?;
            let h = spec.transition_at(rev, &q)?;
            Ok(linalg::max_abs_diff(&(g * h), &id))
        })();
        match res {
            Ok(r) => Observation::new(r, &ov.key.from, p, at),
            Err(e) => Observation::failed(e, &ov.key.from, p, at),
        }
    });
    report.push(inverse.into_check("cocycle.inverse", tol));

    let mut triples = Vec::new();
    for ov_ij in &atlas.overlaps {
        for k in atlas.chart_names() {
            if k == ov_ij.key.from || k == ov_ij.key.to {
                continue;
            }
            if atlas.components(&ov_ij.key.to, k).is_empty() || atlas.components(&ov_ij.key.from, k).is_empty() {
                continue;
            }
            let mut found = 0;
            for p in atlas.sample_overlap(ov_ij, opts.samples.saturating_mul(4), opts.seed) {
                if found == opts.samples {
                    break;
                }
                let Ok(q) = atlas.apply(ov_ij, &p) else { continue };
                let (Ok(ov_jk), Ok(ov_ik)) = (atlas.locate(&ov_ij.key.to, k, &q), atlas.locate(&ov_ij.key.from, k, &p)) else {
                    continue;
                };
                triples.push((ov_ij, ov_jk, ov_ik, p, q));
                found += 1;
            }
        }
    }
    let triple = Tracker::collect_par(&triples, |(ij, jk, ik, p, q)| {
        let at = format!("{},{},{}", ij.key.from, ij.key.to, jk.key.to);
        let res = (|| -> Result<f64, BundleError> {
            let lhs = spec.transition_at(ij, p)? * spec.transition_at(jk, q)?;
            let rhs = spec.transition_at(ik, p)?;
            Ok(linalg::max_abs_diff(&lhs, &rhs))
        })();
        match res {
            Ok(r) => Observation::new(r, &ij.key.from, p, at),
            Err(e) => Observation::failed(e, &ij.key.from, p, at),
        }
    });
    let mut triple_check = triple.into_check("cocycle.triple", tol);
    if triple_check.samples == 0 {
        triple_check = Check::pass("cocycle.triple").with_detail("no triple overlaps");
        triple_check.residual = Some(0.0);
        triple_check.tolerance = Some(tol);
    }
    report.push(triple_check);

    let membership = Tracker::collect_par(&samples, |(ov, p)| match spec.transition_at(ov, p) {
        Ok(g) => {
            let r = spec.group.membership_residual(&g);
            Observation::new(r, &ov.key.from, p, ov.key.to_string())
        }
        Err(e) => Observation::failed(e, &ov.key.from, p, ov.key.to_string()),
    });
    let m_tol = if spec.group.is_discrete() { 0.0 } else { membership_tol };
    report.push(membership.into_check("cocycle.membership", m_tol));
    report
}

/// Expression helper: parse a matrix given as rows of strings.
pub fn matrix(rows: &[&[&str]]) -> ExprMatrix {
    ExprMatrix::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|s| Expr::parse(s).expect("valid expression")).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;

    fn mobius() -> BundleSpec {
        BundleSpec::new(
            "mobius",
            Arc::new(catalog::circle()),
            Fiber {
                kind: FiberKind::Vector,
                field: Field::Real,
                rank: 1,
            },
            GroupDescriptor::new(GroupKind::Z2, 1),
            vec![
                (TransitionKey::parse("a,b@top").unwrap(), matrix(&[&["1"]])),
                (TransitionKey::parse("b,a@top").unwrap(), matrix(&[&["1"]])),
                (TransitionKey::parse("a,b@bottom").unwrap(), matrix(&[&["-1"]])),
                (TransitionKey::parse("b,a@bottom").unwrap(), matrix(&[&["-1"]])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mobius_cocycle_is_exact() {
        let r = validate_cocycle(&mobius(), Sampling::default(), 1e-10, 1e-9);
        assert!(r.passed(), "{r:#?}");
        assert_eq!(r.max_residual("cocycle"), 0.0);
    }

    #[test]
    fn missing_component_is_an_error() {
        let err = BundleSpec::new(
            "m",
            Arc::new(catalog::circle()),
            Fiber {
                kind: FiberKind::Vector,
                field: Field::Real,
                rank: 1,
            },
            GroupDescriptor::new(GroupKind::Z2, 1),
            vec![(TransitionKey::parse("a,b@top").unwrap(), matrix(&[&["1"]]))],
        )
        .unwrap_err();
        assert!(matches!(err, BundleError::MissingTransition(_)));
    }

    #[test]
    fn tangent_sphere_transitions_invert() {
        let spec = BundleSpec::tangent("ts", Arc::new(catalog::sphere())).unwrap();
        let r = validate_cocycle(&spec, Sampling { samples: 64, seed: 1 }, 1e-10, 1e-9);
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn trivial_torus_has_triple_overlaps() {
        let spec = BundleSpec::trivial(
            "t",
            Arc::new(catalog::torus()),
            Fiber {
                kind: FiberKind::Vector,
                field: Field::Complex,
                rank: 2,
            },
            GroupDescriptor::new(GroupKind::U, 2),
        )
        .unwrap();
        let r = validate_cocycle(&spec, Sampling { samples: 16, seed: 1 }, 1e-10, 1e-9);
        assert!(r.get("cocycle.triple").unwrap().samples > 0);
        assert!(r.passed());
    }
}
