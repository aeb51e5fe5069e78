//! Whitney sum, pullback bundles and the transition monodromy of a loop.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::{BundleError, BundleSpec, Fiber, FiberKind, Field, Sampling};
use crate::expr::Expr;
use crate::geometry::{catalog, Atlas, OverlapKey};
use crate::linalg::{self, CMat};
use crate::symmat::ExprMatrix;

/// Fiberwise direct sum: transitions `diag(gᵃ_ij, gᵇ_ij)`.
pub fn whitney_sum(a: &BundleSpec, b: &BundleSpec) -> Result<BundleSpec, BundleError> {
    if a.atlas != b.atlas {
        return Err(BundleError::AtlasMismatch(a.atlas.name.clone(), b.atlas.name.clone()));
    }
    let group = a.group.direct_sum(&b.group);
    let field = if a.fiber.field == Field::Complex || b.fiber.field == Field::Complex {
        Field::Complex
    } else {
        Field::Real
    };
    let fiber = Fiber {
        kind: FiberKind::Vector,
        field,
        rank: group.n,
    };
    let mut transitions = BTreeMap::new();
    for (k, ga) in a.transitions() {
        transitions.insert(k.clone(), ExprMatrix::block_diag(ga, b.transition(k)?));
    }
    let mut diagonal = BTreeMap::new();
    for chart in a.atlas.chart_names() {
        let da = a.diagonal().get(chart);
        let db = b.diagonal().get(chart);
        if da.is_some() || db.is_some() {
            let ia = ExprMatrix::identity(a.rank());
            let ib = ExprMatrix::identity(b.rank());
            diagonal.insert(chart.to_string(), ExprMatrix::block_diag(da.unwrap_or(&ia), db.unwrap_or(&ib)));
        }
    }
    Ok(BundleSpec::from_parts(
        format!("{}+{}", a.name, b.name),
        a.atlas.clone(),
        fiber,
        group,
        transitions,
        diagonal,
    ))
}

/// A map `f: N → M` given chart by chart: each chart of `N` is sent into
/// one assigned chart of `M` by coordinate expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackMap {
    pub source: Arc<Atlas>,
    /// N-chart name ↦ (M-chart name, one expression per M coordinate).
    pub assign: BTreeMap<String, (String, Vec<Expr>)>,
}

impl PullbackMap {
    /// `θ ↦ dθ` from `circle-arcs-k` onto the two-arc `circle`.
    pub fn circle_power(degree: i32, k: usize) -> Result<Self, BundleError> {
        let source = Arc::new(catalog::circle_arcs(k));
        let target = catalog::circle();
        let half = 1.5 * PI / k as f64;
        let mut assign = BTreeMap::new();
        for m in 0..k {
            let centre = 2.0 * PI * m as f64 / k as f64;
            let lo = degree as f64 * centre - (degree as f64).abs() * half;
            let hi = degree as f64 * centre + (degree as f64).abs() * half;
            let mut found = None;
            'search: for chart in &target.charts {
                for s in -(degree.abs() + 1)..=(degree.abs() + 1) {
                    let shift = 2.0 * PI * s as f64;
                    if lo + shift > chart.lower[0] + 1e-3 && hi + shift < chart.upper[0] - 1e-3 {
                        found = Some((chart.name.clone(), s));
                        break 'search;
                    }
                }
            }
            let (chart, s) = found.ok_or_else(|| {
                BundleError::Invalid(format!("arc c{m} does not fit any chart under degree {degree}"))
            })?;
            let map = Expr::parse(&format!("{degree}*theta + 2*pi*({s})")).expect("valid map");
            assign.insert(format!("c{m}"), (chart, vec![map.fold_constants()]));
        }
        Ok(Self { source, assign })
    }

    /// Identity map of an atlas onto itself.
    pub fn identity(atlas: Arc<Atlas>) -> Self {
        let assign = atlas
            .charts
            .iter()
            .map(|c| (c.name.clone(), (c.name.clone(), c.coords.iter().map(Expr::var).collect())))
            .collect();
        Self { source: atlas, assign }
    }

    fn image(&self, chart: &str, point: &[f64]) -> Result<Vec<f64>, BundleError> {
        let (_, maps) = &self.assign[chart];
        let b = self.source.chart(chart)?.bindings(point);
        Ok(maps.iter().map(|m| m.eval_real(&b)).collect::<Result<_, _>>()?)
    }
}

/// Bundle over `f`'s source with transitions `g_ij ∘ f`.
pub fn pullback_bundle(spec: &BundleSpec, f: &PullbackMap, opts: Sampling) -> Result<BundleSpec, BundleError> {
    let n_atlas = &*f.source;
    let m_atlas = &*spec.atlas;
    for chart in &n_atlas.charts {
        let (target, maps) = f.assign.get(&chart.name).ok_or_else(|| BundleError::ChartAssignmentGap {
            chart: chart.name.clone(),
            point: vec![],
            detail: "chart has no assigned target chart".into(),
        })?;
        let mc = m_atlas.chart(target)?;
        if maps.len() != mc.dim() {
            return Err(BundleError::Shape(format!(
                "map on `{}` has {} components, `{target}` needs {}",
                chart.name,
                maps.len(),
                mc.dim()
            )));
        }
        for p in n_atlas.sample_chart(chart, opts.samples, opts.seed) {
            let y = f.image(&chart.name, &p)?;
            if let Some(detail) = mc.violation(&y) {
                return Err(BundleError::ChartAssignmentGap {
                    chart: chart.name.clone(),
                    point: p,
                    detail,
                });
            }
        }
    }
    let mut transitions = BTreeMap::new();
    for ov in &n_atlas.overlaps {
        let (p_name, q_name) = (&ov.key.from, &ov.key.to);
        let (i, maps) = &f.assign[p_name];
        let (j, _) = &f.assign[q_name];
        let points = n_atlas.sample_overlap(ov, opts.samples, opts.seed);
        let mut component: Option<OverlapKey> = None;
        for x in &points {
            let y = f.image(p_name, x)?;
            let y_other = f.image(q_name, &n_atlas.apply(ov, x)?)?;
            let y_moved = if i == j {
                y.clone()
            } else {
                let m_ov = m_atlas.locate(i, j, &y)?;
                match &component {
                    None => component = Some(m_ov.key.clone()),
                    Some(k) if *k != m_ov.key => {
                        return Err(BundleError::Invalid(format!(
                            "overlap {} of the source meets several components of {i},{j}",
                            ov.key
                        )))
                    }
                    Some(_) => {}
                }
                m_atlas.apply(m_ov, &y)?
            };
            let gap = y_moved.iter().zip(&y_other).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > 1e-9 {
                return Err(BundleError::Invalid(format!(
                    "chart maps on {} disagree by {gap:.3e} at {x:?}",
                    ov.key
                )));
            }
        }
        let g = if i == j {
            ExprMatrix::identity(spec.rank())
        } else {
            let key = match component {
                Some(k) => k,
                None => {
                    let comps = m_atlas.components(i, j);
                    match comps.as_slice() {
                        [only] => only.key.clone(),
                        _ => return Err(BundleError::Invalid(format!("cannot place overlap {}", ov.key))),
                    }
                }
            };
            let m_chart = m_atlas.chart(i)?;
            let subst = m_chart.coords.iter().cloned().zip(maps.iter().cloned()).collect();
            spec.transition(&key)?.substitute(&subst)
        };
        transitions.insert(ov.key.clone(), g);
    }
    let mut fiber = spec.fiber;
    if fiber.kind == FiberKind::Tangent {
        fiber.kind = FiberKind::Vector;
    }
    Ok(BundleSpec::from_parts(
        format!("{}*{}", n_atlas.name, spec.name),
        f.source.clone(),
        fiber,
        spec.group,
        transitions,
        BTreeMap::new(),
    ))
}

/// One hop of a chart itinerary, identified by its overlap component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopStep {
    pub key: OverlapKey,
}

impl LoopStep {
    pub fn parse(text: &str) -> Option<Self> {
        OverlapKey::parse(text).map(|key| Self { key })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopClass {
    pub value: CMat,
    pub factors: Vec<(String, CMat)>,
}

impl LoopClass {
    pub fn is_identity(&self, tol: f64) -> bool {
        linalg::max_abs_diff(&self.value, &linalg::identity(self.value.nrows())) <= tol
    }
}

/// Tolerance for a transition to count as constant on an overlap component.
pub const LOCALLY_CONSTANT_TOL: f64 = 1e-9;

/// Ordered product `g_{i0 i1} g_{i1 i2} ⋯ g_{i(k−1) i0}` of transition values.
///
/// With the flat connection `Γ = 0`, transporting a vector once around the
/// loop multiplies its components by the inverse of this product.
pub fn loop_class(spec: &BundleSpec, steps: &[LoopStep], opts: Sampling) -> Result<LoopClass, BundleError> {
    let atlas = &*spec.atlas;
    let first = steps.first().ok_or_else(|| BundleError::NotClosed("empty itinerary".into()))?;
    for w in steps.windows(2) {
        if w[0].key.to != w[1].key.from {
            return Err(BundleError::NotClosed(format!("{} is followed by {}", w[0].key, w[1].key)));
        }
    }
    let last = steps.last().unwrap();
    if last.key.to != first.key.from {
        return Err(BundleError::NotClosed(format!(
            "ends on `{}`, starts on `{}`",
            last.key.to, first.key.from
        )));
    }
    let mut value = linalg::identity(spec.rank());
    let mut factors = Vec::new();
    for step in steps {
        let ov = match atlas.overlap(&step.key) {
            Some(ov) => ov,
            None if step.key.component.is_none() => match atlas.components(&step.key.from, &step.key.to).as_slice() {
                [only] => *only,
                [] => return Err(BundleError::MissingTransition(step.key.to_string())),
                _ => {
                    return Err(BundleError::Invalid(format!(
                        "step {} needs a component label",
                        step.key
                    )))
                }
            },
            None => return Err(BundleError::MissingTransition(step.key.to_string())),
        };
        let points = atlas.sample_overlap(ov, opts.samples.clamp(1, 64), opts.seed);
        let mut g0: Option<CMat> = None;
        let mut spread = 0.0f64;
        for p in &points {
            let g = spec.transition_at(ov, p)?;
            match &g0 {
                None => g0 = Some(g),
                Some(h) => spread = spread.max(linalg::max_abs_diff(h, &g)),
            }
        }
        let g0 = g0.ok_or_else(|| BundleError::Invalid(format!("overlap {} has no sample points", ov.key)))?;
        if spread > LOCALLY_CONSTANT_TOL {
            return Err(BundleError::NotLocallyConstant {
                key: ov.key.to_string(),
                residual: spread,
            });
        }
        value *= &g0;
        factors.push((ov.key.to_string(), g0));
    }
    Ok(LoopClass { value, factors })
}

/// The standard itinerary once around `circle-arcs-k`: `c0 → c1 → ⋯ → c0`.
pub fn arcs_itinerary(k: usize) -> Vec<LoopStep> {
    (0..k)
        .map(|m| LoopStep {
            key: OverlapKey::new(&format!("c{m}"), &format!("c{}", (m + 1) % k), None),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{matrix, validate_cocycle, GroupDescriptor, GroupKind, TransitionKey};
    use crate::linalg::c;

    fn mobius() -> BundleSpec {
        let t = |k: &str, v: &str| (TransitionKey::parse(k).unwrap(), matrix(&[&[v]]));
        BundleSpec::new(
            "mobius",
            Arc::new(catalog::circle()),
            Fiber {
                kind: FiberKind::Vector,
                field: Field::Real,
                rank: 1,
            },
            GroupDescriptor::new(GroupKind::Z2, 1),
            vec![t("a,b@top", "1"), t("b,a@top", "1"), t("a,b@bottom", "-1"), t("b,a@bottom", "-1")],
        )
        .unwrap()
    }

    fn around() -> Vec<LoopStep> {
        vec![LoopStep::parse("a,b@top").unwrap(), LoopStep::parse("b,a@bottom").unwrap()]
    }

    #[test]
    fn mobius_loop_is_minus_one() {
        let lc = loop_class(&mobius(), &around(), Sampling::default()).unwrap();
        assert_eq!(lc.value[(0, 0)], c(-1.0));
    }

    #[test]
    fn degree_two_pullback_untwists() {
        let f = PullbackMap::circle_power(2, 12).unwrap();
        let pb = pullback_bundle(&mobius(), &f, Sampling::default()).unwrap();
        assert!(validate_cocycle(&pb, Sampling::default(), 1e-10, 1e-9).passed());
        let lc = loop_class(&pb, &arcs_itinerary(12), Sampling::default()).unwrap();
        assert_eq!(lc.value[(0, 0)], c(1.0));
        let f1 = PullbackMap::circle_power(1, 12).unwrap();
        let pb1 = pullback_bundle(&mobius(), &f1, Sampling::default()).unwrap();
        let lc1 = loop_class(&pb1, &arcs_itinerary(12), Sampling::default()).unwrap();
        assert_eq!(lc1.value[(0, 0)], c(-1.0));
    }

    #[test]
    fn identity_pullback_keeps_transitions() {
        let m = mobius();
        let pb = pullback_bundle(&m, &PullbackMap::identity(m.atlas.clone()), Sampling::default()).unwrap();
        assert_eq!(pb.transitions(), m.transitions());
    }

    #[test]
    fn gap_is_reported() {
        let mut f = PullbackMap::circle_power(2, 12).unwrap();
        f.assign.get_mut("c3").unwrap().0 = "a".into();
        assert!(matches!(
            pullback_bundle(&mobius(), &f, Sampling::default()),
            Err(BundleError::ChartAssignmentGap { .. })
        ));
    }

    #[test]
    fn mobius_squared_is_orientable() {
        let m = mobius();
        let w = whitney_sum(&m, &m).unwrap();
        assert_eq!(w.group, GroupDescriptor::new(GroupKind::Z2, 2));
        for (k, g) in w.transitions() {
            let ov = w.atlas.overlap(k).unwrap();
            for p in w.atlas.sample_overlap(ov, 16, 1) {
                assert_eq!(w.transition_at(ov, &p).unwrap().determinant(), c(1.0));
            }
            let _ = g;
        }
    }

    #[test]
    fn open_itinerary_is_rejected() {
        let steps = vec![LoopStep::parse("a,b@top").unwrap()];
        assert!(matches!(loop_class(&mobius(), &steps, Sampling::default()), Err(BundleError::NotClosed(_))));
    }
}
