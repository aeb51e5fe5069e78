//! Gauge transformations: a group-valued change of fiber basis per chart.
//!
//! `gamma[i]` is the matrix taking old components to new ones,
//! `v'_i = γ_i v_i`, so transitions become `g'_ij = γ_i g_ij γ_j⁻¹`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::section::{Section, SectionKind};
use super::{eval_in, overlap_samples, BundleError, BundleSpec, FiberKind, Sampling};
use crate::expr::Expr;
use crate::geometry::OverlapMap;
use crate::linalg;
use crate::report::{Observation, Tracker, ValidationReport};
use crate::symmat::ExprMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeKind {
    /// Must satisfy `γ_i = g_ij γ_j g_ij⁻¹` on overlaps.
    Automorphism,
    /// Unconstrained per chart.
    Neighborhood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransformation {
    pub name: String,
    pub kind: GaugeKind,
    pub gamma: BTreeMap<String, ExprMatrix>,
}

impl GaugeTransformation {
    pub fn new(name: impl Into<String>, kind: GaugeKind, gamma: BTreeMap<String, ExprMatrix>) -> Self {
        Self {
            name: name.into(),
            kind,
            gamma,
        }
    }

    pub fn identity(spec: &BundleSpec) -> Self {
        let gamma = spec
            .atlas
            .chart_names()
            .map(|c| (c.to_string(), ExprMatrix::identity(spec.rank())))
            .collect();
        Self::new("identity", GaugeKind::Automorphism, gamma)
    }

    pub fn get(&self, chart: &str) -> Result<&ExprMatrix, BundleError> {
        self.gamma
            .get(chart)
            .ok_or_else(|| BundleError::Shape(format!("gauge `{}` has no matrix on chart `{chart}`", self.name)))
    }

    fn check_shape(&self, spec: &BundleSpec) -> Result<(), BundleError> {
        let n = spec.rank();
        for chart in spec.atlas.charts.iter() {
            let g = self.get(&chart.name)?;
            if (g.rows(), g.cols()) != (n, n) {
                return Err(BundleError::Shape(format!(
                    "gauge `{}` on `{}` is {}x{}, expected {n}x{n}",
                    self.name,
                    chart.name,
                    g.rows(),
                    g.cols()
                )));
            }
            for e in g.entries() {
                if let Some(v) = e.free_vars().into_iter().find(|v| !chart.coords.contains(v)) {
                    return Err(BundleError::Invalid(format!(
                        "gauge `{}` on `{}` uses unknown coordinate `{v}`",
                        self.name, chart.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// `γ_j` rewritten in the source coordinates of `ov`.
    pub fn target_in_source(&self, spec: &BundleSpec, ov: &OverlapMap) -> Result<ExprMatrix, BundleError> {
        let target = spec.atlas.chart(&ov.key.to)?;
        let subst: HashMap<String, Expr> = ov.substitution(target);
        Ok(self.get(&ov.key.to)?.substitute(&subst))
    }
}

/// Group membership of every `γ_i`, plus the automorphism constraint when
/// the kind requires it.
pub fn check_gauge(
    spec: &BundleSpec,
    gauge: &GaugeTransformation,
    opts: Sampling,
    tol: f64,
) -> Result<ValidationReport, BundleError> {
    gauge.check_shape(spec)?;
    let atlas = &*spec.atlas;
    let mut report = ValidationReport::default();
    let mut points = Vec::new();
    for chart in &atlas.charts {
        for p in atlas.sample_chart(chart, opts.samples, opts.seed) {
            points.push((chart, p));
        }
    }
    let membership = Tracker::collect_par(&points, |(chart, p)| {
        match gauge.get(&chart.name).map_err(|e| e.to_string()).and_then(|g| eval_in(chart, g, p).map_err(|e| e.to_string())) {
            Ok(v) => Observation::new(spec.group.membership_residual(&v), &chart.name, p, chart.name.clone()),
            Err(e) => Observation::failed(e, &chart.name, p, chart.name.clone()),
        }
    });
    let m_tol = if spec.group.is_discrete() { 0.0 } else { tol };
    report.push(membership.into_check(format!("gauge.{}.membership", gauge.name), m_tol));
    if gauge.kind == GaugeKind::Automorphism {
        let samples = overlap_samples(atlas, opts);
        let constraint = Tracker::collect_par(&samples, |(ov, p)| {
            let at = ov.key.to_string();
            let res = (|| -> Result<f64, BundleError> {
                let src = atlas.chart(&ov.key.from)?;
                let dst = atlas.chart(&ov.key.to)?;
                let q = atlas.apply(ov, p)?;
                let g = spec.transition_at(ov, p)?;
                let gi = linalg::inverse(&g).map_err(|e| BundleError::Group(e.to_string()))?;
                let here = eval_in(src, gauge.get(&src.name)?, p)?;
                let there = eval_in(dst, gauge.get(&dst.name)?, &q)?;
                Ok(linalg::max_abs_diff(&here, &(&g * there * gi)))
            })();
            match res {
                Ok(r) => Observation::new(r, &ov.key.from, p, at),
                Err(e) => Observation::failed(e, &ov.key.from, p, at),
            }
        });
        report.push(constraint.into_check(format!("gauge.{}.automorphism", gauge.name), tol));
    }
    Ok(report)
}

/// New bundle with transitions `γ_i g_ij γ_j⁻¹`. Fails when `γ` leaves the
/// structure group at a sampled point.
pub fn apply_gauge(spec: &BundleSpec, gauge: &GaugeTransformation) -> Result<BundleSpec, BundleError> {
    gauge.check_shape(spec)?;
    let opts = Sampling {
        samples: 64,
        seed: crate::geometry::sampling::DEFAULT_SEED,
    };
    let membership = check_gauge(
        spec,
        &GaugeTransformation::new(gauge.name.clone(), GaugeKind::Neighborhood, gauge.gamma.clone()),
        opts,
        1e-9,
    )?;
    if !membership.passed() {
        let c = &membership.checks[0];
        return Err(BundleError::Group(format!(
            "gauge `{}` leaves {} (residual {:?} at {:?})",
            gauge.name,
            spec.group,
            c.residual,
            c.worst.as_ref().map(|w| (&w.chart, &w.point))
        )));
    }
    let mut out = spec.map_transitions(format!("{}/{}", spec.name, gauge.name), |key, g| {
        let ov = spec
            .atlas
            .overlap(key)
            .ok_or_else(|| BundleError::MissingTransition(key.to_string()))?;
        let gi = gauge.get(&key.from)?;
        let gj = gauge.target_in_source(spec, ov)?;
        Ok(gi.matmul(g).matmul(&spec.group.inverse(&gj)))
    })?;
    let diagonal = spec
        .diagonal()
        .iter()
        .map(|(c, g)| {
            let gi = gauge.get(c)?;
            Ok((c.clone(), gi.matmul(g).matmul(&spec.group.inverse(gi))))
        })
        .collect::<Result<BTreeMap<_, _>, BundleError>>()?;
    if out.fiber.kind == FiberKind::Tangent {
        out.fiber.kind = FiberKind::Vector;
    }
    let transitions = out.transitions().clone();
    Ok(BundleSpec::from_parts(out.name, out.atlas, out.fiber, out.group, transitions, diagonal))
}

/// Section components in the new basis.
pub fn transform_section(spec: &BundleSpec, section: &Section, gauge: &GaugeTransformation) -> Result<Section, BundleError> {
    let mut components = BTreeMap::new();
    for (chart, v) in &section.components {
        let g = gauge.get(chart)?;
        let nv = match section.kind {
            SectionKind::Vector | SectionKind::Principal => g.matmul(v),
            SectionKind::Adjoint => g.matmul(v).matmul(&spec.group.inverse(g)),
        };
        components.insert(chart.clone(), nv);
    }
    Ok(Section::new(section.name.clone(), section.kind, components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{matrix, validate_cocycle, Fiber, Field, GroupDescriptor, GroupKind, TransitionKey};
    use crate::geometry::catalog;
    use std::sync::Arc;

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

    #[test]
    fn identity_gauge_keeps_transitions() {
        let spec = mobius();
        let out = apply_gauge(&spec, &GaugeTransformation::identity(&spec)).unwrap();
        for (k, g) in spec.transitions() {
            assert_eq!(out.transitions()[k], *g);
        }
    }

    #[test]
    fn automorphism_on_mobius_is_trivial() {
        let spec = mobius();
        let gamma = [("a", "-1"), ("b", "-1")].iter().map(|(c, v)| (c.to_string(), matrix(&[&[v]]))).collect();
        let gauge = GaugeTransformation::new("flip", GaugeKind::Automorphism, gamma);
        assert!(check_gauge(&spec, &gauge, Sampling::default(), 1e-9).unwrap().passed());
        let out = apply_gauge(&spec, &gauge).unwrap();
        assert!(validate_cocycle(&out, Sampling::default(), 1e-10, 1e-9).passed());
        for (k, g) in spec.transitions() {
            let p = catalog::circle().sample_overlap(spec.atlas.overlap(k).unwrap(), 1, 1)[0].clone();
            let b = crate::expr::Bindings::from_real(&["theta"], &p);
            assert_eq!(out.transitions()[k].eval(&b).unwrap(), g.eval(&b).unwrap());
        }
    }

    #[test]
    fn non_member_gauge_is_rejected() {
        let spec = mobius();
        let gamma = [("a", "2"), ("b", "1")].iter().map(|(c, v)| (c.to_string(), matrix(&[&[v]]))).collect();
        let gauge = GaugeTransformation::new("bad", GaugeKind::Neighborhood, gamma);
        assert!(matches!(apply_gauge(&spec, &gauge), Err(BundleError::Group(_))));
    }
}
