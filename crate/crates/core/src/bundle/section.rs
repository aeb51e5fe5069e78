//! Sections given chart by chart, with their overlap compatibility laws.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{eval_in, overlap_samples, BundleError, BundleSpec, Sampling};
use crate::linalg::{self, CMat};
use crate::report::{Observation, Tracker, ValidationReport};
use crate::symmat::ExprMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    /// `v_i = g_ij v_j`, a column of `rank` components.
    Vector,
    /// `Θ_i = g_ij Θ_j g_ij⁻¹`, an `n×n` matrix.
    Adjoint,
    /// `s_i = g_ij s_j`, a group-valued `n×n` matrix.
    Principal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub kind: SectionKind,
    pub components: BTreeMap<String, ExprMatrix>,
}

impl Section {
    pub fn new(name: impl Into<String>, kind: SectionKind, components: BTreeMap<String, ExprMatrix>) -> Self {
        Self {
            name: name.into(),
            kind,
            components,
        }
    }

    /// Zero vector section.
    pub fn zero(spec: &BundleSpec) -> Self {
        let components = spec
            .atlas
            .chart_names()
            .map(|c| (c.to_string(), ExprMatrix::zeros(spec.rank(), 1)))
            .collect();
        Self::new("zero", SectionKind::Vector, components)
    }

    pub fn expected_shape(&self, spec: &BundleSpec) -> (usize, usize) {
        let n = spec.rank();
        match self.kind {
            SectionKind::Vector => (n, 1),
            SectionKind::Adjoint | SectionKind::Principal => (n, n),
        }
    }

    /// Shape and chart coverage checks.
    pub fn check_shape(&self, spec: &BundleSpec) -> Result<(), BundleError> {
        let want = self.expected_shape(spec);
        for chart in spec.atlas.chart_names() {
            let m = self.components.get(chart).ok_or_else(|| {
                BundleError::Shape(format!("section `{}` has no components on chart `{chart}`", self.name))
            })?;
            if (m.rows(), m.cols()) != want {
                return Err(BundleError::Shape(format!(
                    "section `{}` on `{chart}` is {}x{}, expected {}x{}",
                    self.name,
                    m.rows(),
                    m.cols(),
                    want.0,
                    want.1
                )));
            }
        }
        for chart in self.components.keys() {
            spec.atlas.chart(chart)?;
        }
        Ok(())
    }

    /// Components evaluated at a point of `chart`.
    pub fn at(&self, spec: &BundleSpec, chart: &str, point: &[f64]) -> Result<CMat, BundleError> {
        let c = spec.atlas.chart(chart)?;
        let m = self
            .components
            .get(chart)
            .ok_or_else(|| BundleError::Shape(format!("section `{}` missing chart `{chart}`", self.name)))?;
        Ok(eval_in(c, m, point)?)
    }
}

/// Residual of the section's overlap law on every sampled overlap point.
pub fn check_section(
    spec: &BundleSpec,
    section: &Section,
    opts: Sampling,
    tol: f64,
) -> Result<ValidationReport, BundleError> {
    section.check_shape(spec)?;
    let atlas = &*spec.atlas;
    let samples = overlap_samples(atlas, opts);
    let tracker = Tracker::collect_par(&samples, |(ov, p)| {
        let at = ov.key.to_string();
        let res = (|| -> Result<f64, BundleError> {
            let g = spec.transition_at(ov, p)?;
            let q = atlas.apply(ov, p)?;
            let here = section.at(spec, &ov.key.from, p)?;
            let there = section.at(spec, &ov.key.to, &q)?;
            let moved = match section.kind {
                SectionKind::Vector | SectionKind::Principal => &g * there,
                SectionKind::Adjoint => {
                    let gi = linalg::inverse(&g).map_err(|e| BundleError::Group(e.to_string()))?;
                    &g * there * gi
                }
            };
            Ok(linalg::max_abs_diff(&here, &moved))
        })();
        match res {
            Ok(r) => Observation::new(r, &ov.key.from, p, at),
            Err(e) => Observation::failed(e, &ov.key.from, p, at),
        }
    });
    let mut report = ValidationReport::default();
    report.push(tracker.into_check(format!("section.{}", section.name), tol));
    if section.kind == SectionKind::Principal {
        let mut members = Tracker::default();
        for chart in atlas.charts.iter() {
            for p in atlas.sample_chart(chart, opts.samples, opts.seed) {
                members.observe(match section.at(spec, &chart.name, &p) {
                    Ok(s) => Observation::new(spec.group.membership_residual(&s), &chart.name, &p, chart.name.clone()),
                    Err(e) => Observation::failed(e, &chart.name, &p, chart.name.clone()),
                });
            }
        }
        report.push(members.into_check(format!("section.{}.membership", section.name), tol));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{matrix, Fiber, FiberKind, Field, GroupDescriptor, GroupKind, TransitionKey};
    use crate::geometry::catalog;
    use crate::report::Status;
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
    fn zero_section_passes() {
        let spec = mobius();
        let r = check_section(&spec, &Section::zero(&spec), Sampling::default(), 1e-9).unwrap();
        assert_eq!(r.checks[0].status, Status::Pass);
        assert_eq!(r.checks[0].residual, Some(0.0));
    }

    #[test]
    fn naive_mobius_section_fails_by_twice_its_value() {
        let spec = mobius();
        let comps = [("a", "cos(theta) + 2"), ("b", "cos(theta) + 2")]
            .iter()
            .map(|(c, e)| (c.to_string(), matrix(&[&[e]])))
            .collect();
        let s = Section::new("naive", SectionKind::Vector, comps);
        let r = check_section(&spec, &s, Sampling::default(), 1e-9).unwrap();
        let check = &r.checks[0];
        assert_eq!(check.status, Status::Fail);
        let worst = check.worst.as_ref().unwrap();
        let v = worst.point[0].cos() + 2.0;
        assert!((worst.residual - 2.0 * v).abs() < 1e-12);
        assert!(worst.at.ends_with("@bottom"));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let spec = mobius();
        let comps = ["a", "b"].iter().map(|c| (c.to_string(), ExprMatrix::zeros(2, 1))).collect();
        let s = Section::new("bad", SectionKind::Vector, comps);
        assert!(matches!(check_section(&spec, &s, Sampling::default(), 1e-9), Err(BundleError::Shape(_))));
    }
}
