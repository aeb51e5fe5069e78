//! The aggregate report: every validator that applies to a spec, in a fixed
//! order, collected into one JSON document.

use serde::Serialize;

use super::{chern_number, total_curvature, ChernReport, TotalCurvatureReport, DEFAULT_RESOLUTION};
use crate::bundle::{
    apply_gauge, check_gauge, check_section, loop_class, validate_cocycle, FiberKind, Sampling, SectionKind,
};
use crate::connection::{
    check_connection, check_curvature, check_family, d_cross_check, check_field_strength, covariant_derivative, curvature,
    family_difference, family_magnitude, first_bianchi_residual, gauge_transform_connection, gauge_transform_family,
    second_bianchi_residual, section_family, solder_family, torsion, ConnectionSpec,
};
use crate::linalg;
use crate::report::{Check, Status, Tolerances, ValidationReport};
use crate::specfile::Model;
use crate::transport::{transport_frame, TransportOptions, TransportResult};

pub const REPORT_VERSION: u32 = 1;
/// Membership tolerance for integrated group elements.
pub const TRANSPORT_MEMBERSHIP_TOL: f64 = 1e-7;
const ATLAS_TOL: f64 = 1e-9;
/// Central differences at step 1e-5 are good to roughly 1e-9 relative.
pub const D_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub sampling: Sampling,
    pub tolerances: Tolerances,
    pub resolution: usize,
    pub transport: TransportOptions,
    /// Add the finite-difference cross-check of `d`.
    pub verify_d: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::default(),
            tolerances: Tolerances::default(),
            resolution: DEFAULT_RESOLUTION,
            transport: TransportOptions::default(),
            verify_d: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplingInfo {
    pub samples: usize,
    pub seed: u64,
    pub resolution: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopFactor {
    pub overlap: String,
    pub value: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopReport {
    pub name: String,
    pub value: serde_json::Value,
    pub factors: Vec<LoopFactor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FullReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub report_version: u32,
    pub spec: String,
    pub atlas: String,
    pub group: String,
    pub fiber: crate::bundle::Fiber,
    pub connection: Option<String>,
    pub sampling: SamplingInfo,
    pub tolerances: Tolerances,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loops: Vec<LoopReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub transports: Vec<TransportResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern: Option<ChernReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_curvature: Option<TotalCurvatureReport>,
}

impl FullReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

fn atlas_checks(model: &Model, opts: &ReportOptions) -> ValidationReport {
    let atlas = model.atlas();
    let a = atlas.check(opts.sampling.samples, opts.sampling.seed);
    let mut r = ValidationReport::default();
    let with = |name: &str, residual: f64| {
        let mut c = if residual <= ATLAS_TOL { Check::pass(name) } else { Check::fail(name, "overlap maps disagree") };
        c.residual = Some(residual);
        c.tolerance = Some(ATLAS_TOL);
        c.samples = a.points;
        c
    };
    r.push(with("atlas.round_trip", a.round_trip));
    r.push(with("atlas.jacobian", a.jacobian_product));
    if !a.failures.is_empty() {
        r.push(Check::fail("atlas.maps", a.failures[0].clone()));
    }
    if !a.empty_overlaps.is_empty() {
        r.push(Check::fail("atlas.sampling", format!("no sample points on {}", a.empty_overlaps.join(", "))));
    }
    if atlas.orientable && a.points > 0 {
        let c = if a.orientation_consistent() {
            Check::pass("atlas.orientation")
        } else {
            Check::fail("atlas.orientation", "an overlap map reverses orientation")
        };
        r.push(c.with_value(serde_json::json!({ "minDet": a.min_det })));
    }
    r
}

fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Check {
    Check::fail(name, err.to_string())
}

fn connection_checks(model: &Model, conn: &ConnectionSpec, opts: &ReportOptions, out: &mut ValidationReport) {
    let spec = &model.bundle;
    let s = opts.sampling;
    let tol = &opts.tolerances;
    match check_connection(spec, conn, s, tol.connection, tol.membership) {
        Ok(r) => out.extend(r),
        Err(e) => {
            out.push(failed("connection.overlap", e));
            return;
        }
    }
    match check_curvature(spec, conn, s, tol.structure, tol.curvature) {
        Ok((_, r)) => out.extend(r),
        Err(e) => out.push(failed("curvature.overlap", e)),
    }
    match second_bianchi_residual(spec, conn, s) {
        Ok(t) => out.push(t.into_check("bianchi.second", tol.bianchi)),
        Err(e) => out.push(failed("bianchi.second", e)),
    }
    if opts.verify_d {
        match curvature(conn) {
            Ok(r) => {
                let mut t = d_cross_check(spec, &conn.family(), s);
                t.merge(d_cross_check(spec, &r, s));
                out.push(t.into_check("forms.d_cross_check", D_CHECK_TOL));
            }
            Err(e) => out.push(failed("forms.d_cross_check", e)),
        }
    }
    if let Some(field) = &model.gauge_field {
        if field.unitary {
            out.push(field.hermiticity(spec, s, tol.membership));
        }
        match check_field_strength(spec, field, s, tol.field_strength) {
            Ok((f, c)) => {
                out.push(c);
                match check_family(spec, &f, s) {
                    Ok(t) => out.push(t.into_check("field_strength.overlap", tol.curvature)),
                    Err(e) => out.push(failed("field_strength.overlap", e)),
                }
            }
            Err(e) => out.push(failed("field_strength.consistency", e)),
        }
    }
    if spec.fiber.kind == FiberKind::Tangent {
        match solder_family(spec).and_then(|th| check_family(spec, &th, s)) {
            Ok(t) => out.push(t.into_check("solder.overlap", tol.torsion)),
            Err(e) => out.push(failed("solder.overlap", e)),
        }
        match torsion(spec, conn) {
            Ok(t) => {
                let magnitude = family_magnitude(spec, &t, s).residual();
                out.push(
                    Check::pass("torsion.magnitude")
                        .with_detail("informational")
                        .with_value(serde_json::json!(magnitude)),
                );
                match check_family(spec, &t, s) {
                    Ok(tr) => out.push(tr.into_check("torsion.overlap", tol.curvature)),
                    Err(e) => out.push(failed("torsion.overlap", e)),
                }
            }
            Err(e) => out.push(failed("torsion.overlap", e)),
        }
        match first_bianchi_residual(spec, conn, s) {
            Ok(t) => out.push(t.into_check("bianchi.first", tol.bianchi)),
            Err(e) => out.push(failed("bianchi.first", e)),
        }
    }
    for section in &model.sections {
        if section.kind == SectionKind::Principal {
            continue;
        }
        let name = format!("covariant.{}", section.name);
        match section_family(section, spec)
            .and_then(|f| covariant_derivative(&f, conn))
            .and_then(|d| check_family(spec, &d, s))
        {
            Ok(t) => out.push(t.into_check(name, tol.covariant)),
            Err(e) => out.push(failed(name, e)),
        }
    }
}

fn gauge_checks(model: &Model, conn: Option<&ConnectionSpec>, opts: &ReportOptions, out: &mut ValidationReport) {
    let spec = &model.bundle;
    let s = opts.sampling;
    let tol = &opts.tolerances;
    for g in &model.gauges {
        match check_gauge(spec, g, s, tol.gauge) {
            Ok(r) => out.extend(r),
            Err(e) => {
                out.push(failed(format!("gauge.{}.membership", g.name), e));
                continue;
            }
        }
        let Some(conn) = conn else { continue };
        let name = format!("gauge.{}.connection", g.name);
        let transformed = apply_gauge(spec, g).map_err(|e| e.to_string()).and_then(|spec2| {
            gauge_transform_connection(spec, conn, g)
                .map(|c2| (spec2, c2))
                .map_err(|e| e.to_string())
        });
        let (spec2, conn2) = match transformed {
            Ok(x) => x,
            Err(e) => {
                out.push(failed(name, e));
                continue;
            }
        };
        match check_connection(&spec2, &conn2, s, tol.connection, tol.membership) {
            Ok(r) => {
                let c = r.get("connection.overlap").cloned().unwrap_or_else(|| Check::fail(&name, "missing"));
                out.push(Check { name, ..c });
            }
            Err(e) => out.push(failed(name, e)),
        }
        let name = format!("gauge.{}.curvature", g.name);
        let res = (|| {
            let r = curvature(conn)?;
            let r2 = curvature(&conn2)?;
            let moved = gauge_transform_family(spec, &r, g)?;
            Ok::<_, crate::connection::ConnectionError>(family_difference(spec, &r2, &moved, s))
        })();
        match res {
            Ok(t) => out.push(t.into_check(name, tol.gauge)),
            Err(e) => out.push(failed(name, e)),
        }
    }
}

/// Run every validator that applies to `model`. Errors become failing
/// checks; nothing here panics on bad input.
pub fn full_report(model: &Model, opts: &ReportOptions) -> FullReport {
    let spec = &model.bundle;
    let s = opts.sampling;
    let tol = &opts.tolerances;
    let mut checks = ValidationReport::default();
    checks.extend(atlas_checks(model, opts));
    checks.extend(validate_cocycle(spec, s, tol.cocycle, tol.membership));
    for section in &model.sections {
        match check_section(spec, section, s, tol.section) {
            Ok(r) => checks.extend(r),
            Err(e) => checks.push(failed(format!("section.{}", section.name), e)),
        }
    }
    let conn = model.connection.as_ref();
    gauge_checks(model, conn, opts, &mut checks);
    if let Some(conn) = conn {
        connection_checks(model, conn, opts, &mut checks);
    }

    let mut loops = Vec::new();
    for (name, steps) in &model.loops {
        match loop_class(spec, steps, s) {
            Ok(lc) => {
                checks.push(Check::pass(format!("loop.{name}")).with_value(linalg::to_json(&lc.value)));
                loops.push(LoopReport {
                    name: name.clone(),
                    value: linalg::to_json(&lc.value),
                    factors: lc
                        .factors
                        .iter()
                        .map(|(k, v)| LoopFactor {
                            overlap: k.clone(),
                            value: linalg::to_json(v),
                        })
                        .collect(),
                });
            }
            Err(e) => checks.push(failed(format!("loop.{name}"), e)),
        }
    }

    let mut transports = Vec::new();
    let flat;
    let tconn = match conn {
        Some(c) => c,
        None => {
            flat = ConnectionSpec::flat(spec);
            &flat
        }
    };
    for name in &model.tasks.transport {
        let check = format!("transport.{name}");
        let Some(curve) = model.curve(name) else {
            checks.push(Check::fail(check, "unknown curve"));
            continue;
        };
        match transport_frame(spec, tconn, curve, opts.transport) {
            Ok(r) => {
                let mut c = Check::pass(&check);
                if let Some(m) = r.membership_residual {
                    let t = if spec.group.is_discrete() { 0.0 } else { TRANSPORT_MEMBERSHIP_TOL };
                    if !(m <= t) {
                        c = Check::fail(&check, "transported frame left the structure group");
                    }
                    c.residual = Some(m);
                    c.tolerance = Some(t);
                }
                c.samples = r.steps;
                checks.push(c);
                transports.push(r);
            }
            Err(e) => checks.push(failed(check, e)),
        }
    }

    let mut chern = None;
    if model.tasks.chern {
        match conn.ok_or_else(|| "no connection".to_string()).and_then(|c| {
            chern_number(spec, c, opts.resolution).map_err(|e| e.to_string())
        }) {
            Ok(r) => {
                let mut c = Check::pass("chern");
                c.status = r.status;
                c.residual = Some(r.deviation);
                c.tolerance = Some(super::CHERN_TOL);
                checks.push(c.with_value(serde_json::json!(r.nearest)));
                chern = Some(r);
            }
            Err(e) => checks.push(Check::fail("chern", e)),
        }
    }
    let mut total = None;
    if model.tasks.total_curvature {
        match conn.ok_or_else(|| "no connection".to_string()).and_then(|c| {
            total_curvature(spec, c, opts.resolution).map_err(|e| e.to_string())
        }) {
            Ok(r) => {
                let mut c = Check::pass("total_curvature");
                c.status = r.status;
                c.residual = Some(r.deviation);
                c.tolerance = Some(super::GAUSS_BONNET_TOL);
                checks.push(c.with_value(serde_json::json!(r.value)));
                total = Some(r);
            }
            Err(e) => checks.push(Check::fail("total_curvature", e)),
        }
    }

    FullReport {
        tool: "bundlekit",
        version: env!("CARGO_PKG_VERSION"),
        report_version: REPORT_VERSION,
        spec: model.name.clone(),
        atlas: model.atlas().name.clone(),
        group: spec.group.to_string(),
        fiber: spec.fiber,
        connection: conn.map(|c| c.name.clone()),
        sampling: SamplingInfo {
            samples: s.samples,
            seed: s.seed,
            resolution: opts.resolution,
            step: opts.transport.step,
        },
        tolerances: *tol,
        status: checks.status(),
        checks: checks.checks,
        loops,
        transports,
        chern,
        total_curvature: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn report(name: &str) -> FullReport {
        let m = catalog::spec(name).unwrap().build().unwrap();
        let opts = ReportOptions {
            sampling: Sampling { samples: 32, seed: 1 },
            resolution: 32,
            ..ReportOptions::default()
        };
        full_report(&m, &opts)
    }

    #[test]
    fn mobius_report() {
        let r = report("mobius");
        assert!(r.passed(), "{}", r.to_json());
        assert_eq!(r.loops[0].value, serde_json::json!([[[-1.0, 0.0]]]));
        assert!(r.connection.is_none());
    }

    #[test]
    fn broken_report_fails_on_a_triple() {
        let r = report("broken");
        assert!(!r.passed());
        let t = r.check("cocycle.triple").unwrap();
        assert_eq!(t.status, Status::Fail);
        assert_eq!(t.worst.as_ref().unwrap().at.split(',').count(), 3);
    }

    #[test]
    fn all_catalog_specs_pass() {
        for name in ["monopole-1", "tangent-sphere", "asymmetric", "torus-u2"] {
            let r = report(name);
            assert!(r.passed(), "{name}: {}", r.to_json());
        }
    }
}
