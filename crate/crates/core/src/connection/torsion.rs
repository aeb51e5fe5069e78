//! Solder form, torsion `T = dθ + Γ∧θ` and the first Bianchi residual
//! `dT + Γ∧T − R∧θ`, for connections on the tangent bundle.

use std::collections::BTreeMap;

use super::{curvature, family_magnitude, ConnectionError, ConnectionSpec};
use crate::bundle::{BundleSpec, FiberKind, Sampling};
use crate::forms::{FormFamily, LocalForm, TransformKind};
use crate::report::Tracker;

fn require_tangent(spec: &BundleSpec) -> Result<(), ConnectionError> {
    if spec.fiber.kind == FiberKind::Tangent {
        Ok(())
    } else {
        Err(ConnectionError::NotTangent)
    }
}

/// Coordinate solder form `θ_i = (dx¹, …, dxⁿ)` on every chart.
pub fn solder_family(spec: &BundleSpec) -> Result<FormFamily, ConnectionError> {
    require_tangent(spec)?;
    let forms = spec
        .atlas
        .charts
        .iter()
        .map(|c| (c.name.clone(), LocalForm::solder(c)))
        .collect();
    Ok(FormFamily {
        kind: TransformKind::Vector,
        forms,
    })
}

pub fn torsion(spec: &BundleSpec, conn: &ConnectionSpec) -> Result<FormFamily, ConnectionError> {
    let theta = solder_family(spec)?;
    conn.check_shape(spec)?;
    let mut forms = BTreeMap::new();
    for (chart, th) in &theta.forms {
        let g = conn.get(chart)?;
        forms.insert(chart.clone(), th.d().add(&g.wedge(th)?)?);
    }
    Ok(FormFamily {
        kind: TransformKind::Vector,
        forms,
    })
}

/// Magnitude of `dT + Γ∧T − R∧θ` at chart samples.
pub fn first_bianchi_residual(spec: &BundleSpec, conn: &ConnectionSpec, opts: Sampling) -> Result<Tracker, ConnectionError> {
    let theta = solder_family(spec)?;
    let t = torsion(spec, conn)?;
    let r = curvature(conn)?;
    let mut forms = BTreeMap::new();
    for (chart, tf) in &t.forms {
        let g = conn.get(chart)?;
        let lhs = tf.d().add(&g.wedge(tf)?)?;
        let rhs = r.forms[chart].wedge(&theta.forms[chart])?;
        forms.insert(chart.clone(), lhs.sub(&rhs)?);
    }
    let residual = FormFamily {
        kind: TransformKind::Vector,
        forms,
    };
    Ok(family_magnitude(spec, &residual, opts))
}
