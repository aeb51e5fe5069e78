//! Sampled curvature fields as CSV for external plotting.

use crate::bundle::FiberKind;
use crate::connection::curvature;
use crate::specfile::Model;

use super::{gauss_density, InvariantError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Field strength `F(∂_u, ∂_v)` of the gauge field.
    F,
    /// Gauss density `K √det g` of a tangent-bundle connection.
    K,
}

/// Cell-centred `n×n` grid over each chart's box, skipping points outside
/// the chart. Columns: `chart, u, v`, then `value` for scalar fields or
/// `re_rc, im_rc` per entry for matrix-valued `F`.
pub fn field_csv(model: &Model, kind: FieldKind, n: usize) -> Result<String, InvariantError> {
    if n == 0 {
        return Err(InvariantError::Resolution);
    }
    let atlas = model.atlas();
    if atlas.dim() != 2 {
        return Err(InvariantError::NotSphere(atlas.name.clone()));
    }
    let rank = model.bundle.rank();
    let family = match kind {
        FieldKind::F => match &model.gauge_field {
            Some(f) => f.field_strength()?,
            None => return Err(InvariantError::NotU1("no gauge field".into())),
        },
        FieldKind::K => {
            if model.bundle.fiber.kind != FiberKind::Tangent {
                return Err(InvariantError::NotTangent);
            }
            let conn = model.connection.as_ref().ok_or(InvariantError::NotTangent)?;
            curvature(conn)?
        }
    };
    let scalar = kind == FieldKind::K || rank == 1;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["chart".to_string(), "u".into(), "v".into()];
    if scalar {
        header.push("value".into());
    } else {
        for r in 0..rank {
            for c in 0..rank {
                header.push(format!("re_{r}{c}"));
                header.push(format!("im_{r}{c}"));
            }
        }
    }
    w.write_record(&header).expect("in-memory writer");
    for chart in &atlas.charts {
        let form = &family.forms[&chart.name];
        for i in 0..n {
            for j in 0..n {
                let u = chart.lower[0] + (chart.upper[0] - chart.lower[0]) * (i as f64 + 0.5) / n as f64;
                let v = chart.lower[1] + (chart.upper[1] - chart.lower[1]) * (j as f64 + 0.5) / n as f64;
                if !chart.contains(&[u, v]) {
                    continue;
                }
                let m = form.eval_at(&[u, v])?.get(0b11);
                let mut rec = vec![chart.name.clone(), u.to_string(), v.to_string()];
                match kind {
                    FieldKind::K => rec.push(gauss_density(&m).to_string()),
                    FieldKind::F if scalar => rec.push(m[(0, 0)].re.to_string()),
                    FieldKind::F => {
                        for r in 0..rank {
                            for c in 0..rank {
                                rec.push(m[(r, c)].re.to_string());
                                rec.push(m[(r, c)].im.to_string());
                            }
                        }
                    }
                }
                w.write_record(&rec).expect("in-memory writer");
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8"))
}
