//! Built-in spec fixtures, addressed as `catalog:NAME`.
//!
//! Static fixtures live as JSON next to the crate and are embedded at build
//! time. `monopole-N` is generated for any integer `N`. Names not found here
//! are looked up as `NAME.json` in `$BUNDLEKIT_CATALOG_DIR`.

use std::path::PathBuf;

use serde::Serialize;

use crate::geometry::catalog::ATLAS_NAMES;
use crate::specfile::{SpecError, SpecFile};

pub const CATALOG_DIR_ENV: &str = "BUNDLEKIT_CATALOG_DIR";

const STATIC: [(&str, &str); 5] = [
    ("mobius", include_str!("../catalog/mobius.json")),
    ("tangent-sphere", include_str!("../catalog/tangent-sphere.json")),
    ("asymmetric", include_str!("../catalog/asymmetric.json")),
    ("torus-u2", include_str!("../catalog/torus-u2.json")),
    ("broken", include_str!("../catalog/broken.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: String,
    pub kind: &'static str,
    pub description: String,
}

/// Spec text of `monopole-n`: the U(1) bundle over the sphere with
/// `g_NS = e^{inφ}` and potentials `A = n(x dy − y dx)/(1 + x² + y²)` in
/// each chart's own coordinates.
pub fn monopole_json(n: i64) -> String {
    let (phase_n, phase_s) = match n.signum() {
        0 => ("1".to_string(), "1".to_string()),
        1 => (
            format!("((x + i*y)/sqrt(x^2 + y^2))^{n}"),
            format!("((u + i*v)/sqrt(u^2 + v^2))^{n}"),
        ),
        _ => (
            format!("((x - i*y)/sqrt(x^2 + y^2))^{}", -n),
            format!("((u - i*v)/sqrt(u^2 + v^2))^{}", -n),
        ),
    };
    let pot = |a: &str, b: &str| {
        format!(
            r#"{{"d{a}": "-({n})*{b}/(1 + {a}^2 + {b}^2)", "d{b}": "({n})*{a}/(1 + {a}^2 + {b}^2)"}}"#
        )
    };
    format!(
        r#"{{
  "specVersion": 1,
  "name": "monopole-{n}",
  "description": "U(1) bundle over the sphere with first Chern number {n} and its rotationally symmetric potential.",
  "atlas": "sphere",
  "bundle": {{
    "fiber": {{"kind": "vector", "field": "complex", "rank": 1}},
    "group": {{"kind": "U1", "n": 1}},
    "transitions": {{"N,S": "{phase_n}", "S,N": "{phase_s}"}}
  }},
  "gaugeField": {{"q": 1, "unitary": true, "potential": {{"N": {pn}, "S": {ps}}}}},
  "gaugeTransformations": [
    {{"name": "height-phase", "kind": "automorphism", "gamma": {{
      "N": "exp(i*(1 - x^2 - y^2)/(1 + x^2 + y^2))",
      "S": "exp(i*(u^2 + v^2 - 1)/(1 + u^2 + v^2))"
    }}}},
    {{"name": "local-phase", "kind": "neighborhood", "gamma": {{
      "N": "exp(i*x*y)",
      "S": "exp(i*(u - v^2))"
    }}}}
  ],
  "curves": [
    {{"name": "equator", "segments": [{{"chart": "N", "end": 1, "coords": ["cos(2*pi*t)", "sin(2*pi*t)"]}}]}},
    {{"name": "equator-south", "segments": [{{"chart": "S", "end": 1, "coords": ["cos(2*pi*t)", "-sin(2*pi*t)"]}}]}}
  ],
  "tasks": {{"chern": true, "transport": ["equator"]}}
}}
"#,
        pn = pot("x", "y"),
        ps = pot("u", "v"),
    )
}

fn monopole_charge(name: &str) -> Option<i64> {
    name.strip_prefix("monopole-")?.parse().ok()
}

fn user_dir() -> Option<PathBuf> {
    std::env::var_os(CATALOG_DIR_ENV).map(PathBuf::from)
}

/// Spec text of a catalog entry.
pub fn text(name: &str) -> Result<String, SpecError> {
    if let Some((_, t)) = STATIC.iter().find(|(n, _)| *n == name) {
        return Ok(t.to_string());
    }
    if let Some(n) = monopole_charge(name) {
        return Ok(monopole_json(n));
    }
    if let Some(dir) = user_dir() {
        let path = dir.join(format!("{name}.json"));
        if path.is_file() {
            return std::fs::read_to_string(&path).map_err(|source| SpecError::Io {
                path: path.display().to_string(),
                source,
            });
        }
    }
    Err(SpecError::UnknownCatalog(name.to_string()))
}

pub fn spec(name: &str) -> Result<SpecFile, SpecError> {
    SpecFile::parse(&text(name)?)
}

/// Built-in atlases and specs, then user specs from the catalog directory.
pub fn entries() -> Vec<Entry> {
    let mut out: Vec<Entry> = ATLAS_NAMES
        .iter()
        .map(|a| Entry {
            name: a.to_string(),
            kind: "atlas",
            description: atlas_description(a).to_string(),
        })
        .collect();
    out.push(Entry {
        name: "circle-arcs-K".into(),
        kind: "atlas",
        description: atlas_description("circle-arcs-K").into(),
    });
    for (name, t) in STATIC {
        let desc = SpecFile::parse(t).ok().and_then(|s| s.description).unwrap_or_default();
        out.push(Entry {
            name: name.to_string(),
            kind: "spec",
            description: desc,
        });
    }
    out.push(Entry {
        name: "monopole-N".into(),
        kind: "spec",
        description: "U(1) bundle over the sphere with first Chern number N (any integer, e.g. monopole-1, monopole--2).".into(),
    });
    if let Some(dir) = user_dir() {
        let mut user = Vec::new();
        if let Ok(rd) = std::fs::read_dir(dir) {
            for e in rd.flatten() {
                let path = e.path();
                let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
                if path.extension().and_then(|s| s.to_str()) != Some("json") || out.iter().any(|x| x.name == stem) {
                    continue;
                }
                let desc = std::fs::read_to_string(&path)
                    .ok()
                    .and_then(|t| SpecFile::parse(&t).ok())
                    .and_then(|s| s.description)
                    .unwrap_or_default();
                user.push(Entry {
                    name: stem.to_string(),
                    kind: "user spec",
                    description: desc,
                });
            }
        }
        user.sort_by(|a, b| a.name.cmp(&b.name));
        out.extend(user);
    }
    out
}

fn atlas_description(name: &str) -> &'static str {
    match name {
        "circle" => "Circle from two arcs a, b meeting in components top and bottom.",
        "sphere" => "Unit sphere from stereographic charts N (x, y) and S (u, v), each cut to radius 3.",
        "torus" => "Product of two circle atlases: charts aa, ab, ba, bb.",
        "interval" => "Single chart I on (0, 1).",
        _ => "Circle from K >= 3 short arcs c0 .. c(K-1); only neighbours overlap.",
    }
}
