//! Built-in atlases and their chart conventions.
//!
//! `circle`: two arcs with angle coordinate `theta`.
//! Chart `a` covers `theta ∈ (−3π/4, 3π/4)`, chart `b` covers
//! `theta ∈ (π/4, 7π/4)`. They meet in two components: `top`, where
//! `theta ∈ (π/4, 3π/4)` in both charts and the map is the identity, and
//! `bottom`, where `a ∋ theta ∈ (−3π/4, −π/4)` corresponds to
//! `theta + 2π ∈ (5π/4, 7π/4)` in `b`.
//!
//! `circle-arcs-K` (K ≥ 3): charts `c0 … c{K−1}`, chart `cm` centred at
//! `2πm/K` with half-width `3π/(2K)`, so only neighbours overlap and each
//! overlap is a single arc.
//!
//! `sphere`: stereographic charts `N` (coords `x, y`) projecting from the
//! south pole and `S` (coords `u, v`) projecting from the north pole with
//! the second coordinate reflected:
//!
//! ```text
//! (x, y) = (X, Y) / (1 + Z)        (u, v) = (X, −Y) / (1 − Z)
//! u = x / (x² + y²)                v = −y / (x² + y²)
//! ```
//!
//! The reflection makes the transition orientation-preserving. Both charts
//! are cut to the disk of radius 3; the overlap is the annulus
//! `1/3 < r < 3`. The unit circle is the equator and is fixed pointwise.
//!
//! `torus`: the product of two `circle`s, charts `aa, ab, ba, bb` with
//! coords `x, y`. Overlap components are named `p/q` after the factor
//! components, `=` marking a factor where the two charts agree.
//!
//! `interval`: one chart `I` with coordinate `x ∈ (0, 1)`.

use std::f64::consts::PI;

use super::{Atlas, Chart, OverlapKey, OverlapMap};
use crate::expr::Expr;

pub const ATLAS_NAMES: [&str; 4] = ["circle", "sphere", "torus", "interval"];

/// Look up a built-in atlas by name.
pub fn atlas(name: &str) -> Option<Atlas> {
    match name {
        "circle" => Some(circle()),
        "sphere" => Some(sphere()),
        "torus" => Some(torus()),
        "interval" => Some(interval()),
        _ => {
            let k: usize = name.strip_prefix("circle-arcs-")?.parse().ok()?;
            (k >= 3).then(|| circle_arcs(k))
        }
    }
}

fn e(text: &str) -> Expr {
    Expr::parse(text).expect("catalog expressions are valid")
}

/// One component of a circle-chart overlap: label, image expression and
/// selecting inequalities, all in terms of the coordinate `var`.
struct ArcPiece {
    label: &'static str,
    map: String,
    domain: Vec<String>,
}

/// Components of the two-arc circle overlap from `from` to `to`.
fn circle_pieces(from: char, to: char, var: &str) -> Vec<ArcPiece> {
    match (from, to) {
        (f, t) if f == t => vec![ArcPiece {
            label: "=",
            map: var.to_string(),
            domain: vec![],
        }],
        ('a', 'b') => vec![
            ArcPiece {
                label: "top",
                map: var.to_string(),
                domain: vec![var.to_string()],
            },
            ArcPiece {
                label: "bottom",
                map: format!("{var} + 2*pi"),
                domain: vec![format!("-{var}")],
            },
        ],
        _ => vec![
            ArcPiece {
                label: "top",
                map: var.to_string(),
                domain: vec![format!("pi - {var}")],
            },
            ArcPiece {
                label: "bottom",
                map: format!("{var} - 2*pi"),
                domain: vec![format!("{var} - pi")],
            },
        ],
    }
}

fn arc_range(c: char) -> (f64, f64) {
    match c {
        'a' => (-0.75 * PI, 0.75 * PI),
        _ => (0.25 * PI, 1.75 * PI),
    }
}

pub fn circle() -> Atlas {
    let charts: Vec<Chart> = ['a', 'b']
        .iter()
        .map(|&c| {
            let (lo, hi) = arc_range(c);
            Chart::new(c.to_string(), &["theta"], &[lo], &[hi], vec![])
        })
        .collect();
    let mut overlaps = Vec::new();
    for (f, t) in [('a', 'b'), ('b', 'a')] {
        let src = &charts[if f == 'a' { 0 } else { 1 }];
        for piece in circle_pieces(f, t, "theta") {
            overlaps.push(OverlapMap::new(
                OverlapKey::new(&f.to_string(), &t.to_string(), Some(piece.label)),
                src,
                vec![e(&piece.map)],
                piece.domain.iter().map(|d| e(d)).collect(),
            ));
        }
    }
    Atlas::new("circle", charts, overlaps, true).expect("circle atlas is well formed")
}

/// Circle covered by `k ≥ 3` short arcs; only neighbouring arcs overlap.
pub fn circle_arcs(k: usize) -> Atlas {
    assert!(k >= 3, "circle_arcs needs at least three charts");
    let half = 1.5 * PI / k as f64;
    let charts: Vec<Chart> = (0..k)
        .map(|m| {
            let c = 2.0 * PI * m as f64 / k as f64;
            Chart::new(format!("c{m}"), &["theta"], &[c - half], &[c + half], vec![])
        })
        .collect();
    let mut overlaps = Vec::new();
    for m in 0..k {
        for n in [(m + 1) % k, (m + k - 1) % k] {
            // only the seam between c{k-1} and c0 needs a 2π shift
            let map = match (m, n) {
                (m, 0) if m == k - 1 => "theta - 2*pi",
                (0, n) if n == k - 1 => "theta + 2*pi",
                _ => "theta",
            };
            overlaps.push(OverlapMap::new(
                OverlapKey::new(&charts[m].name, &charts[n].name, None),
                &charts[m],
                vec![e(map)],
                vec![],
            ));
        }
    }
    Atlas::new(format!("circle-arcs-{k}"), charts, overlaps, true)
        .expect("arc atlas is well formed")
}

pub fn sphere() -> Atlas {
    let n = Chart::new("N", &["x", "y"], &[-3.0, -3.0], &[3.0, 3.0], vec![e("9 - x^2 - y^2")]);
    let s = Chart::new("S", &["u", "v"], &[-3.0, -3.0], &[3.0, 3.0], vec![e("9 - u^2 - v^2")]);
    let ns = OverlapMap::new(
        OverlapKey::new("N", "S", None),
        &n,
        vec![e("x/(x^2 + y^2)"), e("-y/(x^2 + y^2)")],
        vec![e("x^2 + y^2 - 1/9")],
    );
    let sn = OverlapMap::new(
        OverlapKey::new("S", "N", None),
        &s,
        vec![e("u/(u^2 + v^2)"), e("-v/(u^2 + v^2)")],
        vec![e("u^2 + v^2 - 1/9")],
    );
    Atlas::new("sphere", vec![n, s], vec![ns, sn], true).expect("sphere atlas is well formed")
}

/// Embedding `(X, Y, Z)` of the unit sphere in chart `N` or `S`, as
/// expressions in that chart's coordinates.
pub fn sphere_embedding(chart: &str) -> Option<[Expr; 3]> {
    match chart {
        "N" => Some([
            e("2*x/(1 + x^2 + y^2)"),
            e("2*y/(1 + x^2 + y^2)"),
            e("(1 - x^2 - y^2)/(1 + x^2 + y^2)"),
        ]),
        "S" => Some([
            e("2*u/(1 + u^2 + v^2)"),
            e("-2*v/(1 + u^2 + v^2)"),
            e("(u^2 + v^2 - 1)/(1 + u^2 + v^2)"),
        ]),
        _ => None,
    }
}

pub fn torus() -> Atlas {
    let names = ["aa", "ab", "ba", "bb"];
    let charts: Vec<Chart> = names
        .iter()
        .map(|n| {
            let mut cs = n.chars();
            let (c1, c2) = (cs.next().unwrap(), cs.next().unwrap());
            let (lx, hx) = arc_range(c1);
            let (ly, hy) = arc_range(c2);
            Chart::new(*n, &["x", "y"], &[lx, ly], &[hx, hy], vec![])
        })
        .collect();
    let mut overlaps = Vec::new();
    for (i, from) in names.iter().enumerate() {
        for to in names.iter().filter(|t| *t != from) {
            let f: Vec<char> = from.chars().collect();
            let t: Vec<char> = to.chars().collect();
            for px in circle_pieces(f[0], t[0], "x") {
                for py in circle_pieces(f[1], t[1], "y") {
                    let label = format!("{}/{}", px.label, py.label);
                    let domain = px.domain.iter().chain(&py.domain).map(|d| e(d)).collect();
                    overlaps.push(OverlapMap::new(
                        OverlapKey::new(from, to, Some(&label)),
                        &charts[i],
                        vec![e(&px.map), e(&py.map)],
                        domain,
                    ));
                }
            }
        }
    }
    Atlas::new("torus", charts, overlaps, true).expect("torus atlas is well formed")
}

pub fn interval() -> Atlas {
    let chart = Chart::new("I", &["x"], &[0.0], &[1.0], vec![]);
    Atlas::new("interval", vec![chart], vec![], true).expect("interval atlas is well formed")
}
