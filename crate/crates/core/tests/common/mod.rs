//! Fixtures and random generators shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bundlekit::bundle::{BundleSpec, GaugeKind, GaugeTransformation};
use bundlekit::catalog;
use bundlekit::connection::ConnectionSpec;
use bundlekit::expr::Expr;
use bundlekit::forms::{LocalForm, ValueShape};
use bundlekit::geometry::catalog::sphere_embedding;
use bundlekit::specfile::Model;
use bundlekit::symmat::ExprMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every built-in spec, including the deliberately broken one.
pub const CATALOG: [&str; 10] = [
    "mobius",
    "tangent-sphere",
    "asymmetric",
    "torus-u2",
    "broken",
    "monopole--2",
    "monopole--1",
    "monopole-0",
    "monopole-1",
    "monopole-2",
];

pub fn model(name: &str) -> Model {
    catalog::spec(name).unwrap().build().unwrap()
}

pub fn monopole(n: i64) -> Model {
    model(&format!("monopole-{n}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A coefficient in `[−1, 1]` printed exactly by `{}`.
pub fn coeff(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(-1.0..1.0) * 1e4_f64).round() / 1e4
}

fn term(c: f64, body: &str) -> String {
    format!("({c})*{body}")
}

/// Smooth real function of two coordinates, bounded on any bounded box.
pub fn random_smooth(rng: &mut ChaCha8Rng, a: &str, b: &str) -> String {
    [
        term(coeff(rng), a),
        term(coeff(rng), b),
        term(coeff(rng), &format!("{a}*{b}")),
        term(coeff(rng), &format!("sin({a} - 2*{b})")),
        term(coeff(rng), &format!("cos({a}*{b})/(1 + {a}^2)")),
    ]
    .join(" + ")
}

/// Trigonometric polynomial in `x, y` with integer frequencies, hence the
/// same function in every torus chart.
pub fn random_periodic(rng: &mut ChaCha8Rng) -> String {
    let mut terms = vec![format!("({})", coeff(rng))];
    for _ in 0..3 {
        let k: i32 = rng.gen_range(-2..=2);
        let l: i32 = rng.gen_range(-2..=2);
        terms.push(term(coeff(rng), &format!("sin({k}*x + ({l})*y)")));
        terms.push(term(coeff(rng), &format!("cos({k}*x + ({l})*y)")));
    }
    terms.join(" + ")
}

fn parse(text: &str) -> Expr {
    Expr::parse(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

fn phase(f: &str) -> Expr {
    parse(&format!("exp(i*({f}))"))
}

/// `γ_i = exp(i f_i)` with an independent random `f_i` on every chart.
pub fn random_u1_neighborhood(rng: &mut ChaCha8Rng, spec: &BundleSpec, name: &str) -> GaugeTransformation {
    let gamma = spec
        .atlas
        .charts
        .iter()
        .map(|c| {
            let f = random_smooth(rng, &c.coords[0], &c.coords[1]);
            (c.name.clone(), ExprMatrix::scalar(phase(&f)))
        })
        .collect();
    GaugeTransformation::new(name, GaugeKind::Neighborhood, gamma)
}

/// `γ = exp(i h(X, Y, Z))` for a random polynomial `h` of the embedding of
/// the sphere: one global function, written in each chart.
pub fn random_u1_automorphism(rng: &mut ChaCha8Rng, name: &str) -> GaugeTransformation {
    let c: Vec<f64> = (0..5).map(|_| coeff(rng)).collect();
    let gamma = ["N", "S"]
        .iter()
        .map(|chart| {
            let [x, y, z] = sphere_embedding(chart).unwrap().map(|e| format!("({e})"));
            let h = format!(
                "({})*{x} + ({})*{y} + ({})*{z} + ({})*{x}*{y} + ({})*{z}^2",
                c[0], c[1], c[2], c[3], c[4]
            );
            (chart.to_string(), ExprMatrix::scalar(phase(&h)))
        })
        .collect();
    GaugeTransformation::new(name, GaugeKind::Automorphism, gamma)
}

/// Random U(2) field `diag(e^{ia}, e^{ib}) · rot(c)` with periodic `a, b, c`.
pub fn random_u2_matrix(rng: &mut ChaCha8Rng) -> ExprMatrix {
    let (a, b, c) = (random_periodic(rng), random_periodic(rng), random_periodic(rng));
    ExprMatrix::from_rows(vec![
        vec![parse(&format!("exp(i*({a}))*cos({c})")), parse(&format!("-exp(i*({a}))*sin({c})"))],
        vec![parse(&format!("exp(i*({b}))*sin({c})")), parse(&format!("exp(i*({b}))*cos({c})"))],
    ])
}

/// The same matrix on every chart of the spec's atlas.
pub fn global_gauge(spec: &BundleSpec, name: &str, kind: GaugeKind, m: &ExprMatrix) -> GaugeTransformation {
    let gamma: BTreeMap<String, ExprMatrix> = spec.atlas.chart_names().map(|c| (c.to_string(), m.clone())).collect();
    GaugeTransformation::new(name, kind, gamma)
}

/// Random hermitian 2×2 matrix of periodic functions.
pub fn random_hermitian(rng: &mut ChaCha8Rng) -> ExprMatrix {
    let (d0, d1, re, im) = (
        random_periodic(rng),
        random_periodic(rng),
        random_periodic(rng),
        random_periodic(rng),
    );
    ExprMatrix::from_rows(vec![
        vec![parse(&d0), parse(&format!("({re}) - i*({im})"))],
        vec![parse(&format!("({re}) + i*({im})")), parse(&d1)],
    ])
}

/// Random unitary connection `Γ = −i(A_x dx + A_y dy)` on the torus with
/// the same periodic potential in every chart.
pub fn random_u2_connection(rng: &mut ChaCha8Rng, spec: &BundleSpec) -> ConnectionSpec {
    let minus_i = Expr::parse("-i").unwrap();
    let ax = random_hermitian(rng).scale(&minus_i);
    let ay = random_hermitian(rng).scale(&minus_i);
    let forms = spec.atlas.charts.iter().map(|c| {
        LocalForm::from_components(&c.name, &c.coords, 1, ValueShape::Matrix(2), [(0b01, ax.clone()), (0b10, ay.clone())])
            .unwrap()
    });
    ConnectionSpec::new("random", forms, bundlekit::connection::AlgebraCheck::None)
}

/// Random complex doublet of periodic functions.
pub fn random_doublet(rng: &mut ChaCha8Rng) -> ExprMatrix {
    let rows = (0..2)
        .map(|_| {
            let (re, im) = (random_periodic(rng), random_periodic(rng));
            vec![parse(&format!("({re}) + i*({im})"))]
        })
        .collect();
    ExprMatrix::from_rows(rows)
}
