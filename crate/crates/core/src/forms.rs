//! Scalar-, vector- and matrix-valued differential forms on a single chart.
//!
//! A [`LocalForm`] stores one value (an [`ExprMatrix`]) per strictly
//! increasing multi-index of coordinate differentials. Multi-indices are
//! bit masks over the chart's coordinates, so `dx^dz` on `(x, y, z)` is
//! `0b101`. Absent keys are zero. Scalars are 1×1 matrices and vectors are
//! n×1 columns.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, Expr};
use crate::geometry::{Chart, OverlapMap};
use crate::linalg::{c, CMat};
use crate::symmat::ExprMatrix;

/// Multi-index of coordinate differentials, one bit per coordinate.
pub type MultiIndex = u8;

/// Largest chart dimension a mask can index.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueShape {
    Scalar,
    Vector(usize),
    Matrix(usize),
}

impl ValueShape {
    pub fn dims(self) -> (usize, usize) {
        match self {
            ValueShape::Scalar => (1, 1),
            ValueShape::Vector(n) => (n, 1),
            ValueShape::Matrix(n) => (n, n),
        }
    }
}

impl fmt::Display for ValueShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueShape::Scalar => write!(f, "scalar"),
            ValueShape::Vector(n) => write!(f, "vector({n})"),
            ValueShape::Matrix(n) => write!(f, "matrix({n}x{n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("forms live on different charts (`{0}` and `{1}`)")]
    ChartMismatch(String, String),
    #[error("cannot {op} {left} and {right} values")]
    ShapeMismatch {
        op: &'static str,
        left: ValueShape,
        right: ValueShape,
    },
    #[error("degree {degree} exceeds dimension {dim}")]
    DegreeTooHigh { degree: usize, dim: usize },
    #[error("bad multi-index `{0}`")]
    BadMultiIndex(String),
    #[error("value has shape {found:?}, expected {expected}")]
    BadValue {
        expected: ValueShape,
        found: (usize, usize),
    },
}

/// Indices of the set bits of `mask`, increasing.
pub fn indices(mask: MultiIndex) -> impl Iterator<Item = usize> {
    (0..MAX_DIM).filter(move |k| mask & (1 << k) != 0)
}

pub fn degree_of(mask: MultiIndex) -> usize {
    mask.count_ones() as usize
}

/// All multi-indices of the given degree over `dim` coordinates, in mask order.
pub fn multi_indices(dim: usize, degree: usize) -> Vec<MultiIndex> {
    (0u16..(1u16 << dim))
        .map(|m| m as MultiIndex)
        .filter(|&m| degree_of(m) == degree)
        .collect()
}

/// Sign of the permutation sorting the concatenation `I ++ J`, or `None`
/// when the indices overlap.
pub fn merge_sign(i: MultiIndex, j: MultiIndex) -> Option<f64> {
    if i & j != 0 {
        return None;
    }
    let mut inversions = 0;
    for a in indices(i) {
        inversions += indices(j).filter(|&b| b < a).count();
    }
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

/// `"dx^dy"` style name of a multi-index; `"1"` for degree zero.
pub fn multi_index_name(mask: MultiIndex, coords: &[String]) -> String {
    if mask == 0 {
        return "1".into();
    }
    indices(mask)
        .map(|k| format!("d{}", coords[k]))
        .collect::<Vec<_>>()
        .join("^")
}

/// Parse `"dx^dy"`; factors must appear in coordinate order.
pub fn parse_multi_index(text: &str, coords: &[String]) -> Result<MultiIndex, FormError> {
    let bad = || FormError::BadMultiIndex(text.to_string());
    let text = text.trim();
    if text == "1" {
        return Ok(0);
    }
    let mut mask: MultiIndex = 0;
    let mut last = None;
    for part in text.split('^') {
        let name = part.trim().strip_prefix('d').ok_or_else(bad)?;
        let k = coords.iter().position(|c| c == name).ok_or_else(bad)?;
        if last.is_some_and(|l| k <= l) {
            return Err(bad());
        }
        last = Some(k);
        mask |= 1 << k;
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalForm {
    pub chart: String,
    pub coords: Vec<String>,
    pub degree: usize,
    pub shape: ValueShape,
    components: BTreeMap<MultiIndex, ExprMatrix>,
}

impl LocalForm {
    pub fn zero(chart: &str, coords: &[String], degree: usize, shape: ValueShape) -> Self {
        Self {
            chart: chart.to_string(),
            coords: coords.to_vec(),
            degree,
            shape,
            components: BTreeMap::new(),
        }
    }

    pub fn on_chart(chart: &Chart, degree: usize, shape: ValueShape) -> Self {
        Self::zero(&chart.name, &chart.coords, degree, shape)
    }

    /// Build from `(multi-index, value)` pairs; repeated keys accumulate.
    pub fn from_components(
        chart: &str,
        coords: &[String],
        degree: usize,
        shape: ValueShape,
        components: impl IntoIterator<Item = (MultiIndex, ExprMatrix)>,
    ) -> Result<Self, FormError> {
        let dim = coords.len();
        if dim > MAX_DIM || degree > dim {
            return Err(FormError::DegreeTooHigh { degree, dim });
        }
        let mut form = Self::zero(chart, coords, degree, shape);
        for (mask, value) in components {
            if degree_of(mask) != degree || (mask as usize) >> dim != 0 {
                return Err(FormError::BadMultiIndex(format!("{mask:#b}")));
            }
            if (value.rows(), value.cols()) != shape.dims() {
                return Err(FormError::BadValue {
                    expected: shape,
                    found: (value.rows(), value.cols()),
                });
            }
            form.accumulate(mask, value);
        }
        Ok(form)
    }

    /// 0-form with the given value.
    pub fn function(chart: &Chart, shape: ValueShape, value: ExprMatrix) -> Result<Self, FormError> {
        Self::from_components(&chart.name, &chart.coords, 0, shape, [(0, value)])
    }

    /// Coordinate solder form: slot μ of the vector value is `dx^μ`.
    pub fn solder(chart: &Chart) -> Self {
        let n = chart.dim();
        let mut form = Self::on_chart(chart, 1, ValueShape::Vector(n));
        for mu in 0..n {
            let mut entries = vec![Expr::zero(); n];
            entries[mu] = Expr::one();
            form.accumulate(1 << mu, ExprMatrix::new(n, 1, entries));
        }
        form
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn zero_value(&self) -> ExprMatrix {
        let (r, c) = self.shape.dims();
        ExprMatrix::zeros(r, c)
    }

    fn accumulate(&mut self, mask: MultiIndex, value: ExprMatrix) {
        match self.components.remove(&mask) {
            Some(prev) => {
                let sum = prev.add(&value);
                if !sum.is_zero() {
                    self.components.insert(mask, sum);
                }
            }
            None if !value.is_zero() => {
                self.components.insert(mask, value);
            }
            None => {}
        }
    }

    /// Stored components; absent multi-indices are zero.
    pub fn components(&self) -> &BTreeMap<MultiIndex, ExprMatrix> {
        &self.components
    }

    pub fn component(&self, mask: MultiIndex) -> ExprMatrix {
        self.components.get(&mask).cloned().unwrap_or_else(|| self.zero_value())
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    fn same_chart(&self, other: &Self) -> Result<(), FormError> {
        if self.chart != other.chart || self.coords != other.coords {
            return Err(FormError::ChartMismatch(self.chart.clone(), other.chart.clone()));
        }
        Ok(())
    }

    fn with_components(&self, degree: usize, shape: ValueShape) -> Self {
        Self::zero(&self.chart, &self.coords, degree, shape)
    }

    pub fn map_values(&self, shape: ValueShape, f: impl Fn(&ExprMatrix) -> ExprMatrix) -> Self {
        let mut out = self.with_components(self.degree, shape);
        for (&m, v) in &self.components {
            out.accumulate(m, f(v));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, FormError> {
        self.same_chart(other)?;
        if self.shape != other.shape || self.degree != other.degree {
            return Err(FormError::ShapeMismatch {
                op: "add",
                left: self.shape,
                right: other.shape,
            });
        }
        let mut out = self.clone();
        for (&m, v) in &other.components {
            out.accumulate(m, v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FormError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_values(self.shape, ExprMatrix::neg)
    }

    pub fn scale(&self, s: &Expr) -> Self {
        self.map_values(self.shape, |v| v.scale(s))
    }

    /// `g · ω` for a matrix `g` acting on the values.
    pub fn left_mul(&self, g: &ExprMatrix) -> Self {
        let shape = match self.shape {
            ValueShape::Matrix(_) => ValueShape::Matrix(g.rows()),
            _ => ValueShape::Vector(g.rows()),
        };
        self.map_values(shape, |v| g.matmul(v))
    }

    /// `ω · g` for matrix-valued `ω`.
    pub fn right_mul(&self, g: &ExprMatrix) -> Self {
        self.map_values(self.shape, |v| v.matmul(g))
    }

    /// `g ω h` for matrix-valued `ω`.
    pub fn conjugate_by(&self, g: &ExprMatrix, h: &ExprMatrix) -> Self {
        self.map_values(ValueShape::Matrix(g.rows()), |v| g.matmul(v).matmul(h))
    }

    /// Matrix-valued 1-form `Σ_μ ∂_μ g dx^μ`.
    pub fn differential(chart: &Chart, g: &ExprMatrix) -> Self {
        let mut out = Self::on_chart(chart, 1, ValueShape::Matrix(g.rows()));
        if g.rows() != g.cols() {
            out.shape = ValueShape::Vector(g.rows());
        }
        for (mu, coord) in chart.coords.iter().enumerate() {
            out.accumulate(1 << mu, g.differentiate(coord));
        }
        out
    }

    /// Exterior derivative.
    pub fn d(&self) -> Self {
        let mut out = self.with_components(self.degree + 1, self.shape);
        if self.degree >= self.dim() {
            return out;
        }
        for (&mask, value) in &self.components {
            for (mu, coord) in self.coords.iter().enumerate() {
                if mask & (1 << mu) != 0 {
                    continue;
                }
                let dv = value.differentiate(coord);
                if dv.is_zero() {
                    continue;
                }
                let below = indices(mask).filter(|&k| k < mu).count();
                let signed = if below % 2 == 0 { dv } else { dv.neg() };
                out.accumulate(mask | (1 << mu), signed);
            }
        }
        out
    }

    fn product_shape(op: &'static str, a: ValueShape, b: ValueShape) -> Result<ValueShape, FormError> {
        use ValueShape::*;
        match (a, b) {
            (Scalar, s) | (s, Scalar) => Ok(s),
            (Matrix(n), Matrix(m)) if n == m => Ok(Matrix(n)),
            (Matrix(n), Vector(m)) if n == m => Ok(Vector(n)),
            _ => Err(FormError::ShapeMismatch {
                op,
                left: a,
                right: b,
            }),
        }
    }

    fn multiply_values(a: ValueShape, va: &ExprMatrix, b: ValueShape, vb: &ExprMatrix) -> ExprMatrix {
        match (a, b) {
            (ValueShape::Scalar, _) => vb.scale(va.get(0, 0)),
            (_, ValueShape::Scalar) => va.scale(vb.get(0, 0)),
            _ => va.matmul(vb),
        }
    }

    /// Graded product; values multiply as matrices (or scalars act).
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        self.same_chart(other)?;
        let shape = Self::product_shape("wedge", self.shape, other.shape)?;
        let mut out = self.with_components(self.degree + other.degree, shape);
        if out.degree > self.dim() {
            return Ok(out);
        }
        for (&i, va) in &self.components {
            for (&j, vb) in &other.components {
                let Some(sign) = merge_sign(i, j) else { continue };
                let v = Self::multiply_values(self.shape, va, other.shape, vb);
                out.accumulate(i | j, if sign > 0.0 { v } else { v.neg() });
            }
        }
        Ok(out)
    }

    /// `α[∧]β = α∧β − (−1)^{deg α · deg β} β∧α` for matrix-valued forms.
    pub fn bracket_wedge(&self, other: &Self) -> Result<Self, FormError> {
        match (self.shape, other.shape) {
            (ValueShape::Matrix(_), ValueShape::Matrix(_)) => {}
            (l, r) => {
                return Err(FormError::ShapeMismatch {
                    op: "bracket",
                    left: l,
                    right: r,
                })
            }
        }
        let ab = self.wedge(other)?;
        let ba = other.wedge(self)?;
        if (self.degree * other.degree).is_multiple_of(2) {
            ab.sub(&ba)
        } else {
            ab.add(&ba)
        }
    }

    /// Pull back along an overlap map whose target is this form's chart.
    pub fn pullback(&self, map: &OverlapMap, source: &Chart) -> Result<Self, FormError> {
        if map.key.to != self.chart {
            return Err(FormError::ChartMismatch(map.key.to.clone(), self.chart.clone()));
        }
        self.pullback_by(source, &map.maps)
    }

    /// Pull back along the map `coords_self = maps(coords_source)`.
    pub fn pullback_by(&self, source: &Chart, maps: &[Expr]) -> Result<Self, FormError> {
        let dim = source.dim();
        if self.degree > dim {
            return Err(FormError::DegreeTooHigh {
                degree: self.degree,
                dim,
            });
        }
        let subst: HashMap<String, Expr> =
            self.coords.iter().cloned().zip(maps.iter().cloned()).collect();
        let jac: Vec<Vec<Expr>> = maps
            .iter()
            .map(|m| source.coords.iter().map(|c| m.differentiate(c)).collect())
            .collect();
        let mut out = Self::on_chart(source, self.degree, self.shape);
        let targets = multi_indices(dim, self.degree);
        for (&j, value) in &self.components {
            let value = value.substitute(&subst);
            let rows: Vec<usize> = indices(j).collect();
            for &i in &targets {
                let cols: Vec<usize> = indices(i).collect();
                let minor = ExprMatrix::from_rows(
                    rows.iter()
                        .map(|&r| cols.iter().map(|&c| jac[r][c].clone()).collect())
                        .collect(),
                );
                let det = minor.determinant();
                if det.is_zero() {
                    continue;
                }
                out.accumulate(i, value.scale(&det));
            }
        }
        Ok(out)
    }

    pub fn eval(&self, b: &Bindings) -> Result<FormValue, EvalError> {
        let mut components = BTreeMap::new();
        for (&m, v) in &self.components {
            components.insert(m, v.eval(b)?);
        }
        Ok(FormValue {
            degree: self.degree,
            dims: self.shape.dims(),
            components,
        })
    }

    pub fn eval_at(&self, point: &[f64]) -> Result<FormValue, EvalError> {
        self.eval(&Bindings::from_real(&self.coords, point))
    }

    pub fn node_count(&self) -> usize {
        self.components
            .values()
            .flat_map(|v| v.entries())
            .map(Expr::node_count)
            .sum()
    }
}

impl fmt::Display for LocalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&m, v) in &self.components {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let body = if self.shape == ValueShape::Scalar {
                format!("({})", v.get(0, 0))
            } else {
                format!("{:?}", v.to_strings())
            };
            write!(f, "{body} {}", multi_index_name(m, &self.coords))?;
        }
        Ok(())
    }
}

/// A form evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    pub degree: usize,
    pub dims: (usize, usize),
    pub components: BTreeMap<MultiIndex, CMat>,
}

impl FormValue {
    pub fn zero(degree: usize, dims: (usize, usize)) -> Self {
        Self {
            degree,
            dims,
            components: BTreeMap::new(),
        }
    }

    pub fn get(&self, mask: MultiIndex) -> CMat {
        self.components
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.dims.0, self.dims.1))
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .values()
            .map(crate::linalg::max_abs)
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference over all multi-indices.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut keys: Vec<MultiIndex> = self.components.keys().copied().collect();
        keys.extend(other.components.keys().copied());
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .map(|&k| crate::linalg::max_abs_diff(&self.get(k), &other.get(k)))
            .fold(0.0, f64::max)
    }

    pub fn map(&self, dims: (usize, usize), f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            degree: self.degree,
            dims,
            components: self.components.iter().map(|(&k, v)| (k, f(v))).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, v) in &other.components {
            let sum = out.get(k) + v;
            out.components.insert(k, sum);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.map(other.dims, |v| -v))
    }

    /// Pull back a value at `q = φ(p)` to `p`, given `jac[r][c] = ∂q_r/∂p_c`.
    pub fn pullback(&self, jac: &DMatrix<f64>) -> Self {
        let dim = jac.ncols();
        let mut out = Self::zero(self.degree, self.dims);
        for &i in &multi_indices(dim, self.degree) {
            let cols: Vec<usize> = indices(i).collect();
            let mut acc = CMat::zeros(self.dims.0, self.dims.1);
            for (&j, v) in &self.components {
                let rows: Vec<usize> = indices(j).collect();
                let minor = DMatrix::from_fn(rows.len(), cols.len(), |r, c| jac[(rows[r], cols[c])]);
                let det = if rows.is_empty() { 1.0 } else { minor.determinant() };
                acc += v * c(det);
            }
            out.components.insert(i, acc);
        }
        out
    }

    /// A 1-form evaluated on a tangent vector.
    pub fn on_vector(&self, v: &[f64]) -> CMat {
        debug_assert_eq!(self.degree, 1);
        let mut acc = CMat::zeros(self.dims.0, self.dims.1);
        for (&m, val) in &self.components {
            let mu = m.trailing_zeros() as usize;
            acc += val * c(v[mu]);
        }
        acc
    }

    /// A 2-form evaluated on the ordered pair of tangent vectors `(u, v)`.
    pub fn on_pair(&self, u: &[f64], v: &[f64]) -> CMat {
        debug_assert_eq!(self.degree, 2);
        let mut acc = CMat::zeros(self.dims.0, self.dims.1);
        for (&m, val) in &self.components {
            let mut ix = indices(m);
            let (a, b) = (ix.next().unwrap(), ix.next().unwrap());
            acc += val * c(u[a] * v[b] - u[b] * v[a]);
        }
        acc
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(self.dims, |v| v * s)
    }
}

/// Central finite-difference check of `d` at one point (step `h`): the
/// largest deviation between the symbolic and numerical derivative.
pub fn d_finite_difference_residual(form: &LocalForm, point: &[f64], h: f64) -> Result<f64, EvalError> {
    let symbolic = form.d().eval_at(point)?;
    let mut numeric = FormValue::zero(form.degree + 1, form.shape.dims());
    let mut shifted = point.to_vec();
    for mu in 0..form.dim() {
        shifted[mu] = point[mu] + h;
        let plus = form.eval_at(&shifted)?;
        shifted[mu] = point[mu] - h;
        let minus = form.eval_at(&shifted)?;
        shifted[mu] = point[mu];
        let deriv = plus.sub(&minus).scale(c(0.5 / h));
        for (&m, v) in &deriv.components {
            if m & (1 << mu) != 0 {
                continue;
            }
            let below = indices(m).filter(|&k| k < mu).count();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            let key = m | (1 << mu);
            let sum = numeric.get(key) + v * c(sign);
            numeric.components.insert(key, sum);
        }
    }
    Ok(symbolic.max_diff(&numeric))
}

/// How members of a [`FormFamily`] relate across overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// `φ_i = g_ij φ_j`
    Vector,
    /// `Θ_i = g_ij Θ_j g_ij⁻¹`
    Adjoint,
    /// `Γ_i = g_ij Γ_j g_ij⁻¹ − dg_ij g_ij⁻¹`
    Connection,
    /// `f_i = f_j`
    Invariant,
}

/// One local form per chart with a common overlap law.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFamily {
    pub kind: TransformKind,
    pub forms: BTreeMap<String, LocalForm>,
}

impl FormFamily {
    pub fn new(kind: TransformKind, forms: impl IntoIterator<Item = LocalForm>) -> Result<Self, FormError> {
        let forms: BTreeMap<String, LocalForm> =
            forms.into_iter().map(|f| (f.chart.clone(), f)).collect();
        let mut it = forms.values();
        if let Some(first) = it.next() {
            for f in it {
                if f.degree != first.degree || f.shape != first.shape {
                    return Err(FormError::ShapeMismatch {
                        op: "group",
                        left: first.shape,
                        right: f.shape,
                    });
                }
            }
        }
        Ok(Self { kind, forms })
    }

    pub fn get(&self, chart: &str) -> Option<&LocalForm> {
        self.forms.get(chart)
    }

    pub fn degree(&self) -> usize {
        self.forms.values().next().map_or(0, |f| f.degree)
    }

    pub fn shape(&self) -> Option<ValueShape> {
        self.forms.values().next().map(|f| f.shape)
    }

    pub fn map(&self, kind: TransformKind, f: impl Fn(&LocalForm) -> LocalForm) -> Self {
        Self {
            kind,
            forms: self.forms.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }

    pub fn try_map(
        &self,
        kind: TransformKind,
        f: impl Fn(&LocalForm) -> Result<LocalForm, FormError>,
    ) -> Result<Self, FormError> {
        let mut forms = BTreeMap::new();
        for (k, v) in &self.forms {
            forms.insert(k.clone(), f(v)?);
        }
        Ok(Self { kind, forms })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;

    fn chart2() -> Chart {
        Chart::new("P", &["x", "y"], &[-1.0, -1.0], &[1.0, 1.0], vec![])
    }

    fn scalar(chart: &Chart, degree: usize, comps: &[(MultiIndex, &str)]) -> LocalForm {
        LocalForm::from_components(
            &chart.name,
            &chart.coords,
            degree,
            ValueShape::Scalar,
            comps.iter().map(|(m, s)| (*m, ExprMatrix::scalar(Expr::parse(s).unwrap()))),
        )
        .unwrap()
    }

    fn matrix(chart: &Chart, comps: &[(MultiIndex, [&str; 4])]) -> LocalForm {
        LocalForm::from_components(
            &chart.name,
            &chart.coords,
            1,
            ValueShape::Matrix(2),
            comps.iter().map(|(m, e)| {
                (
                    *m,
                    ExprMatrix::parse_rows(&[vec![e[0], e[1]], vec![e[2], e[3]]]).unwrap(),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn d_of_product() {
        let p = chart2();
        let f = scalar(&p, 0, &[(0, "x^2*y")]);
        let df = f.d();
        let want = scalar(&p, 1, &[(0b01, "2*x*y"), (0b10, "x^2")]);
        let at = [0.3, -0.6];
        assert!(df.eval_at(&at).unwrap().max_diff(&want.eval_at(&at).unwrap()) < 1e-15);
    }

    #[test]
    fn d_of_x_dy_is_area() {
        let p = chart2();
        let w = scalar(&p, 1, &[(0b10, "x")]);
        let dw = w.d();
        assert_eq!(dw.components().len(), 1);
        assert_eq!(dw.component(0b11).get(0, 0), &Expr::one());
    }

    #[test]
    fn dx_wedge_dx_vanishes() {
        let p = chart2();
        let dx = scalar(&p, 1, &[(0b01, "1")]);
        assert!(dx.wedge(&dx).unwrap().is_zero());
        let dy = scalar(&p, 1, &[(0b10, "1")]);
        let a = dx.wedge(&dy).unwrap();
        let b = dy.wedge(&dx).unwrap();
        assert_eq!(a.component(0b11), b.component(0b11).neg());
    }

    #[test]
    fn constant_matrix_square_is_commutator() {
        let p = chart2();
        let w = matrix(&p, &[(0b01, ["0", "1", "0", "0"]), (0b10, ["0", "0", "1", "0"])]);
        let sq = w.wedge(&w).unwrap().eval_at(&[0.0, 0.0]).unwrap();
        // AB − BA for A = e12, B = e21 is diag(1, −1)
        let want = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert!(crate::linalg::max_abs_diff(&sq.get(0b11), &want) < 1e-15);
        let br = w.bracket_wedge(&w).unwrap().eval_at(&[0.0, 0.0]).unwrap();
        assert!(crate::linalg::max_abs_diff(&br.get(0b11), &(want * c(2.0))) < 1e-15);
    }

    #[test]
    fn scalar_zero_form_acts_by_multiplication() {
        let p = chart2();
        let f = scalar(&p, 0, &[(0, "3")]);
        let w = scalar(&p, 1, &[(0b01, "y"), (0b10, "x")]);
        let fw = f.wedge(&w).unwrap();
        assert_eq!(fw.eval_at(&[0.5, 0.25]).unwrap(), w.scale(&Expr::num(3.0)).eval_at(&[0.5, 0.25]).unwrap());
    }

    #[test]
    fn vector_times_vector_is_rejected() {
        let p = chart2();
        let th = LocalForm::solder(&p);
        assert!(matches!(th.wedge(&th), Err(FormError::ShapeMismatch { .. })));
        let s = scalar(&p, 1, &[(0b01, "1")]);
        assert!(s.bracket_wedge(&s).is_err());
    }

    #[test]
    fn pullback_of_dtheta_by_doubling() {
        let circle = Chart::new("t", &["t"], &[0.0], &[1.0], vec![]);
        let target = Chart::new("a", &["theta"], &[0.0], &[7.0], vec![]);
        let dtheta = scalar(&target, 1, &[(0b1, "1")]);
        let pulled = dtheta.pullback_by(&circle, &[Expr::parse("2*t").unwrap()]).unwrap();
        assert_eq!(pulled.component(0b1).get(0, 0), &Expr::num(2.0));
    }

    #[test]
    fn pullback_along_identity_is_unchanged() {
        let p = chart2();
        let w = scalar(&p, 1, &[(0b01, "sin(x*y)"), (0b10, "x - y^2")]);
        let pulled = w.pullback_by(&p, &[Expr::var("x"), Expr::var("y")]).unwrap();
        assert_eq!(pulled, w);
    }

    #[test]
    fn numeric_pullback_matches_symbolic() {
        let s = catalog::sphere();
        let (n, south) = (s.chart("N").unwrap(), s.chart("S").unwrap());
        let ov = s.overlap(&crate::geometry::OverlapKey::new("N", "S", None)).unwrap();
        let w = scalar(south, 1, &[(0b01, "u*v"), (0b10, "exp(u)")]);
        let p = [0.7, -0.4];
        let sym = w.pullback(ov, n).unwrap().eval_at(&p).unwrap();
        let q = s.apply(ov, &p).unwrap();
        let num = w.eval_at(&q).unwrap().pullback(&s.jacobian_on(ov, &p).unwrap());
        assert!(sym.max_diff(&num) < 1e-13);
    }

    #[test]
    fn multi_index_names_round_trip() {
        let coords: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        for m in 0..8u8 {
            let name = multi_index_name(m, &coords);
            assert_eq!(parse_multi_index(&name, &coords).unwrap(), m);
        }
        assert!(parse_multi_index("dy^dx", &coords).is_err());
        assert!(parse_multi_index("dw", &coords).is_err());
    }

    #[test]
    fn finite_difference_agrees_with_symbolic_d() {
        let p = chart2();
        let w = scalar(&p, 1, &[(0b01, "sin(x)*y"), (0b10, "exp(x*y)")]);
        assert!(d_finite_difference_residual(&w, &[0.2, 0.3], 1e-5).unwrap() < 1e-8);
    }
}
