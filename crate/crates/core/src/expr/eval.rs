use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use super::{Expr, Func};

/// Largest imaginary part (relative to `1 + |re|`) accepted where a real
/// value is required.
pub const REAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound coordinate `{0}`")]
    Unbound(String),
    #[error("domain error in {op}: {detail}")]
    Domain { op: String, detail: String },
    #[error("expected a real value, got {re} + {im}i")]
    NotReal { re: f64, im: f64 },
}

/// Coordinate values an expression is evaluated at.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(HashMap<String, Complex64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_real<S: AsRef<str>>(names: &[S], values: &[f64]) -> Self {
        let mut b = Self::new();
        for (n, v) in names.iter().zip(values) {
            b.set_real(n.as_ref(), *v);
        }
        b
    }

    pub fn set(&mut self, name: &str, value: Complex64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn set_real(&mut self, name: &str, value: f64) {
        self.set(name, Complex64::new(value, 0.0));
    }

    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.0.get(name).copied()
    }
}

fn domain(op: &str, detail: impl Into<String>) -> EvalError {
    EvalError::Domain {
        op: op.to_string(),
        detail: detail.into(),
    }
}

fn finite(op: &str, z: Complex64) -> Result<Complex64, EvalError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(domain(op, "non-finite result"))
    }
}

// -0.0 on the real axis must land on the principal side of the branch cut.
fn principal(z: Complex64) -> Complex64 {
    Complex64::new(z.re, z.im + 0.0)
}

fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    if b.im == 0.0 {
        Complex64::new(a.re / b.re, a.im / b.re)
    } else {
        a / b
    }
}

fn powi(z: Complex64, n: i64) -> Complex64 {
    let mut base = z;
    let mut e = n.unsigned_abs();
    let mut acc = Complex64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    if n < 0 {
        cdiv(Complex64::new(1.0, 0.0), acc)
    } else {
        acc
    }
}

fn real_part(op: &str, z: Complex64) -> Result<f64, EvalError> {
    if z.im.abs() > REAL_TOLERANCE * (1.0 + z.re.abs()) {
        Err(domain(op, format!("argument has imaginary part {}", z.im)))
    } else {
        Ok(z.re)
    }
}

fn apply(f: Func, z: Complex64) -> Result<Complex64, EvalError> {
    let real = z.im == 0.0;
    let x = z.re;
    let r = |v: f64| Complex64::new(v, 0.0);
    let out = match f {
        Func::Sin if real => r(x.sin()),
        Func::Sin => z.sin(),
        Func::Cos if real => r(x.cos()),
        Func::Cos => z.cos(),
        Func::Tan if real => r(x.tan()),
        Func::Tan => z.tan(),
        Func::Exp if real => r(x.exp()),
        Func::Exp => z.exp(),
        Func::Sinh if real => r(x.sinh()),
        Func::Sinh => z.sinh(),
        Func::Cosh if real => r(x.cosh()),
        Func::Cosh => z.cosh(),
        Func::Sqrt if real && x >= 0.0 => r(x.sqrt()),
        Func::Sqrt if real => Complex64::new(0.0, (-x).sqrt()),
        Func::Sqrt => principal(z).sqrt(),
        Func::Log if z == Complex64::new(0.0, 0.0) => return Err(domain("log", "log(0)")),
        Func::Log if real && x > 0.0 => r(x.ln()),
        Func::Log if real => Complex64::new((-x).ln(), std::f64::consts::PI),
        Func::Log => principal(z).ln(),
    };
    finite(f.name(), out)
}

impl Expr {
    /// Evaluate in IEEE double-precision complex arithmetic.
    ///
    /// Real inputs take real code paths, so a purely real evaluation is
    /// bit-identical to the same computation done in `f64`.
    pub fn eval(&self, b: &Bindings) -> Result<Complex64, EvalError> {
        Ok(match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::Pi => Complex64::new(std::f64::consts::PI, 0.0),
            Expr::I => Complex64::new(0.0, 1.0),
            Expr::Var(name) => b.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval(b)?,
            Expr::Add(x, y) => finite("+", x.eval(b)? + y.eval(b)?)?,
            Expr::Sub(x, y) => finite("-", x.eval(b)? - y.eval(b)?)?,
            Expr::Mul(x, y) => finite("*", x.eval(b)? * y.eval(b)?)?,
            Expr::Div(x, y) => {
                let den = y.eval(b)?;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(domain("/", "division by zero"));
                }
                finite("/", cdiv(x.eval(b)?, den))?
            }
            Expr::Pow(x, p) => {
                let z = x.eval(b)?;
                let p = *p;
                let out = if p.fract() == 0.0 && p.abs() <= 64.0 {
                    if z == Complex64::new(0.0, 0.0) && p < 0.0 {
                        return Err(domain("^", "zero to a negative power"));
                    }
                    powi(z, p as i64)
                } else if z == Complex64::new(0.0, 0.0) {
                    if p > 0.0 {
                        z
                    } else {
                        return Err(domain("^", "zero to a non-positive power"));
                    }
                } else if z.im == 0.0 && z.re > 0.0 {
                    Complex64::new(z.re.powf(p), 0.0)
                } else {
                    principal(z).powf(p)
                };
                finite("^", out)?
            }
            Expr::Call(f, a) => apply(*f, a.eval(b)?)?,
            Expr::Atan2(y, x) => {
                let yv = real_part("atan2", y.eval(b)?)?;
                let xv = real_part("atan2", x.eval(b)?)?;
                Complex64::new(yv.atan2(xv), 0.0)
            }
        })
    }

    /// Evaluate where a real value is required.
    pub fn eval_real(&self, b: &Bindings) -> Result<f64, EvalError> {
        let z = self.eval(b)?;
        if z.im.abs() > REAL_TOLERANCE * (1.0 + z.re.abs()) {
            return Err(EvalError::NotReal { re: z.re, im: z.im });
        }
        Ok(z.re)
    }
}
