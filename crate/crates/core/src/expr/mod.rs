//! Scalar expressions over chart coordinates.
//!
//! Every chart map, transition entry, connection coefficient and section
//! component in a bundle description is an [`Expr`]. The language is closed:
//! literals, `pi`, the imaginary unit `i`, coordinates, the four arithmetic
//! operators, `^` with a real constant exponent, and a fixed set of
//! elementary functions. Closure keeps [`Expr::differentiate`] total.
//!
//! Trees built through the smart constructors ([`Expr::add`], [`Expr::mul`],
//! ...) are canonical: a negation never wraps a numeric literal, and literal
//! arithmetic is folded by evaluating the node itself, so a folded constant
//! is bit-identical to what [`Expr::eval`] would produce for it.

mod diff;
mod eval;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use eval::{Bindings, EvalError, REAL_TOLERANCE};
pub use parse::ParseError;

/// Unary elementary functions understood by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }

    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// The imaginary unit.
    I,
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a real constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
    /// `atan2(y, x)`, real arguments only.
    Atan2(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse::parse(text)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    /// Replace a node whose children are all literals by the literal it
    /// evaluates to, provided the value is finite and exactly real.
    fn folded(self) -> Expr {
        let foldable = match &self {
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.as_num().is_some(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Atan2(a, b) => a.as_num().is_some() && b.as_num().is_some(),
            _ => false,
        };
        if foldable {
            if let Ok(v) = self.eval(&Bindings::new()) {
                if v.im == 0.0 && v.re.is_finite() {
                    return Expr::Num(v.re);
                }
            }
        }
        self
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Neg(inner) => *inner,
            Expr::Num(v) => Expr::Num(-v),
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        Expr::Add(Box::new(a), Box::new(b)).folded()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        Expr::Sub(Box::new(a), Box::new(b)).folded()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if a.as_num() == Some(-1.0) {
            return Expr::neg(b);
        }
        if b.as_num() == Some(-1.0) {
            return Expr::neg(a);
        }
        Expr::Mul(Box::new(a), Box::new(b)).folded()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        Expr::Div(Box::new(a), Box::new(b)).folded()
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return base;
        }
        if base.is_one() {
            return base;
        }
        Expr::Pow(Box::new(base), exponent).folded()
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg)).folded()
    }

    pub fn atan2(y: Expr, x: Expr) -> Expr {
        Expr::Atan2(Box::new(y), Box::new(x)).folded()
    }

    /// Rebuild the tree through the smart constructors, folding literal
    /// arithmetic bottom-up.
    pub fn fold_constants(&self) -> Expr {
        self.map_children(&|e| e.fold_constants())
    }

    fn map_children(&self, f: &dyn Fn(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::I | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(f(a)),
            Expr::Add(a, b) => Expr::add(f(a), f(b)),
            Expr::Sub(a, b) => Expr::sub(f(a), f(b)),
            Expr::Mul(a, b) => Expr::mul(f(a), f(b)),
            Expr::Div(a, b) => Expr::div(f(a), f(b)),
            Expr::Pow(a, p) => Expr::pow(f(a), *p),
            Expr::Call(func, a) => Expr::call(*func, f(a)),
            Expr::Atan2(y, x) => Expr::atan2(f(y), f(x)),
        }
    }

    /// Simultaneous substitution of coordinates by expressions.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Var(name) => map.get(name).cloned().unwrap_or_else(|| self.clone()),
            _ => self.map_children(&|e| e.substitute(map)),
        }
    }

    /// Complex conjugate, assuming every coordinate is real.
    pub fn conjugate(&self) -> Expr {
        match self {
            Expr::I => Expr::Neg(Box::new(Expr::I)),
            _ => self.map_children(&|e| e.conjugate()),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Num(_) | Expr::Pi | Expr::I => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Atan2(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::I | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Atan2(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// A literal under any number of negations, which the parser folds.
    fn signed_literal(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.signed_literal().map(|v| -v),
            _ => None,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            // printed as the literal `−v`, which is how the parser reads it back
            Expr::Neg(_) if self.signed_literal().is_some() => Expr::Num(self.signed_literal().unwrap_or(0.0)).precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::I => f.write_str("i"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(_) if self.signed_literal().is_some() => write!(f, "{}", Expr::Num(self.signed_literal().unwrap_or(0.0))),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let op = if matches!(self, Expr::Add(..)) { '+' } else { '-' };
                write_operand(f, a, a.precedence() < 1)?;
                write!(f, " {op} ")?;
                write_operand(f, b, b.precedence() <= 1)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = if matches!(self, Expr::Mul(..)) { '*' } else { '/' };
                write_operand(f, a, a.precedence() < 2)?;
                write!(f, " {op} ")?;
                write_operand(f, b, b.precedence() <= 2)
            }
            Expr::Pow(a, p) => {
                write_operand(f, a, a.precedence() < 5)?;
                write!(f, "^{p}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Atan2(y, x) => write!(f, "atan2({y}, {x})"),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_constructors_fold_literals() {
        assert_eq!(Expr::add(Expr::num(1.0), Expr::num(2.0)), Expr::num(3.0));
        assert_eq!(Expr::mul(Expr::zero(), Expr::var("x")), Expr::zero());
        assert_eq!(Expr::neg(Expr::num(2.0)), Expr::num(-2.0));
        assert_eq!(Expr::pow(Expr::var("x"), 1.0), Expr::var("x"));
        // sqrt(-1) is imaginary, so it stays symbolic
        assert!(matches!(
            Expr::call(Func::Sqrt, Expr::num(-1.0)),
            Expr::Call(Func::Sqrt, _)
        ));
    }

    #[test]
    fn display_round_trips_tricky_shapes() {
        for src in [
            "-x^2",
            "(x^2)^3",
            "a - (b - c)",
            "a / (b * c)",
            "(-2)^2",
            "x * -2",
            "--x",
            "x^-1.5",
            "atan2(y, x - 1)",
            "-(a + b)",
        ] {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(Expr::parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn negated_literals_print_as_one_literal() {
        let e = Expr::Neg(Box::new(Expr::Neg(Box::new(Expr::Neg(Box::new(Expr::num(0.25)))))));
        assert_eq!(e.to_string(), "-0.25");
        assert_eq!(Expr::parse("---0.25").unwrap().to_string(), "-0.25");
    }

    #[test]
    fn conjugate_flips_imaginary_unit() {
        let e = Expr::parse("exp(i*x)").unwrap();
        let b = Bindings::from_real(&["x"], &[0.7]);
        let z = e.eval(&b).unwrap();
        let zc = e.conjugate().eval(&b).unwrap();
        assert!((z.conj() - zc).norm() < 1e-15);
    }

    #[test]
    fn substitute_is_simultaneous() {
        let e = Expr::parse("x - y").unwrap();
        let mut map = HashMap::new();
        map.insert("x".to_string(), Expr::var("y"));
        map.insert("y".to_string(), Expr::var("x"));
        assert_eq!(e.substitute(&map), Expr::parse("y - x").unwrap());
    }
}
