use super::{Expr, Func};

impl Expr {
    /// Exact partial derivative with respect to `coord`.
    ///
    /// The result is assembled through the smart constructors, so literal
    /// arithmetic is folded and structural zeros vanish; nothing else is
    /// simplified.
    pub fn differentiate(&self, coord: &str) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::I => Expr::zero(),
            Expr::Var(name) => {
                if name == coord {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(a) => Expr::neg(a.differentiate(coord)),
            Expr::Add(a, b) => Expr::add(a.differentiate(coord), b.differentiate(coord)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(coord), b.differentiate(coord)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(coord), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(coord)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(coord);
                let db = b.differentiate(coord);
                let first = Expr::div(da, (**b).clone());
                if db.is_zero() {
                    return first;
                }
                Expr::sub(
                    first,
                    Expr::div(Expr::mul((**a).clone(), db), Expr::pow((**b).clone(), 2.0)),
                )
            }
            Expr::Pow(a, p) => {
                let da = a.differentiate(coord);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::mul(
                    Expr::mul(Expr::num(*p), Expr::pow((**a).clone(), p - 1.0)),
                    da,
                )
            }
            Expr::Call(f, a) => {
                let da = a.differentiate(coord);
                if da.is_zero() {
                    return Expr::zero();
                }
                let arg = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, arg),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, arg)),
                    Func::Tan => Expr::div(Expr::one(), Expr::pow(Expr::call(Func::Cos, arg), 2.0)),
                    Func::Exp => Expr::call(Func::Exp, arg),
                    Func::Log => Expr::div(Expr::one(), arg),
                    Func::Sqrt => Expr::div(
                        Expr::one(),
                        Expr::mul(Expr::num(2.0), Expr::call(Func::Sqrt, arg)),
                    ),
                    Func::Sinh => Expr::call(Func::Cosh, arg),
                    Func::Cosh => Expr::call(Func::Sinh, arg),
                };
                Expr::mul(outer, da)
            }
            Expr::Atan2(y, x) => {
                let dy = y.differentiate(coord);
                let dx = x.differentiate(coord);
                if dy.is_zero() && dx.is_zero() {
                    return Expr::zero();
                }
                let num = Expr::sub(
                    Expr::mul((**x).clone(), dy),
                    Expr::mul((**y).clone(), dx),
                );
                let den = Expr::add(
                    Expr::pow((**x).clone(), 2.0),
                    Expr::pow((**y).clone(), 2.0),
                );
                Expr::div(num, den)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Bindings;
    use super::*;

    #[test]
    fn power_rule() {
        let d = Expr::parse("x^2").unwrap().differentiate("x");
        assert_eq!(d, Expr::parse("2*x").unwrap());
    }

    #[test]
    fn absent_coordinate_gives_zero_literal() {
        assert_eq!(Expr::parse("sin(y)").unwrap().differentiate("x"), Expr::zero());
    }

    #[test]
    fn chain_rule_at_origin() {
        let d = Expr::parse("exp(3*t)").unwrap().differentiate("t");
        let v = d.eval(&Bindings::from_real(&["t"], &[0.0])).unwrap();
        assert_eq!(v.re, 3.0);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn derivative_only_mentions_original_coordinates() {
        let e = Expr::parse("atan2(y, x) * log(1 + x^2) / sqrt(2 + y)").unwrap();
        let vars = e.free_vars();
        for c in ["x", "y", "z"] {
            assert!(e.differentiate(c).free_vars().is_subset(&vars));
        }
    }
}
