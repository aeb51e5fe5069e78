//! Recursive-descent parser.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' unary)?          exponent must fold to a real constant
//! atom     := number | 'pi' | 'i' | ident | func '(' expr ')'
//!           | 'atan2' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! The parser builds nodes verbatim (no simplification) except that a minus
//! applied to a numeric literal yields a negative literal.

use super::{Bindings, Expr, Func};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("exponent at byte {offset} must be a real constant")]
    NonConstantExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::NonConstantExponent { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        if c.is_ascii_digit() || c == b'.' {
            while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                pos += 1;
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut look = pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    pos = look;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let lexeme = &text[start..pos];
            let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{lexeme}`"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            out.push((Tok::Ident(text[start..pos].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Sym(c as char), start));
            pos += 1;
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: start,
                expected: vec!["expression".into()],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[&format!("`{c}`")])
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let exp_offset = self.offset();
        let exponent = self.unary()?;
        if !exponent.free_vars().is_empty() {
            return Err(ParseError::NonConstantExponent { offset: exp_offset });
        }
        match exponent.eval(&Bindings::new()) {
            Ok(v) if v.im == 0.0 && v.re.is_finite() => Ok(Expr::Pow(Box::new(base), v.re)),
            _ => Err(ParseError::NonConstantExponent { offset: exp_offset }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    self.bump();
                    if name == "atan2" {
                        let y = self.expr()?;
                        self.expect(',')?;
                        let x = self.expr()?;
                        self.expect(')')?;
                        return Ok(Expr::Atan2(Box::new(y), Box::new(x)));
                    }
                    let func = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { name, offset })?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Ok(match name.as_str() {
                    "pi" => Expr::Pi,
                    "i" => Expr::I,
                    _ => Expr::Var(name),
                })
            }
            _ => self.fail(&["number", "identifier", "`(`", "`-`"]),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(e.eval(&Bindings::new()).unwrap().re, -4.0);
        let e = parse("2^3^2").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Num(2.0)), 9.0));
        let e = parse("-2^2").unwrap();
        assert_eq!(e.eval(&Bindings::new()).unwrap().re, -4.0);
        let e = parse("2*3+4/2").unwrap();
        assert_eq!(e.eval(&Bindings::new()).unwrap().re, 8.0);
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" sin ( x ) ^2").unwrap(), parse("sin(x)^2").unwrap());
    }

    #[test]
    fn syntax_errors_carry_offset_and_expectations() {
        match parse("x + * y") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e.contains("number")));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("(x + 1") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 6);
                assert_eq!(expected, vec!["`)`".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("x $ y"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_function_is_an_error_but_unknown_identifier_is_not() {
        assert_eq!(
            parse("foo(x)"),
            Err(ParseError::UnknownFunction {
                name: "foo".into(),
                offset: 0
            })
        );
        assert_eq!(parse("zeta").unwrap(), Expr::Var("zeta".into()));
    }

    #[test]
    fn exponent_must_be_constant() {
        assert!(matches!(
            parse("x^y"),
            Err(ParseError::NonConstantExponent { offset: 2 })
        ));
        assert!(matches!(parse("x^i"), Err(ParseError::NonConstantExponent { .. })));
        assert_eq!(parse("x^(1/2)").unwrap(), Expr::Pow(Box::new(Expr::var("x")), 0.5));
    }
}
