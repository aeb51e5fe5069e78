//! Matrices of expressions.

use std::collections::HashMap;

use crate::expr::{Bindings, EvalError, Expr};
use crate::linalg::CMat;

/// Row-major matrix whose entries are [`Expr`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Expr>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must match shape");
        Self { rows, cols, entries }
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let entries: Vec<Expr> = rows.into_iter().flatten().collect();
        Self::new(r, c, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![Expr::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.entries[k * n + k] = Expr::one();
        }
        m
    }

    pub fn scalar(e: Expr) -> Self {
        Self::new(1, 1, vec![e])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Expr {
        &self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Expr> {
        self.entries
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        Self::new(self.rows, self.cols, self.entries.iter().map(f).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_zero)
    }

    pub fn eval(&self, b: &Bindings) -> Result<CMat, EvalError> {
        let vals = self
            .entries
            .iter()
            .map(|e| e.eval(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CMat::from_row_slice(self.rows, self.cols, &vals))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| Expr::add(a.clone(), b.clone()))
            .collect();
        Self::new(self.rows, self.cols, entries)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| Expr::sub(a.clone(), b.clone()))
            .collect();
        Self::new(self.rows, self.cols, entries)
    }

    pub fn scale(&self, s: &Expr) -> Self {
        self.map(|e| Expr::mul(s.clone(), e.clone()))
    }

    pub fn neg(&self) -> Self {
        self.map(|e| Expr::neg(e.clone()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = Expr::zero();
                for k in 0..self.cols {
                    acc = Expr::add(acc, Expr::mul(self.get(r, k).clone(), other.get(k, c).clone()));
                }
                entries.push(acc);
            }
        }
        Self::new(self.rows, other.cols, entries)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c).clone());
            }
        }
        Self::new(self.cols, self.rows, entries)
    }

    /// Conjugate transpose, treating coordinates as real.
    pub fn adjoint(&self) -> Self {
        self.transpose().map(Expr::conjugate)
    }

    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Self {
        self.map(|e| e.substitute(map))
    }

    pub fn differentiate(&self, coord: &str) -> Self {
        self.map(|e| e.differentiate(coord))
    }

    pub fn determinant(&self) -> Expr {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        match n {
            0 => Expr::one(),
            1 => self.entries[0].clone(),
            2 => Expr::sub(
                Expr::mul(self.get(0, 0).clone(), self.get(1, 1).clone()),
                Expr::mul(self.get(0, 1).clone(), self.get(1, 0).clone()),
            ),
            _ => {
                let mut acc = Expr::zero();
                for c in 0..n {
                    let term = Expr::mul(self.get(0, c).clone(), self.minor(0, c).determinant());
                    acc = if c % 2 == 0 {
                        Expr::add(acc, term)
                    } else {
                        Expr::sub(acc, term)
                    };
                }
                acc
            }
        }
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> Self {
        let mut entries = Vec::new();
        for r in (0..self.rows).filter(|&r| r != skip_r) {
            for c in (0..self.cols).filter(|&c| c != skip_c) {
                entries.push(self.get(r, c).clone());
            }
        }
        Self::new(self.rows - 1, self.cols - 1, entries)
    }

    /// Symbolic inverse by cofactors; intended for the small matrices
    /// (n ≤ 4) that appear as transition functions.
    pub fn inverse(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 1 {
            return Self::scalar(Expr::div(Expr::one(), self.entries[0].clone()));
        }
        let det = self.determinant();
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                // adjugate is the transposed cofactor matrix
                let cof = self.minor(c, r).determinant();
                let signed = if (r + c) % 2 == 0 { cof } else { Expr::neg(cof) };
                entries.push(Expr::div(signed, det.clone()));
            }
        }
        Self::new(n, n, entries)
    }

    /// Block-diagonal matrix `diag(a, b)`.
    pub fn block_diag(a: &Self, b: &Self) -> Self {
        let rows = a.rows + b.rows;
        let cols = a.cols + b.cols;
        let mut m = Self::zeros(rows, cols);
        for r in 0..a.rows {
            for c in 0..a.cols {
                m.entries[r * cols + c] = a.get(r, c).clone();
            }
        }
        for r in 0..b.rows {
            for c in 0..b.cols {
                m.entries[(r + a.rows) * cols + c + a.cols] = b.get(r, c).clone();
            }
        }
        m
    }

    pub fn parse_rows<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self, crate::expr::ParseError> {
        let parsed = rows
            .iter()
            .map(|row| row.iter().map(|s| Expr::parse(s.as_ref())).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_rows(parsed))
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c).to_string()).collect())
            .collect()
    }
}
