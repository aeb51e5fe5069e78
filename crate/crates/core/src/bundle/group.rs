//! Structure groups as matrix groups with membership tests.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CMat};
use crate::symmat::ExprMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    #[serde(rename = "GL_R")]
    GlR,
    #[serde(rename = "GL_C")]
    GlC,
    #[serde(rename = "SO")]
    So,
    #[serde(rename = "U1")]
    U1,
    #[serde(rename = "U")]
    U,
    #[serde(rename = "Z2")]
    Z2,
}

/// Determinants below this are treated as singular.
const SINGULAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub kind: GroupKind,
    pub n: usize,
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n;
        match self.kind {
            GroupKind::GlR => write!(f, "GL({n},R)"),
            GroupKind::GlC => write!(f, "GL({n},C)"),
            GroupKind::So => write!(f, "SO({n})"),
            GroupKind::U1 => write!(f, "U(1)"),
            GroupKind::U => write!(f, "U({n})"),
            GroupKind::Z2 => write!(f, "Z2^{n}"),
        }
    }
}

impl GroupDescriptor {
    pub fn new(kind: GroupKind, n: usize) -> Self {
        Self { kind, n }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("group dimension must be positive".into());
        }
        if self.kind == GroupKind::U1 && self.n != 1 {
            return Err("U1 has n = 1".into());
        }
        Ok(())
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, GroupKind::GlC | GroupKind::U1 | GroupKind::U)
    }

    pub fn is_abelian(&self) -> bool {
        match self.kind {
            GroupKind::U1 | GroupKind::Z2 => true,
            GroupKind::So => self.n <= 2,
            _ => self.n == 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == GroupKind::Z2
    }

    /// Distance of `g` from the group; `Z2` membership is exact, so any
    /// deviation at all is reported.
    pub fn membership_residual(&self, g: &CMat) -> f64 {
        let n = self.n;
        if g.shape() != (n, n) {
            return f64::INFINITY;
        }
        let imag = g.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        let id = linalg::identity(n);
        let singular = || {
            if linalg::determinant(g).norm() < SINGULAR {
                f64::INFINITY
            } else {
                0.0
            }
        };
        match self.kind {
            GroupKind::GlC => singular(),
            GroupKind::GlR => imag.max(singular()),
            GroupKind::So => {
                let orth = linalg::max_abs_diff(&(g.transpose() * g), &id);
                let det = (linalg::determinant(g) - c(1.0)).norm();
                imag.max(orth).max(det)
            }
            GroupKind::U1 | GroupKind::U => linalg::max_abs_diff(&(g.adjoint() * g), &id),
            GroupKind::Z2 => {
                let mut worst = 0.0f64;
                for r in 0..n {
                    for col in 0..n {
                        let z = g[(r, col)];
                        let d = if r == col {
                            (z - c(1.0)).norm().min((z + c(1.0)).norm())
                        } else {
                            z.norm()
                        };
                        worst = worst.max(d);
                    }
                }
                worst
            }
        }
    }

    pub fn is_member(&self, g: &CMat, tol: f64) -> bool {
        let r = self.membership_residual(g);
        if self.is_discrete() {
            r == 0.0
        } else {
            r <= tol
        }
    }

    /// Distance of `x` from the Lie algebra (zero for the general linear
    /// groups, whose algebra is everything of the right field).
    pub fn algebra_residual(&self, x: &CMat) -> f64 {
        let imag = x.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        match self.kind {
            GroupKind::GlC => 0.0,
            GroupKind::GlR => imag,
            GroupKind::So => imag.max(linalg::max_abs(&(x + x.transpose()))),
            GroupKind::U1 | GroupKind::U => linalg::max_abs(&(x + x.adjoint())),
            GroupKind::Z2 => linalg::max_abs(x),
        }
    }

    /// Symbolic inverse: the adjoint for compact groups, cofactors otherwise.
    pub fn inverse(&self, g: &ExprMatrix) -> ExprMatrix {
        match self.kind {
            GroupKind::So | GroupKind::U1 | GroupKind::U | GroupKind::Z2 => g.adjoint(),
            GroupKind::GlR | GroupKind::GlC => g.inverse(),
        }
    }

    /// Nearest group element, for groups with a canonical projection.
    pub fn project(&self, g: &CMat) -> Option<CMat> {
        match self.kind {
            GroupKind::So => Some(linalg::project_special_orthogonal(g)),
            GroupKind::U1 | GroupKind::U => Some(linalg::project_unitary(g)),
            _ => None,
        }
    }

    /// Group of block-diagonal `diag(a, b)`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        use GroupKind::*;
        let n = self.n + other.n;
        let kind = match (self.kind, other.kind) {
            (U1, U1) => U,
            (a, b) if a == b => a,
            (U1, U) | (U, U1) => U,
            _ if self.is_complex() || other.is_complex() => GlC,
            _ => GlR,
        };
        Self { kind, n }
    }
}
