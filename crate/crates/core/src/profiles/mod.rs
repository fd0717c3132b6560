//! One-dimensional warping functions.
//!
//! A [`ScalarProfile`] is a piecewise function on an open interval whose
//! pieces are closed-form terms (affine, sine, polynomial) or tabulated
//! grids. Every metric family in the crate is described by a handful of
//! these, so all derivative evaluations funnel through [`ScalarProfile::eval`].

mod expr;
mod io;
mod mollify;
mod regularity;
mod smooth;

pub use expr::{quintic_hermite, Expr, Table};
pub(crate) use io::bound_f64;
pub use io::{write_profile_csv, ProfileRow};
pub use mollify::{convolution_jet, mollify, mollify_with_spacing, MollifierKernel};
pub use regularity::{check_regularity, BreakpointJump, RegularityReport};
pub use smooth::concave_smooth;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Values at adjacent breakpoints must agree to this (relative to `max(1, |v|)`).
pub const CONTINUITY_TOL: f64 = 1e-12;
/// Largest derivative jump accepted as "smooth" at a breakpoint.
pub const DERIVATIVE_JUMP_TOL: f64 = 1e-8;
/// Slack on sampled second differences when testing concavity.
pub const CONCAVITY_TOL: f64 = 1e-10;

/// A piece of a profile: `expr` on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expr,
}

impl Piece {
    pub fn new(lo: f64, hi: f64, expr: Expr) -> Self {
        Self { lo, hi, expr }
    }

    pub fn eval(&self, r: f64, order: u8) -> Result<f64> {
        self.expr.eval(r, order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::ProfileDoc", into = "io::ProfileDoc")]
pub struct ScalarProfile {
    pieces: Vec<Piece>,
}

impl ScalarProfile {
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidProfile("a profile needs at least one piece".into()));
        }
        for p in &pieces {
            if !(p.lo < p.hi) || p.lo.is_nan() || p.hi.is_nan() {
                return Err(Error::InvalidProfile(format!("empty piece interval ({}, {})", p.lo, p.hi)));
            }
            if let Expr::Table(t) = &p.expr {
                t.validate()?;
                let (a, b) = t.span();
                let slack = 1e-9 * (b - a);
                if p.lo < a - slack || p.hi > b + slack {
                    return Err(Error::InvalidProfile(format!(
                        "table nodes [{a}, {b}] do not cover piece ({}, {})",
                        p.lo, p.hi
                    )));
                }
            }
        }
        for w in pieces.windows(2) {
            let (left, right) = (&w[0], &w[1]);
            if left.hi != right.lo {
                return Err(Error::InvalidProfile(format!(
                    "pieces are not contiguous: {} vs {}",
                    left.hi, right.lo
                )));
            }
            let x = left.hi;
            let a = left.expr.eval(x, 0)?;
            let b = right.expr.eval(x, 0)?;
            if (a - b).abs() > CONTINUITY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidProfile(format!(
                    "discontinuity of size {:.3e} at breakpoint {x}",
                    (a - b).abs()
                )));
            }
        }
        Ok(Self { pieces })
    }

    pub fn single(lo: f64, hi: f64, expr: Expr) -> Result<Self> {
        Self::from_pieces(vec![Piece::new(lo, hi, expr)])
    }

    /// `offset + slope * r` on `(lo, hi)`.
    pub fn affine(lo: f64, hi: f64, offset: f64, slope: f64) -> Result<Self> {
        Self::single(lo, hi, Expr::Affine { offset, slope })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::affine(lo, hi, value, 0.0)
    }

    /// `amplitude * sin(frequency * r + phase) + offset` on `(lo, hi)`.
    pub fn sine(lo: f64, hi: f64, amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Result<Self> {
        Self::single(lo, hi, Expr::Sine { amplitude, frequency, phase, offset })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }

    pub fn contains(&self, r: f64) -> bool {
        let (lo, hi) = self.domain();
        r > lo && r < hi
    }

    fn piece_at(&self, r: f64) -> Result<&Piece> {
        if !self.contains(r) {
            let (lo, hi) = self.domain();
            return Err(domain(format!("r = {r} outside profile domain ({lo}, {hi})")));
        }
        let idx = self.pieces.partition_point(|p| p.hi <= r);
        Ok(&self.pieces[idx.min(self.pieces.len() - 1)])
    }

    /// Value (`order = 0`) or derivative of order 1 or 2 at `r`.
    pub fn eval(&self, r: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::Unsupported(format!("derivative order {order} (only 0, 1, 2)")));
        }
        self.piece_at(r)?.eval(r, order)
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.eval(r, 0)
    }

    /// `(value, first derivative, second derivative)` at `r`.
    pub fn jet(&self, r: f64) -> Result<[f64; 3]> {
        self.piece_at(r)?.expr.jet(r)
    }

    /// Restriction to `(lo, hi)`, which must lie inside the domain.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let (dlo, dhi) = self.domain();
        if lo < dlo || hi > dhi || lo >= hi {
            return Err(domain(format!("cannot restrict ({dlo}, {dhi}) to ({lo}, {hi})")));
        }
        let pieces = self
            .pieces
            .iter()
            .filter(|p| p.hi > lo && p.lo < hi)
            .map(|p| Piece::new(p.lo.max(lo), p.hi.min(hi), p.expr.clone()))
            .collect();
        Self::from_pieces(pieces)
    }

    /// The profile `x -> gamma * p(a * x + b)`, with `a != 0`.
    pub fn reparam(&self, gamma: f64, a: f64, b: f64) -> Self {
        assert!(a != 0.0 && a.is_finite(), "reparametrization slope must be finite and non-zero");
        let map = |x: f64| {
            if x.is_infinite() {
                x * a.signum()
            } else {
                (x - b) / a
            }
        };
        let mut pieces: Vec<Piece> = self
            .pieces
            .iter()
            .map(|p| {
                let (u, v) = (map(p.lo), map(p.hi));
                Piece::new(u.min(v), u.max(v), p.expr.reparam(gamma, a, b))
            })
            .collect();
        if a < 0.0 {
            pieces.reverse();
        }
        // re-join breakpoints that drifted apart by rounding
        for i in 1..pieces.len() {
            pieces[i].lo = pieces[i - 1].hi;
        }
        Self { pieces }
    }

    /// `x -> lambda * p(x / lambda)`: the warp of the metric scaled by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        if lambda == 1.0 {
            return self.clone();
        }
        self.reparam(lambda, 1.0 / lambda, 0.0)
    }

    /// `x -> p(2 * center - x)`.
    pub fn reflected(&self, center: f64) -> Self {
        self.reparam(1.0, -1.0, 2.0 * center)
    }

    /// Appends `other`, whose domain must start where this one ends.
    pub fn concat(&self, other: &ScalarProfile) -> Result<Self> {
        let (_, hi) = self.domain();
        let (lo, _) = other.domain();
        if (hi - lo).abs() > 1e-12 * hi.abs().max(1.0) {
            return Err(domain(format!("cannot join profiles ending at {hi} and starting at {lo}")));
        }
        let mut pieces = self.pieces.clone();
        let mut rest = other.pieces.clone();
        rest[0].lo = hi;
        pieces.extend(rest);
        Self::from_pieces(pieces)
    }

    /// Replaces the expression of the last piece.
    pub(crate) fn with_last_expr(&self, expr: Expr) -> Result<Self> {
        let mut pieces = self.pieces.clone();
        pieces.last_mut().expect("non-empty").expr = expr;
        Self::from_pieces(pieces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn sine_values_and_derivatives() {
        let p = ScalarProfile::sine(0.0, PI, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p.eval(PI / 2.0, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(PI / 2.0, 2).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn affine_slope() {
        // n + c (r - 1) with n = 4, c = 0.1
        let p = ScalarProfile::affine(1.0, f64::INFINITY, 4.0 - 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(p.eval(3.0, 1).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn errors_on_domain_and_order() {
        let p = ScalarProfile::sine(0.0, PI, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(p.eval(-0.1, 0), Err(Error::Domain(_))));
        assert!(matches!(p.eval(0.0, 0), Err(Error::Domain(_))));
        assert!(matches!(p.eval(1.0, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rejects_discontinuous_pieces() {
        let r = ScalarProfile::from_pieces(vec![
            Piece::new(0.0, 1.0, Expr::Affine { offset: 0.0, slope: 1.0 }),
            Piece::new(1.0, 2.0, Expr::Affine { offset: 1.5, slope: 0.0 }),
        ]);
        assert!(matches!(r, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn breakpoint_belongs_to_right_piece() {
        let p = ScalarProfile::from_pieces(vec![
            Piece::new(0.0, 1.0, Expr::Affine { offset: 0.0, slope: 1.0 }),
            Piece::new(1.0, 2.0, Expr::Affine { offset: 1.0, slope: 0.0 }),
        ])
        .unwrap();
        assert_eq!(p.eval(1.0, 1).unwrap(), 0.0);
        assert_eq!(p.breakpoints(), vec![1.0]);
    }

    #[test]
    fn reflection_and_rescale() {
        let p = ScalarProfile::from_pieces(vec![
            Piece::new(0.0, 1.0, Expr::Sine { amplitude: 2.0, frequency: 1.5, phase: 0.1, offset: 0.3 }),
            Piece::new(
                1.0,
                3.0,
                Expr::Poly { center: 1.0, coeffs: vec![2.0 * (1.6f64).sin() + 0.3, 3.0 * (1.6f64).cos(), -0.2] },
            ),
        ])
        .unwrap();
        let q = p.reflected(1.5);
        assert_eq!(q.domain(), (0.0, 3.0));
        for &x in &[0.2, 0.7, 1.3, 2.9] {
            let a = p.jet(3.0 - x).unwrap();
            let b = q.jet(x).unwrap();
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], -b[1], epsilon = 1e-12);
            assert_abs_diff_eq!(a[2], b[2], epsilon = 1e-12);
        }
        let s = p.rescaled(0.5);
        assert_eq!(s.domain(), (0.0, 1.5));
        for &x in &[0.1, 0.4, 0.9, 1.4] {
            let a = p.jet(x / 0.5).unwrap();
            let b = s.jet(x).unwrap();
            assert_abs_diff_eq!(0.5 * a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
            assert_abs_diff_eq!(a[2] / 0.5, b[2], epsilon = 1e-11);
        }
        assert_eq!(p.rescaled(1.0), p);
    }

    #[test]
    fn restrict_and_concat() {
        let p = ScalarProfile::affine(0.0, 4.0, 1.0, 2.0).unwrap();
        let a = p.restrict(0.0, 1.0).unwrap();
        let b = p.restrict(1.0, 4.0).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.domain(), (0.0, 4.0));
        assert_eq!(c.value(2.5).unwrap(), p.value(2.5).unwrap());
        assert!(p.restrict(-1.0, 1.0).is_err());
    }
}
