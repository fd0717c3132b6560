use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Closed-form or tabulated term of a profile piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Expr {
    /// `offset + slope * r`
    Affine { offset: f64, slope: f64 },
    /// `amplitude * sin(frequency * r + phase) + offset`
    #[serde(rename = "sin")]
    Sine { amplitude: f64, frequency: f64, phase: f64, offset: f64 },
    /// `sum_k coeffs[k] * (r - center)^k`
    Poly { center: f64, coeffs: Vec<f64> },
    Table(Table),
}

impl Expr {
    pub fn eval(&self, r: f64, order: u8) -> Result<f64> {
        match self {
            Expr::Table(t) => t.eval(r, order),
            _ => Ok(self.jet(r)?[order as usize]),
        }
    }

    pub fn jet(&self, r: f64) -> Result<[f64; 3]> {
        Ok(match self {
            Expr::Affine { offset, slope } => [offset + slope * r, *slope, 0.0],
            Expr::Sine { amplitude, frequency, phase, offset } => {
                let (s, c) = (frequency * r + phase).sin_cos();
                [amplitude * s + offset, amplitude * frequency * c, -amplitude * frequency * frequency * s]
            }
            Expr::Poly { center, coeffs } => poly_jet(coeffs, r - center),
            Expr::Table(t) => t.jet(r)?,
        })
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Expr::Affine { .. })
    }

    /// Expression of `x -> gamma * e(a * x + b)`.
    pub fn reparam(&self, gamma: f64, a: f64, b: f64) -> Expr {
        match self {
            Expr::Affine { offset, slope } => Expr::Affine { offset: gamma * (offset + slope * b), slope: gamma * slope * a },
            Expr::Sine { amplitude, frequency, phase, offset } => Expr::Sine {
                amplitude: gamma * amplitude,
                frequency: frequency * a,
                phase: frequency * b + phase,
                offset: gamma * offset,
            },
            Expr::Poly { center, coeffs } => {
                let mut ak = 1.0;
                let coeffs = coeffs
                    .iter()
                    .map(|c| {
                        let v = gamma * c * ak;
                        ak *= a;
                        v
                    })
                    .collect();
                Expr::Poly { center: (center - b) / a, coeffs }
            }
            Expr::Table(t) => Expr::Table(t.reparam(gamma, a, b)),
        }
    }
}

fn poly_jet(coeffs: &[f64], x: f64) -> [f64; 3] {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + v;
        v = v * x + c;
    }
    [v, d1, d2]
}

/// Monomial coefficients (in powers of `r - x0`) of the quintic matching
/// value, slope and curvature `(v0, d0, s0)` at `x0` and `(v1, d1, s1)` at
/// `x0 + len`.
pub fn quintic_hermite(left: [f64; 3], right: [f64; 3], len: f64) -> [f64; 6] {
    let [v0, d0, s0] = left;
    let [v1, d1, s1] = right;
    let delta = v1 - v0 - d0 * len - 0.5 * s0 * len * len;
    let delta1 = (d1 - d0 - s0 * len) * len;
    let delta2 = (s1 - s0) * len * len;
    let a3 = 10.0 * delta - 4.0 * delta1 + 0.5 * delta2;
    let a4 = -15.0 * delta + 7.0 * delta1 - delta2;
    let a5 = 6.0 * delta - 3.0 * delta1 + 0.5 * delta2;
    [v0, d0, 0.5 * s0, a3 / len.powi(3), a4 / len.powi(4), a5 / len.powi(5)]
}

/// Tabulated values on strictly increasing nodes.
///
/// With both derivative columns present the table is interpolated by
/// piecewise quintic Hermite polynomials and derivatives are exact for the
/// interpolant. Without them, values use cubic Lagrange interpolation and
/// derivatives use centered finite differences with the local node spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<Vec<f64>>,
}

impl Table {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let t = Self { nodes, values, d1: None, d2: None };
        t.validate()?;
        Ok(t)
    }

    pub fn with_derivatives(nodes: Vec<f64>, values: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Result<Self> {
        let t = Self { nodes, values, d1: Some(d1), d2: Some(d2) };
        t.validate()?;
        Ok(t)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 4 {
            return Err(Error::InvalidProfile(format!("table needs at least 4 nodes, got {n}")));
        }
        if self.values.len() != n
            || self.d1.as_ref().is_some_and(|d| d.len() != n)
            || self.d2.as_ref().is_some_and(|d| d.len() != n)
        {
            return Err(Error::InvalidProfile("table columns have different lengths".into()));
        }
        if self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile("table nodes must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    fn has_derivatives(&self) -> bool {
        self.d1.is_some() && self.d2.is_some()
    }

    fn interval(&self, r: f64) -> Result<usize> {
        let (a, b) = self.span();
        let slack = 1e-12 * (b - a).max(1e-300);
        if r < a - slack || r > b + slack || r.is_nan() {
            return Err(domain(format!("r = {r} outside table span [{a}, {b}]")));
        }
        let j = self.nodes.partition_point(|&x| x <= r);
        Ok(j.saturating_sub(1).min(self.nodes.len() - 2))
    }

    pub fn eval(&self, r: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::Unsupported(format!("derivative order {order}")));
        }
        if self.has_derivatives() || order == 0 {
            return Ok(self.jet_or_value(r, order)?);
        }
        let j = self.interval(r)?;
        let h = self.nodes[j + 1] - self.nodes[j];
        let (a, b) = self.span();
        let (lo, hi) = (r - h, r + h);
        if lo < a || hi > b {
            // one-sided second-order stencils near the table ends
            let s = if lo < a { 1.0 } else { -1.0 };
            let f0 = self.lagrange(r)?;
            let f1 = self.lagrange(r + s * h)?;
            let f2 = self.lagrange(r + 2.0 * s * h)?;
            let f3 = self.lagrange(r + 3.0 * s * h)?;
            return Ok(if order == 1 {
                s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
            } else {
                (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h)
            });
        }
        let (fm, f0, fp) = (self.lagrange(lo)?, self.lagrange(r)?, self.lagrange(hi)?);
        Ok(if order == 1 { (fp - fm) / (2.0 * h) } else { (fp - 2.0 * f0 + fm) / (h * h) })
    }

    pub fn jet(&self, r: f64) -> Result<[f64; 3]> {
        if self.has_derivatives() {
            return self.hermite(r);
        }
        Ok([self.eval(r, 0)?, self.eval(r, 1)?, self.eval(r, 2)?])
    }

    fn jet_or_value(&self, r: f64, order: u8) -> Result<f64> {
        if self.has_derivatives() {
            Ok(self.hermite(r)?[order as usize])
        } else {
            self.lagrange(r)
        }
    }

    fn hermite(&self, r: f64) -> Result<[f64; 3]> {
        let j = self.interval(r)?;
        let d1 = self.d1.as_ref().expect("checked");
        let d2 = self.d2.as_ref().expect("checked");
        let len = self.nodes[j + 1] - self.nodes[j];
        let c = quintic_hermite(
            [self.values[j], d1[j], d2[j]],
            [self.values[j + 1], d1[j + 1], d2[j + 1]],
            len,
        );
        Ok(poly_jet(&c, r - self.nodes[j]))
    }

    fn lagrange(&self, r: f64) -> Result<f64> {
        let j = self.interval(r)?;
        let n = self.nodes.len();
        let start = j.saturating_sub(1).min(n - 4);
        let xs = &self.nodes[start..start + 4];
        let ys = &self.values[start..start + 4];
        let mut acc = 0.0;
        for i in 0..4 {
            let mut w = 1.0;
            for k in 0..4 {
                if k != i {
                    w *= (r - xs[k]) / (xs[i] - xs[k]);
                }
            }
            acc += w * ys[i];
        }
        Ok(acc)
    }

    fn reparam(&self, gamma: f64, a: f64, b: f64) -> Table {
        let mut nodes: Vec<f64> = self.nodes.iter().map(|x| (x - b) / a).collect();
        let mut values: Vec<f64> = self.values.iter().map(|v| gamma * v).collect();
        let mut d1 = self.d1.as_ref().map(|d| d.iter().map(|v| gamma * a * v).collect::<Vec<_>>());
        let mut d2 = self.d2.as_ref().map(|d| d.iter().map(|v| gamma * a * a * v).collect::<Vec<_>>());
        if a < 0.0 {
            nodes.reverse();
            values.reverse();
            if let Some(d) = d1.as_mut() {
                d.reverse();
            }
            if let Some(d) = d2.as_mut() {
                d.reverse();
            }
        }
        Table { nodes, values, d1, d2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quintic_matches_end_data() {
        let left = [0.3, -1.2, 0.7];
        let right = [1.1, 0.4, -2.0];
        let c = quintic_hermite(left, right, 0.37);
        let a = poly_jet(&c, 0.0);
        let b = poly_jet(&c, 0.37);
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], left[k], epsilon = 1e-12);
            assert_abs_diff_eq!(b[k], right[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn hermite_table_reproduces_smooth_function() {
        let nodes: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = nodes.iter().map(|x| x.sin()).collect();
        let d1: Vec<f64> = nodes.iter().map(|x| x.cos()).collect();
        let d2: Vec<f64> = nodes.iter().map(|x| -x.sin()).collect();
        let t = Table::with_derivatives(nodes, v, d1, d2).unwrap();
        for &x in &[0.013, 0.5, 0.777, 0.999] {
            let j = t.jet(x).unwrap();
            assert_abs_diff_eq!(j[0], x.sin(), epsilon = 1e-13);
            assert_abs_diff_eq!(j[1], x.cos(), epsilon = 1e-11);
            assert_abs_diff_eq!(j[2], -x.sin(), epsilon = 1e-8);
        }
    }

    #[test]
    fn plain_table_uses_finite_differences() {
        let nodes: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let v: Vec<f64> = nodes.iter().map(|x| (2.0 * x).sin()).collect();
        let t = Table::new(nodes, v).unwrap();
        assert_abs_diff_eq!(t.eval(0.4, 0).unwrap(), 0.8f64.sin(), epsilon = 1e-10);
        assert_abs_diff_eq!(t.eval(0.4, 1).unwrap(), 2.0 * 0.8f64.cos(), epsilon = 1e-5);
        assert_abs_diff_eq!(t.eval(0.4, 2).unwrap(), -4.0 * 0.8f64.sin(), epsilon = 1e-4);
        // near the ends the stencil turns one-sided
        assert_abs_diff_eq!(t.eval(0.0005, 1).unwrap(), 2.0 * 0.001f64.cos(), epsilon = 1e-4);
    }

    #[test]
    fn table_validation() {
        assert!(Table::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_err());
        assert!(Table::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        assert!(Table::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 3]).is_err());
    }
}
