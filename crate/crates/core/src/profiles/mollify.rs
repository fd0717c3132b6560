use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Expr, Piece, ScalarProfile, Table};
use crate::error::{domain, Error, Result};
use crate::exec;
use crate::quad::GaussLegendre;

const GL_ORDER: usize = 20;
/// Gauss-Legendre panels per full kernel window.
const WINDOW_PANELS: usize = 16;

/// Normalized bump `exp(-1 / (1 - (s/radius)^2))` supported on `(-radius, radius)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifierKernel {
    radius: f64,
    #[serde(skip)]
    norm: f64,
}

impl PartialEq for MollifierKernel {
    fn eq(&self, other: &Self) -> bool {
        self.radius == other.radius
    }
}

fn bump_jet(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - x * x;
    let f = (-1.0 / q).exp();
    let g1 = -2.0 * x / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * x * x / (q * q * q);
    [f, f * g1, f * (g1 * g1 + g2)]
}

impl MollifierKernel {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("mollifier radius must be positive, got {radius}")));
        }
        // Same rule as the convolutions below, so affine inputs are reproduced
        // to rounding.
        let gl = GaussLegendre::new(GL_ORDER);
        let norm = gl.integrate(|x| bump_jet(x)[0], -1.0, 1.0, WINDOW_PANELS);
        Ok(Self { radius, norm })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn norm(&self) -> f64 {
        if self.norm > 0.0 {
            self.norm
        } else {
            GaussLegendre::new(GL_ORDER).integrate(|x| bump_jet(x)[0], -1.0, 1.0, WINDOW_PANELS)
        }
    }

    /// Kernel value and its first two derivatives at `s`.
    pub fn jet(&self, s: f64) -> [f64; 3] {
        let r = self.radius;
        let z = self.norm();
        let [f, f1, f2] = bump_jet(s / r);
        [f / (r * z), f1 / (r * r * z), f2 / (r * r * r * z)]
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.jet(s)[0]
    }
}

/// Convolution `p * kernel`, with the default table spacing of 1e-3 of each
/// tabulated zone.
pub fn mollify(p: &ScalarProfile, kernel: &MollifierKernel) -> Result<ScalarProfile> {
    mollify_with_spacing(p, kernel, None)
}

/// Convolution `p * kernel` on `(lo + radius, hi - radius)`.
///
/// Wherever `p` is affine on a whole kernel window the output keeps the
/// original affine piece, so it agrees with `p` exactly there. Elsewhere the
/// output is a table of value and first two derivatives, each obtained by
/// quadrature against the kernel and its derivatives.
pub fn mollify_with_spacing(
    p: &ScalarProfile,
    kernel: &MollifierKernel,
    spacing: Option<f64>,
) -> Result<ScalarProfile> {
    let radius = kernel.radius();
    let (lo, hi) = p.domain();
    let (out_lo, out_hi) = (lo + radius, hi - radius);
    if !(out_lo < out_hi) {
        return Err(domain(format!(
            "kernel window of radius {radius} does not fit in profile domain ({lo}, {hi})"
        )));
    }

    // Affine pieces that contain a full kernel window.
    let exact: Vec<(f64, f64, Expr)> = p
        .pieces()
        .iter()
        .filter(|pc| pc.expr.is_affine())
        .map(|pc| ((pc.lo + radius).max(out_lo), (pc.hi - radius).min(out_hi), pc.expr.clone()))
        .filter(|(a, b, _)| a < b)
        .collect();

    let mut pieces = Vec::new();
    let mut cursor = out_lo;
    for (a, b, expr) in exact.into_iter().chain(std::iter::once((out_hi, out_hi, Expr::Affine { offset: 0.0, slope: 0.0 }))) {
        if a > cursor {
            if !(cursor.is_finite() && a.is_finite()) {
                return Err(domain(format!(
                    "non-affine region ({cursor}, {a}) is unbounded and cannot be tabulated"
                )));
            }
            let table = tabulate(p, kernel, cursor, a, spacing)?;
            pieces.push(Piece::new(cursor, a, Expr::Table(table)));
        }
        if b > a {
            pieces.push(Piece::new(a, b, expr));
        }
        cursor = cursor.max(b);
    }
    ScalarProfile::from_pieces(pieces)
}

fn tabulate(
    p: &ScalarProfile,
    kernel: &MollifierKernel,
    a: f64,
    b: f64,
    spacing: Option<f64>,
) -> Result<Table> {
    let step = spacing.unwrap_or(1e-3 * (b - a));
    if !(step > 0.0) {
        return Err(Error::Parameter(format!("table spacing must be positive, got {step}")));
    }
    let intervals = (((b - a) / step).ceil() as usize).max(3);
    let h = (b - a) / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| if i == intervals { b } else { a + h * i as f64 }).collect();
    let jets = exec::map_slice(&nodes, |&x| convolution_jet(p, kernel, x));
    let mut values = Vec::with_capacity(nodes.len());
    let mut d1 = Vec::with_capacity(nodes.len());
    let mut d2 = Vec::with_capacity(nodes.len());
    for j in jets {
        let [v, g, s] = j?;
        values.push(v);
        d1.push(g);
        d2.push(s);
    }
    Table::with_derivatives(nodes, values, d1, d2)
}

/// Value and first two derivatives of `p*K` at `x`. Derivatives move onto
/// `p` (piecewise, by Gauss-Legendre between breakpoints) plus a kernel
/// term for each jump of `p` or `p'` inside the window; this avoids
/// integrating against the steep `K''`.
pub fn convolution_jet(p: &ScalarProfile, kernel: &MollifierKernel, x: f64) -> Result<[f64; 3]> {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let gl = RULE.get_or_init(|| GaussLegendre::new(GL_ORDER));
    let radius = kernel.radius();
    let (wlo, whi) = (x - radius, x + radius);
    let inner: Vec<f64> = p.breakpoints().into_iter().filter(|&bp| bp > wlo && bp < whi).collect();
    let mut cuts = vec![wlo];
    cuts.extend(&inner);
    cuts.push(whi);
    let piece_at = |y: f64| {
        p.pieces()
            .iter()
            .find(|pc| pc.lo <= y && y < pc.hi)
            .ok_or_else(|| domain(format!("kernel window around {x} leaves the profile domain")))
    };
    let mut acc = [0.0; 3];
    for seg in cuts.windows(2) {
        let (u, v) = (seg[0], seg[1]);
        let piece = piece_at(0.5 * (u + v))?;
        let panels = ((WINDOW_PANELS as f64 * (v - u) / (2.0 * radius)).ceil() as usize).max(1);
        for (k, slot) in acc.iter_mut().enumerate() {
            let mut failed = None;
            let val = gl.integrate(
                |y| match piece.expr.eval(y, k as u8) {
                    Ok(pv) => pv * kernel.eval(x - y),
                    Err(e) => {
                        failed.get_or_insert(e);
                        0.0
                    }
                },
                u,
                v,
                panels,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            *slot += val;
        }
    }
    for bp in inner {
        let left = p.pieces().iter().find(|pc| pc.hi == bp).ok_or_else(|| domain(format!("no piece ends at {bp}")))?;
        let right = piece_at(bp)?;
        let l = left.expr.jet(bp)?;
        let r = right.expr.jet(bp)?;
        let [k0, k1, _] = kernel.jet(x - bp);
        acc[1] += (r[0] - l[0]) * k0;
        acc[2] += (r[1] - l[1]) * k0 + (r[0] - l[0]) * k1;
    }
    Ok(acc)
}
