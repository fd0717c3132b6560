use super::{quintic_hermite, Expr, Piece, ScalarProfile, Table, CONCAVITY_TOL, DERIVATIVE_JUMP_TOL};
use crate::quad::GaussLegendre;
use crate::error::{domain, precondition, Error, Result};

const LIPSCHITZ_SLACK: f64 = 1e-9;
const CHECK_SAMPLES: usize = 2000;

/// Rounds a concave corner of `p` at `corner` by an interpolant that matches
/// value, slope and second derivative at `corner ± halfwidth`: a quintic when
/// that is concave, otherwise a tabulated curve whose second derivative is
/// blended between the two sides.
///
/// Returns `p` unchanged when `corner` is not a breakpoint or the two sides
/// already agree to second order. The result is verified to be concave and
/// 1-Lipschitz on the window, and to stay below `p` when the corner is a
/// genuine slope drop.
pub fn concave_smooth(p: &ScalarProfile, corner: f64, halfwidth: f64) -> Result<ScalarProfile> {
    if !(halfwidth > 0.0 && halfwidth.is_finite()) {
        return Err(Error::Parameter(format!("halfwidth must be positive, got {halfwidth}")));
    }
    let (lo, hi) = (corner - halfwidth, corner + halfwidth);
    let (dlo, dhi) = p.domain();
    if !(lo > dlo && hi < dhi) {
        return Err(domain(format!(
            "smoothing window ({lo}, {hi}) is not inside the profile domain ({dlo}, {dhi})"
        )));
    }
    let Some(idx) = p.pieces().iter().position(|pc| pc.lo == corner).filter(|&i| i > 0) else {
        return Ok(p.clone());
    };
    let left = p.pieces()[idx - 1].expr.jet(corner)?;
    let right = p.pieces()[idx].expr.jet(corner)?;
    if left.iter().zip(&right).all(|(a, b)| (a - b).abs() <= DERIVATIVE_JUMP_TOL) {
        return Ok(p.clone());
    }
    if left[1] < right[1] {
        return Err(precondition(format!(
            "convex corner at {corner}: left slope {} < right slope {}",
            left[1], right[1]
        )));
    }

    let slope_jump = left[1] - right[1] > DERIVATIVE_JUMP_TOL;

    let h = 2.0 * halfwidth / CHECK_SAMPLES as f64;
    let samples: Vec<f64> = (0..=CHECK_SAMPLES).map(|i| lo + h * i as f64).collect();
    for &x in &samples {
        let [_, d1, d2] = if x < corner {
            p.pieces()[idx - 1].expr.jet(x)?
        } else {
            p.jet(x)?
        };
        if d1.abs() > 1.0 + LIPSCHITZ_SLACK {
            return Err(precondition(format!("input is not 1-Lipschitz near {x} (slope {d1})")));
        }
        if d2 > CONCAVITY_TOL {
            return Err(precondition(format!("input is not concave near {x} (second derivative {d2})")));
        }
    }

    let left_expr = &p.pieces()[idx - 1].expr;
    let right_expr = &p.pieces()[idx].expr;
    let window = Window { p, lo, hi, corner, slope_jump, samples: &samples };
    let ja = p.jet(lo)?;
    let jb = p.jet(hi)?;
    let quintic = Expr::Poly { center: lo, coeffs: quintic_hermite(ja, jb, 2.0 * halfwidth).to_vec() };
    let blend = if window.accepts(&quintic)? {
        quintic
    } else {
        blended_curvature(&window, left_expr, right_expr, ja, jb)?.ok_or_else(|| {
            Error::Numeric(format!(
                "no concave 1-Lipschitz rounding found at {corner}; try a smaller halfwidth"
            ))
        })?
    };

    let mut pieces: Vec<Piece> = p
        .pieces()
        .iter()
        .filter(|pc| pc.lo < lo)
        .map(|pc| Piece::new(pc.lo, pc.hi.min(lo), pc.expr.clone()))
        .collect();
    pieces.push(Piece::new(lo, hi, blend));
    pieces.extend(
        p.pieces()
            .iter()
            .filter(|pc| pc.hi > hi)
            .map(|pc| Piece::new(pc.lo.max(hi), pc.hi, pc.expr.clone())),
    );
    ScalarProfile::from_pieces(pieces)
}

struct Window<'a> {
    p: &'a ScalarProfile,
    lo: f64,
    hi: f64,
    corner: f64,
    slope_jump: bool,
    samples: &'a [f64],
}

impl Window<'_> {
    fn accepts(&self, e: &Expr) -> Result<bool> {
        for &x in self.samples {
            let [v, d1, d2] = e.jet(x)?;
            if d2 > CONCAVITY_TOL || d1.abs() > 1.0 + LIPSCHITZ_SLACK {
                return Ok(false);
            }
            let orig = self.p.value(x)?;
            // a pure second-derivative jump cannot be rounded from below
            if self.slope_jump && v > orig + 1e-12 * orig.abs().max(1.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn smoothstep(x: f64) -> [f64; 2] {
    let x = x.clamp(0.0, 1.0);
    [x * x * x * (10.0 + x * (6.0 * x - 15.0)), 30.0 * x * x * (1.0 - x) * (1.0 - x)]
}

/// Second derivative of the fallback rounding at normalized position `t`:
/// the two sides' curvatures blended by a smooth step on `[start, start + width]`,
/// plus two correction bumps.
fn fallback_curvature(
    t: f64,
    side: impl Fn(f64) -> (f64, f64),
    start: f64,
    width: f64,
    bumps: &[(i32, i32); 2],
    amp: [f64; 2],
) -> f64 {
    let (gl, gr) = side(t);
    let chi = smoothstep((t - start) / width)[0];
    let mut g = (1.0 - chi) * gl + chi * gr;
    for (&(a, b), w) in bumps.iter().zip(amp) {
        g += w * t.powi(a) * (1.0 - t).powi(b);
    }
    g
}

fn blended_curvature(
    w: &Window<'_>,
    left: &Expr,
    right: &Expr,
    ja: [f64; 3],
    jb: [f64; 3],
) -> Result<Option<Expr>> {
    let len = w.hi - w.lo;
    let corner = w.corner;
    let side = |t: f64| {
        let x = w.lo + t * len;
        let gl = left.eval(x, 2).or_else(|_| left.eval(corner, 2)).unwrap_or(ja[2]);
        let gr = right.eval(x, 2).or_else(|_| right.eval(corner, 2)).unwrap_or(jb[2]);
        (gl, gr)
    };
    // f' and f at the right edge must come out as the input's
    let mass = (jb[1] - ja[1]) / len;
    let moment = (jb[0] - ja[0] - len * ja[1]) / (len * len);
    let gl = GaussLegendre::new(16);
    let integrate = |f: &dyn Fn(f64) -> f64, cuts: &[f64]| {
        cuts.windows(2).map(|c| gl.integrate(f, c[0], c[1], 8)).sum::<f64>()
    };
    let bump_pairs: [[(i32, i32); 2]; 3] = [[(2, 5), (5, 2)], [(2, 5), (3, 3)], [(3, 3), (5, 2)]];
    for &width in &[1.0, 0.8, 0.6, 0.5, 0.4, 0.3] {
        for k in 0..=8 {
            let start = (1.0 - width) * k as f64 / 8.0;
            let cuts = [0.0, start, start + width, 1.0];
            let cuts: Vec<f64> = cuts.iter().cloned().filter(|&c| (0.0..=1.0).contains(&c)).collect();
            for bumps in &bump_pairs {
                let base = |t: f64| fallback_curvature(t, side, start, width, bumps, [0.0, 0.0]);
                let bump = |i: usize| {
                    let (a, b) = bumps[i];
                    move |t: f64| t.powi(a) * (1.0 - t).powi(b)
                };
                let m = [
                    [integrate(&bump(0), &cuts), integrate(&bump(1), &cuts)],
                    [
                        integrate(&|t| (1.0 - t) * bump(0)(t), &cuts),
                        integrate(&|t| (1.0 - t) * bump(1)(t), &cuts),
                    ],
                ];
                let rhs = [
                    mass - integrate(&base, &cuts),
                    moment - integrate(&|t| (1.0 - t) * base(t), &cuts),
                ];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.abs() < 1e-300 {
                    continue;
                }
                let amp = [
                    (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
                    (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
                ];
                let g = |t: f64| fallback_curvature(t, side, start, width, bumps, amp);
                if let Some(expr) = tabulate_rounding(w, &g, &cuts, ja)? {
                    if w.accepts(&expr)? {
                        return Ok(Some(expr));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Integrates the normalized curvature `g` twice from the left edge into a
/// value/slope/curvature table; `None` if the curvature is positive anywhere.
fn tabulate_rounding(w: &Window<'_>, g: &dyn Fn(f64) -> f64, cuts: &[f64], ja: [f64; 3]) -> Result<Option<Expr>> {
    const CELLS: usize = 2000;
    let len = w.hi - w.lo;
    let gl = GaussLegendre::new(8);
    let mut nodes = Vec::with_capacity(CELLS + 1);
    let mut values = Vec::with_capacity(CELLS + 1);
    let mut d1 = Vec::with_capacity(CELLS + 1);
    let mut d2 = Vec::with_capacity(CELLS + 1);
    let (mut f, mut fp) = (ja[0], ja[1]);
    let dt = 1.0 / CELLS as f64;
    for i in 0..=CELLS {
        let t = i as f64 * dt;
        let curv = g(t);
        if curv > CONCAVITY_TOL {
            return Ok(None);
        }
        nodes.push(if i == CELLS { w.hi } else { w.lo + t * len });
        values.push(f);
        d1.push(fp);
        d2.push(curv);
        if i == CELLS {
            break;
        }
        // split the cell at blend kinks so the rule sees smooth integrands
        let mut sub = vec![t];
        sub.extend(cuts.iter().cloned().filter(|&c| c > t && c < t + dt));
        sub.push(t + dt);
        let t1 = t + dt;
        let mut dslope = 0.0;
        let mut dval = 0.0;
        for s in sub.windows(2) {
            dslope += gl.integrate(|u| g(u), s[0], s[1], 1);
            dval += gl.integrate(|u| (t1 - u) * g(u), s[0], s[1], 1);
        }
        f += fp * dt * len + dval * len * len;
        fp += dslope * len;
    }
    Ok(Some(Expr::Table(Table::with_derivatives(nodes, values, d1, d2)?)))
}
