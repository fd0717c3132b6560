use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_dual::{Dual2_64, DualNum};
use serde::{Deserialize, Serialize};

use super::closed::{assemble_closed, CapCore};
use super::{certificate_nodes, snap_far_line, BuildOptions, ConstructionParams, FamilyKind, FamilyProfiles};
use super::{ExactCore, GroupLabel, JetSource, MetricFamilySpec, MetricForm, Region};
use crate::curvature::{verify_nodes, CurvatureCertificate, CurvatureConditions, WarpedMetric};
use crate::error::{parameter, precondition, Error, Result};
use crate::exec;
use crate::oracle::{ricci_eigen_min, ChartMetric, EH_DEFAULT_MARGIN};
use crate::profiles::{concave_smooth, Expr, Piece, ScalarProfile, Table};
use crate::quad::adaptive;

type D = Dual2_64;

/// The Eguchi–Hanson chart in `(r, θ, φ, ψ)` on `r > a(1 + margin)`.
pub fn eguchi_hanson_chart(a: f64) -> Result<ChartMetric> {
    ChartMetric::eguchi_hanson(a, EH_DEFAULT_MARGIN)
}

fn radius<T: DualNum<Primitive = f64> + Copy>(u: T, a4: f64) -> T {
    ((u * u + (u.powi(4) + a4 * 4.0).sqrt()) * 0.5).sqrt()
}

/// `dt/du = 1/(1 + (a/r)⁴)`.
fn arclength_rate<T: DualNum<Primitive = f64> + Copy>(u: T, a4: f64) -> T {
    let r4 = radius(u, a4).powi(4);
    r4 / (r4 + a4)
}

/// The Eguchi–Hanson radius at `u = r(1 − (a/r)⁴)^{1/2}`.
pub fn eh_radius(u: f64, a: f64) -> f64 {
    radius(u, a.powi(4))
}

/// `lim (u − t(u))` as `u → ∞`.
pub fn arclength_offset(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(parameter(format!("a must be positive, got {a}")));
    }
    let a4 = a.powi(4);
    let cut = 200.0 * a;
    let head = adaptive(|u| 1.0 - arclength_rate(u, a4), 0.0, cut, 1e-15, 1e-13)?;
    Ok(head + a4 / (3.0 * cut.powi(3)))
}

/// The arclength `t(u) = ∫₀ᵘ dv/(1 + (a/r)⁴)` of the Eguchi–Hanson metric,
/// tabulated with its first two derivatives.
#[derive(Debug, Clone)]
pub struct ArclengthMap {
    a4: f64,
    table: Table,
}

impl ArclengthMap {
    pub fn new(a: f64, u_max: f64, step: f64) -> Result<Self> {
        if !(a > 0.0 && u_max > 0.0 && step > 0.0) {
            return Err(parameter(format!("invalid arclength map a = {a}, u_max = {u_max}, step = {step}")));
        }
        let a4 = a.powi(4);
        let n = ((u_max / step).ceil() as usize).max(4);
        let nodes: Vec<f64> = (0..=n).map(|i| u_max * i as f64 / n as f64).collect();
        let mut t = vec![0.0; n + 1];
        for i in 0..n {
            t[i + 1] = t[i] + adaptive(|u| arclength_rate(u, a4), nodes[i], nodes[i + 1], 1e-16, 1e-14)?;
        }
        let jets: Vec<D> = nodes.iter().map(|&u| arclength_rate(D::from_re(u).derivative(), a4)).collect();
        let d1 = jets.iter().map(|j| j.re).collect();
        let d2 = jets.iter().map(|j| j.v1).collect();
        Ok(Self { a4, table: Table::with_derivatives(nodes, t, d1, d2)? })
    }

    pub fn u_max(&self) -> f64 {
        self.table.span().1
    }

    pub fn t(&self, u: f64) -> Result<f64> {
        self.table.eval(u, 0)
    }

    /// `t` at a dual `u` seeded with unit derivative.
    fn t_dual(&self, u: D) -> Result<D> {
        let rate = arclength_rate(u, self.a4);
        Ok(D::new(self.t(u.re)?, rate.re * u.v1, rate.v1 * u.v1 * u.v1 + rate.re * u.v2))
    }
}

/// Shape of the conformal factor: `h = 1` up to `corner − radius`, a
/// smoothed tangent line, then exactly `1 + (t + δ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorDesign {
    pub corner: f64,
    /// Radius of the polynomial smoothing kernel.
    pub radius: f64,
}

impl Default for FactorDesign {
    fn default() -> Self {
        Self { corner: 0.27, radius: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    pub profile: ScalarProfile,
    /// `δ = lim (u − t)`: the far form is `1 + (t + δ)²`.
    pub shift: f64,
    /// `h = 1 + (t + δ)²` exactly for `t ≥ exact_from`.
    pub exact_from: f64,
    pub design: FactorDesign,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `x ↦ ∫_lo^x p`.
fn antiderivative(coeffs: &[f64], lo: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(coeffs.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
    out[0] = -poly_eval(&out, lo);
    out
}

/// Unit-mass kernel `(1 − (x/R)²)³` on `(−R, R)`, as power coefficients.
fn kernel_poly(radius: f64) -> Vec<f64> {
    let r2 = radius * radius;
    let norm = 35.0 / (32.0 * radius);
    [1.0, 0.0, -3.0 / r2, 0.0, 3.0 / (r2 * r2), 0.0, -1.0 / (r2 * r2 * r2)].iter().map(|c| c * norm).collect()
}

/// Convex `h ≥ 1`, equal to 1 on `(0, corner − radius)` and to
/// `1 + (t + δ)²` beyond `exact_from`.
///
/// The kinked profile `max(1, tangent line, 1 + (t + δ)² − m₂)` convolved
/// with a polynomial kernel of second moment `m₂`; every piece is an exact
/// polynomial.
pub fn conformal_factor(a: f64, design: FactorDesign) -> Result<ConformalFactor> {
    let FactorDesign { corner, radius } = design;
    if !(radius > 0.0 && corner - radius >= 0.25) {
        return Err(parameter(format!(
            "factor corner {corner} and radius {radius} must leave h = 1 on (0, 1/4)"
        )));
    }
    let delta = arclength_offset(a)?;
    let k = kernel_poly(radius);
    let mut moment = vec![0.0, 0.0];
    moment.extend(&k);
    let second_moment = poly_eval(&antiderivative(&moment, -radius), radius);
    let base = corner + delta;
    let disc = base * base - second_moment;
    if !(disc > 0.0) {
        return Err(parameter("factor corner too close to the origin for the kernel radius"));
    }
    // tangent from (corner, 1) to 1 + (t + δ)² − m₂, touching at t = y − δ
    let y = base + disc.sqrt();
    let touch = y - delta;
    if touch - radius <= corner + radius {
        return Err(parameter("smoothing windows of the conformal factor overlap"));
    }
    let p1 = antiderivative(&k, -radius);
    let p2 = antiderivative(&p1, -radius);
    let p3 = antiderivative(&p2, -radius);
    let mut onset: Vec<f64> = p2.iter().map(|c| 2.0 * y * c).collect();
    onset[0] += 1.0;
    let mut bend: Vec<f64> = p3.iter().map(|c| 2.0 * c).collect();
    bend[0] += 1.0 + 2.0 * y * (touch - corner);
    bend[1] += 2.0 * y;
    let exact_from = touch + radius;
    let profile = ScalarProfile::from_pieces(vec![
        Piece::new(-1.0, corner - radius, Expr::Affine { offset: 1.0, slope: 0.0 }),
        Piece::new(corner - radius, corner + radius, Expr::Poly { center: corner, coeffs: onset }),
        Piece::new(corner + radius, touch - radius, Expr::Affine { offset: 1.0 - 2.0 * y * corner, slope: 2.0 * y }),
        Piece::new(touch - radius, exact_from, Expr::Poly { center: touch, coeffs: bend }),
        Piece::new(exact_from, f64::INFINITY, Expr::Poly { center: -delta, coeffs: vec![1.0, 0.0, 1.0] }),
    ])?;
    Ok(ConformalFactor { profile, shift: delta, exact_from, design })
}

/// Convexity, `h ≥ 1` and `h = 1` on `(0, 1/4)`, sampled on `[0, t_max]`.
fn check_factor(h: &ScalarProfile, t_max: f64) -> Result<()> {
    let (lo, hi) = h.domain();
    if !(lo < 0.0 && hi > t_max) {
        return Err(precondition(format!("conformal factor must be defined on [0, {t_max}], domain is ({lo}, {hi})")));
    }
    let step = 1e-3;
    let n = (t_max / step).ceil() as usize;
    let values = (0..=n).map(|i| h.value(i as f64 * step)).collect::<Result<Vec<_>>>()?;
    for (i, &v) in values.iter().enumerate() {
        let t = i as f64 * step;
        if t < 0.25 && (v - 1.0).abs() > 1e-12 {
            return Err(precondition(format!("h must equal 1 on (0, 1/4); h({t}) = {v}")));
        }
        if v < 1.0 - 1e-12 {
            return Err(precondition(format!("h must be at least 1; h({t}) = {v}")));
        }
    }
    for i in 1..n {
        let dd = values[i + 1] - 2.0 * values[i] + values[i - 1];
        if dd < -1e-10 {
            return Err(precondition(format!("h is not convex near t = {}", i as f64 * step)));
        }
    }
    Ok(())
}

/// `h(t(u))` as a dual number.
fn factor_dual(h: &ScalarProfile, t: D) -> Result<D> {
    let [h0, h1, h2] = h.jet(t.re)?;
    Ok(D::new(h0, h1 * t.v1, h2 * t.v1 * t.v1 + h1 * t.v2))
}

/// Cutoff from the conformal metric to the model metric on `(start, start + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blend {
    pub start: f64,
    pub width: f64,
}

impl Blend {
    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    fn weight(&self, u: D) -> D {
        let x = (u - self.start) / self.width;
        if x.re <= 0.0 {
            D::from_re(0.0)
        } else if x.re >= 1.0 {
            D::from_re(1.0)
        } else {
            x * x * x * (x * (x * 6.0 - 15.0) + 10.0)
        }
    }
}

/// Coefficients `(A, W, B)` of `A du² + W u² σz² + B(σx² + σy²)`.
#[derive(Clone)]
struct CoreMetric {
    a4: f64,
    factor: ScalarProfile,
    tmap: Arc<ArclengthMap>,
    blend: Option<Blend>,
}

impl CoreMetric {
    fn coefficients(&self, u: D) -> Result<(D, D, D)> {
        let model = (u * u + 1.0).powi(2).recip();
        let chi = self.blend.map_or(D::from_re(0.0), |b| b.weight(u));
        if chi.re == 1.0 {
            return Ok((model, model, u * u * model));
        }
        let t = self.tmap.t_dual(u)?;
        let h = factor_dual(&self.factor, t)?;
        let ih2 = (h * h).recip();
        let rate = arclength_rate(u, self.a4);
        let r = radius(u, self.a4);
        let (a, w, b) = (rate * rate * ih2, ih2, r * r * ih2);
        if chi.re == 0.0 {
            return Ok((a, w, b));
        }
        let one = D::from_re(1.0) - chi;
        Ok((a * one + model * chi, w * one + model * chi, b * one + u * u * model * chi))
    }

    fn values(&self, u: f64) -> Result<(f64, f64, f64)> {
        let (a, w, b) = self.coefficients(D::from_re(u))?;
        Ok((a.re, b.re, w.re * u * u))
    }

    /// Arclength rate `√A` at `u`.
    fn speed(&self, u: f64) -> Result<f64> {
        Ok(self.coefficients(D::from_re(u))?.0.re.sqrt())
    }

    /// `[ρ, ρ_s, ρ_ss]` and `[φ, φ_s, φ_ss]` in the arclength `s`.
    fn berger_jets(&self, u: f64) -> Result<([f64; 3], [f64; 3])> {
        let ud = D::from_re(u).derivative();
        let (a, w, b) = self.coefficients(ud)?;
        let speed = a.sqrt();
        let to_s = |f: D| {
            [f.re, f.v1 / speed.re, (f.v2 - f.v1 * speed.v1 / speed.re) / a.re]
        };
        Ok((to_s(ud * w.sqrt()), to_s(b.sqrt())))
    }

    fn chart(&self, name: String, u_max: f64) -> ChartMetric {
        let me = self.clone();
        ChartMetric::radial_euler(name, (0.0, u_max), 2.0 * std::f64::consts::PI, move |u| {
            me.values(u).unwrap_or((f64::NAN, f64::NAN, f64::NAN))
        })
    }

    /// Arclength tables of `ρ` and `φ` on `u ∈ [0, u_end]`, with the
    /// exact-jet evaluator for the same metric.
    fn tabulate(&self, u_end: f64, step: f64) -> Result<CoreTables> {
        let n = ((u_end / step).ceil() as usize).max(8);
        let us: Vec<f64> = (0..=n).map(|i| u_end * i as f64 / n as f64).collect();
        let jets = exec::map_slice(&us, |&u| -> Result<_> {
            let (a, _, _) = self.coefficients(D::from_re(u).derivative())?;
            Ok((self.berger_jets(u)?, [u, 1.0 / a.re.sqrt(), -0.5 * a.v1 / (a.re * a.re)]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let cells: Vec<usize> = (0..n).collect();
        let lengths = exec::map_slice(&cells, |&i| {
            let mut failure = None;
            let len = adaptive(
                |u| match self.speed(u) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                us[i],
                us[i + 1],
                1e-16,
                1e-14,
            )?;
            failure.map_or(Ok(len), Err)
        });
        let mut s = vec![0.0; n + 1];
        for (i, len) in lengths.into_iter().enumerate() {
            s[i + 1] = s[i] + len?;
        }
        let column = |k: usize, which: usize| -> Vec<f64> {
            jets.iter().map(|((r, p), u)| [r, p, u][which][k]).collect()
        };
        let end = s[n];
        let table = |which| Table::with_derivatives(s.clone(), column(0, which), column(1, which), column(2, which));
        let (rho, phi, u_of_s) = (table(0)?, table(1)?, table(2)?);
        Ok(CoreTables {
            rho: ScalarProfile::single(0.0, end, Expr::Table(rho))?,
            phi: ScalarProfile::single(0.0, end, Expr::Table(phi))?,
            exact: ExactCore::new(Arc::new(GluedJets { metric: self.clone(), u_of_s, u_end }), end),
        })
    }
}

struct CoreTables {
    rho: ScalarProfile,
    phi: ScalarProfile,
    exact: ExactCore,
}

/// Exact arclength jets of the glued core, through the table `u(s)`.
struct GluedJets {
    metric: CoreMetric,
    u_of_s: Table,
    u_end: f64,
}

impl JetSource for GluedJets {
    fn label(&self) -> &'static str {
        "glued core (exact jets)"
    }

    fn jets(&self, s: f64) -> Result<([f64; 3], [f64; 3])> {
        let u = self.u_of_s.eval(s, 0)?.clamp(0.0, self.u_end);
        self.metric.berger_jets(u)
    }
}

/// The Eguchi–Hanson metric scaled by `1/h(t)²`, in the chart
/// `(u, θ, φ, ψ)` with `ψ ∈ (0, 2π)` and `u ∈ (0, 4)`.
pub fn conformal_modified(params: &ConstructionParams, h: &ScalarProfile) -> Result<ChartMetric> {
    if !(params.a > 0.0) {
        return Err(parameter(format!("a must be positive, got {}", params.a)));
    }
    let u_max = 4.0;
    let tmap = ArclengthMap::new(params.a, u_max, 1e-3)?;
    check_factor(h, tmap.t(u_max)?)?;
    let metric = CoreMetric { a4: params.a.powi(4), factor: h.clone(), tmap: Arc::new(tmap), blend: None };
    Ok(metric.chart(format!("eguchi_hanson_conformal(a={})", params.a), u_max))
}

/// Finite-difference spot checks start here: closer to the bolt the
/// difference stencil cannot resolve the curvature scale `1/a²`.
const ORACLE_U_MIN: f64 = 0.1;

/// Minimal Ricci eigenvalue of a chart along its radial coordinate.
struct ChartConditions<'a> {
    chart: &'a ChartMetric,
    domain: (f64, f64),
}

impl CurvatureConditions for ChartConditions<'_> {
    fn label(&self) -> String {
        format!("{} (finite-difference Ricci)", self.chart.name())
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["ricci_eigen_min"]
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn conditions(&self, u: f64) -> Result<Vec<f64>> {
        Ok(vec![ricci_eigen_min(self.chart, &[u, 1.1, 2.3, 2.9])?])
    }
}

/// Finite-difference Ricci certificate at `count` points of `(lo, hi)`,
/// tolerance 1e-4.
fn oracle_certificate(chart: &ChartMetric, lo: f64, hi: f64, count: usize) -> Result<CurvatureCertificate> {
    let nodes: Vec<f64> = (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();
    verify_nodes(&ChartConditions { chart, domain: (lo, hi) }, &nodes, 1e-4)
}

/// The conformally modified Eguchi–Hanson core glued to the model metric.
#[derive(Debug, Clone)]
pub struct ModifiedCore {
    pub rho: ScalarProfile,
    pub phi: ScalarProfile,
    /// Arclength where the metric is exactly the model metric from then on.
    pub seam: f64,
    /// `u` at the seam: `tan((π/2 − b′)/2)`.
    pub u_end: f64,
    pub blend: Blend,
    pub factor: ConformalFactor,
    pub chart: ChartMetric,
    pub(crate) exact: ExactCore,
}

/// Tabulates the glued core for `params.a` and `params.b_prime`.
pub fn modified_core(params: &ConstructionParams, opts: &BuildOptions) -> Result<ModifiedCore> {
    let factor = conformal_factor(params.a, opts.factor)?;
    let u_end = (0.5 * (FRAC_PI_2 - params.b_prime)).tan();
    let blend = Blend { start: u_end - opts.blend_width, width: opts.blend_width };
    if !(blend.start > 0.0) {
        return Err(parameter(format!("blend width {} exceeds the seam at u = {u_end}", opts.blend_width)));
    }
    let tmap = ArclengthMap::new(params.a, u_end, opts.core_step.min(1e-3))?;
    check_factor(&factor.profile, tmap.t(u_end)?)?;
    let t_start = tmap.t(blend.start)?;
    if t_start < factor.exact_from {
        return Err(parameter(format!(
            "blend starts at t = {t_start:.4}, before the factor reaches 1 + (t + δ)² at t = {:.4}; lower a or b′",
            factor.exact_from
        )));
    }
    let metric = CoreMetric { a4: params.a.powi(4), factor: factor.profile.clone(), tmap: Arc::new(tmap), blend: Some(blend) };
    let CoreTables { rho, phi, exact } = metric.tabulate(u_end, opts.core_step)?;
    let seam = rho.domain().1;
    let chart = metric.chart(format!("glued_core(a={}, b'={})", params.a, params.b_prime), u_end + 1.0);
    Ok(ModifiedCore { rho, phi, seam, u_end, blend, factor, chart, exact })
}

/// The glued open family with its certificates attached, passing or not.
pub fn m_open_family(params: &ConstructionParams, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    Ok(m_open_parts(params, opts)?.0)
}

fn m_open_parts(params: &ConstructionParams, opts: &BuildOptions) -> Result<(MetricFamilySpec, ExactCore)> {
    params.validate()?;
    params.check_gluing_relation()?;
    let (b, bp, c) = (params.b, params.b_prime, params.c);
    let core = modified_core(params, opts)?;

    // sin on (π/2 − b′, π/2 − b), then its tangent-slope-halved line, rounded at π/2 − b
    let start = FRAC_PI_2 - bp;
    let corner = FRAC_PI_2 - b;
    let line_slope = 0.5 * b.sin();
    let raw = ScalarProfile::from_pieces(vec![
        Piece::new(start, corner, Expr::Sine { amplitude: 1.0, frequency: 1.0, phase: 0.0, offset: 0.0 }),
        Piece::new(corner, f64::INFINITY, Expr::Affine { offset: b.cos() - line_slope * corner, slope: line_slope }),
    ])?;
    let hw = 0.5 * b.min(bp - b).min(0.1);
    let outer = concave_smooth(&raw, corner, hw)?;
    let warp = outer.reparam(0.5, 2.0, start - 2.0 * core.seam);
    let rho = core.rho.concat(&warp)?;
    let phi = core.phi.concat(&warp)?;

    let (offset, slope) = match rho.pieces()[rho.pieces().len() - 1].expr {
        Expr::Affine { offset, slope } => (offset, slope),
        _ => return Err(Error::Numeric("glued warp does not end on a line".into())),
    };
    if (slope - c).abs() > 1e-12 || !(offset > 0.0) {
        return Err(Error::Numeric(format!("glued warp ends with slope {slope}, expected {c}")));
    }
    let scale = c / offset;

    let line_start = rho.pieces()[rho.pieces().len() - 1].lo;
    let regions = vec![
        Region { lo: 0.0, hi: core.seam, form: MetricForm::Berger },
        Region { lo: core.seam, hi: f64::INFINITY, form: MetricForm::Warped },
    ];
    let inner = verify_nodes(&core.exact, &certificate_nodes(&[&rho, &phi], 0.0, core.seam, opts.grid_step), opts.tolerance)?;
    let warped = WarpedMetric::new(rho.clone(), 3, 4)?.with_domain(core.seam, f64::INFINITY)?;
    let outer_nodes = certificate_nodes(&[&rho], core.seam, line_start + 10.0, opts.grid_step);
    let outer_cert = verify_nodes(&warped, &outer_nodes, opts.tolerance)?;
    let certificate = CurvatureCertificate::merge("M_open", &[inner, outer_cert])?;
    let oracle = oracle_certificate(&core.chart, ORACLE_U_MIN, core.u_end + 0.5, 60)?;

    let spec = MetricFamilySpec {
        kind: FamilyKind::MOpen,
        params: *params,
        scale,
        group: GroupLabel::Nu4,
        profiles: FamilyProfiles { rho, phi },
        regions,
        middle: None,
        conformal_factor: Some(core.factor.profile),
        certificate: Some(certificate),
        oracle_certificate: Some(oracle),
    };
    Ok((spec, core.exact))
}

/// The glued cone for slope `c` and gluing angle `b` (with `c = cos(π/2 − b)/2`).
/// The seam angle `b′` is the default, or `b + 0.1` when `b` is not below it.
pub fn build_m_profile(c: f64, b: f64) -> Result<MetricFamilySpec> {
    let params = ConstructionParams { b, c, b_prime: super::window_edge_for(b), ..ConstructionParams::with_slope(c) };
    build_m_profile_with(&params, &BuildOptions::default())
}

pub fn build_m_profile_with(params: &ConstructionParams, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    m_open_family(params, opts)?.finish(opts)
}

/// Closed glued family: the normalized glued cone shrunk into the caps.
pub fn build_m_closed_profile(c: f64, d: f64) -> Result<MetricFamilySpec> {
    build_m_closed_with(&ConstructionParams { d, ..ConstructionParams::with_slope(c) }, &BuildOptions::default())
}

pub fn build_m_closed_with(params: &ConstructionParams, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    let (open, exact) = m_open_parts(params, opts)?;
    let open = open.finish(opts)?;
    let normalized = open.normalized()?;
    let rho = snap_far_line(&normalized.profiles.rho, params.c, 1.0)?;
    let phi = snap_far_line(&normalized.profiles.phi, params.c, 1.0)?;
    let core = CapCore { rho, phi, group: GroupLabel::Nu4, scale: open.scale, exact: Some(exact.scaled(open.scale)) };
    let mut spec = assemble_closed(FamilyKind::MClosed, *params, core, opts)?;
    spec.conformal_factor = open.conformal_factor;
    spec.oracle_certificate = open.oracle_certificate;
    spec.finish(opts)
}

/// The Eguchi–Hanson metric itself (`h = 1`) in Berger form on `u ∈ (0, u_max)`.
pub fn eh_family(a: f64, u_max: f64, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    let params = ConstructionParams { a, ..ConstructionParams::default() };
    let one = ScalarProfile::constant(-1.0, f64::INFINITY, 1.0)?;
    let tmap = ArclengthMap::new(a, u_max, opts.core_step.min(1e-3))?;
    let metric = CoreMetric { a4: a.powi(4), factor: one, tmap: Arc::new(tmap), blend: None };
    open_core_spec(FamilyKind::Eh, params, metric, u_max, None, opts)
}

/// The conformally modified Eguchi–Hanson metric in Berger form on `u ∈ (0, u_max)`.
pub fn eh_conformal_family(params: &ConstructionParams, u_max: f64, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    let factor = conformal_factor(params.a, opts.factor)?;
    let tmap = ArclengthMap::new(params.a, u_max, opts.core_step.min(1e-3))?;
    check_factor(&factor.profile, tmap.t(u_max)?)?;
    let metric = CoreMetric { a4: params.a.powi(4), factor: factor.profile.clone(), tmap: Arc::new(tmap), blend: None };
    open_core_spec(FamilyKind::EhConformal, *params, metric, u_max, Some(factor.profile), opts)
}

fn open_core_spec(
    kind: FamilyKind,
    params: ConstructionParams,
    metric: CoreMetric,
    u_max: f64,
    factor: Option<ScalarProfile>,
    opts: &BuildOptions,
) -> Result<MetricFamilySpec> {
    let CoreTables { rho, phi, exact } = metric.tabulate(u_max, opts.core_step)?;
    let end = rho.domain().1;
    let cert = verify_nodes(&exact, &certificate_nodes(&[&rho, &phi], 0.0, end, opts.grid_step), opts.tolerance)?;
    let chart = metric.chart(format!("{kind:?}(a={})", params.a), u_max);
    let oracle = oracle_certificate(&chart, ORACLE_U_MIN, u_max - 0.01, 40)?;
    Ok(MetricFamilySpec {
        kind,
        params,
        scale: 1.0,
        group: GroupLabel::Mu(2),
        profiles: FamilyProfiles { rho, phi },
        regions: vec![Region { lo: 0.0, hi: end, form: MetricForm::Berger }],
        middle: None,
        conformal_factor: factor,
        certificate: Some(cert),
        oracle_certificate: Some(oracle),
    })
}
