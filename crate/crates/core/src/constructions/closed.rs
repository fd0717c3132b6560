use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{certificate_nodes, BuildOptions, ConstructionParams, FamilyKind, FamilyProfiles, GroupLabel};
use super::{MetricFamilySpec, MetricForm, Region};
use super::{ExactCore, SplitConditions};
use crate::curvature::{verify_nodes, BergerMetric, CurvatureCertificate, WarpedMetric};
use crate::error::{parameter, Error, Result};
use crate::profiles::{concave_smooth, Expr, Piece, ScalarProfile};

/// Middle warp of the closed families: `c/2 sin r − c/2 sin(9d/10) + cd`.
pub fn middle_formula(c: f64, d: f64, r: f64) -> f64 {
    0.5 * c * r.sin() - 0.5 * c * (0.9 * d).sin() + c * d
}

/// The alternative closed form `c(sin r − sin(9d/20) + d)`, reported against.
pub fn statement_middle_formula(c: f64, d: f64, r: f64) -> f64 {
    c * (r.sin() - (0.45 * d).sin() + d)
}

/// Agreement of a closed family's warp with the middle formulas on `(d, π − d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiddleReport {
    pub window: (f64, f64),
    /// max |warp − middle_formula|
    pub built_residual: f64,
    /// max |warp − statement_middle_formula|
    pub statement_residual: f64,
    /// max |warp − (c/2) sin r|: distance to the limiting suspension.
    pub limit_residual: f64,
}

impl MiddleReport {
    pub fn rescaled(self, lambda: f64) -> Self {
        Self {
            window: (self.window.0 * lambda, self.window.1 * lambda),
            built_residual: self.built_residual * lambda,
            statement_residual: self.statement_residual * lambda,
            limit_residual: self.limit_residual * lambda,
        }
    }
}

/// Normalized open core whose far region is exactly `c(r + 1)`.
pub(crate) struct CapCore {
    pub rho: ScalarProfile,
    pub phi: ScalarProfile,
    pub group: GroupLabel,
    /// Scale of the open family it came from.
    #[allow(dead_code)]
    pub scale: f64,
    /// Exact-jet conditions of the tabulated part, in normalized coordinates.
    pub exact: Option<ExactCore>,
}

/// Width of the concave smoothing window around `9d/10`.
fn middle_halfwidth(d: f64) -> f64 {
    d / 20.0
}

/// Left half of the middle warp on `(d/2, π/2)`, smoothed at `9d/10`.
fn middle_left(c: f64, d: f64) -> Result<ScalarProfile> {
    let corner = 0.9 * d;
    let hw = middle_halfwidth(d);
    if hw >= 0.4 * d || corner + hw >= FRAC_PI_2 {
        return Err(parameter(format!("smoothing window around {corner} overlaps the cap or the midpoint")));
    }
    let raw = ScalarProfile::from_pieces(vec![
        Piece::new(0.5 * d, corner, Expr::Affine { offset: 0.1 * c * d, slope: c }),
        Piece::new(
            corner,
            FRAC_PI_2,
            Expr::Sine { amplitude: 0.5 * c, frequency: 1.0, phase: 0.0, offset: c * d - 0.5 * c * corner.sin() },
        ),
    ])?;
    concave_smooth(&raw, corner, hw)
}

pub(crate) fn assemble_closed(
    kind: FamilyKind,
    params: ConstructionParams,
    core: CapCore,
    opts: &BuildOptions,
) -> Result<MetricFamilySpec> {
    let (c, d) = (params.c, params.d);
    if !(d > 0.0 && d <= 0.5) {
        return Err(parameter(format!("d must lie in (0, 1/2], got {d}")));
    }
    let mu = 0.1 * d;
    let cap_end = 0.5 * d;
    // the core must already be on its cone c(r + 1) where the cap ends
    let last = &core.rho.pieces()[core.rho.pieces().len() - 1];
    let phi_last = &core.phi.pieces()[core.phi.pieces().len() - 1];
    if last.lo * mu >= cap_end || phi_last.lo * mu >= cap_end || !last.expr.is_affine() {
        return Err(parameter(format!(
            "core reaches its cone region at r = {} (normalized), beyond the cap end 5",
            last.lo.max(phi_last.lo)
        )));
    }
    let cap_rho = core.rho.rescaled(mu).restrict(0.0, cap_end)?;
    let cap_phi = core.phi.rescaled(mu).restrict(0.0, cap_end)?;
    let mid = middle_left(c, d)?;
    let left_rho = cap_rho.concat(&mid)?;
    let left_phi = cap_phi.concat(&mid)?;
    let rho = left_rho.concat(&left_rho.reflected(FRAC_PI_2))?;
    let phi = left_phi.concat(&left_phi.reflected(FRAC_PI_2))?;

    check_mirror(&rho)?;
    check_mirror(&phi)?;

    let regions = vec![
        Region { lo: 0.0, hi: cap_end, form: MetricForm::Berger },
        Region { lo: cap_end, hi: PI - cap_end, form: MetricForm::Warped },
        Region { lo: PI - cap_end, hi: PI, form: MetricForm::Berger },
    ];
    let exact = core.exact.map(|e| e.scaled(mu));
    let certificate = certify_closed(kind, &rho, &phi, core.group, exact.as_ref(), &regions, d, opts)?;
    let middle = middle_report(&rho, c, d)?;
    Ok(MetricFamilySpec {
        kind,
        params,
        scale: 1.0,
        group: core.group,
        profiles: FamilyProfiles { rho, phi },
        regions,
        middle: Some(middle),
        conformal_factor: None,
        certificate: Some(certificate),
        oracle_certificate: None,
    })
}

fn check_mirror(p: &ScalarProfile) -> Result<()> {
    for i in 1..1000 {
        let r = FRAC_PI_2 * i as f64 / 1000.0;
        let (a, b) = (p.value(r)?, p.value(PI - r)?);
        if (a - b).abs() > 1e-12 {
            return Err(Error::Numeric(format!("closed profile is not mirror symmetric at r = {r}: {a} vs {b}")));
        }
    }
    Ok(())
}

fn certify_closed(
    kind: FamilyKind,
    rho: &ScalarProfile,
    phi: &ScalarProfile,
    group: GroupLabel,
    exact: Option<&ExactCore>,
    regions: &[Region],
    d: f64,
    opts: &BuildOptions,
) -> Result<CurvatureCertificate> {
    let mut parts = Vec::new();
    for region in regions {
        let step = match region.form {
            MetricForm::Berger => opts.grid_step * d,
            MetricForm::Warped => opts.grid_step,
        };
        let nodes = certificate_nodes(&[rho, phi], region.lo, region.hi, step);
        let cert = match region.form {
            MetricForm::Berger => {
                let tables = BergerMetric::new(rho.clone(), phi.clone(), group.order())?;
                let mirror = region.lo >= FRAC_PI_2;
                let cap = SplitConditions { tables, exact, mirror, domain: (region.lo, region.hi) };
                verify_nodes(&cap, &nodes, opts.tolerance)?
            }
            MetricForm::Warped => {
                let m = WarpedMetric::new(rho.clone(), 3, group.order())?.with_domain(region.lo, region.hi)?;
                verify_nodes(&m, &nodes, opts.tolerance)?
            }
        };
        parts.push(cert);
    }
    let label = match kind {
        FamilyKind::MClosed => "M_closed",
        FamilyKind::NClosed => "N_closed",
        _ => "closed",
    };
    CurvatureCertificate::merge(label, &parts)
}

fn middle_report(warp: &ScalarProfile, c: f64, d: f64) -> Result<MiddleReport> {
    let (lo, hi) = (d, PI - d);
    let n = 4000;
    let (mut built, mut statement, mut limit) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..=n {
        let r = lo + (hi - lo) * i as f64 / n as f64;
        let w = warp.value(r)?;
        // the formula is symmetric only through sin r, so use the left half
        let rl = r.min(PI - r);
        built = built.max((w - middle_formula(c, d, rl)).abs());
        statement = statement.max((w - statement_middle_formula(c, d, rl)).abs());
        limit = limit.max((w - 0.5 * c * rl.sin()).abs());
    }
    Ok(MiddleReport { window: (lo, hi), built_residual: built, statement_residual: statement, limit_residual: limit })
}

/// The spherical suspension `dr² + c² sin²r ds₃²` on `(0, π)` over `S³/μ₄`.
pub fn limit_suspension(c: f64) -> Result<MetricFamilySpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(parameter(format!("c must be positive, got {c}")));
    }
    let warp = ScalarProfile::sine(0.0, PI, c, 1.0, 0.0, 0.0)?;
    let group = GroupLabel::Mu(4);
    let m = WarpedMetric::new(warp.clone(), 3, group.order())?;
    let nodes = certificate_nodes(&[&warp], 0.0, PI, 1e-3);
    let cert = verify_nodes(&m, &nodes, crate::curvature::DEFAULT_TOLERANCE)?;
    Ok(MetricFamilySpec {
        kind: FamilyKind::SuspensionLimit,
        params: ConstructionParams::with_slope(c),
        scale: 1.0,
        group,
        profiles: FamilyProfiles { rho: warp.clone(), phi: warp },
        regions: vec![Region { lo: 0.0, hi: PI, form: MetricForm::Warped }],
        middle: None,
        conformal_factor: None,
        certificate: Some(cert),
        oracle_certificate: None,
    })
}
