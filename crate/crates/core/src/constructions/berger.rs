use std::sync::Arc;

use super::closed::{assemble_closed, CapCore};
use super::{certificate_nodes, snap_far_line, BuildOptions, ConstructionParams, FamilyKind, FamilyProfiles, GroupLabel};
use super::{ExactCore, JetSource, MetricFamilySpec, MetricForm, Region, SplitConditions};
use crate::curvature::{verify_nonneg, BergerMetric, CurvatureCertificate};
use crate::error::{parameter, Result};
use crate::grid::Grid;
use crate::profiles::{convolution_jet, mollify, MollifierKernel, Piece, ScalarProfile};
use crate::profiles::Expr;

/// Certificate grid of the open family.
pub const N_OPEN_GRID: (f64, f64, f64) = (0.01, 50.0, 1e-3);

/// Mollified `(ρ, φ)` in construction coordinates: `ρ = nr`, `φ = n` near
/// the origin and both equal to `n + c(r − 1)` far out.
fn n_open_profiles(n: u32, c: f64, radius: f64) -> Result<(ScalarProfile, ScalarProfile, ExactCore)> {
    let nf = n as f64;
    let far = Expr::Affine { offset: nf - c, slope: c };
    let rho_hat = ScalarProfile::from_pieces(vec![
        Piece::new(-2.0, 1.0, Expr::Affine { offset: 0.0, slope: nf }),
        Piece::new(1.0, f64::INFINITY, far.clone()),
    ])?;
    let phi_hat = ScalarProfile::from_pieces(vec![
        Piece::new(-2.0, 1.0, Expr::Affine { offset: nf, slope: 0.0 }),
        Piece::new(1.0, f64::INFINITY, far),
    ])?;
    let kernel = MollifierKernel::new(radius)?;
    let (rho, phi) = (mollify(&rho_hat, &kernel)?, mollify(&phi_hat, &kernel)?);
    let exact = ExactCore::new(Arc::new(ConvolvedJets { rho_hat, phi_hat, kernel }), 1.0 + radius);
    Ok((rho, phi, exact))
}

/// Jets of the mollified profiles by direct convolution.
struct ConvolvedJets {
    rho_hat: ScalarProfile,
    phi_hat: ScalarProfile,
    kernel: MollifierKernel,
}

impl JetSource for ConvolvedJets {
    fn label(&self) -> &'static str {
        "mollified core (direct convolution)"
    }

    fn jets(&self, s: f64) -> Result<([f64; 3], [f64; 3])> {
        Ok((convolution_jet(&self.rho_hat, &self.kernel, s)?, convolution_jet(&self.phi_hat, &self.kernel, s)?))
    }
}

fn check_n_inputs(n: u32, c: f64) -> Result<()> {
    if n == 0 {
        return Err(parameter("n must be at least 1"));
    }
    if !(c > 0.0 && c < n as f64 && c.is_finite()) {
        return Err(parameter(format!("cone slope must lie in (0, n), got {c}")));
    }
    Ok(())
}

/// The open Berger family with its certificate attached, passing or not.
pub fn n_open_family(n: u32, c: f64, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    check_n_inputs(n, c)?;
    let (rho, phi, exact) = n_open_profiles(n, c, opts.kernel_radius)?;
    let (lo, hi, _) = N_OPEN_GRID;
    let grid = Grid::new(lo, hi, opts.grid_step)?;
    let cert = certify_open(n, &rho, &phi, &exact, &grid, opts.tolerance)?;
    let params = ConstructionParams { n, ..ConstructionParams::with_slope(c) };
    Ok(MetricFamilySpec {
        kind: FamilyKind::NOpen,
        params,
        scale: c / (n as f64 - c),
        group: if n == 1 { GroupLabel::Trivial } else { GroupLabel::Mu(n) },
        profiles: FamilyProfiles { rho, phi },
        regions: vec![Region { lo: 0.0, hi: f64::INFINITY, form: MetricForm::Berger }],
        middle: None,
        conformal_factor: None,
        certificate: Some(cert),
        oracle_certificate: None,
    })
}

fn certify_open(
    n: u32,
    rho: &ScalarProfile,
    phi: &ScalarProfile,
    exact: &ExactCore,
    grid: &Grid,
    tolerance: f64,
) -> Result<CurvatureCertificate> {
    let tables = BergerMetric::new(rho.clone(), phi.clone(), n)?;
    let conditions = SplitConditions { tables, exact: Some(exact), mirror: false, domain: (0.0, f64::INFINITY) };
    verify_nonneg(&conditions, grid, tolerance)
}

/// Certificate of the open family at slope `c` on an arbitrary grid in `r > 0`.
pub fn n_open_certificate_on(n: u32, c: f64, grid: &Grid, opts: &BuildOptions) -> Result<CurvatureCertificate> {
    check_n_inputs(n, c)?;
    let (rho, phi, exact) = n_open_profiles(n, c, opts.kernel_radius)?;
    certify_open(n, &rho, &phi, &exact, grid, opts.tolerance)
}

/// Certificate of the open family at slope `c`, on the fixed grid.
pub fn n_open_certificate(n: u32, c: f64, opts: &BuildOptions) -> Result<CurvatureCertificate> {
    Ok(n_open_family(n, c, opts)?.certificate.expect("builder attaches a certificate"))
}

/// Mollified Berger profiles `(ρ, φ)` of quotient order `n` and cone slope
/// `c`, in construction coordinates (the far region reads `n + c(r − 1)`;
/// `scale` takes it to `c(r + 1)`).
pub fn build_n_profiles(n: u32, c: f64) -> Result<MetricFamilySpec> {
    let opts = BuildOptions::default();
    n_open_family(n, c, &opts)?.finish(&opts)
}

/// Closed Berger family: the normalized open family shrunk to the caps
/// `(0, d/2)` and `(π − d/2, π)`, joined by the single-warp middle.
pub fn build_n_closed_profiles(c: f64, d: f64) -> Result<MetricFamilySpec> {
    build_n_closed_with(&ConstructionParams { d, ..ConstructionParams::with_slope(c) }, &BuildOptions::default())
}

pub fn build_n_closed_with(params: &ConstructionParams, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    let (n, c, d) = (params.n, params.c, params.d);
    check_n_inputs(n, c)?;
    if !(d > 0.0 && d <= 0.5) {
        return Err(parameter(format!("d must lie in (0, 1/2], got {d}")));
    }
    let (rho, phi, exact) = n_open_profiles(n, c, opts.kernel_radius)?;
    let scale = c / (n as f64 - c);
    let rho = snap_far_line(&rho.rescaled(scale), c, 1.0)?;
    let phi = snap_far_line(&phi.rescaled(scale), c, 1.0)?;
    let core = CapCore { rho, phi, group: GroupLabel::Mu(n), scale, exact: Some(exact.scaled(scale)) };
    let mut spec = assemble_closed(FamilyKind::NClosed, *params, core, opts)?;
    spec.params = *params;
    spec.finish(opts)
}

#[allow(dead_code)]
pub(crate) fn n_open_nodes(spec: &MetricFamilySpec, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    certificate_nodes(&[&spec.profiles.rho, &spec.profiles.phi], lo, hi, step)
}
