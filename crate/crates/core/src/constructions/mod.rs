//! Builders for the metric families: the Eguchi–Hanson space and its
//! conformal modification, the glued cone `M`, the Berger-sphere family `N`,
//! their closed versions, and the limiting spherical suspension.

mod berger;
mod closed;
mod eh;

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use berger::{build_n_closed_profiles, build_n_closed_with, build_n_profiles, n_open_certificate, n_open_certificate_on, n_open_family, N_OPEN_GRID};
pub use closed::{limit_suspension, middle_formula, statement_middle_formula, MiddleReport};
pub use eh::{
    arclength_offset, build_m_closed_profile, build_m_closed_with, build_m_profile, build_m_profile_with,
    conformal_factor, conformal_modified, eguchi_hanson_chart, eh_conformal_family, eh_family, eh_radius,
    m_open_family, modified_core, ArclengthMap, Blend, ConformalFactor, FactorDesign, ModifiedCore,
};

use crate::curvature::{berger_conditions, berger_from_jets, BergerMetric, CurvatureCertificate, CurvatureConditions, WarpedMetric};
use crate::error::{parameter, Error, Result};
use crate::grid::Grid;
use crate::profiles::{check_regularity, Expr, ScalarProfile};

/// Largest cone slope `c` for which the `n = 4` Berger family passes its
/// certificate, from `threshold --family berger --n 4 --bracket 0.001:2`
/// (bisection bracket width 1e-6, grid (0.01, 50) step 1e-3).
pub const BERGER_C_MAX_N4: f64 = 0.148_643_7;

/// Default outer edge `b′` of the gluing window on the Eguchi–Hanson side.
pub const DEFAULT_B_PRIME: f64 = 0.2;

/// Default cap size parameter of the closed families.
pub const DEFAULT_D: f64 = 0.25;

/// Default Eguchi–Hanson scale.
pub const DEFAULT_A: f64 = 0.05;

/// The cone slope produced by a gluing angle `b`: `cos(π/2 − b)/2`.
pub fn slope_for_angle(b: f64) -> f64 {
    0.5 * (FRAC_PI_2 - b).cos()
}

/// Inverse of [`slope_for_angle`].
pub fn angle_for_slope(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 0.5) {
        return Err(parameter(format!("cone slope must lie in (0, 1/2), got {c}")));
    }
    Ok((2.0 * c).asin())
}

/// Default window edge `b′` for a gluing angle `b`.
pub fn window_edge_for(b: f64) -> f64 {
    if b < DEFAULT_B_PRIME {
        DEFAULT_B_PRIME
    } else {
        b + 0.1
    }
}

/// Upper bound on `c` for the glued family with window edge `b′`.
pub fn m_c_max(b_prime: f64) -> f64 {
    slope_for_angle(b_prime)
}

/// Half of the smaller of the two family thresholds at the default `b′`.
pub fn auto_c() -> f64 {
    0.5 * BERGER_C_MAX_N4.min(m_c_max(DEFAULT_B_PRIME))
}

/// Default `u` range of the tabulated Eguchi–Hanson families.
pub const EH_U_MAX: f64 = 4.0;

/// Builds the family of the given kind. With `opts.allow_failure` a failing
/// certificate is returned inside the spec instead of as an error.
pub fn build_family(kind: FamilyKind, params: &ConstructionParams, opts: &BuildOptions) -> Result<MetricFamilySpec> {
    match kind {
        FamilyKind::Eh => eh_family(params.a, EH_U_MAX, opts)?.finish(opts),
        FamilyKind::EhConformal => eh_conformal_family(params, EH_U_MAX, opts)?.finish(opts),
        FamilyKind::MOpen => build_m_profile_with(params, opts),
        FamilyKind::MClosed => build_m_closed_with(params, opts),
        FamilyKind::NOpen => n_open_family(params.n, params.c, opts)?.finish(opts),
        FamilyKind::NClosed => build_n_closed_with(params, opts),
        FamilyKind::SuspensionLimit => limit_suspension(params.c),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionParams {
    pub a: f64,
    pub b: f64,
    pub b_prime: f64,
    pub c: f64,
    pub d: f64,
    pub n: u32,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self::with_slope(auto_c())
    }
}

impl ConstructionParams {
    /// Defaults with cone slope `c` and the gluing angle it determines.
    pub fn with_slope(c: f64) -> Self {
        let b = (2.0 * c).clamp(-1.0, 1.0).asin();
        Self {
            a: DEFAULT_A,
            b,
            b_prime: window_edge_for(b),
            c,
            d: DEFAULT_D,
            n: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.b_prime, self.c, self.d].iter().all(|x| x.is_finite());
        if !finite {
            return Err(parameter("construction parameters must be finite"));
        }
        if !(self.a > 0.0) {
            return Err(parameter(format!("a must be positive, got {}", self.a)));
        }
        if !(0.0 < self.b && self.b < self.b_prime && self.b_prime < 1.0) {
            return Err(parameter(format!("need 0 < b < b′ < 1, got b = {}, b′ = {}", self.b, self.b_prime)));
        }
        if !(self.c > 0.0) {
            return Err(parameter(format!("c must be positive, got {}", self.c)));
        }
        if !(self.d > 0.0 && self.d <= 0.5) {
            return Err(parameter(format!("d must lie in (0, 1/2], got {}", self.d)));
        }
        if self.n == 0 {
            return Err(parameter("n must be at least 1"));
        }
        Ok(())
    }

    /// Checks `c = cos(π/2 − b)/2` to 1e-12.
    pub fn check_gluing_relation(&self) -> Result<()> {
        let expected = slope_for_angle(self.b);
        if (self.c - expected).abs() > 1e-12 {
            return Err(parameter(format!(
                "gluing needs c = cos(π/2 − b)/2 = {expected} for b = {}, got c = {}",
                self.b, self.c
            )));
        }
        Ok(())
    }
}

/// Numerical knobs shared by the builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Radius of the mollifier used on the Berger profiles.
    pub kernel_radius: f64,
    /// Width (in `u`) of the cutoff between the conformal metric and the model metric.
    pub blend_width: f64,
    pub factor: FactorDesign,
    /// `u`-spacing of the tabulated glued core.
    pub core_step: f64,
    /// Certificate grid spacing.
    pub grid_step: f64,
    pub tolerance: f64,
    /// Return a failing spec instead of an error.
    pub allow_failure: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            kernel_radius: 0.25,
            blend_width: 0.02,
            factor: FactorDesign::default(),
            core_step: 2e-4,
            grid_step: 1e-3,
            tolerance: crate::curvature::DEFAULT_TOLERANCE,
            allow_failure: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "EH")]
    Eh,
    #[serde(rename = "EH_conformal")]
    EhConformal,
    #[serde(rename = "M_open")]
    MOpen,
    #[serde(rename = "M_closed")]
    MClosed,
    #[serde(rename = "N_open")]
    NOpen,
    #[serde(rename = "N_closed")]
    NClosed,
    #[serde(rename = "suspension_limit")]
    SuspensionLimit,
}

impl FamilyKind {
    pub fn is_closed(self) -> bool {
        matches!(self, FamilyKind::MClosed | FamilyKind::NClosed | FamilyKind::SuspensionLimit)
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "eh" => FamilyKind::Eh,
            "eh-conformal" => FamilyKind::EhConformal,
            "m-open" => FamilyKind::MOpen,
            "m-closed" => FamilyKind::MClosed,
            "n-open" => FamilyKind::NOpen,
            "n-closed" => FamilyKind::NClosed,
            "suspension" | "suspension-limit" => FamilyKind::SuspensionLimit,
            other => return Err(parameter(format!("unknown family '{other}'"))),
        })
    }
}

/// Finite group acting on the fiber `S³ ⊂ C²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GroupLabel {
    Trivial,
    /// Diagonal multiplication by `k`-th roots of unity.
    Mu(u32),
    /// The involution `(z₁, z₂) ↦ (−z̄₂, z̄₁)`; it generates a group of order 4 on S³.
    Iota,
    /// The order-4 group generated by `ι`, i.e. `μ₂` extended by `ι`.
    Nu4,
}

impl GroupLabel {
    /// Number of elements acting on S³.
    pub fn order(self) -> u32 {
        match self {
            GroupLabel::Trivial => 1,
            GroupLabel::Mu(k) => k,
            GroupLabel::Iota | GroupLabel::Nu4 => 4,
        }
    }
}

impl From<GroupLabel> for String {
    fn from(g: GroupLabel) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for GroupLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupLabel::Trivial => write!(f, "trivial"),
            GroupLabel::Mu(k) => write!(f, "mu_{k}"),
            GroupLabel::Iota => write!(f, "iota"),
            GroupLabel::Nu4 => write!(f, "nu_4"),
        }
    }
}

impl std::str::FromStr for GroupLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(GroupLabel::Trivial),
            "iota" => Ok(GroupLabel::Iota),
            "nu_4" | "nu4" => Ok(GroupLabel::Nu4),
            _ => {
                let k = s
                    .strip_prefix("mu_")
                    .or_else(|| s.strip_prefix("mu"))
                    .and_then(|k| k.parse::<u32>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| parameter(format!("unknown group '{s}'")))?;
                Ok(if k == 1 { GroupLabel::Trivial } else { GroupLabel::Mu(k) })
            }
        }
    }
}

/// Which curvature test applies on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricForm {
    /// `dr² + ρ² η² + φ² g_{S²(1/2)}`
    Berger,
    /// `dr² + w² ds₃²`, stored with `ρ = φ = w`
    Warped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(with = "crate::profiles::bound_f64")]
    pub lo: f64,
    #[serde(with = "crate::profiles::bound_f64")]
    pub hi: f64,
    pub form: MetricForm,
}

/// Fiber profiles. Single-warp regions store the warp in both slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyProfiles {
    pub rho: ScalarProfile,
    pub phi: ScalarProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFamilySpec {
    pub kind: FamilyKind,
    pub params: ConstructionParams,
    /// Factor `λ` such that `rescaled(λ)` gives the normalized family,
    /// whose cone region reads `c(r + 1)`.
    pub scale: f64,
    pub group: GroupLabel,
    pub profiles: FamilyProfiles,
    /// Regions where the metric is considered; certificates follow their form.
    pub regions: Vec<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub middle: Option<MiddleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_factor: Option<ScalarProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CurvatureCertificate>,
    /// Finite-difference Ricci spot checks, when the metric has a chart form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_certificate: Option<CurvatureCertificate>,
}

impl MetricFamilySpec {
    /// The interval carrying the metric.
    pub fn domain(&self) -> (f64, f64) {
        (self.regions[0].lo, self.regions[self.regions.len() - 1].hi)
    }

    pub fn berger_metric(&self) -> Result<BergerMetric> {
        let (lo, hi) = self.domain();
        BergerMetric::new(self.profiles.rho.clone(), self.profiles.phi.clone(), self.group.order())?.with_domain(lo, hi)
    }

    /// The single-warp metric on a region of warped form.
    pub fn warped_metric(&self, region: &Region) -> Result<WarpedMetric> {
        if region.form != MetricForm::Warped {
            return Err(Error::Unsupported("region is not of single-warp form".into()));
        }
        WarpedMetric::new(self.profiles.rho.clone(), 3, self.group.order())?.with_domain(region.lo, region.hi)
    }

    /// `(ρ, φ)` at `r`.
    pub fn warps(&self, r: f64) -> Result<(f64, f64)> {
        Ok((self.profiles.rho.value(r)?, self.profiles.phi.value(r)?))
    }

    pub fn is_closed(&self) -> bool {
        self.kind.is_closed()
    }

    pub fn is_passing(&self) -> bool {
        self.certificate.as_ref().map_or(false, |c| c.passed)
            && self.oracle_certificate.as_ref().map_or(true, |c| c.passed)
    }

    /// The metric multiplied by `lambda²`: lengths and warps scale by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(parameter(format!("rescaling factor must be positive, got {lambda}")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        out.scale = self.scale / lambda;
        out.profiles.rho = self.profiles.rho.rescaled(lambda);
        out.profiles.phi = self.profiles.phi.rescaled(lambda);
        for r in &mut out.regions {
            r.lo *= lambda;
            r.hi *= lambda;
        }
        out.middle = self.middle.map(|m| m.rescaled(lambda));
        // the radial variable of a conformal factor is not rescaled with the metric
        // curvature bounds scale by λ⁻²; certificates are recorded, not recomputed
        if let Some(c) = &mut out.certificate {
            rescale_certificate(c, lambda);
        }
        if let Some(c) = &mut out.oracle_certificate {
            rescale_certificate(c, lambda);
        }
        Ok(out)
    }

    /// Rescaled so that the stored profiles are the normalized ones.
    pub fn normalized(&self) -> Result<Self> {
        self.rescaled(self.scale)
    }

    pub(crate) fn finish(self, opts: &BuildOptions) -> Result<Self> {
        if !opts.allow_failure && !self.is_passing() {
            let cert = self.certificate.as_ref();
            return Err(Error::CertificateFailed(format!(
                "{:?} (c = {}): minimum condition {:.3e} at r = {:?}",
                self.kind,
                self.params.c,
                cert.map_or(f64::NAN, |c| c.min_value()),
                cert.and_then(|c| c.worst_witness())
            )));
        }
        Ok(self)
    }
}

/// Shape contracts of a closed family's warp on its single-warp middle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileContracts {
    pub window: (f64, f64),
    /// Largest second difference of the warp on the window grid.
    pub max_second_difference: f64,
    pub lipschitz_constant: f64,
    /// max |ρ(r) − ρ(π − r)| and the same for φ, over the whole domain.
    pub mirror_residual: f64,
}

impl ProfileContracts {
    pub fn passes(&self) -> bool {
        self.max_second_difference <= 1e-10 && self.lipschitz_constant <= 1.0 + 1e-9 && self.mirror_residual <= 1e-12
    }
}

impl MetricFamilySpec {
    /// Concavity, Lipschitz and mirror checks of a closed family, on a grid of
    /// spacing `step` over the middle region.
    pub fn contracts(&self, step: f64) -> Result<ProfileContracts> {
        if !self.is_closed() {
            return Err(Error::Unsupported(format!("{:?} is not a closed family", self.kind)));
        }
        let middle = self
            .regions
            .iter()
            .find(|r| r.form == MetricForm::Warped)
            .ok_or_else(|| Error::Unsupported("closed family without a single-warp region".into()))?;
        let (lo, hi) = self.domain();
        let g_lo = if middle.lo <= lo { middle.lo + step } else { middle.lo };
        let g_hi = if middle.hi >= hi { middle.hi - step } else { middle.hi };
        let grid = Grid::new(g_lo, g_hi, step)?;
        let report = check_regularity(&self.profiles.rho, &grid)?;
        let mut mirror: f64 = 0.0;
        let n = 4000;
        for i in 1..n {
            let r = lo + (hi - lo) * i as f64 / n as f64;
            let back = hi + lo - r;
            mirror = mirror
                .max((self.profiles.rho.value(r)? - self.profiles.rho.value(back)?).abs())
                .max((self.profiles.phi.value(r)? - self.profiles.phi.value(back)?).abs());
        }
        Ok(ProfileContracts {
            window: (middle.lo, middle.hi),
            max_second_difference: report.max_second_difference,
            lipschitz_constant: report.lipschitz_constant,
            mirror_residual: mirror,
        })
    }
}

fn rescale_certificate(c: &mut CurvatureCertificate, lambda: f64) {
    c.grid.lo *= lambda;
    c.grid.hi *= lambda;
    c.grid.step *= lambda;
    for w in &mut c.witnesses {
        *w *= lambda;
    }
    if let Some(d) = &mut c.degenerate_at {
        *d *= lambda;
    }
}

/// Nodes for certifying `profiles` on `(lo, hi)`: a uniform grid at `step`,
/// every table node and midpoint, and at least 50 nodes across each
/// polynomial piece. Sorted, strictly inside `(lo, hi)`.
pub(crate) fn certificate_nodes(profiles: &[&ScalarProfile], lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut nodes = Vec::new();
    let n = ((hi - lo) / step).ceil() as usize;
    for i in 1..n {
        nodes.push(lo + (hi - lo) * i as f64 / n as f64);
    }
    for p in profiles {
        for pc in p.pieces() {
            if pc.hi <= lo || pc.lo >= hi {
                continue;
            }
            match &pc.expr {
                Expr::Table(t) => {
                    let x = &t.nodes;
                    for i in 0..x.len() {
                        nodes.push(x[i]);
                        if i + 1 < x.len() {
                            nodes.push(0.5 * (x[i] + x[i + 1]));
                        }
                    }
                }
                Expr::Poly { .. } => {
                    let (a, b) = (pc.lo.max(lo), pc.hi.min(hi));
                    for i in 0..=50 {
                        nodes.push(a + (b - a) * i as f64 / 50.0);
                    }
                }
                _ => {}
            }
        }
    }
    nodes.retain(|&x| x > lo && x < hi && x > lo + 1e-12 * lo.abs().max(1.0) && x < hi - 1e-12 * hi.abs().max(1.0));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);
    nodes
}

/// Exact arclength jets `([ρ, ρ', ρ''], [φ, φ', φ''])` of an open core,
/// independent of how its profiles are tabulated.
pub(crate) trait JetSource: Send + Sync {
    fn label(&self) -> &'static str;
    fn jets(&self, s: f64) -> Result<([f64; 3], [f64; 3])>;
}

/// Berger conditions of an open core on `(0, seam]` from exact jets, placed
/// at `r = scale·s`. Values are reported in the core's own units: `q1`
/// scales by `1/scale²` and `q2`, `q3` are scale invariant, so signs agree
/// with the placed metric while roundoff is not amplified by the shrinking.
#[derive(Clone)]
pub(crate) struct ExactCore {
    source: Arc<dyn JetSource>,
    seam: f64,
    scale: f64,
}

impl std::fmt::Debug for ExactCore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactCore").field("seam", &self.seam).field("scale", &self.scale).finish()
    }
}

impl ExactCore {
    pub(crate) fn new(source: Arc<dyn JetSource>, seam: f64) -> Self {
        Self { source, seam, scale: 1.0 }
    }

    pub(crate) fn scaled(&self, k: f64) -> Self {
        Self { scale: self.scale * k, ..self.clone() }
    }

    pub(crate) fn end(&self) -> f64 {
        self.scale * self.seam
    }

    pub(crate) fn conditions_at(&self, r: f64) -> Result<(f64, f64, f64)> {
        let s = r / self.scale;
        if !(s > 0.0 && s <= self.seam) {
            return Err(Error::Domain(format!("r = {r} outside the exact core (0, {}]", self.end())));
        }
        let (rho, phi) = self.source.jets(s)?;
        berger_from_jets(rho, phi, r)
    }
}

impl CurvatureConditions for ExactCore {
    fn label(&self) -> String {
        self.source.label().into()
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["q1", "q2", "q3"]
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.end())
    }

    fn conditions(&self, r: f64) -> Result<Vec<f64>> {
        let (a, b, c) = self.conditions_at(r)?;
        Ok(vec![a, b, c])
    }
}

/// Berger conditions of tabulated profiles, taken from exact jets wherever
/// an exact core covers the point. With `mirror` the region is the mirror
/// image of the left cap of a symmetric closed profile and is evaluated
/// there; the conditions are invariant under `r ↦ π − r`.
pub(crate) struct SplitConditions<'a> {
    pub tables: BergerMetric,
    pub exact: Option<&'a ExactCore>,
    pub mirror: bool,
    pub domain: (f64, f64),
}

impl CurvatureConditions for SplitConditions<'_> {
    fn label(&self) -> String {
        match self.exact {
            Some(e) => format!("berger (n={}, {} near the core)", self.tables.n, e.label()),
            None => format!("berger (n={})", self.tables.n),
        }
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["q1", "q2", "q3"]
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn conditions(&self, r: f64) -> Result<Vec<f64>> {
        let x = if self.mirror { PI - r } else { r };
        let (a, b, c) = match self.exact {
            Some(e) if x <= e.end() => e.conditions_at(x)?,
            _ => berger_conditions(&self.tables, x)?,
        };
        Ok(vec![a, b, c])
    }
}

/// Replaces the last (affine) piece by exactly `c·(r + shift)` when it agrees to 1e-12.
pub(crate) fn snap_far_line(p: &ScalarProfile, c: f64, shift: f64) -> Result<ScalarProfile> {
    let last = &p.pieces()[p.pieces().len() - 1];
    match last.expr {
        Expr::Affine { offset, slope } if (slope - c).abs() <= 1e-12 && (offset - c * shift).abs() <= 1e-12 => {
            p.with_last_expr(Expr::Affine { offset: c * shift, slope: c })
        }
        _ => Err(Error::Numeric(format!("far region of the profile is not the expected line {c}·(r + {shift})"))),
    }
}
