//! Closed-form Ricci quantities for warped metrics `dr² + φ(r)² ds_k²` and
//! Berger-type metrics `dr² + ρ(r)² η² + φ(r)² π*ds₂²`, plus grid
//! certification and threshold search over a family parameter.

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Error, Result};
use crate::exec;
use crate::grid::Grid;
use crate::profiles::ScalarProfile;

/// Certificates only assert the sign at grid nodes.
pub const GRID_SCOPE_NOTE: &str = "non-negativity checked at grid nodes only";
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_STEP: f64 = 1e-3;

/// Anything whose Ricci non-negativity is equivalent to a fixed list of
/// scalar conditions being non-negative at every `r`.
pub trait CurvatureConditions: Sync {
    fn label(&self) -> String;
    fn condition_names(&self) -> Vec<&'static str>;
    fn domain(&self) -> (f64, f64);
    fn conditions(&self, r: f64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedMetric {
    pub warp: ScalarProfile,
    pub fiber_dim: u32,
    pub quotient_order: u32,
    pub domain: (f64, f64),
}

impl WarpedMetric {
    pub fn new(warp: ScalarProfile, fiber_dim: u32, quotient_order: u32) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(parameter("fiber dimension must be at least 1"));
        }
        if quotient_order == 0 || (quotient_order > 1 && fiber_dim != 3) {
            return Err(parameter(format!(
                "quotient order {quotient_order} needs an S³ fiber (fiber dimension {fiber_dim})"
            )));
        }
        let domain = warp.domain();
        Ok(Self { warp, fiber_dim, quotient_order, domain })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        let (a, b) = self.warp.domain();
        if lo < a || hi > b || lo >= hi {
            return Err(Error::Domain(format!("({lo}, {hi}) is not inside the warp domain ({a}, {b})")));
        }
        self.domain = (lo, hi);
        Ok(self)
    }
}

/// `(Ric(∂r), Ric(X))` for a unit vector `X` tangent to the fiber sphere:
/// `-k φ''/φ` and `-φ''/φ + (k-1)(1 - φ'²)/φ²`.
pub fn ricci_warped(m: &WarpedMetric, r: f64) -> Result<(f64, f64)> {
    check_inside(m.domain, r)?;
    let [phi, d1, d2] = m.warp.jet(r)?;
    if !(phi > 0.0) {
        return Err(Error::DegenerateMetric { r, detail: format!("warp = {phi}") });
    }
    let k = m.fiber_dim as f64;
    let radial = -k * d2 / phi;
    let spherical = -d2 / phi + (k - 1.0) * (1.0 - d1 * d1) / (phi * phi);
    Ok((radial, spherical))
}

impl CurvatureConditions for WarpedMetric {
    fn label(&self) -> String {
        format!("warped(k={}, m={})", self.fiber_dim, self.quotient_order)
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["ric_radial", "ric_spherical"]
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn conditions(&self, r: f64) -> Result<Vec<f64>> {
        let (a, b) = ricci_warped(self, r)?;
        Ok(vec![a, b])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergerMetric {
    pub rho: ScalarProfile,
    pub phi: ScalarProfile,
    pub n: u32,
    pub domain: (f64, f64),
}

impl BergerMetric {
    pub fn new(rho: ScalarProfile, phi: ScalarProfile, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(parameter("quotient order n must be at least 1"));
        }
        let (a, b) = rho.domain();
        let (c, d) = phi.domain();
        let domain = (a.max(c), b.min(d));
        if domain.0 >= domain.1 {
            return Err(Error::Domain("ρ and φ have disjoint domains".into()));
        }
        Ok(Self { rho, phi, n, domain })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        let (a, b) = self.domain;
        if lo < a || hi > b || lo >= hi {
            return Err(Error::Domain(format!("({lo}, {hi}) is not inside ({a}, {b})")));
        }
        self.domain = (lo, hi);
        Ok(self)
    }
}

/// The three quantities whose joint non-negativity is equivalent to Ric ≥ 0:
/// `-ρ''/ρ - 2φ''/φ`, `2ρ⁴/φ⁴ - 2(ρ/φ)ρ'φ' - ρρ''` and
/// `4 - 2ρ²/φ² - (φ/ρ)ρ'φ' - φφ'' - φ'²`.
///
/// The Ricci eigenvalues are `q1`, `q2/ρ²` (fiber) and `q3/φ²` (base).
pub fn berger_conditions(m: &BergerMetric, r: f64) -> Result<(f64, f64, f64)> {
    check_inside(m.domain, r)?;
    berger_from_jets(m.rho.jet(r)?, m.phi.jet(r)?, r)
}

/// [`berger_conditions`] from `[ρ, ρ', ρ'']` and `[φ, φ', φ'']` at `r`.
pub fn berger_from_jets([rho, r1, r2]: [f64; 3], [phi, p1, p2]: [f64; 3], r: f64) -> Result<(f64, f64, f64)> {
    if !(rho > 0.0 && phi > 0.0) {
        return Err(Error::DegenerateMetric { r, detail: format!("ρ = {rho}, φ = {phi}") });
    }
    let s = rho / phi;
    let q1 = -r2 / rho - 2.0 * p2 / phi;
    let q2 = 2.0 * s.powi(4) - 2.0 * s * r1 * p1 - rho * r2;
    let q3 = 4.0 - 2.0 * s * s - r1 * p1 / s - phi * p2 - p1 * p1;
    Ok((q1, q2, q3))
}

impl CurvatureConditions for BergerMetric {
    fn label(&self) -> String {
        format!("berger(n={})", self.n)
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["q1", "q2", "q3"]
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn conditions(&self, r: f64) -> Result<Vec<f64>> {
        let (a, b, c) = berger_conditions(self, r)?;
        Ok(vec![a, b, c])
    }
}

fn check_inside((lo, hi): (f64, f64), r: f64) -> Result<()> {
    if r > lo && r < hi {
        Ok(())
    } else {
        Err(Error::Domain(format!("r = {r} outside ({lo}, {hi})")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCertificate {
    pub family: String,
    pub grid: Grid,
    pub conditions: Vec<String>,
    pub min_values: Vec<f64>,
    pub witnesses: Vec<f64>,
    pub passed: bool,
    pub tolerance: f64,
    pub nodes: usize,
    /// First node where the metric degenerated, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate_at: Option<f64>,
    pub scope: String,
}

impl CurvatureCertificate {
    pub fn min_value(&self) -> f64 {
        self.min_values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Location of the overall minimum (smallest `r` on ties).
    pub fn worst_witness(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&v, &r) in self.min_values.iter().zip(&self.witnesses) {
            if best.map_or(true, |(bv, br)| v < bv || (v == bv && r < br)) {
                best = Some((v, r));
            }
        }
        self.degenerate_at.or(best.map(|b| b.1))
    }

    /// Combines certificates of adjacent regions into one.
    pub fn merge(label: impl Into<String>, parts: &[CurvatureCertificate]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| parameter("nothing to merge"))?;
        let width = first.min_values.len();
        let mut out = CurvatureCertificate {
            family: label.into(),
            grid: Grid {
                lo: parts.iter().map(|p| p.grid.lo).fold(f64::INFINITY, f64::min),
                hi: parts.iter().map(|p| p.grid.hi).fold(f64::NEG_INFINITY, f64::max),
                step: parts.iter().map(|p| p.grid.step).fold(f64::INFINITY, f64::min),
            },
            conditions: vec!["min_condition".into()],
            min_values: vec![f64::INFINITY],
            witnesses: vec![f64::NAN],
            passed: true,
            tolerance: first.tolerance,
            nodes: 0,
            degenerate_at: None,
            scope: GRID_SCOPE_NOTE.into(),
        };
        if parts.iter().all(|p| p.min_values.len() == width) {
            out.conditions = first.conditions.clone();
            out.min_values = vec![f64::INFINITY; width];
            out.witnesses = vec![f64::NAN; width];
            if parts.iter().any(|p| p.conditions != first.conditions) {
                out.conditions = (0..width).map(|i| format!("condition_{i}")).collect();
            }
        }
        for p in parts {
            out.passed &= p.passed;
            out.nodes += p.nodes;
            out.tolerance = out.tolerance.max(p.tolerance);
            if out.degenerate_at.is_none() {
                out.degenerate_at = p.degenerate_at;
            }
            if out.min_values.len() == p.min_values.len() {
                for i in 0..width {
                    if p.min_values[i] < out.min_values[i] {
                        out.min_values[i] = p.min_values[i];
                        out.witnesses[i] = p.witnesses[i];
                    }
                }
            } else if p.min_value() < out.min_values[0] {
                out.min_values[0] = p.min_value();
                out.witnesses[0] = p.worst_witness().unwrap_or(f64::NAN);
            }
        }
        Ok(out)
    }
}

/// Evaluates every condition on `grid` and reports per-condition minima.
pub fn verify_nonneg<F: CurvatureConditions + ?Sized>(family: &F, grid: &Grid, tolerance: f64) -> Result<CurvatureCertificate> {
    let (lo, hi) = family.domain();
    if !(grid.lo > lo && grid.hi < hi) {
        return Err(Error::Domain(format!(
            "grid [{}, {}] is not inside the open domain ({lo}, {hi})",
            grid.lo, grid.hi
        )));
    }
    let mut cert = verify_nodes(family, &grid.nodes(), tolerance)?;
    cert.grid = *grid;
    Ok(cert)
}

/// As [`verify_nonneg`] on an explicit, increasing node list.
pub fn verify_nodes<F: CurvatureConditions + ?Sized>(family: &F, nodes: &[f64], tolerance: f64) -> Result<CurvatureCertificate> {
    if !(tolerance > 0.0) {
        return Err(parameter(format!("tolerance must be positive, got {tolerance}")));
    }
    if nodes.is_empty() {
        return Err(parameter("no nodes to verify"));
    }
    let names = family.condition_names();
    let values = exec::map_slice(nodes, |&r| family.conditions(r));
    let mut min_values = vec![f64::INFINITY; names.len()];
    let mut witnesses = vec![f64::NAN; names.len()];
    let mut degenerate_at = None;
    for (&r, v) in nodes.iter().zip(values) {
        match v {
            Ok(v) => {
                for (i, q) in v.into_iter().enumerate() {
                    // strict comparison keeps the smallest r on ties; NaN counts as failure
                    if q < min_values[i] || (q.is_nan() && !min_values[i].is_nan()) {
                        min_values[i] = q;
                        witnesses[i] = r;
                    }
                }
            }
            Err(Error::DegenerateMetric { .. }) => {
                degenerate_at.get_or_insert(r);
            }
            Err(e) => return Err(e),
        }
    }
    let passed = degenerate_at.is_none() && min_values.iter().all(|&m| m >= -tolerance);
    let step = if nodes.len() > 1 {
        nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    Ok(CurvatureCertificate {
        family: family.label(),
        grid: Grid { lo: nodes[0], hi: nodes[nodes.len() - 1], step },
        conditions: names.iter().map(|s| s.to_string()).collect(),
        min_values,
        witnesses,
        passed,
        tolerance,
        nodes: nodes.len(),
        degenerate_at,
        scope: GRID_SCOPE_NOTE.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub c_max: f64,
    /// Final bisection bracket: passes at `.0`, fails at `.1`.
    pub bracket: (f64, f64),
    pub initial_range: (f64, f64),
    pub prescan: Vec<(f64, bool)>,
    pub evaluations: usize,
    pub certificate: CurvatureCertificate,
    pub scope: String,
}

pub const PRESCAN_POINTS: usize = 16;

/// Largest parameter in `c_range` for which `certify` passes, to bracket
/// width `tol`.
///
/// A uniform pre-scan locates the first failing sample; bisection then runs
/// between it and the passing sample before it. A build error counts as a
/// failure. The returned value is itself certified.
pub fn threshold_search<F>(certify: F, c_range: (f64, f64), tol: f64) -> Result<ThresholdReport>
where
    F: Fn(f64) -> Result<CurvatureCertificate> + Sync,
{
    let (low, high) = c_range;
    if !(low < high) || !(tol > 0.0) {
        return Err(parameter(format!("invalid search range ({low}, {high}) or tolerance {tol}")));
    }
    let passes = |c: f64| -> (bool, Option<CurvatureCertificate>) {
        match certify(c) {
            Ok(cert) => (cert.passed, Some(cert)),
            Err(_) => (false, None),
        }
    };
    let scan_c: Vec<f64> =
        (0..=PRESCAN_POINTS).map(|i| low + (high - low) * i as f64 / PRESCAN_POINTS as f64).collect();
    let scan: Vec<(bool, Option<CurvatureCertificate>)> = exec::map_slice(&scan_c, |&c| passes(c));
    let mut evaluations = scan.len();
    let prescan: Vec<(f64, bool)> = scan_c.iter().zip(&scan).map(|(&c, (ok, _))| (c, *ok)).collect();
    if !scan[0].0 {
        return Err(Error::Bracket { low, high, detail: "family fails at the lower end".into() });
    }
    let Some(first_fail) = scan.iter().position(|(ok, _)| !ok) else {
        return Err(Error::Bracket { low, high, detail: "family passes at the upper end".into() });
    };
    let (mut a, mut b) = (scan_c[first_fail - 1], scan_c[first_fail]);
    let mut best = scan[first_fail - 1].1.clone().expect("passing scan point has a certificate");
    while b - a > tol {
        let mid = 0.5 * (a + b);
        evaluations += 1;
        match passes(mid) {
            (true, Some(cert)) => {
                a = mid;
                best = cert;
            }
            _ => b = mid,
        }
    }
    Ok(ThresholdReport {
        c_max: a,
        bracket: (a, b),
        initial_range: c_range,
        prescan,
        evaluations,
        certificate: best,
        scope: GRID_SCOPE_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sine_warp() -> WarpedMetric {
        WarpedMetric::new(ScalarProfile::sine(0.0, PI, 1.0, 1.0, 0.0, 0.0).unwrap(), 3, 1).unwrap()
    }

    #[test]
    fn round_sphere_and_cone() {
        let (a, b) = ricci_warped(&sine_warp(), PI / 4.0).unwrap();
        assert_abs_diff_eq!(a, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 3.0, epsilon = 1e-12);
        let cone = WarpedMetric::new(ScalarProfile::affine(0.0, 10.0, 0.0, 1.0).unwrap(), 3, 4).unwrap();
        assert_eq!(ricci_warped(&cone, 1.0).unwrap(), (0.0, 0.0));
        let half = WarpedMetric::new(ScalarProfile::affine(0.0, 10.0, 0.5, 0.5).unwrap(), 3, 1).unwrap();
        let (a, b) = ricci_warped(&half, 1.0).unwrap();
        assert_eq!(a, 0.0);
        assert_abs_diff_eq!(b, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn quotient_order_rules() {
        let w = ScalarProfile::affine(0.0, 10.0, 0.0, 1.0).unwrap();
        assert!(WarpedMetric::new(w.clone(), 2, 4).is_err());
        assert!(WarpedMetric::new(w.clone(), 3, 0).is_err());
        let a = WarpedMetric::new(w.clone(), 3, 1).unwrap();
        let b = WarpedMetric::new(w, 3, 7).unwrap();
        assert_eq!(ricci_warped(&a, 2.3).unwrap(), ricci_warped(&b, 2.3).unwrap());
    }

    #[test]
    fn berger_examples() {
        let lin = ScalarProfile::affine(0.0, 5.0, 0.0, 1.0).unwrap();
        let m = BergerMetric::new(lin.clone(), lin, 1).unwrap();
        assert_eq!(berger_conditions(&m, 0.7).unwrap(), (0.0, 0.0, 0.0));

        let m = BergerMetric::new(
            ScalarProfile::affine(0.0, 1.0, 0.0, 4.0).unwrap(),
            ScalarProfile::constant(0.0, 1.0, 4.0).unwrap(),
            4,
        )
        .unwrap();
        let (q1, q2, q3) = berger_conditions(&m, 0.5).unwrap();
        assert_eq!(q1, 0.0);
        assert_abs_diff_eq!(q2, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(q3, 3.5, epsilon = 1e-15);

        let p = ScalarProfile::affine(1.0, 5.0, 3.9, 0.1).unwrap();
        let m = BergerMetric::new(p.clone(), p, 4).unwrap();
        let (q1, q2, q3) = berger_conditions(&m, 2.0).unwrap();
        assert_eq!(q1, 0.0);
        assert_abs_diff_eq!(q2, 1.98, epsilon = 1e-12);
        assert_abs_diff_eq!(q3, 1.98, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_warp() {
        let m = WarpedMetric::new(ScalarProfile::affine(-1.0, 1.0, 0.0, 1.0).unwrap(), 3, 1).unwrap();
        assert!(matches!(ricci_warped(&m, -0.5), Err(Error::DegenerateMetric { .. })));
        let cert = verify_nonneg(&m, &Grid::new(-0.5, 0.5, 0.1).unwrap(), 1e-8).unwrap();
        assert!(!cert.passed);
        assert_eq!(cert.degenerate_at, Some(-0.5));
    }

    #[test]
    fn sphere_certificate() {
        let grid = Grid::new(0.01, PI - 0.01, 1e-3).unwrap();
        let cert = verify_nonneg(&sine_warp(), &grid, 1e-9).unwrap();
        assert!(cert.passed);
        for m in &cert.min_values {
            assert_abs_diff_eq!(*m, 3.0, epsilon = 1e-9);
        }
        let again = verify_nonneg(&sine_warp(), &grid, 1e-9).unwrap();
        assert_eq!(
            serde_json::to_string(&cert).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        let v: serde_json::Value = serde_json::to_value(&cert).unwrap();
        for key in ["family", "grid", "min_values", "witnesses", "passed", "tolerance"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    struct Toy(f64);

    impl CurvatureConditions for Toy {
        fn label(&self) -> String {
            "toy".into()
        }
        fn condition_names(&self) -> Vec<&'static str> {
            vec!["one_minus_c2"]
        }
        fn domain(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn conditions(&self, _r: f64) -> Result<Vec<f64>> {
            Ok(vec![1.0 - self.0 * self.0])
        }
    }

    #[test]
    fn toy_threshold() {
        let grid = Grid::new(0.1, 0.9, 0.1).unwrap();
        let rep = threshold_search(|c| verify_nonneg(&Toy(c), &grid, 1e-12), (0.0, 2.0), 1e-6).unwrap();
        assert_abs_diff_eq!(rep.c_max, 1.0, epsilon = 1e-6);
        assert!(rep.certificate.passed);
        assert!(rep.bracket.1 - rep.bracket.0 <= 1e-6);
        assert!(threshold_search(|c| verify_nonneg(&Toy(c), &grid, 1e-12), (1.5, 2.0), 1e-6).is_err());
        assert!(threshold_search(|c| verify_nonneg(&Toy(c), &grid, 1e-12), (0.0, 0.5), 1e-6).is_err());
    }

    #[test]
    fn cone_slope_threshold() {
        let grid = Grid::new(0.01, 10.0, 1e-2).unwrap();
        let rep = threshold_search(
            |c| {
                let m = WarpedMetric::new(ScalarProfile::affine(-1.0, 20.0, c, c).unwrap(), 3, 1)?.with_domain(0.0, 20.0)?;
                verify_nonneg(&m, &grid, 1e-12)
            },
            (0.01, 2.0),
            1e-6,
        )
        .unwrap();
        assert_abs_diff_eq!(rep.c_max, 1.0, epsilon = 1e-6);
    }
}
