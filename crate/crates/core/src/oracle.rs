//! Brute-force Ricci curvature of a metric given only as a matrix-valued
//! function of chart coordinates. Everything here is finite differences, on
//! purpose: it shares no code path with the closed-form formulas it checks.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, parameter, Error, Result};

pub const DEFAULT_STEP: f64 = 1e-4;
/// Eguchi–Hanson charts stop at `r = a (1 + margin)`.
pub const EH_DEFAULT_MARGIN: f64 = 0.05;

type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A coordinate chart with a metric evaluator.
#[derive(Clone)]
pub struct ChartMetric {
    name: String,
    region: Vec<(f64, f64)>,
    metric: Arc<MetricFn>,
}

impl fmt::Debug for ChartMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartMetric").field("name", &self.name).field("region", &self.region).finish()
    }
}

/// Coefficients of `A dr² + B (σx² + σy²) + C σz²` at a radius.
pub type EulerCoefficients = (f64, f64, f64);

impl ChartMetric {
    pub fn new<F>(name: impl Into<String>, region: Vec<(f64, f64)>, metric: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { name: name.into(), region, metric: Arc::new(metric) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.region.len()
    }

    pub fn region(&self) -> &[(f64, f64)] {
        &self.region
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.dim() {
            return Err(parameter(format!("point has {} coordinates, chart has {}", x.len(), self.dim())));
        }
        self.check_inside(x, 0.0)?;
        Ok(self.raw(x))
    }

    fn raw(&self, x: &[f64]) -> DMatrix<f64> {
        (self.metric)(x)
    }

    fn check_inside(&self, x: &[f64], margin_steps: f64) -> Result<()> {
        for (i, (&xi, &(lo, hi))) in x.iter().zip(&self.region).enumerate() {
            let m = margin_steps * xi.abs().max(1.0);
            if !(xi - m > lo && xi + m < hi) {
                return Err(domain(format!(
                    "coordinate {i} = {xi} is not inside ({lo}, {hi}) with margin {m:.2e} ({})",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// `dx² ` on `R^dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self::new("euclidean", vec![(f64::NEG_INFINITY, f64::INFINITY); dim], move |_| DMatrix::identity(dim, dim))
    }

    /// `dθ² + sin²θ dφ²`.
    pub fn sphere2() -> Self {
        Self::new("sphere2", vec![(0.0, std::f64::consts::PI), (0.0, 2.0 * std::f64::consts::PI)], |x| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, x[0].sin().powi(2)]))
        })
    }

    /// `A(r) dr² + B(r)(σx² + σy²) + C(r) σz²` in coordinates `(r, θ, φ, ψ)`, with
    /// `σx = ½(sinψ dθ − sinθ cosψ dφ)`, `σy = ½(−cosψ dθ − sinθ sinψ dφ)`,
    /// `σz = ½(dψ + cosθ dφ)`. With `A = 1`, `B = C = F²` this is the warped
    /// metric `dr² + F² ds₃²`.
    pub fn radial_euler<F>(name: impl Into<String>, r_range: (f64, f64), psi_period: f64, coeffs: F) -> Self
    where
        F: Fn(f64) -> EulerCoefficients + Send + Sync + 'static,
    {
        use std::f64::consts::PI;
        let region = vec![r_range, (0.0, PI), (0.0, 2.0 * PI), (0.0, psi_period)];
        Self::new(name, region, move |x| {
            let (a, b, c) = coeffs(x[0]);
            let (st, ct) = x[1].sin_cos();
            let (sp, cp) = x[3].sin_cos();
            let sx = [0.0, 0.5 * sp, -0.5 * st * cp, 0.0];
            let sy = [0.0, -0.5 * cp, -0.5 * st * sp, 0.0];
            let sz = [0.0, 0.0, 0.5 * ct, 0.5];
            DMatrix::from_fn(4, 4, |i, j| {
                let radial = if i == 0 && j == 0 { a } else { 0.0 };
                radial + b * (sx[i] * sx[j] + sy[i] * sy[j]) + c * sz[i] * sz[j]
            })
        })
    }

    /// Warped product `dr² + F(r)² ds₃²` on the Euler chart.
    pub fn warped_s3<F>(name: impl Into<String>, r_range: (f64, f64), warp: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::radial_euler(name, r_range, 4.0 * std::f64::consts::PI, move |r| {
            let f = warp(r);
            (1.0, f * f, f * f)
        })
    }

    /// Eguchi–Hanson `dr²/(1−(a/r)⁴) + r²(σx²+σy²) + r²(1−(a/r)⁴)σz²` on
    /// `r > a(1 + margin)`, `ψ ∈ (0, 2π)`.
    pub fn eguchi_hanson(a: f64, margin: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(parameter(format!("Eguchi–Hanson scale must be positive, got {a}")));
        }
        if !(margin >= 0.0) {
            return Err(parameter(format!("margin must be non-negative, got {margin}")));
        }
        Ok(Self::radial_euler(
            format!("eguchi_hanson(a={a})"),
            (a * (1.0 + margin), f64::INFINITY),
            2.0 * std::f64::consts::PI,
            move |r| {
                let f = 1.0 - (a / r).powi(4);
                (1.0 / f, r * r, r * r * f)
            },
        ))
    }

    /// `dr² + ρ(r)²(dα + cos²ξ dβ)² + φ(r)²(dξ² + sin²ξ cos²ξ dβ²)` in
    /// coordinates `(r, ξ, α, β)`: the circle fiber of the Hopf map scaled
    /// by `ρ` and the base `S²(1/2)` by `φ`.
    pub fn berger<F>(name: impl Into<String>, r_range: (f64, f64), warps: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        use std::f64::consts::{FRAC_PI_2, PI};
        let region = vec![r_range, (0.0, FRAC_PI_2), (0.0, 2.0 * PI), (0.0, 2.0 * PI)];
        Self::new(name, region, move |x| {
            let (rho, phi) = warps(x[0]);
            let (s, c) = x[1].sin_cos();
            let eta = [0.0, 0.0, 1.0, c * c];
            let mut g = DMatrix::from_fn(4, 4, |i, j| rho * rho * eta[i] * eta[j]);
            g[(0, 0)] += 1.0;
            g[(1, 1)] += phi * phi;
            g[(3, 3)] += phi * phi * s * s * c * c;
            g
        })
    }

    /// Checks positive-definiteness at `x` by attempting a Cholesky factorization.
    pub fn is_positive_definite(&self, x: &[f64]) -> Result<bool> {
        Ok(self.metric_at(x)?.cholesky().is_some())
    }
}

/// Christoffel symbols `Γ^k_{ij}` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn step_for(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

fn condition_number(g: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular { condition: condition_number(g) })
}

fn christoffel_unchecked(chart: &ChartMetric, x: &[f64], h: f64) -> Result<Christoffel> {
    let n = chart.dim();
    let g = chart.raw(x);
    let ginv = inverse(&g)?;
    // dg[l] = ∂_l g
    let mut dg = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for l in 0..n {
        let s = step_for(x[l], h);
        xp[l] = x[l] + s;
        let gp = chart.raw(&xp);
        xp[l] = x[l] - s;
        let gm = chart.raw(&xp);
        xp[l] = x[l];
        dg.push((gp - gm) / (2.0 * s));
    }
    let mut out = Christoffel { dim: n, data: vec![0.0; n * n * n] };
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                out.set(k, i, j, 0.5 * acc);
                out.set(k, j, i, 0.5 * acc);
            }
        }
    }
    Ok(out)
}

/// `Γ^k_{ij}` by centered differences of the metric with per-coordinate step
/// `h · max(1, |x_i|)`.
pub fn christoffel(chart: &ChartMetric, x: &[f64], h: f64) -> Result<Christoffel> {
    if !(h > 0.0) {
        return Err(parameter(format!("step must be positive, got {h}")));
    }
    chart.metric_at(x)?;
    chart.check_inside(x, 2.0 * h)?;
    christoffel_unchecked(chart, x, h)
}

/// `R_{ij} = ∂_k Γ^k_{ij} − ∂_j Γ^k_{ik} + Γ^k_{kl} Γ^l_{ij} − Γ^k_{jl} Γ^l_{ik}`, with
/// the derivatives of `Γ` again taken by centered differences.
pub fn ricci_tensor(chart: &ChartMetric, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(parameter(format!("step must be positive, got {h}")));
    }
    chart.metric_at(x)?;
    chart.check_inside(x, 4.0 * h)?;
    let n = chart.dim();
    let gamma = christoffel_unchecked(chart, x, h)?;
    let mut dgamma = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for m in 0..n {
        let s = step_for(x[m], h);
        xp[m] = x[m] + s;
        let gp = christoffel_unchecked(chart, &xp, h)?;
        xp[m] = x[m] - s;
        let gm = christoffel_unchecked(chart, &xp, h)?;
        xp[m] = x[m];
        let data = gp.data.iter().zip(&gm.data).map(|(a, b)| (a - b) / (2.0 * s)).collect();
        dgamma.push(Christoffel { dim: n, data });
    }
    let mut ric = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += dgamma[k].get(k, i, j) - dgamma[j].get(k, i, k);
                for l in 0..n {
                    acc += gamma.get(k, k, l) * gamma.get(l, i, j) - gamma.get(k, j, l) * gamma.get(l, i, k);
                }
            }
            ric[(i, j)] = acc;
        }
    }
    Ok(0.5 * (&ric + ric.transpose()))
}

/// Eigenvalues of the Ricci endomorphism `g⁻¹R`, ascending.
pub fn ricci_eigenvalues(chart: &ChartMetric, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let ric = ricci_tensor(chart, x, h)?;
    let g = chart.metric_at(x)?;
    let chol = g.clone().cholesky().ok_or_else(|| Error::Singular { condition: condition_number(&g) })?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Singular { condition: condition_number(&g) })?;
    let sym = &linv * ric * linv.transpose();
    let sym = 0.5 * (&sym + sym.transpose());
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig)
}

/// Smallest eigenvalue of `g⁻¹R` at the default step.
pub fn ricci_eigen_min(chart: &ChartMetric, x: &[f64]) -> Result<f64> {
    ricci_eigen_min_with_step(chart, x, DEFAULT_STEP)
}

pub fn ricci_eigen_min_with_step(chart: &ChartMetric, x: &[f64], h: f64) -> Result<f64> {
    Ok(ricci_eigenvalues(chart, x, h)?[0])
}
