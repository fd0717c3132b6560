//! Finite metric spaces sampled from metric families: group actions on the
//! fiber sphere, quotient distances, graph geodesics, diameters and volumes.

mod sample;
mod volume;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constructions::GroupLabel;
use crate::error::{precondition, Result};

pub use sample::{
    auto_spacing, diameter, sample_round_s3, sample_round_s3_with, sample_space, sample_space_with, Diameter, SampleOptions, SampledPoint, SampledSpace, DEFAULT_NEIGHBORS,
};
pub(crate) use sample::{density, fiber_sequence, sample_on_layout, spacing_for, Layout};
pub use volume::{volume_closed, volume_mc, McVolume};

/// A point of the unit sphere `S³ ⊂ C² = R⁴`, as `(Re z₁, Im z₁, Re z₂, Im z₂)`.
pub type S3Point = [f64; 4];

/// Tolerance on `|x| = 1` for fiber points.
pub const UNIT_TOL: f64 = 1e-10;

/// Multiplication by `i` on `C²`: the Hopf fiber direction at `x` is `J x`.
pub fn hopf_j(x: &S3Point) -> S3Point {
    [-x[1], x[0], -x[3], x[2]]
}

/// `(z₁, z₂) ↦ (−z̄₂, z̄₁)`.
pub fn iota(x: &S3Point) -> S3Point {
    [-x[2], x[3], x[0], -x[1]]
}

/// The involution `(z₁, z₂) ↦ (Re z₁ + i Re z₂, Im z₁ − i Im z₂)`, which
/// conjugates `ι` to multiplication by `i` and so carries `ν₄`-orbits to
/// `μ₄`-orbits.
pub fn psi(x: &S3Point) -> S3Point {
    [x[0], x[2], x[1], -x[3]]
}

pub fn dot(x: &S3Point, y: &S3Point) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Great-circle distance on the unit sphere.
pub fn sphere_angle(x: &S3Point, y: &S3Point) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for k in 0..4 {
        minus += (x[k] - y[k]) * (x[k] - y[k]);
        plus += (x[k] + y[k]) * (x[k] + y[k]);
    }
    2.0 * minus.sqrt().atan2(plus.sqrt())
}

fn check_unit(x: &S3Point) -> Result<()> {
    let n = dot(x, x).sqrt();
    if !((n - 1.0).abs() <= UNIT_TOL) {
        return Err(precondition(format!("point {x:?} is not on the unit sphere (|x| = {n})")));
    }
    Ok(())
}

fn matrix_of(f: impl Fn(&S3Point) -> S3Point) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = f(&e);
        for i in 0..4 {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Exact 0 and ±1 for the quarter-turn roots of unity.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-15 {
        r
    } else {
        v
    }
}

/// A finite group of isometries of `S³`, listed element by element with the
/// identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    pub label: GroupLabel,
    pub maps: Vec<Matrix4<f64>>,
}

impl GroupAction {
    pub fn from_label(label: GroupLabel) -> Self {
        let maps = match label {
            GroupLabel::Trivial => vec![Matrix4::identity()],
            GroupLabel::Mu(k) => (0..k)
                .map(|j| {
                    let (s, c) = (2.0 * std::f64::consts::PI * j as f64 / k as f64).sin_cos();
                    let (s, c) = (snap(s), snap(c));
                    let mut m = Matrix4::zeros();
                    for b in [0, 2] {
                        m[(b, b)] = c;
                        m[(b, b + 1)] = -s;
                        m[(b + 1, b)] = s;
                        m[(b + 1, b + 1)] = c;
                    }
                    m
                })
                .collect(),
            GroupLabel::Iota | GroupLabel::Nu4 => {
                let i = matrix_of(iota);
                vec![Matrix4::identity(), i, -Matrix4::identity(), -i]
            }
        };
        Self { label, maps }
    }

    pub fn order(&self) -> usize {
        self.maps.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.maps.len() == 1
    }

    pub fn apply(&self, g: usize, x: &S3Point) -> S3Point {
        let v = self.maps[g] * Vector4::from(*x);
        [v[0], v[1], v[2], v[3]]
    }

    /// All images `g·x`, identity first.
    pub fn orbit(&self, x: &S3Point) -> Vec<S3Point> {
        (0..self.maps.len()).map(|g| self.apply(g, x)).collect()
    }

    /// Index of the listed element equal to `m` within `tol` entrywise.
    pub fn find(&self, m: &Matrix4<f64>, tol: f64) -> Option<usize> {
        self.maps.iter().position(|g| (g - m).amax() <= tol)
    }
}

/// Distance between the orbits `[x]` and `[y]`: `min_g d_{S³}(x, g·y)`.
pub fn quotient_distance(x: &S3Point, y: &S3Point, action: &GroupAction) -> Result<f64> {
    check_unit(x)?;
    check_unit(y)?;
    Ok(orbit_angle(x, y, action))
}

pub(crate) fn orbit_angle(x: &S3Point, y: &S3Point, action: &GroupAction) -> f64 {
    (0..action.order()).map(|g| sphere_angle(x, &action.apply(g, y))).fold(f64::INFINITY, f64::min)
}

/// Uniform point on `S³` from three numbers in `[0, 1)`: `|z₂|² = u₁`,
/// arguments `2πu₂`, `2πu₃`.
pub fn sphere_point(u: [f64; 3]) -> S3Point {
    use std::f64::consts::TAU;
    let (a, b) = ((1.0 - u[0]).max(0.0).sqrt(), u[0].max(0.0).sqrt());
    let (s2, c2) = (TAU * u[1]).sin_cos();
    let (s3, c3) = (TAU * u[2]).sin_cos();
    [a * s2, a * c2, b * s3, b * c3]
}

/// `n` independent uniform points on `S³`.
pub fn random_sphere_points(n: usize, seed: u64) -> Vec<S3Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sphere_point([rng.gen(), rng.gen(), rng.gen()])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub group: GroupLabel,
    /// Smallest `d(x, g·x)` over samples and non-identity elements.
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    /// Set when the action has no non-identity element; `min` is then 0.
    pub trivial: bool,
}

/// Displacement `d_{S³}(x, g·x)` over `n_samples` uniform points and every
/// non-identity `g`.
pub fn min_displacement(action: &GroupAction, n_samples: usize, seed: u64) -> Result<DisplacementReport> {
    if n_samples == 0 {
        return Err(precondition("need at least one sample"));
    }
    if action.is_trivial() {
        return Ok(DisplacementReport { group: action.label, min: 0.0, max: 0.0, samples: n_samples, trivial: true });
    }
    let points = random_sphere_points(n_samples, seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x in &points {
        for g in 1..action.order() {
            let d = sphere_angle(x, &action.apply(g, x));
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(DisplacementReport { group: action.label, min: lo, max: hi, samples: n_samples, trivial: false })
}
