use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::closed_value;
use crate::constructions::{MetricFamilySpec, MetricForm};
use crate::error::{precondition, Error, Result};
use crate::exec;
use crate::oracle::ChartMetric;
use crate::quad;

/// Volume of the unit round `S³`.
const S3_VOLUME: f64 = 2.0 * PI * PI;

/// `(2π²/|G|) ∫ ρφ² dr` over Berger regions plus `(2π²/|G|) ∫ w³ dr` over
/// single-warp regions, by adaptive quadrature split at profile breakpoints.
pub fn volume_closed(spec: &MetricFamilySpec) -> Result<f64> {
    let mut total = 0.0;
    for region in &spec.regions {
        if !(region.lo.is_finite() && region.hi.is_finite()) {
            return Err(Error::Unsupported(format!(
                "volume over the unbounded region ({}, {})",
                region.lo, region.hi
            )));
        }
        let mut cuts: Vec<f64> = spec
            .profiles
            .rho
            .breakpoints()
            .into_iter()
            .chain(spec.profiles.phi.breakpoints())
            .filter(|&b| b > region.lo && b < region.hi)
            .collect();
        cuts.push(region.lo);
        cuts.push(region.hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let mut err = None;
            let integrand = |r: f64| {
                let v = match region.form {
                    MetricForm::Berger => spec.warps(r).map(|(rho, phi)| rho * phi * phi),
                    MetricForm::Warped => spec.profiles.rho.value(r).map(|w| w * w * w),
                };
                v.unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    f64::NAN
                })
            };
            let v = quad::adaptive(integrand, w[0], w[1], 0.0, 1e-10)?;
            if let Some(e) = err {
                return Err(e);
            }
            total += v;
        }
    }
    Ok(S3_VOLUME / spec.group.order() as f64 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McVolume {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

const MC_CHUNKS: usize = 64;

/// Monte-Carlo integral of `√det g` of the Berger chart over the box
/// `(r, ξ, α, β) ∈ (lo, hi) × (0, π/2) × (0, 2π)²`, divided by `|G|`.
pub fn volume_mc(spec: &MetricFamilySpec, n_samples: usize, seed: u64) -> Result<McVolume> {
    if n_samples < 10_000 {
        return Err(precondition(format!("need at least 10^4 samples, got {n_samples}")));
    }
    let (lo, hi) = spec.domain();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Unsupported(format!("volume over the unbounded interval ({lo}, {hi})")));
    }
    let (rho, phi) = (spec.profiles.rho.clone(), spec.profiles.phi.clone());
    let chart = ChartMetric::berger(format!("{:?}", spec.kind), (lo, hi), move |r| {
        (closed_value(&rho, r).unwrap_or(f64::NAN), closed_value(&phi, r).unwrap_or(f64::NAN))
    });
    let box_volume = (hi - lo) * FRAC_PI_2 * TAU * TAU;
    let chunks: Vec<Result<(f64, f64)>> = exec::map_range(MC_CHUNKS, |c| {
        let count = n_samples / MC_CHUNKS + usize::from(c < n_samples % MC_CHUNKS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..count {
            let mut u = || -> f64 { rng.sample(Open01) };
            let x = [lo + (hi - lo) * u(), FRAC_PI_2 * u(), TAU * u(), TAU * u()];
            let det = chart.metric_at(&x)?.determinant();
            if !det.is_finite() {
                return Err(Error::Numeric(format!("metric determinant is not finite at {x:?}")));
            }
            let v = det.max(0.0).sqrt();
            sum += v;
            sum2 += v * v;
        }
        Ok((sum, sum2))
    });
    let (mut sum, mut sum2) = (0.0, 0.0);
    for c in chunks {
        let (s, s2) = c?;
        sum += s;
        sum2 += s2;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    let k = box_volume / spec.group.order() as f64;
    Ok(McVolume { estimate: k * mean, stderr: k * (var / n).sqrt(), samples: n_samples })
}
