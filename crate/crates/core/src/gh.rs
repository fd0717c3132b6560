//! Gromov–Hausdorff bounds between sampled spaces and the convergence
//! experiment comparing the two closed families with their common limit.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constructions::{
    build_m_closed_with, build_n_closed_with, limit_suspension, BuildOptions, ConstructionParams, GroupLabel,
    MetricFamilySpec,
};
use crate::error::{parameter, precondition, Error, Result};
use crate::exec;
use crate::spaces::{
    density, diameter, fiber_sequence, psi, sample_on_layout, spacing_for, volume_closed, GroupAction, Layout, SampleOptions,
    SampledSpace,
};

/// Pairs `(index in A, index in B)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
    /// Every point of A appears in some pair.
    pub covers_a: bool,
    pub covers_b: bool,
}

impl Correspondence {
    pub fn new(pairs: Vec<(usize, usize)>, len_a: usize, len_b: usize) -> Self {
        let (mut seen_a, mut seen_b) = (vec![false; len_a], vec![false; len_b]);
        for &(a, b) in &pairs {
            if let Some(s) = seen_a.get_mut(a) {
                *s = true;
            }
            if let Some(s) = seen_b.get_mut(b) {
                *s = true;
            }
        }
        Self { pairs, covers_a: seen_a.into_iter().all(|s| s), covers_b: seen_b.into_iter().all(|s| s) }
    }

    /// `i ↔ i` on two spaces of `n` points.
    pub fn identity(n: usize) -> Self {
        Self { pairs: (0..n).map(|i| (i, i)).collect(), covers_a: true, covers_b: true }
    }

    fn check(&self, a: &SampledSpace, b: &SampledSpace) -> Result<()> {
        if let Some(&(i, j)) = self.pairs.iter().find(|&&(i, j)| i >= a.len() || j >= b.len()) {
            return Err(precondition(format!("pair ({i}, {j}) is out of range for spaces of {} and {} points", a.len(), b.len())));
        }
        let fresh = Self::new(self.pairs.clone(), a.len(), b.len());
        if !(fresh.covers_a && fresh.covers_b) {
            return Err(precondition(format!(
                "correspondence is not surjective (covers A: {}, covers B: {})",
                fresh.covers_a, fresh.covers_b
            )));
        }
        Ok(())
    }
}

/// Pair of pairs realizing the distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionWitness {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub d_a: f64,
    pub d_b: f64,
    /// Radial coordinates of the two A points.
    pub r_a: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhBound {
    /// Half the distortion of the correspondence.
    pub value: f64,
    /// Sum of the two sampling resolutions, to be read as an additive error.
    pub resolution: f64,
    pub witness: Option<DistortionWitness>,
}

/// `½ max |d_A(a, a′) − d_B(b, b′)|` over pairs of pairs of `corr`.
pub fn gh_upper(a: &SampledSpace, b: &SampledSpace, corr: &Correspondence) -> Result<GhBound> {
    corr.check(a, b)?;
    let pairs = &corr.pairs;
    let rows: Vec<(f64, usize, usize)> = exec::map_range(pairs.len(), |p| {
        let (ia, ib) = pairs[p];
        let mut best = (0.0, p, p);
        for (q, &(ja, jb)) in pairs.iter().enumerate().skip(p + 1) {
            let gap = (a.distance(ia, ja) - b.distance(ib, jb)).abs();
            if gap > best.0 {
                best = (gap, p, q);
            }
        }
        best
    });
    let best = rows.into_iter().fold((0.0, 0, 0), |acc, r| if r.0 > acc.0 { r } else { acc });
    let witness = (best.0 > 0.0).then(|| {
        let ((ia, ib), (ja, jb)) = (pairs[best.1], pairs[best.2]);
        DistortionWitness {
            a: (ia, ja),
            b: (ib, jb),
            d_a: a.distance(ia, ja),
            d_b: b.distance(ib, jb),
            r_a: (a.points[ia].r, a.points[ja].r),
        }
    });
    Ok(GhBound { value: 0.5 * best.0, resolution: a.resolution + b.resolution, witness })
}

/// `½ |diam A − diam B|`.
pub fn gh_lower(a: &SampledSpace, b: &SampledSpace) -> f64 {
    0.5 * (diameter(a).value - diameter(b).value).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Rescaling applied before diameters and volumes are reported.
    pub lambda: f64,
    pub sample: SampleOptions,
    pub build: BuildOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { lambda: 1.0 / PI, sample: SampleOptions::default(), build: BuildOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub i: u32,
    pub d_i: f64,
    pub gh_mn: f64,
    pub gh_mx: f64,
    pub gh_nx: f64,
    /// Largest resolution of the three sampled spaces.
    pub resolution: f64,
    /// Radial level spacing of the shared layout.
    pub level_spacing: f64,
    pub points: usize,
    /// `gh_upper(M_i, M_i)` under the identity.
    pub self_check: f64,
    pub witness_mn: Option<DistortionWitness>,
    /// How many of the two witness points of `gh_mn` lie in the caps `(0, d) ∪ (π − d, π)`.
    pub witness_cap_points: usize,
    pub gh_lower_mn: f64,
    /// Post-rescale diameters of `M_i`, `N_i`, `X`.
    pub diameters: [f64; 3],
    /// Post-rescale volumes of `M_i`, `N_i`, `X`.
    pub volumes: [f64; 3],
    pub warnings: Vec<String>,
}

/// Outcome of the property checks on a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceChecks {
    /// `gh_mn` never rises by more than twice the resolution.
    pub mn_non_increasing: bool,
    /// `gh_mn` last over first.
    pub mn_final_ratio: f64,
    pub mn_final_below_third: bool,
    /// Least-squares `C` in `gh ≈ C/i` for the two limit columns.
    pub fit_mx: f64,
    pub fit_nx: f64,
    /// Both limit columns stay below `C/i + 2·resolution`.
    pub limit_bounded: bool,
    /// Every post-rescale diameter is at most `1 + resolution`.
    pub diameters_bounded: bool,
    /// Common lower volume bound: 90% of the rescaled limit volume.
    pub volume_bound: f64,
    pub volumes_bounded: bool,
    pub lower_below_upper: bool,
}

impl ConvergenceChecks {
    pub fn passed(&self) -> bool {
        self.mn_non_increasing
            && self.mn_final_below_third
            && self.limit_bounded
            && self.diameters_bounded
            && self.volumes_bounded
            && self.lower_below_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub c: f64,
    pub n_points: usize,
    pub seed: u64,
    pub lambda: f64,
    pub rows: Vec<ConvergenceRow>,
    pub checks: ConvergenceChecks,
}

impl ConvergenceTable {
    /// `i,d_i,gh_MN,gh_MX,gh_NX,resolution`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
        w.write_record(["i", "d_i", "gh_MN", "gh_MX", "gh_NX", "resolution"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.i.to_string(),
                r.d_i.to_string(),
                r.gh_mn.to_string(),
                r.gh_mx.to_string(),
                r.gh_nx.to_string(),
                r.resolution.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn abort_unless_passing(i: u32, spec: MetricFamilySpec) -> Result<MetricFamilySpec> {
    if spec.is_passing() {
        return Ok(spec);
    }
    let min = spec.certificate.as_ref().map_or(f64::NAN, |c| c.min_value());
    Err(Error::ExperimentAborted {
        i,
        detail: format!("{:?} certificate failed (minimum {min:.3e})", spec.kind),
        spec: Box::new(spec),
    })
}

/// The three spaces of one row, sampled on a shared layout: `M_i` on fiber
/// points `x`, `N_i` and `X` on `Ψ(x)`.
pub struct RowSpaces {
    pub m: SampledSpace,
    pub n: SampledSpace,
    pub x: SampledSpace,
    pub specs: [MetricFamilySpec; 3],
    pub level_spacing: f64,
}

pub fn row_spaces(c: f64, i: u32, n_points: usize, seed: u64, opts: &ExperimentOptions) -> Result<RowSpaces> {
    if i < 2 {
        return Err(parameter(format!("i must be at least 2, got {i}")));
    }
    let d = 1.0 / i as f64;
    let mut build = opts.build;
    build.allow_failure = true;
    let m = abort_unless_passing(i, build_m_closed_with(&ConstructionParams { d, ..ConstructionParams::with_slope(c) }, &build)?)?;
    let n = abort_unless_passing(i, build_n_closed_with(&ConstructionParams { d, n: 4, ..ConstructionParams::with_slope(c) }, &build)?)?;
    let x = limit_suspension(0.5 * c)?;
    let dens = |r: f64| Ok(density(&m, r)?.max(density(&n, r)?));
    let h = spacing_for(dens, 0.0, PI, 4, n_points)?;
    let layout = Layout::new(0.0, PI, h, n_points, dens)?;
    let fibers = fiber_sequence(layout.max_count(), &GroupAction::from_label(GroupLabel::Nu4), seed);
    let m_points = layout.points(&fibers);
    let n_points: Vec<_> = m_points.iter().map(|(k, p)| (*k, psi(p))).collect();
    let m_space = sample_on_layout(&m, &layout, &m_points, seed, &opts.sample)?;
    let n_space = sample_on_layout(&n, &layout, &n_points, seed, &opts.sample)?;
    let x_space = sample_on_layout(&x, &layout, &n_points, seed, &opts.sample)?;
    Ok(RowSpaces { m: m_space, n: n_space, x: x_space, specs: [m, n, x], level_spacing: h })
}

/// Builds `M_i`, `N_i` (with `d_i = 1/i`) and the limit suspension for each
/// `i`, samples them on shared coordinates and bounds the three GH distances.
pub fn convergence_experiment(c: f64, i_list: &[u32], n_points: usize, seed: u64) -> Result<ConvergenceTable> {
    convergence_experiment_with(c, i_list, n_points, seed, &ExperimentOptions::default())
}

pub fn convergence_experiment_with(
    c: f64,
    i_list: &[u32],
    n_points: usize,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<ConvergenceTable> {
    if i_list.is_empty() || i_list.windows(2).any(|w| w[0] >= w[1]) || i_list[0] < 2 {
        return Err(parameter(format!("i list must be strictly ascending with i ≥ 2, got {i_list:?}")));
    }
    if !(opts.lambda > 0.0 && opts.lambda.is_finite()) {
        return Err(parameter(format!("lambda must be positive, got {}", opts.lambda)));
    }
    let lambda = opts.lambda;
    let mut rows = Vec::with_capacity(i_list.len());
    for &i in i_list {
        let s = row_spaces(c, i, n_points, seed, opts)?;
        let id = Correspondence::identity(s.m.len());
        let mn = gh_upper(&s.m, &s.n, &id)?;
        let mx = gh_upper(&s.m, &s.x, &id)?;
        let nx = gh_upper(&s.n, &s.x, &id)?;
        let self_check = gh_upper(&s.m, &s.m, &id)?.value;
        let d = 1.0 / i as f64;
        let in_caps = |r: f64| r < d || r > PI - d;
        let witness_cap_points = mn.witness.map_or(0, |w| usize::from(in_caps(w.r_a.0)) + usize::from(in_caps(w.r_a.1)));
        let spaces = [&s.m, &s.n, &s.x];
        let diameters = spaces.map(|sp| diameter(sp).value * lambda);
        let mut volumes = [0.0; 3];
        for (v, spec) in volumes.iter_mut().zip(&s.specs) {
            *v = volume_closed(spec)? * lambda.powi(4);
        }
        let warnings = spaces.iter().filter_map(|sp| sp.warning.clone()).collect();
        rows.push(ConvergenceRow {
            i,
            d_i: d,
            gh_mn: mn.value,
            gh_mx: mx.value,
            gh_nx: nx.value,
            resolution: spaces.iter().map(|sp| sp.resolution).fold(0.0, f64::max),
            level_spacing: s.level_spacing,
            points: s.m.len(),
            self_check,
            witness_mn: mn.witness,
            witness_cap_points,
            gh_lower_mn: gh_lower(&s.m, &s.n),
            diameters,
            volumes,
            warnings,
        });
    }
    let checks = check_table(&rows, lambda);
    Ok(ConvergenceTable { c, n_points, seed, lambda, rows, checks })
}

/// Least-squares `C` for `y ≈ C/i`.
fn fit_inverse(rows: &[ConvergenceRow], y: impl Fn(&ConvergenceRow) -> f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        let x = 1.0 / r.i as f64;
        num += x * y(r);
        den += x * x;
    }
    num / den
}

pub fn check_table(rows: &[ConvergenceRow], lambda: f64) -> ConvergenceChecks {
    let mn_non_increasing = rows.windows(2).all(|w| w[1].gh_mn <= w[0].gh_mn + 2.0 * w[0].resolution.max(w[1].resolution));
    let (first, last) = (rows[0].gh_mn, rows[rows.len() - 1].gh_mn);
    let mn_final_ratio = if first > 0.0 { last / first } else { f64::NAN };
    let fit_mx = fit_inverse(rows, |r| r.gh_mx);
    let fit_nx = fit_inverse(rows, |r| r.gh_nx);
    let limit_bounded = rows.iter().all(|r| {
        let bound = |c: f64| c / r.i as f64 + 2.0 * r.resolution;
        r.gh_mx <= bound(fit_mx) && r.gh_nx <= bound(fit_nx)
    });
    let diameters_bounded = rows.iter().all(|r| r.diameters.iter().all(|&d| d <= 1.0 + r.resolution * lambda));
    let volume_bound = 0.9 * rows[0].volumes[2];
    let volumes_bounded = rows.iter().all(|r| r.volumes.iter().all(|&v| v >= volume_bound));
    let lower_below_upper = rows.iter().all(|r| r.gh_lower_mn <= r.gh_mn + 2.0 * r.resolution);
    ConvergenceChecks {
        mn_non_increasing,
        mn_final_ratio,
        mn_final_below_third: mn_final_ratio <= 1.0 / 3.0,
        fit_mx,
        fit_nx,
        limit_bounded,
        diameters_bounded,
        volume_bound,
        volumes_bounded,
        lower_below_upper,
    }
}
