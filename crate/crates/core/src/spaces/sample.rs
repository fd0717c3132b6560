use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use petgraph::algo::{connected_components, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, hopf_j, orbit_angle, sphere_point, GroupAction, S3Point};
use crate::constructions::{GroupLabel, MetricFamilySpec};
use crate::error::{parameter, precondition, Error, Result};
use crate::exec;
use crate::profiles::ScalarProfile;

/// Neighbors per point in the sampling graph.
pub const DEFAULT_NEIGHBORS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub neighbors: usize,
    /// Truncation radius for families on an unbounded interval.
    pub r_max: Option<f64>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { neighbors: DEFAULT_NEIGHBORS, r_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub r: f64,
    /// Representative of the fiber orbit.
    pub fiber: S3Point,
    /// Group whose orbits the fiber point stands for.
    pub orbit_label: GroupLabel,
}

/// Finite metric space: points, a symmetric distance matrix and the
/// discretization scale of the graph it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSpace {
    pub points: Vec<SampledPoint>,
    /// Row-major `n × n`.
    pub distances: Vec<f64>,
    /// Largest nearest-neighbor edge of the sampling graph.
    pub resolution: f64,
    pub source_spec: Option<Arc<MetricFamilySpec>>,
    pub seed: u64,
    /// Set when the resolution is coarser than the smallest region of the source.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: f64,
    /// Additive error bar (the resolution).
    pub error: f64,
}

impl SampledSpace {
    /// Checks that `distances` is a symmetric `n × n` matrix with zero diagonal.
    pub fn new(points: Vec<SampledPoint>, distances: Vec<f64>, resolution: f64, seed: u64) -> Result<Self> {
        let n = points.len();
        if distances.len() != n * n {
            return Err(precondition(format!("expected {} distances for {n} points, got {}", n * n, distances.len())));
        }
        for i in 0..n {
            if distances[i * n + i] != 0.0 {
                return Err(precondition(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if distances[i * n + j] != distances[j * n + i] || !(distances[i * n + j] >= 0.0) {
                    return Err(precondition(format!("distance matrix is not symmetric and non-negative at ({i}, {j})")));
                }
            }
        }
        Ok(Self { points, distances, resolution, source_spec: None, seed, warning: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.points.len() + j]
    }

    /// Distances, radii and the resolution multiplied by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(parameter(format!("rescaling factor must be positive, got {lambda}")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for p in &mut out.points {
            p.r *= lambda;
        }
        for d in &mut out.distances {
            *d *= lambda;
        }
        out.resolution *= lambda;
        out.source_spec = match &self.source_spec {
            Some(s) => Some(Arc::new(s.rescaled(lambda)?)),
            None => None,
        };
        Ok(out)
    }

    /// The same space with its points listed in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(precondition("not a permutation of the points"));
        }
        let mut out = self.clone();
        out.points = perm.iter().map(|&p| self.points[p]).collect();
        out.distances = (0..n * n).map(|k| self.distance(perm[k / n], perm[k % n])).collect();
        Ok(out)
    }

    /// Points CSV: `r,x1,x2,x3,x4,orbit_label`.
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "x1", "x2", "x3", "x4", "orbit_label"]).map_err(csv_error)?;
        for p in &self.points {
            let mut row: Vec<String> = vec![p.r.to_string()];
            row.extend(p.fiber.iter().map(|x| x.to_string()));
            row.push(p.orbit_label.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Distances CSV: a `# resolution=…,seed=…` line, then one row per point.
    pub fn write_distances_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# resolution={},seed={}", self.resolution, self.seed)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let n = self.len();
        for i in 0..n {
            w.write_record(self.distances[i * n..(i + 1) * n].iter().map(|d| d.to_string())).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back the two files written by [`write_points_csv`](Self::write_points_csv)
    /// and [`write_distances_csv`](Self::write_distances_csv).
    pub fn read_csv<P: std::io::Read, D: BufRead>(points: P, mut distances: D) -> Result<Self> {
        let mut pts = Vec::new();
        for rec in csv::Reader::from_reader(points).records() {
            let rec = rec.map_err(csv_error)?;
            if rec.len() != 6 {
                return Err(precondition(format!("points row has {} fields, expected 6", rec.len())));
            }
            let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| precondition(format!("field {k}: {e}")));
            pts.push(SampledPoint {
                r: num(0)?,
                fiber: [num(1)?, num(2)?, num(3)?, num(4)?],
                orbit_label: rec[5].trim().parse()?,
            });
        }
        let mut header = String::new();
        distances.read_line(&mut header)?;
        let (mut resolution, mut seed) = (None, None);
        for kv in header.trim().trim_start_matches('#').trim().split(',') {
            match kv.split_once('=') {
                Some(("resolution", v)) => resolution = v.parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let (Some(resolution), Some(seed)) = (resolution, seed) else {
            return Err(precondition(format!("distances header '{}' lacks resolution or seed", header.trim())));
        };
        let mut dist = Vec::with_capacity(pts.len() * pts.len());
        let reader = csv::ReaderBuilder::new().has_headers(false).from_reader(distances);
        for rec in reader.into_records() {
            for field in rec.map_err(csv_error)?.iter() {
                dist.push(field.trim().parse::<f64>().map_err(|e| precondition(format!("distance entry: {e}")))?);
            }
        }
        Self::new(pts, dist, resolution, seed)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Numeric(format!("csv: {e}"))
}

/// Largest distance, with the resolution as error bar.
pub fn diameter(s: &SampledSpace) -> Diameter {
    let value = s.distances.iter().copied().fold(0.0, f64::max);
    Diameter { value, error: s.resolution }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut out) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

/// Shifted Halton points (bases 2, 3, 5) mapped to `S³`, skipping points
/// whose orbit repeats an earlier one.
pub(crate) fn fiber_sequence(count: usize, action: &GroupAction, seed: u64) -> Vec<S3Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let mut out: Vec<S3Point> = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u = [2, 3, 5].map(|b| radical_inverse(i, b));
        let x = sphere_point([(u[0] + shift[0]).fract(), (u[1] + shift[1]).fract(), (u[2] + shift[2]).fract()]);
        i += 1;
        if out.iter().all(|y| orbit_angle(&x, y, action) > 1e-12) {
            out.push(x);
        }
    }
    out
}

/// Value of `p` at `r`, with the ends of the domain approached from inside.
pub(crate) fn closed_value(p: &ScalarProfile, r: f64) -> Result<f64> {
    let (lo, hi) = p.domain();
    let eps = 1e-12 * (1.0 + r.abs());
    p.value(r.clamp(lo + eps, hi - eps))
}

/// Radial levels and per-level point counts shared by samples.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Layout {
    /// Levels `lo + kh` through `hi` (spacing adjusted to fit), with counts
    /// proportional to `density` and at least one point per level.
    pub fn new(lo: f64, hi: f64, spacing: f64, n_points: usize, density: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(parameter(format!("resolution must be positive, got {spacing}")));
        }
        let k = ((hi - lo) / spacing).ceil().max(1.0) as usize;
        let levels: Vec<f64> = (0..=k).map(|j| lo + (hi - lo) * j as f64 / k as f64).collect();
        if n_points < levels.len() {
            return Err(precondition(format!(
                "{n_points} points cannot cover {} radial levels at spacing {spacing}",
                levels.len()
            )));
        }
        let weights = levels.iter().map(|&r| density(r).map(|w| w.max(0.0))).collect::<Result<Vec<_>>>()?;
        let total: f64 = weights.iter().sum();
        let spare = n_points - levels.len();
        let mut counts = vec![1usize; levels.len()];
        if total > 0.0 && spare > 0 {
            let quotas: Vec<f64> = weights.iter().map(|w| spare as f64 * w / total).collect();
            let mut given = 0;
            for (c, q) in counts.iter_mut().zip(&quotas) {
                *c += q.floor() as usize;
                given += q.floor() as usize;
            }
            let mut order: Vec<usize> = (0..quotas.len()).collect();
            order.sort_by(|&a, &b| (quotas[b].fract()).total_cmp(&quotas[a].fract()).then(a.cmp(&b)));
            for &j in order.iter().take(spare - given) {
                counts[j] += 1;
            }
        }
        Ok(Self { levels, counts })
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// `(level, fiber)` for every point: level `k` takes the first `counts[k]` fibers.
    pub fn points(&self, fibers: &[S3Point]) -> Vec<(usize, S3Point)> {
        let mut out = Vec::with_capacity(self.counts.iter().sum());
        for (k, &c) in self.counts.iter().enumerate() {
            out.extend(fibers[..c].iter().map(|x| (k, *x)));
        }
        out
    }
}

/// Warps at the levels and halfway between them.
struct HalfLevels {
    rho: Vec<f64>,
    phi: Vec<f64>,
}

impl HalfLevels {
    fn from_spec(spec: &MetricFamilySpec, layout: &Layout) -> Result<Self> {
        let m = layout.levels.len();
        let (mut rho, mut phi) = (Vec::with_capacity(2 * m), Vec::with_capacity(2 * m));
        for j in 0..(2 * m).saturating_sub(1) {
            let r = if j % 2 == 0 {
                layout.levels[j / 2]
            } else {
                0.5 * (layout.levels[j / 2] + layout.levels[j / 2 + 1])
            };
            rho.push(closed_value(&spec.profiles.rho, r)?);
            phi.push(closed_value(&spec.profiles.phi, r)?);
        }
        Ok(Self { rho, phi })
    }

    /// Simpson averages of `(ρ, φ)` between levels `k` and `l`.
    fn averaged(&self, k: usize, l: usize) -> (f64, f64) {
        if k == l {
            return (self.rho[2 * k], self.phi[2 * k]);
        }
        let s = |v: &[f64]| (v[2 * k] + 4.0 * v[k + l] + v[2 * l]) / 6.0;
        (s(&self.rho), s(&self.phi))
    }
}

/// Length of the straight segment from `(r, x)` to `(r′, g·y)` in
/// `dr² + ρ² η² + φ² (horizontal)`, minimized over the group.
fn edge_length(x: &S3Point, y: &S3Point, dr: f64, rho: f64, phi: f64, action: &GroupAction) -> f64 {
    let mut best = f64::INFINITY;
    for g in 0..action.order() {
        let gy = action.apply(g, y);
        let c = dot(x, &gy);
        let u = [gy[0] - c * x[0], gy[1] - c * x[1], gy[2] - c * x[2], gy[3] - c * x[3]];
        let s = dot(&u, &u).sqrt();
        let theta = s.atan2(c);
        let fiber2 = if s > 0.0 {
            let v = dot(&u, &hopf_j(x)) / s;
            theta * theta * (rho * rho * v * v + phi * phi * (1.0 - v * v))
        } else {
            0.0
        };
        best = best.min(dr * dr + fiber2);
    }
    best.sqrt()
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Builds the neighbor graph on `points` and returns the all-pairs graph
/// distances with the resolution.
fn graph_distances(
    layout: &Layout,
    warps: &HalfLevels,
    points: &[(usize, S3Point)],
    action: &GroupAction,
    neighbors: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = points.len();
    let mut starts = vec![0usize; layout.counts.len() + 1];
    for (k, c) in layout.counts.iter().enumerate() {
        starts[k + 1] = starts[k] + c;
    }
    let length = |i: usize, j: usize| {
        let ((ki, xi), (kj, xj)) = (&points[i], &points[j]);
        let (rho, phi) = warps.averaged(*ki.min(kj), *ki.max(kj));
        edge_length(xi, xj, layout.levels[*kj] - layout.levels[*ki], rho, phi, action)
    };
    let lists: Vec<Vec<(usize, f64)>> = exec::map_range(n, |i| {
        let k = points[i].0;
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(neighbors + 1);
        let mut radial = Vec::new();
        let levels = layout.levels.len();
        for step in 0..levels {
            let mut any = false;
            for l in [k.checked_sub(step), (step > 0).then_some(k + step).filter(|&l| l < levels)].into_iter().flatten() {
                let gap = (layout.levels[l] - layout.levels[k]).abs();
                if heap.len() == neighbors && gap >= heap.peek().map_or(f64::INFINITY, |c| c.0) {
                    continue;
                }
                any = true;
                let mut nearest = Candidate(f64::INFINITY, usize::MAX);
                for j in starts[l]..starts[l + 1] {
                    if j == i {
                        continue;
                    }
                    let c = Candidate(length(i, j), j);
                    if step == 1 && c < nearest {
                        nearest = c;
                    }
                    if heap.len() < neighbors {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
                if step == 1 && nearest.1 != usize::MAX {
                    radial.push((nearest.1, nearest.0));
                }
            }
            if !any && step > 0 && heap.len() == neighbors {
                break;
            }
        }
        // the same fiber point on adjacent levels is always linked
        let own = i - starts[k];
        for l in [k.checked_sub(1), Some(k + 1).filter(|&l| l < levels)].into_iter().flatten() {
            if own < layout.counts[l] {
                radial.push((starts[l] + own, length(i, starts[l] + own)));
            }
        }
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.1, c.0)).collect();
        out.extend(radial);
        out
    });

    let mut resolution = 0.0f64;
    let mut graph = UnGraph::<(), f64>::with_capacity(n, n * neighbors);
    for _ in 0..n {
        graph.add_node(());
    }
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        let nearest = list.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        if nearest.is_finite() {
            resolution = resolution.max(nearest);
        }
        edges.extend(list.iter().map(|&(j, w)| (i.min(j), i.max(j), w)));
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    for (i, j, w) in edges {
        graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), w);
    }
    let components = connected_components(&graph);
    if components > 1 {
        return Err(Error::Connectivity { components });
    }
    let rows: Vec<Vec<f64>> = exec::map_range(n, |s| {
        let tree = dijkstra(&graph, NodeIndex::new(s), None, |e| *e.weight());
        let mut row = vec![f64::INFINITY; n];
        for (node, d) in tree {
            row[node.index()] = d;
        }
        row
    });
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = rows[i][j].min(rows[j][i]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok((dist, resolution))
}

/// Samples `spec` on radial levels `resolution` apart, with `n_points` points
/// spread over levels in proportion to the volume density.
pub fn sample_space(spec: &MetricFamilySpec, n_points: usize, resolution: f64, seed: u64) -> Result<SampledSpace> {
    sample_space_with(spec, n_points, resolution, seed, &SampleOptions::default())
}

pub fn sample_space_with(
    spec: &MetricFamilySpec,
    n_points: usize,
    resolution: f64,
    seed: u64,
    opts: &SampleOptions,
) -> Result<SampledSpace> {
    if n_points < 2 {
        return Err(precondition("need at least two points"));
    }
    let (lo, hi) = sampling_interval(spec, opts)?;
    let layout = Layout::new(lo, hi, resolution, n_points, |r| density(spec, r))?;
    let action = GroupAction::from_label(spec.group);
    let fibers = fiber_sequence(layout.max_count(), &action, seed);
    sample_on_layout(spec, &layout, &layout.points(&fibers), seed, opts)
}

/// Radial level spacing giving 4-dimensional cells of equal volume,
/// `(V / n)^{1/4}` with `V` the volume of the sampled interval, kept large
/// enough for about four points per level.
pub fn auto_spacing(spec: &MetricFamilySpec, n_points: usize, opts: &SampleOptions) -> Result<f64> {
    let (lo, hi) = sampling_interval(spec, opts)?;
    spacing_for(|r| density(spec, r), lo, hi, spec.group.order(), n_points)
}

pub(crate) fn spacing_for(
    density: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    group_order: u32,
    n_points: usize,
) -> Result<f64> {
    if n_points == 0 {
        return Err(precondition("need at least one point"));
    }
    let m = 2000;
    let step = (hi - lo) / m as f64;
    let mut total = 0.0;
    for k in 0..m {
        total += density(lo + step * (k as f64 + 0.5))?;
    }
    let volume = 2.0 * std::f64::consts::PI.powi(2) / group_order as f64 * total * step;
    Ok((volume / n_points as f64).powf(0.25).max(4.0 * (hi - lo) / n_points as f64))
}

/// `ρ φ²`, the radial volume density up to the fiber volume.
pub(crate) fn density(spec: &MetricFamilySpec, r: f64) -> Result<f64> {
    let (rho, phi) = (closed_value(&spec.profiles.rho, r)?, closed_value(&spec.profiles.phi, r)?);
    Ok(rho * phi * phi)
}

pub(crate) fn sampling_interval(spec: &MetricFamilySpec, opts: &SampleOptions) -> Result<(f64, f64)> {
    let (lo, hi) = spec.domain();
    let hi = match opts.r_max {
        Some(m) if m > lo => hi.min(m),
        Some(m) => return Err(parameter(format!("r_max = {m} is below the domain start {lo}"))),
        None => hi,
    };
    if !hi.is_finite() {
        return Err(precondition(format!("{:?} lives on an unbounded interval; give r_max", spec.kind)));
    }
    Ok((lo, hi))
}

pub(crate) fn sample_on_layout(
    spec: &MetricFamilySpec,
    layout: &Layout,
    points: &[(usize, S3Point)],
    seed: u64,
    opts: &SampleOptions,
) -> Result<SampledSpace> {
    let action = GroupAction::from_label(spec.group);
    let warps = HalfLevels::from_spec(spec, layout)?;
    let (distances, resolution) = graph_distances(layout, &warps, points, &action, opts.neighbors)?;
    let smallest = spec.regions.iter().map(|r| r.hi - r.lo).fold(f64::INFINITY, f64::min);
    let warning = (resolution > smallest)
        .then(|| format!("resolution {resolution:.3e} is coarser than the smallest region width {smallest:.3e}"));
    Ok(SampledSpace {
        points: points
            .iter()
            .map(|&(k, x)| SampledPoint { r: layout.levels[k], fiber: x, orbit_label: spec.group })
            .collect(),
        distances,
        resolution,
        source_spec: Some(Arc::new(spec.clone())),
        seed,
        warning,
    })
}

/// The unit round `S³` on `n_points` quasi-uniform points (all at `r = 0`).
pub fn sample_round_s3(n_points: usize, seed: u64) -> Result<SampledSpace> {
    sample_round_s3_with(n_points, seed, DEFAULT_NEIGHBORS)
}

pub fn sample_round_s3_with(n_points: usize, seed: u64, neighbors: usize) -> Result<SampledSpace> {
    if n_points < 2 {
        return Err(precondition("need at least two points"));
    }
    let layout = Layout { levels: vec![0.0], counts: vec![n_points] };
    let action = GroupAction::from_label(GroupLabel::Trivial);
    let fibers = fiber_sequence(n_points, &action, seed);
    let points = layout.points(&fibers);
    let warps = HalfLevels { rho: vec![1.0], phi: vec![1.0] };
    let (distances, resolution) = graph_distances(&layout, &warps, &points, &action, neighbors)?;
    Ok(SampledSpace {
        points: points
            .iter()
            .map(|&(_, x)| SampledPoint { r: 0.0, fiber: x, orbit_label: GroupLabel::Trivial })
            .collect(),
        distances,
        resolution,
        source_spec: None,
        seed,
        warning: None,
    })
}
