use std::f64::consts::PI;

use ricci_forge::constructions::{
    auto_c, build_family, build_m_profile_with, n_open_certificate_on, window_edge_for, BuildOptions, ConstructionParams,
    FamilyKind, MetricFamilySpec,
};
use ricci_forge::curvature::{threshold_search, CurvatureCertificate};
use ricci_forge::gh::{convergence_experiment_with, gh_lower, gh_upper, row_spaces, Correspondence, ExperimentOptions};
use ricci_forge::spaces::{
    auto_spacing, diameter, min_displacement, sample_space_with, volume_closed, volume_mc, GroupAction, SampleOptions,
    SampledSpace,
};
use ricci_forge::{Error, Grid};
use serde_json::{json, Value};

use crate::config::{parse_list, parse_pair, usage, CliError, Result, Settings};

/// What a subcommand produced: the report body and any side files.
pub struct Outcome {
    pub passed: bool,
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(passed: bool, result: Value) -> Self {
        Self { passed, result, files: Vec::new() }
    }
}

pub const FAMILY_KEYS: &[(&str, &str)] =
    &[("c", "auto"), ("b", ""), ("b-prime", ""), ("d", "0.25"), ("n", "4"), ("a", "0.05")];

fn slope(s: &Settings) -> Result<f64> {
    if s.raw("c") == "auto" {
        Ok(auto_c())
    } else {
        s.get("c")
    }
}

/// Construction parameters from the family keys; `b` defaults to the angle of `c`.
pub fn family_params(s: &Settings) -> Result<ConstructionParams> {
    let mut p = ConstructionParams::with_slope(slope(s)?);
    if let Some(b) = s.get_opt::<f64>("b")? {
        p.b = b;
        p.b_prime = window_edge_for(b);
    }
    if let Some(bp) = s.get_opt::<f64>("b-prime")? {
        p.b_prime = bp;
    }
    p.d = s.get("d")?;
    p.n = s.get("n")?;
    p.a = s.get("a")?;
    Ok(p)
}

fn family(s: &Settings) -> Result<(FamilyKind, ConstructionParams)> {
    let kind: FamilyKind = s.get("family")?;
    let p = family_params(s)?;
    if matches!(kind, FamilyKind::EhConformal | FamilyKind::MOpen | FamilyKind::MClosed) {
        p.validate()?;
        p.check_gluing_relation()?;
    }
    Ok((kind, p))
}

fn certificate_passes(spec: &MetricFamilySpec) -> bool {
    spec.certificate.as_ref().map_or(true, |c| c.passed) && spec.oracle_certificate.as_ref().map_or(true, |c| c.passed)
}

fn build(s: &Settings, allow_failure: bool) -> Result<MetricFamilySpec> {
    let (kind, p) = family(s)?;
    let opts = BuildOptions { allow_failure, ..BuildOptions::default() };
    Ok(build_family(kind, &p, &opts)?)
}

fn r_max(s: &Settings) -> Result<SampleOptions> {
    Ok(SampleOptions { r_max: s.get_opt("r-max")?, ..SampleOptions::default() })
}

pub fn build_spec(s: &Settings) -> Result<Outcome> {
    let spec = build(s, s.get("allow-failure")?)?;
    let step: f64 = s.get("profile-step")?;
    let (lo, hi) = spec.domain();
    let hi = if hi.is_finite() { hi } else { s.get::<f64>("r-max")? };
    let grid = Grid::new(lo, hi, step)?;
    let mut csv = String::from("r,rho,phi,rho_d1,phi_d1\n");
    for r in grid.nodes() {
        let (rho, phi) = (&spec.profiles.rho, &spec.profiles.phi);
        if !(rho.contains(r) && phi.contains(r)) {
            continue;
        }
        let ([a, a1, _], [b, b1, _]) = (rho.jet(r)?, phi.jet(r)?);
        csv.push_str(&format!("{r},{a},{b},{a1},{b1}\n"));
    }
    let passed = certificate_passes(&spec);
    let mut out = Outcome::new(passed, serde_json::to_value(&spec).map_err(Error::from)?);
    out.files.push(("profiles.csv".into(), csv.into_bytes()));
    Ok(out)
}

pub fn verify_curvature(s: &Settings) -> Result<Outcome> {
    let (kind, p) = family(s)?;
    let opts = BuildOptions { tolerance: s.get("tolerance")?, allow_failure: true, ..BuildOptions::default() };
    let grid = s.get_opt::<String>("grid")?.map(|g| Grid::parse(&g)).transpose()?;
    let (cert, oracle) = match (kind, grid) {
        (FamilyKind::NOpen, Some(grid)) => (n_open_certificate_on(p.n, p.c, &grid, &opts)?, None),
        (_, Some(_)) => return Err(usage("--grid applies to n-open only; other families certify on their own domain")),
        (_, None) => {
            let spec = build_family(kind, &p, &opts)?;
            let cert = spec
                .certificate
                .ok_or_else(|| usage(format!("{kind:?} carries no curvature certificate")))?;
            (cert, spec.oracle_certificate)
        }
    };
    let passed = cert.passed && oracle.as_ref().map_or(true, |c| c.passed);
    Ok(Outcome::new(passed, json!({ "certificate": cert, "oracle_certificate": oracle })))
}

pub fn threshold(s: &Settings) -> Result<Outcome> {
    let bracket = parse_pair("bracket", s.raw("bracket"))?;
    let tol: f64 = s.get("tol")?;
    let n: u32 = s.get("n")?;
    let grid = Grid::parse(s.raw("grid"))?;
    let opts = BuildOptions { allow_failure: true, ..BuildOptions::default() };
    let report = match s.raw("family") {
        "berger" | "n-open" => threshold_search(|c| n_open_certificate_on(n, c, &grid, &opts), bracket, tol)?,
        "m-open" => {
            let certify = |c: f64| -> ricci_forge::Result<CurvatureCertificate> {
                let spec = build_m_profile_with(&ConstructionParams::with_slope(c), &opts)?;
                spec.certificate.ok_or_else(|| Error::Unsupported("missing certificate".into()))
            };
            threshold_search(certify, bracket, tol)?
        }
        other => return Err(usage(format!("threshold supports berger, n-open and m-open, got '{other}'"))),
    };
    Ok(Outcome::new(true, serde_json::to_value(&report).map_err(Error::from)?))
}

pub fn volume(s: &Settings) -> Result<Outcome> {
    let samples: usize = s.get("samples")?;
    let seed: u64 = s.get("seed")?;
    let spec = build(s, false)?;
    let closed = volume_closed(&spec)?;
    let mc = volume_mc(&spec, samples, seed)?;
    let sigmas = (mc.estimate - closed).abs() / mc.stderr;
    let passed = sigmas <= 3.0;
    Ok(Outcome::new(passed, json!({ "closed": closed, "monte_carlo": mc, "deviation_in_stderr": sigmas, "agree_within_3_stderr": passed })))
}

fn sampled(s: &Settings) -> Result<SampledSpace> {
    let spec = build(s, false)?;
    let points: usize = s.get("points")?;
    let seed: u64 = s.get("seed")?;
    let opts = SampleOptions { neighbors: s.get("neighbors")?, ..r_max(s)? };
    let h = match s.get_opt::<f64>("resolution")? {
        Some(h) => h,
        None => auto_spacing(&spec, points, &opts)?,
    };
    Ok(sample_space_with(&spec, points, h, seed, &opts)?)
}

pub fn diameter_cmd(s: &Settings) -> Result<Outcome> {
    let lambda: f64 = s.get("lambda")?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(usage(format!("--lambda must be positive, got {lambda}")));
    }
    let space = sampled(s)?;
    let d = diameter(&space);
    Ok(Outcome::new(
        true,
        json!({
            "diameter": d.value * lambda,
            "error": d.error * lambda,
            "lambda": lambda,
            "resolution": space.resolution,
            "points": space.len(),
            "warning": space.warning,
        }),
    ))
}

pub fn displacement(s: &Settings) -> Result<Outcome> {
    let action = GroupAction::from_label(s.get("group")?);
    let report = min_displacement(&action, s.get("samples")?, s.get("seed")?)?;
    Ok(Outcome::new(true, serde_json::to_value(report).map_err(Error::from)?))
}

pub fn sample(s: &Settings) -> Result<Outcome> {
    let space = sampled(s)?;
    let name = s.raw("name");
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(usage(format!("--name must be a plain file stem, got '{name}'")));
    }
    let (mut pts, mut dist) = (Vec::new(), Vec::new());
    space.write_points_csv(&mut pts)?;
    space.write_distances_csv(&mut dist)?;
    let d = diameter(&space);
    let mut out = Outcome::new(
        true,
        json!({
            "points": space.len(),
            "resolution": space.resolution,
            "diameter": d.value,
            "warning": space.warning,
            "points_file": format!("{name}_points.csv"),
            "distances_file": format!("{name}_distances.csv"),
        }),
    );
    out.files.push((format!("{name}_points.csv"), pts));
    out.files.push((format!("{name}_distances.csv"), dist));
    Ok(out)
}

fn read_space(prefix: &str) -> Result<SampledSpace> {
    let open = |suffix: &str| {
        let path = std::path::PathBuf::from(format!("{prefix}_{suffix}.csv"));
        std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))
    };
    let points = open("points")?;
    let distances = std::io::BufReader::new(open("distances")?);
    Ok(SampledSpace::read_csv(points, distances)?)
}

pub fn gh(s: &Settings) -> Result<Outcome> {
    let (a, b) = (s.raw("a"), s.raw("b"));
    if !a.is_empty() || !b.is_empty() {
        if a.is_empty() || b.is_empty() {
            return Err(usage("--a and --b must be given together"));
        }
        let (sa, sb) = (read_space(a)?, read_space(b)?);
        if sa.len() != sb.len() {
            return Err(usage(format!("identity correspondence needs equal sizes, got {} and {}", sa.len(), sb.len())));
        }
        let bound = gh_upper(&sa, &sb, &Correspondence::identity(sa.len()))?;
        let lower = gh_lower(&sa, &sb);
        return Ok(Outcome::new(true, json!({ "gh_upper": bound, "gh_lower": lower })));
    }
    let c = slope(s)?;
    let i: u32 = s.get("i")?;
    let rows = row_spaces(c, i, s.get("points")?, s.get("seed")?, &ExperimentOptions::default())?;
    let id = Correspondence::identity(rows.m.len());
    let result = json!({
        "c": c,
        "i": i,
        "gh_mn": gh_upper(&rows.m, &rows.n, &id)?,
        "gh_mx": gh_upper(&rows.m, &rows.x, &id)?,
        "gh_nx": gh_upper(&rows.n, &rows.x, &id)?,
        "gh_lower_mn": gh_lower(&rows.m, &rows.n),
        "level_spacing": rows.level_spacing,
    });
    Ok(Outcome::new(true, result))
}

pub fn converge(s: &Settings) -> Result<Outcome> {
    let c = slope(s)?;
    let i_list: Vec<u32> = parse_list("i", s.raw("i"))?;
    let opts = ExperimentOptions {
        lambda: 1.0 / PI,
        sample: SampleOptions { neighbors: s.get("neighbors")?, ..SampleOptions::default() },
        ..ExperimentOptions::default()
    };
    let table = convergence_experiment_with(c, &i_list, s.get("points")?, s.get("seed")?, &opts)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let mut out = Outcome::new(table.checks.passed(), serde_json::to_value(&table).map_err(Error::from)?);
    out.files.push(("convergence.csv".into(), csv));
    Ok(out)
}

/// Subcommand defaults, in the order the keys are listed by `--help`.
pub fn defaults(command: &str) -> Vec<(&'static str, &'static str)> {
    let with_family = |family: &'static str, extra: &[(&'static str, &'static str)]| {
        let mut v = vec![("family", family)];
        v.extend_from_slice(FAMILY_KEYS);
        v.extend_from_slice(extra);
        v
    };
    let sampling: &[(&str, &str)] = &[("points", "1000"), ("resolution", ""), ("seed", "1"), ("r-max", ""), ("neighbors", "32")];
    match command {
        "build-spec" => with_family("n-closed", &[("allow-failure", "false"), ("profile-step", "0.01"), ("r-max", "10")]),
        "verify-curvature" => with_family("n-open", &[("grid", ""), ("tolerance", "1e-8")]),
        "threshold" => vec![("family", "berger"), ("n", "4"), ("bracket", "0.001:2"), ("tol", "1e-6"), ("grid", N_OPEN_GRID_TEXT)],
        "volume" => with_family("n-closed", &[("samples", "1000000"), ("seed", "1")]),
        "diameter" => {
            let mut v = with_family("n-closed", sampling);
            v.push(("lambda", "1"));
            v
        }
        "displacement" => vec![("group", "iota"), ("samples", "10000"), ("seed", "1")],
        "sample" => {
            let mut v = with_family("n-closed", sampling);
            v.push(("name", "sample"));
            v
        }
        "gh" => vec![("a", ""), ("b", ""), ("c", "auto"), ("i", "2"), ("points", "1000"), ("seed", "7")],
        "converge" => vec![("c", "auto"), ("i", "2,4,8,16"), ("points", "2000"), ("seed", "7"), ("neighbors", "32")],
        _ => Vec::new(),
    }
}

const N_OPEN_GRID_TEXT: &str = "0.01:50:0.001";
