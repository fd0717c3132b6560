//! Exit criteria. Each test prints one `PASS`/`FAIL` line and then asserts it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_forge::constructions::*;
use ricci_forge::curvature::{berger_conditions, ricci_warped, threshold_search, verify_nonneg, BergerMetric, WarpedMetric};
use ricci_forge::gh::convergence_experiment;
use ricci_forge::oracle::{ricci_eigen_min, ricci_eigenvalues, ricci_tensor, ChartMetric, DEFAULT_STEP};
use ricci_forge::profiles::{Expr, ScalarProfile, Table};
use ricci_forge::spaces::{min_displacement, volume_closed, volume_mc, GroupAction};
use ricci_forge::Grid;

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {n} [{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn within(start: Instant, budget: Duration) -> bool {
    start.elapsed() < budget
}

const ANALYTIC_TOL: f64 = 1e-9;
const TABULATED_TOL: f64 = 1e-5;

#[test]
fn criterion_1_round_sphere_identity() {
    let t = Instant::now();
    let exact = ScalarProfile::sine(0.0, PI, 1.0, 1.0, 0.0, 0.0).unwrap();
    let nodes: Vec<f64> = (0..=31416).map(|k| PI * k as f64 / 31416.0).collect();
    let values = nodes.iter().map(|r| r.sin()).collect();
    let table = ScalarProfile::single(0.0, PI, Expr::Table(Table::new(nodes, values).unwrap())).unwrap();
    let analytic = WarpedMetric::new(exact, 3, 1).unwrap();
    let tabulated = WarpedMetric::new(table, 3, 1).unwrap();
    let (mut worst_exact, mut worst_table) = (0.0f64, 0.0f64);
    for r in Grid::with_count(0.05, PI - 0.05, 100).unwrap().nodes() {
        let (a, b) = ricci_warped(&analytic, r).unwrap();
        worst_exact = worst_exact.max((a - 3.0).abs()).max((b - 3.0).abs());
        let (a, b) = ricci_warped(&tabulated, r).unwrap();
        worst_table = worst_table.max((a - 3.0).abs()).max((b - 3.0).abs());
    }
    let ok = worst_exact <= ANALYTIC_TOL && worst_table <= TABULATED_TOL && within(t, Duration::from_secs(1));
    verdict(1, "round-sphere identity", ok, format!("analytic {worst_exact:.2e}, tabulated {worst_table:.2e}, {:?}", t.elapsed()));
}

#[test]
fn criterion_2_model_metric_has_ricci_twelve() {
    let t = Instant::now();
    let chart = ChartMetric::radial_euler("model", (0.0, f64::INFINITY), 4.0 * PI, |u| {
        let w = 1.0 / (1.0 + u * u).powi(2);
        (w, u * u * w, u * u * w)
    });
    let mut lowest = f64::INFINITY;
    for u in Grid::with_count(0.05, 20.0, 50).unwrap().nodes() {
        lowest = lowest.min(ricci_eigen_min(&chart, &[u, 1.0, 2.0, 3.0]).unwrap());
    }
    // u = tan(s): the metric is ds² + (½ sin 2s)² ds₃², the sphere of radius ½
    let half = WarpedMetric::new(ScalarProfile::sine(0.0, FRAC_PI_2, 0.5, 2.0, 0.0, 0.0).unwrap(), 3, 1).unwrap();
    let mut worst = 0.0f64;
    for u in Grid::with_count(0.05, 20.0, 50).unwrap().nodes() {
        let (a, b) = ricci_warped(&half, u.atan()).unwrap();
        worst = worst.max((a - 12.0).abs()).max((b - 12.0).abs());
    }
    let ok = lowest >= 12.0 - 1e-2 && worst <= 1e-6 && within(t, Duration::from_secs(30));
    verdict(2, "model metric Ric >= 12", ok, format!("oracle min {lowest:.6}, exact deviation {worst:.2e}, {:?}", t.elapsed()));
}

#[test]
fn criterion_3_eguchi_hanson_is_ricci_flat() {
    let t = Instant::now();
    let chart = ChartMetric::eguchi_hanson(1.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut worst_half) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let x = [rng.gen_range(1.1..5.0), rng.gen_range(0.2..PI - 0.2), rng.gen_range(0.1..2.0 * PI - 0.1), rng.gen_range(0.1..2.0 * PI - 0.1)];
        worst = worst.max(ricci_tensor(&chart, &x, DEFAULT_STEP).unwrap().amax());
        worst_half = worst_half.max(ricci_tensor(&chart, &x, 0.5 * DEFAULT_STEP).unwrap().amax());
    }
    let ok = worst <= 1e-4 && worst_half <= 1e-4 && within(t, Duration::from_secs(60));
    verdict(3, "Eguchi-Hanson Ricci-flat", ok, format!("max |R_ij| {worst:.2e}, halved step {worst_half:.2e}, {:?}", t.elapsed()));
}

#[test]
fn criterion_4_berger_conditions_match_oracle_signs() {
    let t = Instant::now();
    const BAND: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut agree, mut compared, mut positive, mut negative) = (0, 0, 0, 0);
    for _ in 0..10 {
        let (ar, ap) = (rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6));
        let rho = ScalarProfile::sine(-10.0, 10.0, ar, rng.gen_range(0.3..2.0), rng.gen_range(0.0..3.0), ar + rng.gen_range(0.2..1.0)).unwrap();
        let phi = ScalarProfile::sine(-10.0, 10.0, ap, rng.gen_range(0.3..2.0), rng.gen_range(0.0..3.0), ap + rng.gen_range(0.2..1.2)).unwrap();
        let metric = BergerMetric::new(rho.clone(), phi.clone(), 1).unwrap();
        let chart = ChartMetric::berger("berger", (-10.0, 10.0), move |s| (rho.value(s).unwrap(), phi.value(s).unwrap()));
        for _ in 0..10 {
            let r = rng.gen_range(-3.0..3.0);
            let (q1, q2, q3) = berger_conditions(&metric, r).unwrap();
            let q = q1.min(q2).min(q3);
            let eig = ricci_eigenvalues(&chart, &[r, 0.6, 1.0, 2.0], DEFAULT_STEP).unwrap()[0];
            if q.abs() <= BAND || eig.abs() <= BAND {
                continue;
            }
            compared += 1;
            if q > 0.0 {
                positive += 1;
            } else {
                negative += 1;
            }
            if (q > 0.0) == (eig > 0.0) {
                agree += 1;
            }
        }
    }
    let ok = agree == compared && positive > 0 && negative > 0 && within(t, Duration::from_secs(120));
    verdict(
        4,
        "Berger conditions vs oracle",
        ok,
        format!("{agree}/{compared} signs agree ({positive} non-negative, {negative} negative), {:?}", t.elapsed()),
    );
}

#[test]
fn criterion_5_berger_certificate_and_threshold() {
    let t = Instant::now();
    let spec = build_n_profiles(4, 0.01).unwrap();
    let metric = spec.berger_metric().unwrap();
    let grid = Grid::new(0.01, 50.0, 1e-3).unwrap();
    let direct = verify_nonneg(&metric, &grid, 1e-8).unwrap();
    let built = spec.certificate.as_ref().unwrap();
    let opts = BuildOptions::default();
    let report = threshold_search(|c| n_open_certificate(4, c, &opts), (0.01, 1.0), 1e-6).unwrap();
    let ok = direct.passed
        && built.passed
        && report.c_max > 0.01
        && report.c_max < 1.0
        && report.certificate.passed
        && within(t, Duration::from_secs(120));
    verdict(
        5,
        "Berger certificate and threshold",
        ok,
        format!(
            "tabulated min {:.3e}, built min {:.3e}, c_max {:.7} bracket {:?}, {:?}",
            direct.min_value(),
            built.min_value(),
            report.c_max,
            report.bracket,
            t.elapsed()
        ),
    );
}

#[test]
fn criterion_6_closed_profile_contracts() {
    let c = auto_c();
    let mut specs = vec![limit_suspension(0.5 * c).unwrap()];
    for d in [0.5, 0.25, 0.125, 0.0625] {
        specs.push(build_m_closed_profile(c, d).unwrap());
        specs.push(build_n_closed_profiles(c, d).unwrap());
    }
    let mut failures = Vec::new();
    let (mut second, mut lipschitz, mut mirror) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for s in &specs {
        let k = s.contracts(1e-3).unwrap();
        second = second.max(k.max_second_difference);
        lipschitz = lipschitz.max(k.lipschitz_constant);
        mirror = mirror.max(k.mirror_residual);
        if !(k.max_second_difference <= 1e-10 && k.lipschitz_constant <= 1.0 + 1e-9 && k.mirror_residual <= 1e-12) {
            failures.push(format!("{:?} d={}", s.kind, s.params.d));
        }
    }
    // mollification leaves the Berger recipe untouched outside (3/4, 5/4)
    let (n, slope) = (4.0, 0.1);
    let open = build_n_profiles(4, slope).unwrap();
    let mut locality = 0.0f64;
    for k in 0..=2000 {
        let r = 0.005 + k as f64 * 0.005;
        if r > 0.75 && r < 1.25 {
            continue;
        }
        let (rho_hat, phi_hat) = if r < 1.0 { (n * r, n) } else { (n + slope * (r - 1.0), n + slope * (r - 1.0)) };
        let (rho, phi) = open.warps(r).unwrap();
        locality = locality.max((rho - rho_hat).abs()).max((phi - phi_hat).abs());
    }
    let ok = failures.is_empty() && locality <= 1e-12;
    verdict(
        6,
        "profile contracts",
        ok,
        format!(
            "{} specs: second difference {second:.2e}, Lipschitz {lipschitz:.12}, mirror {mirror:.2e}, locality {locality:.2e}, failing {failures:?}",
            specs.len()
        ),
    );
}

#[test]
fn criterion_7_displacement_constants() {
    let iota = min_displacement(&GroupAction::from_label(GroupLabel::Iota), 10_000, 7).unwrap();
    let mu4 = min_displacement(&GroupAction::from_label(GroupLabel::Mu(4)), 10_000, 7).unwrap();
    let ok = (iota.min - FRAC_PI_2).abs() <= 1e-9 && (mu4.min - FRAC_PI_2).abs() <= 1e-9;
    verdict(7, "displacement constants", ok, format!("iota {:.12}, mu_4 {:.12}", iota.min, mu4.min));
}

#[test]
fn criterion_8_volume_oracle_agreement() {
    let mut s4 = limit_suspension(1.0).unwrap();
    s4.group = GroupLabel::Trivial;
    let ball_warp = ScalarProfile::affine(0.0, 1.0, 0.0, 1.0).unwrap();
    let ball = MetricFamilySpec {
        kind: FamilyKind::NOpen,
        params: ConstructionParams::default(),
        scale: 1.0,
        group: GroupLabel::Trivial,
        profiles: FamilyProfiles { rho: ball_warp.clone(), phi: ball_warp },
        regions: vec![Region { lo: 0.0, hi: 1.0, form: MetricForm::Berger }],
        middle: None,
        conformal_factor: None,
        certificate: None,
        oracle_certificate: None,
    };
    let n_closed = build_n_closed_profiles(auto_c(), DEFAULT_D).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, spec, expected) in
        [("S4", &s4, Some(8.0 * PI * PI / 3.0)), ("ball", &ball, Some(PI * PI / 2.0)), ("N_closed", &n_closed, None)]
    {
        let t = Instant::now();
        let exact = volume_closed(spec).unwrap();
        let mc = volume_mc(spec, 1_000_000, 5).unwrap();
        let sigmas = (mc.estimate - exact).abs() / mc.stderr;
        let known = expected.map_or(true, |e| (exact - e).abs() <= 1e-8 * e);
        ok &= sigmas <= 3.0 && known && within(t, Duration::from_secs(60));
        lines.push(format!("{name} {exact:.8} vs {:.8} ({sigmas:.2} se, {:?})", mc.estimate, t.elapsed()));
    }
    verdict(8, "volume oracle agreement", ok, lines.join("; "));
}

#[test]
fn criterion_9_convergence_experiment() {
    let t = Instant::now();
    let table = convergence_experiment(auto_c(), &[2, 4, 8, 16], 2000, 7).unwrap();
    let k = &table.checks;
    let ok = k.passed() && within(t, Duration::from_secs(600));
    let column = |f: fn(&ricci_forge::gh::ConvergenceRow) -> f64| {
        table.rows.iter().map(|r| format!("{:.4}", f(r))).collect::<Vec<_>>().join(",")
    };
    verdict(
        9,
        "convergence experiment",
        ok,
        format!(
            "MN [{}], MX [{}], NX [{}], resolution [{}], ratio {:.3}, C_MX {:.4}, C_NX {:.4}, volume bound {:.4e}, checks {k:?}, {:?}",
            column(|r| r.gh_mn),
            column(|r| r.gh_mx),
            column(|r| r.gh_nx),
            column(|r| r.resolution),
            k.mn_final_ratio,
            k.fit_mx,
            k.fit_nx,
            k.volume_bound,
            t.elapsed()
        ),
    );
}
