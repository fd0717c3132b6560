use std::f64::consts::{FRAC_PI_2, PI};

use ricci_forge::constructions::*;
use ricci_forge::curvature::{ricci_warped, threshold_search};
use ricci_forge::oracle::ChartMetric;
use ricci_forge::profiles::ScalarProfile;

fn diag(chart: &ChartMetric, x: &[f64]) -> Vec<f64> {
    let g = chart.metric_at(x).unwrap();
    (0..4).map(|i| g[(i, i)]).collect()
}

#[test]
fn eguchi_hanson_radial_coefficient() {
    let chart = eguchi_hanson_chart(1.0).unwrap();
    let g = diag(&chart, &[2.0, 1.0, 2.0, 3.0]);
    assert!((g[0] - 16.0 / 15.0).abs() < 1e-14);
}

#[test]
fn eguchi_hanson_fiber_degenerates_at_the_bolt() {
    let chart = ChartMetric::eguchi_hanson(1.0, 0.0).unwrap();
    for eps in [1e-3, 1e-6, 1e-9] {
        let g = chart.metric_at(&[1.0 + eps, FRAC_PI_2, 1.0, 1.0]).unwrap();
        // at θ = π/2 the ψψ entry is the σz coefficient over four
        assert!(g[(3, 3)] <= 4.0 * eps + 1e-12, "{}", g[(3, 3)]);
    }
}

#[test]
fn eguchi_hanson_tends_to_the_cone() {
    let chart = ChartMetric::eguchi_hanson(1e-5, 0.0).unwrap();
    let cone = ChartMetric::radial_euler("cone", (0.0, f64::INFINITY), 2.0 * PI, |r| (1.0, r * r, r * r));
    let x = [2.0, 0.7, 1.3, 2.1];
    let (a, b) = (chart.metric_at(&x).unwrap(), cone.metric_at(&x).unwrap());
    assert!((a - b).amax() < 1e-12);
}

#[test]
fn eguchi_hanson_rejects_bad_scale() {
    assert!(eguchi_hanson_chart(0.0).is_err());
    assert!(eguchi_hanson_chart(-1.0).is_err());
}

#[test]
fn arclength_is_increasing() {
    let map = ArclengthMap::new(0.05, 4.0, 1e-3).unwrap();
    let mut last = -1.0;
    for i in 0..=400 {
        let t = map.t(i as f64 * 0.01).unwrap();
        assert!(t > last);
        last = t;
    }
    assert_eq!(map.t(0.0).unwrap(), 0.0);
}

#[test]
fn conformal_factor_is_one_early_and_convex() {
    let f = conformal_factor(DEFAULT_A, FactorDesign::default()).unwrap();
    for i in 0..=100 {
        let t = 0.25 * i as f64 / 100.0;
        assert_eq!(f.profile.value(t).unwrap(), 1.0);
    }
    let delta = arclength_offset(DEFAULT_A).unwrap();
    for i in 0..400 {
        let t = i as f64 * 0.01;
        let [h, _, h2] = f.profile.jet(t).unwrap();
        assert!(h >= 1.0 && h2 >= -1e-12, "t = {t}: h = {h}, h'' = {h2}");
        if t >= f.exact_from {
            assert!((h - 1.0 - (t + delta).powi(2)).abs() < 1e-12);
        }
    }
}

#[test]
fn conformal_metric_is_unchanged_early() {
    let params = ConstructionParams::default();
    let f = conformal_factor(params.a, FactorDesign::default()).unwrap();
    let one = ScalarProfile::constant(-1.0, f64::INFINITY, 1.0).unwrap();
    let (h, plain) = (conformal_modified(&params, &f.profile).unwrap(), conformal_modified(&params, &one).unwrap());
    for u in [0.01, 0.1, 0.2] {
        let x = [u, 1.0, 2.0, 3.0];
        assert_eq!(h.metric_at(&x).unwrap(), plain.metric_at(&x).unwrap());
    }
}

#[test]
fn conformal_metric_is_near_the_model_around_one() {
    let params = ConstructionParams::default();
    let f = conformal_factor(params.a, FactorDesign::default()).unwrap();
    let h = conformal_modified(&params, &f.profile).unwrap();
    let model = ChartMetric::radial_euler("model", (0.0, f64::INFINITY), 2.0 * PI, |u| {
        let w = 1.0 / (1.0 + u * u).powi(2);
        (w, u * u * w, u * u * w)
    });
    for u in [0.9, 1.0, 1.1] {
        let x = [u, 1.0, 2.0, 3.0];
        let diff = (h.metric_at(&x).unwrap() - model.metric_at(&x).unwrap()).amax();
        assert!(diff < 1e-2, "u = {u}: {diff}");
    }
}

#[test]
fn conformal_metric_rejects_non_convex_factor() {
    let bumpy = ScalarProfile::sine(-1.0, f64::INFINITY, 0.5, 3.0, 0.0, 2.0).unwrap();
    assert!(conformal_modified(&ConstructionParams::default(), &bumpy).is_err());
}

#[test]
fn glued_cone_normalizes_to_three_c_at_two() {
    let p = ConstructionParams::default();
    let spec = build_m_profile(p.c, p.b).unwrap();
    assert!(spec.is_passing());
    let n = spec.normalized().unwrap();
    let (w, v) = n.warps(2.0).unwrap();
    assert!((w - 3.0 * p.c).abs() < 1e-14, "{w} vs {}", 3.0 * p.c);
    assert_eq!(w, v);
}

#[test]
fn glued_cone_records_slope_from_angle() {
    let c = 0.5 * 0.3f64.sin();
    assert!((c - 0.14776).abs() < 1e-5);
    let spec = build_m_profile(slope_for_angle(0.3), 0.3).unwrap();
    assert!((spec.params.c - c).abs() < 1e-12);
    assert!(spec.is_passing());
}

#[test]
fn glued_cone_rejects_mismatched_slope() {
    assert!(build_m_profile(0.05, 0.15).is_err());
}

#[test]
fn glued_closed_family_is_symmetric_and_matches_middle() {
    let p = ConstructionParams::default();
    let spec = build_m_closed_profile(p.c, p.d).unwrap();
    assert!(spec.is_passing());
    let contracts = spec.contracts(1e-3).unwrap();
    assert!(contracts.passes(), "{contracts:?}");
    let mid = spec.profiles.rho.value(FRAC_PI_2).unwrap();
    assert!((mid - middle_formula(p.c, p.d, FRAC_PI_2)).abs() < 1e-15);
    let report = spec.middle.unwrap();
    assert!(report.built_residual < 1e-14);
    assert!(report.statement_residual > 1e-3);
}

#[test]
fn closed_family_rejects_large_d() {
    let p = ConstructionParams::default();
    assert!(build_m_closed_profile(p.c, 0.6).is_err());
    assert!(build_n_closed_profiles(p.c, 0.0).is_err());
}

#[test]
fn berger_profiles_follow_the_recipe() {
    let spec = build_n_profiles(4, 0.01).unwrap();
    assert_eq!(spec.profiles.rho.value(0.5).unwrap(), 2.0);
    assert_eq!(spec.profiles.phi.value(0.5).unwrap(), 4.0);
    assert!((spec.profiles.phi.value(3.0).unwrap() - 4.02).abs() < 1e-15);
    let cert = spec.certificate.as_ref().unwrap();
    assert!(cert.passed);
    assert_eq!((cert.grid.lo, cert.grid.hi), (0.01, 50.0));
}

#[test]
fn berger_mollification_is_local() {
    let (n, c) = (4.0, 0.1);
    let spec = build_n_profiles(4, c).unwrap();
    for i in 0..=2000 {
        let r = 0.005 + i as f64 * 0.005;
        if r > 0.75 && r < 1.25 {
            continue;
        }
        let (rho_hat, phi_hat) = if r < 1.0 { (n * r, n) } else { (n + c * (r - 1.0), n + c * (r - 1.0)) };
        let (rho, phi) = spec.warps(r).unwrap();
        assert!((rho - rho_hat).abs() <= 1e-12 && (phi - phi_hat).abs() <= 1e-12, "r = {r}");
    }
}

#[test]
fn berger_far_region_normalizes_to_the_cone() {
    let c = 0.1;
    let spec = build_n_profiles(4, c).unwrap().normalized().unwrap();
    for r in [1.5, 2.0, 7.0] {
        let (rho, phi) = spec.warps(r).unwrap();
        assert!((rho - c * (r + 1.0)).abs() < 1e-13 && (phi - rho).abs() < 1e-15);
    }
}

#[test]
fn berger_certificate_fails_above_threshold() {
    let opts = BuildOptions { allow_failure: true, ..BuildOptions::default() };
    let spec = n_open_family(4, 0.3, &opts).unwrap();
    assert!(!spec.is_passing());
    assert!(build_n_profiles(4, 0.3).is_err());
}

#[test]
fn recorded_berger_threshold_is_a_passing_bracket_end() {
    let opts = BuildOptions::default();
    assert!(n_open_certificate(4, BERGER_C_MAX_N4, &opts).unwrap().passed);
    assert!(!n_open_certificate(4, BERGER_C_MAX_N4 + 2e-6, &opts).unwrap().passed);
}

#[test]
fn threshold_search_recovers_recorded_constant() {
    let opts = BuildOptions::default();
    let report = threshold_search(|c| n_open_certificate(4, c, &opts), (0.01, 1.0), 1e-6).unwrap();
    assert!((report.c_max - BERGER_C_MAX_N4).abs() < 2e-6);
}

#[test]
fn berger_closed_family_passes_at_half_threshold() {
    let c = 0.5 * BERGER_C_MAX_N4;
    let spec = build_n_closed_profiles(c, 0.25).unwrap();
    assert!(spec.is_passing());
    let contracts = spec.contracts(1e-3).unwrap();
    assert!(contracts.passes(), "{contracts:?}");
}

#[test]
fn closed_families_share_the_middle() {
    let p = ConstructionParams::default();
    let m = build_m_closed_profile(p.c, p.d).unwrap();
    let n = build_n_closed_profiles(p.c, p.d).unwrap();
    for i in 0..=200 {
        let r = p.d + (PI - 2.0 * p.d) * i as f64 / 200.0;
        assert_eq!(m.profiles.rho.value(r).unwrap(), n.profiles.rho.value(r).unwrap());
    }
}

#[test]
fn suspension_peaks_at_c() {
    let s = limit_suspension(0.3).unwrap();
    assert!((s.profiles.rho.value(FRAC_PI_2).unwrap() - 0.3).abs() < 1e-15);
    assert!(s.is_passing());
    assert!(limit_suspension(0.0).is_err());
}

#[test]
fn unit_suspension_is_the_round_sphere() {
    let s = limit_suspension(1.0).unwrap();
    let m = s.warped_metric(&s.regions[0]).unwrap();
    for r in [0.3, 1.0, 2.5] {
        let (a, b) = ricci_warped(&m, r).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
    }
}

#[test]
fn closed_warp_approaches_the_half_slope_suspension() {
    let c = auto_c();
    let mut last = f64::INFINITY;
    for d in [0.4, 0.25, 0.125, 0.0625] {
        let spec = build_n_closed_profiles(c, d).unwrap();
        let dev = spec.middle.unwrap().limit_residual;
        // direct sup of |warp − (c/2) sin r| on (d, π − d)
        let mut direct: f64 = 0.0;
        for i in 0..=1000 {
            let r = d + (PI - 2.0 * d) * i as f64 / 1000.0;
            direct = direct.max((spec.profiles.rho.value(r).unwrap() - 0.5 * c * r.sin()).abs());
        }
        assert!((dev - direct).abs() < 1e-6);
        assert!(dev <= c * ((0.45 * d).sin().abs() + d));
        assert!(dev < last);
        last = dev;
    }
}

#[test]
fn specs_round_trip_through_json() {
    let spec = build_n_closed_profiles(0.05, 0.25).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    let back: MetricFamilySpec = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    let again = serde_json::to_string(&build_n_closed_profiles(0.05, 0.25).unwrap()).unwrap();
    assert_eq!(again, text);
}

#[test]
fn open_specs_round_trip_through_json() {
    let spec = build_n_profiles(4, 0.05).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    let back: MetricFamilySpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
}
