use std::f64::consts::{FRAC_PI_2, PI};

use ricci_forge::constructions::*;
use ricci_forge::profiles::ScalarProfile;
use ricci_forge::spaces::*;

fn unit_s4() -> MetricFamilySpec {
    let mut s = limit_suspension(1.0).unwrap();
    s.group = GroupLabel::Trivial;
    s
}

fn spec_with(rho: ScalarProfile, phi: ScalarProfile, form: MetricForm, group: GroupLabel) -> MetricFamilySpec {
    let (lo, hi) = rho.domain();
    MetricFamilySpec {
        kind: FamilyKind::NOpen,
        params: ConstructionParams::default(),
        scale: 1.0,
        group,
        profiles: FamilyProfiles { rho, phi },
        regions: vec![Region { lo, hi, form }],
        middle: None,
        conformal_factor: None,
        certificate: None,
        oracle_certificate: None,
    }
}

fn flat_ball() -> MetricFamilySpec {
    let r = ScalarProfile::affine(0.0, 1.0, 0.0, 1.0).unwrap();
    spec_with(r.clone(), r, MetricForm::Berger, GroupLabel::Trivial)
}

fn cone_piece(c: f64) -> MetricFamilySpec {
    let w = ScalarProfile::affine(0.0, 1.0, c, c).unwrap();
    spec_with(w.clone(), w, MetricForm::Warped, GroupLabel::Mu(4))
}

#[test]
fn antipodes_share_a_mu2_orbit() {
    let g = GroupAction::from_label(GroupLabel::Mu(2));
    let d = quotient_distance(&[1.0, 0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0, 0.0], &g).unwrap();
    assert_eq!(d, 0.0);
}

#[test]
fn multiplication_by_i_is_a_mu4_orbit() {
    let g = GroupAction::from_label(GroupLabel::Mu(4));
    let d = quotient_distance(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &g).unwrap();
    assert_eq!(d, 0.0);
}

#[test]
fn iota_image_is_a_quarter_turn_away_in_the_mu2_quotient() {
    let g = GroupAction::from_label(GroupLabel::Mu(2));
    for x in random_sphere_points(200, 11) {
        let d = quotient_distance(&x, &iota(&x), &g).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-12, "{d}");
    }
}

#[test]
fn displacement_constants() {
    let i = min_displacement(&GroupAction::from_label(GroupLabel::Iota), 10_000, 1).unwrap();
    assert!((i.min - FRAC_PI_2).abs() < 1e-9 && !i.trivial);
    let m = min_displacement(&GroupAction::from_label(GroupLabel::Mu(4)), 10_000, 1).unwrap();
    assert!((m.min - FRAC_PI_2).abs() < 1e-9);
    let t = min_displacement(&GroupAction::from_label(GroupLabel::Trivial), 100, 1).unwrap();
    assert!(t.trivial && t.min == 0.0);
}

#[test]
fn iota_displacement_is_pointwise_constant() {
    let r = min_displacement(&GroupAction::from_label(GroupLabel::Nu4), 5000, 9).unwrap();
    // ±ι displace by π/2 and −1 by π
    assert!((r.min - FRAC_PI_2).abs() < 1e-9);
    assert!((r.max - PI).abs() < 1e-7);
}

#[test]
fn suspension_poles_are_pi_apart() {
    let s = sample_space(&limit_suspension(0.3).unwrap(), 600, 0.05, 7).unwrap();
    let (north, south) = (0, s.len() - 1);
    assert_eq!(s.points[north].r, 0.0);
    assert!((s.points[south].r - PI).abs() < 1e-12);
    let d = s.distance(north, south);
    assert!((d - PI).abs() <= s.resolution, "d = {d}, resolution {}", s.resolution);
    let diam = diameter(&s);
    assert!((diam.value - PI).abs() <= diam.error, "{diam:?}");
}

#[test]
fn rescaled_suspension_has_unit_diameter() {
    let s = sample_space(&limit_suspension(0.3).unwrap(), 600, 0.05, 7).unwrap();
    let t = s.rescaled(1.0 / PI).unwrap();
    let diam = diameter(&t);
    assert!((diam.value - 1.0).abs() <= s.resolution / PI, "{diam:?}");
    assert_eq!(s.rescaled(1.0).unwrap(), s);
}

#[test]
fn round_sphere_graph_distances_match_great_circles() {
    let s = sample_round_s3(1500, 3).unwrap();
    let mut worst = 0.0f64;
    for i in (0..s.len()).step_by(37) {
        for j in (0..s.len()).step_by(23) {
            let exact = sphere_angle(&s.points[i].fiber, &s.points[j].fiber);
            worst = worst.max((s.distance(i, j) - exact).abs());
        }
    }
    assert!(worst <= 3.0 * s.resolution, "worst {worst}, resolution {}", s.resolution);
}

#[test]
fn refining_the_round_sphere_moves_distances_by_less_than_the_old_resolution() {
    let coarse = sample_round_s3(400, 5).unwrap();
    let fine = sample_round_s3(3200, 5).unwrap();
    // the fine sample extends the coarse one, so the first points coincide
    assert_eq!(coarse.points[..], fine.points[..400]);
    let mut worst = 0.0f64;
    for i in 0..400 {
        for j in 0..400 {
            worst = worst.max((coarse.distance(i, j) - fine.distance(i, j)).abs());
        }
    }
    assert!(worst <= coarse.resolution, "worst {worst}, resolution {}", coarse.resolution);
}

#[test]
fn sampling_is_deterministic() {
    let spec = build_n_closed_profiles(auto_c(), 0.25).unwrap();
    let a = sample_space(&spec, 500, 0.1, 42).unwrap();
    let b = sample_space(&spec, 500, 0.1, 42).unwrap();
    assert_eq!(a, b);
    let c = sample_space(&spec, 500, 0.1, 43).unwrap();
    assert_ne!(a.points, c.points);
}

#[test]
fn sampled_distances_are_a_metric_up_to_resolution() {
    let spec = build_n_closed_profiles(auto_c(), 0.25).unwrap();
    let s = sample_space(&spec, 500, 0.1, 1).unwrap();
    let n = s.len();
    for i in 0..n {
        assert_eq!(s.distance(i, i), 0.0);
        for j in 0..n {
            assert_eq!(s.distance(i, j), s.distance(j, i));
        }
    }
    let pts = random_sphere_points(1000, 2);
    for p in pts {
        let idx = p.map(|x| ((x.abs() * 1e6) as usize) % n);
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        assert!(s.distance(a, c) <= s.distance(a, b) + s.distance(b, c) + 2.0 * s.resolution);
    }
}

#[test]
fn coarse_sampling_of_small_caps_is_flagged() {
    let spec = build_n_closed_profiles(auto_c(), 0.0625).unwrap();
    let s = sample_space(&spec, 400, 0.1, 1).unwrap();
    assert!(s.warning.is_some());
}

#[test]
fn open_family_needs_truncation() {
    let spec = build_n_profiles(4, 0.01).unwrap();
    assert!(sample_space(&spec, 200, 0.1, 1).is_err());
    let opts = SampleOptions { r_max: Some(3.0), ..SampleOptions::default() };
    let s = sample_space_with(&spec, 300, 0.1, 1, &opts).unwrap();
    assert!(s.points.iter().all(|p| p.r <= 3.0));
}

#[test]
fn single_point_space_has_zero_diameter() {
    let p = SampledPoint { r: 0.0, fiber: [1.0, 0.0, 0.0, 0.0], orbit_label: GroupLabel::Trivial };
    let s = SampledSpace::new(vec![p], vec![0.0], 0.0, 0).unwrap();
    assert_eq!(diameter(&s).value, 0.0);
}

#[test]
fn csv_round_trip() {
    let s = sample_space(&limit_suspension(0.3).unwrap(), 200, 0.2, 4).unwrap();
    let (mut pts, mut dist) = (Vec::new(), Vec::new());
    s.write_points_csv(&mut pts).unwrap();
    s.write_distances_csv(&mut dist).unwrap();
    assert!(String::from_utf8_lossy(&dist).starts_with("# resolution="));
    let back = SampledSpace::read_csv(&pts[..], &dist[..]).unwrap();
    assert_eq!(back.points, s.points);
    assert_eq!(back.distances, s.distances);
    assert_eq!(back.resolution, s.resolution);
}

#[test]
fn volume_of_unit_four_sphere() {
    let v = volume_closed(&unit_s4()).unwrap();
    assert!((v - 8.0 * PI * PI / 3.0).abs() < 1e-8 * v);
}

#[test]
fn volume_of_unit_ball() {
    let v = volume_closed(&flat_ball()).unwrap();
    assert!((v - PI * PI / 2.0).abs() < 1e-8 * v);
}

#[test]
fn volume_of_cone_piece() {
    let c = 0.3;
    let v = volume_closed(&cone_piece(c)).unwrap();
    // (2π²/4) ∫₀¹ c³(r+1)³ dr = (π²/2) c³ (2⁴ − 1)/4
    let expected = 15.0 * PI * PI / 8.0 * c * c * c;
    assert!((v - expected).abs() < 1e-10, "{v} vs {expected}");
    let mc = volume_mc(&cone_piece(c), 200_000, 3).unwrap();
    assert!((mc.estimate - v).abs() <= 3.0 * mc.stderr, "{mc:?} vs {v}");
}

#[test]
fn volume_scales_with_fourth_power() {
    let s = build_n_closed_profiles(auto_c(), 0.25).unwrap();
    let v = volume_closed(&s).unwrap();
    let v2 = volume_closed(&s.rescaled(2.0).unwrap()).unwrap();
    assert!((v2 / v - 16.0).abs() < 1e-8);
}

#[test]
fn monte_carlo_matches_quadrature() {
    for spec in [unit_s4(), flat_ball(), build_n_closed_profiles(auto_c(), 0.25).unwrap()] {
        let exact = volume_closed(&spec).unwrap();
        let mc = volume_mc(&spec, 100_000, 17).unwrap();
        assert!((mc.estimate - exact).abs() <= 3.0 * mc.stderr, "{:?}: {mc:?} vs {exact}", spec.kind);
    }
}

#[test]
fn unbounded_volume_is_unsupported() {
    let spec = build_n_profiles(4, 0.01).unwrap();
    assert!(matches!(volume_closed(&spec), Err(ricci_forge::Error::Unsupported(_))));
}
