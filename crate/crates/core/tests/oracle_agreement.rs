use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_forge::curvature::{berger_conditions, ricci_warped, BergerMetric, WarpedMetric};
use ricci_forge::oracle::{christoffel, ricci_eigenvalues, ricci_tensor, ChartMetric, DEFAULT_STEP};
use ricci_forge::profiles::ScalarProfile;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn eguchi_hanson_is_ricci_flat() {
    let chart = ChartMetric::eguchi_hanson(1.0, 0.05).unwrap();
    let ric = ricci_tensor(&chart, &[2.0, PI / 3.0, 1.0, 2.0], DEFAULT_STEP).unwrap();
    assert!(ric.amax() <= 1e-4, "{}", ric.amax());
}

#[test]
fn eguchi_hanson_christoffel_matches_analytic_derivatives() {
    // Γ^r_{rr} = ½ g^{rr} ∂_r g_rr with g_rr = 1/(1 - r⁻⁴)
    let r: f64 = 2.0;
    let f = 1.0 - r.powi(-4);
    let grr = 1.0 / f;
    let dgrr = -(4.0 * r.powi(-5)) / (f * f);
    let chart = ChartMetric::eguchi_hanson(1.0, 0.05).unwrap();
    let g = christoffel(&chart, &[r, PI / 3.0, 1.0, 2.0], DEFAULT_STEP).unwrap();
    assert!((g.get(0, 0, 0) - 0.5 * dgrr / grr).abs() <= 1e-5);
    // Γ^r_{θθ} = −½ g^{rr} ∂_r g_θθ, g_θθ = r²/4 (σx² + σy² contribute dθ²/4)
    let expected = -0.5 / grr * (2.0 * r / 4.0);
    assert!((g.get(0, 1, 1) - expected).abs() <= 1e-5, "{} vs {expected}", g.get(0, 1, 1));
}

#[test]
fn warped_closed_form_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let amp = rng.gen_range(0.3..1.5);
        let freq = rng.gen_range(0.5..1.2);
        let off = rng.gen_range(0.5..1.0);
        let warp = ScalarProfile::sine(-10.0, 10.0, amp, freq, 0.2, amp + off).unwrap();
        let m = WarpedMetric::new(warp.clone(), 3, 1).unwrap();
        let r = rng.gen_range(0.2..3.0);
        let (a, b) = ricci_warped(&m, r).unwrap();
        let chart = ChartMetric::warped_s3("warp", (-10.0, 10.0), move |s| warp.value(s).unwrap());
        let eig = ricci_eigenvalues(&chart, &[r, 1.2, 2.0, 3.0], DEFAULT_STEP).unwrap();
        assert!(close(eig[0], a.min(b), 1e-4), "{eig:?} vs ({a}, {b})");
        let mut expected = [a, b, b, b];
        expected.sort_by(f64::total_cmp);
        for (x, y) in eig.iter().zip(expected) {
            assert!(close(*x, y, 1e-4), "{eig:?} vs {expected:?}");
        }
    }
}

#[test]
fn berger_conditions_match_oracle_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let rho = ScalarProfile::sine(-10.0, 10.0, rng.gen_range(0.1..0.5), rng.gen_range(0.3..1.5), rng.gen_range(0.0..3.0), 1.0)
            .unwrap();
        let phi = ScalarProfile::sine(-10.0, 10.0, rng.gen_range(0.1..0.5), rng.gen_range(0.3..1.5), rng.gen_range(0.0..3.0), 1.2)
            .unwrap();
        let m = BergerMetric::new(rho.clone(), phi.clone(), 1).unwrap();
        for _ in 0..10 {
            let r = rng.gen_range(-3.0..3.0);
            let (q1, q2, q3) = berger_conditions(&m, r).unwrap();
            let (p, f) = (rho.value(r).unwrap(), phi.value(r).unwrap());
            let mut expected = [q1, q2 / (p * p), q3 / (f * f), q3 / (f * f)];
            expected.sort_by(f64::total_cmp);
            let (rc, pc) = (rho.clone(), phi.clone());
            let chart = ChartMetric::berger("berger", (-10.0, 10.0), move |s| (rc.value(s).unwrap(), pc.value(s).unwrap()));
            let eig = ricci_eigenvalues(&chart, &[r, 0.6, 1.0, 2.0], DEFAULT_STEP).unwrap();
            for (x, y) in eig.iter().zip(expected) {
                assert!(close(*x, y, 1e-4), "{eig:?} vs {expected:?}");
            }
            let min_q = q1.min(q2).min(q3);
            if min_q.abs() > 1e-4 {
                assert_eq!(min_q > 0.0, eig[0] > 0.0);
            }
        }
    }
}

#[test]
fn model_metric_has_ricci_twelve() {
    // du²/(1+u²)² + u²/(1+u²)² ds₃², i.e. a quarter of the round S⁴ in u = tan(ρ/2)
    let u_chart = ChartMetric::radial_euler("model_u", (0.0, f64::INFINITY), 4.0 * PI, |u| {
        let w = 1.0 / (1.0 + u * u).powi(2);
        (w, u * u * w, u * u * w)
    });
    let at_one = ricci_eigenvalues(&u_chart, &[1.0, 1.0, 2.0, 3.0], DEFAULT_STEP).unwrap();
    assert!((at_one[0] - 12.0).abs() <= 1e-2);
    // the same geometry in the ρ-chart
    let rho_chart = ChartMetric::radial_euler("model_rho", (0.0, PI), 4.0 * PI, |rho| {
        let s = 0.25 * rho.sin().powi(2);
        (0.25, s, s)
    });
    let u: f64 = 0.7;
    let rho = 2.0 * u.atan();
    let a = ricci_eigenvalues(&u_chart, &[u, 1.0, 2.0, 3.0], DEFAULT_STEP).unwrap();
    let b = ricci_eigenvalues(&rho_chart, &[rho, 1.0, 2.0, 3.0], DEFAULT_STEP).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-3);
    }
}

#[test]
fn step_halving_converges() {
    let chart = ChartMetric::warped_s3("warp", (0.0, 5.0), |r| 0.5 * (r + 1.0) + 0.2 * (2.0 * r).sin());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let exact = |r: f64| {
        let p = ScalarProfile::sine(0.0, 5.0, 0.2, 2.0, 0.0, 0.0).unwrap();
        let lin = ScalarProfile::affine(0.0, 5.0, 0.5, 0.5).unwrap();
        let [v, d1, d2] = p.jet(r).unwrap();
        let [l, l1, _] = lin.jet(r).unwrap();
        let (f, f1, f2) = (v + l, d1 + l1, d2);
        let a = -3.0 * f2 / f;
        let b = -f2 / f + 2.0 * (1.0 - f1 * f1) / (f * f);
        a.min(b)
    };
    for _ in 0..5 {
        let r = rng.gen_range(0.5..4.0);
        let x = [r, 1.0, 2.0, 3.0];
        let e1 = (ricci_eigenvalues(&chart, &x, 4e-3).unwrap()[0] - exact(r)).abs();
        let e2 = (ricci_eigenvalues(&chart, &x, 2e-3).unwrap()[0] - exact(r)).abs();
        assert!(e2 * 3.0 <= e1 || e2 < 1e-9, "{e1} -> {e2}");
    }
}
