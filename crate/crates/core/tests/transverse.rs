use std::f64::consts::PI;

use layerspec::resonance::{
    compute_transmission, detect_resonance, profile_moments, scan_coupling, solve_h1, solve_h2, PotentialProfile,
    ResonanceSettings,
};
use proptest::prelude::*;

fn well() -> PotentialProfile {
    PotentialProfile::constant(-PI * PI / 4.0)
}

#[test]
fn constant_positive_profile_matches_cosh() {
    for c in [0.25f64, 1.0, 4.0] {
        let st = detect_resonance(&PotentialProfile::constant(c), 1e-8).unwrap();
        let k = c.sqrt();
        assert!((st.defect - k * (2.0 * k).sinh()).abs() < 1e-9 * (1.0 + st.defect.abs()));
        assert!((st.theta - (2.0 * k).cosh()).abs() < 1e-9 * st.theta);
        assert!(!st.resonant);
        let (v, dv) = st.eval(0.3);
        assert!((v - (k * 1.3).cosh()).abs() < 1e-9);
        assert!((dv - k * (k * 1.3).sinh()).abs() < 1e-8);
    }
}

#[test]
fn square_wells_are_resonant_with_alternating_theta() {
    for m in 1..=3 {
        let c = (m * m) as f64 * PI * PI / 4.0;
        let st = detect_resonance(&PotentialProfile::constant(-c), 1e-8).unwrap();
        assert!(st.resonant, "m = {m}, defect {}", st.defect);
        let expected = if m % 2 == 0 { 1.0 } else { -1.0 };
        assert!((st.theta - expected).abs() < 1e-9);
    }
    let st = detect_resonance(&PotentialProfile::constant(-2.0), 1e-8).unwrap();
    assert!(!st.resonant);
}

#[test]
fn h1_for_square_well() {
    let k = PI / 2.0;
    let h1 = solve_h1(&well(), &ResonanceSettings::default()).unwrap();
    for n in [-0.5, 0.0, 0.7] {
        let (v, _) = h1.eval(n);
        assert!((v - (k * (n + 1.0)).sin() / k).abs() < 1e-9);
    }
    assert!((h1.end_deriv() + 1.0).abs() < 1e-9);
}

#[test]
fn h2_closed_form_for_square_well() {
    // y'' + k^2 y = A sin(kx) + B cos(kx), x = n + 1, zero data:
    // y = -(A/2k) x cos(kx) + (B/2k) x sin(kx) + (A/2k^2) sin(kx).
    let k = PI / 2.0;
    let (kappa, u) = (-0.7, 1.3);
    let profile = well().with_tangential_n(move |_| u);
    let st = detect_resonance(&profile, 1e-8).unwrap();
    let sols = solve_h2(&profile, &st, &[0.0], &[kappa]).unwrap();
    let (a, b) = (kappa * k, -u);
    for n in [-0.3, 0.4, 1.0] {
        let x = n + 1.0;
        let exact = -(a / (2.0 * k)) * x * (k * x).cos() + (b / (2.0 * k)) * x * (k * x).sin()
            + a / (2.0 * k * k) * (k * x).sin();
        assert!((sols[0].eval(n).0 - exact).abs() < 1e-9, "n = {n}");
    }
    assert!((sols[0].end_deriv() - u).abs() < 1e-8);
}

#[test]
fn h2_requires_resonance() {
    let p = PotentialProfile::constant(1.0);
    let st = detect_resonance(&p, 1e-8).unwrap();
    assert!(solve_h2(&p, &st, &[0.0], &[1.0]).is_err());
    assert!(compute_transmission(&p, &st, &[0.0], &[1.0], 1.0).is_err());
}

#[test]
fn moments_of_odd_profile() {
    let p = PotentialProfile::new(|n| (PI * n).sin());
    let m = profile_moments(&p, &[0.0], 2048);
    assert!(m.integral_v.abs() < 1e-12);
    assert!((m.mu1 + 2.0 / PI).abs() < 1e-10);
}

#[test]
fn coupling_scan_of_unit_well() {
    let r = scan_coupling(&PotentialProfile::constant(-1.0), (-0.5, 12.0), 200, &ResonanceSettings::default()).unwrap();
    let expected = [0.0, PI * PI / 4.0, PI * PI];
    assert_eq!(r.roots.len(), 3, "{:?}", r.roots);
    for (a, b) in r.roots.iter().zip(expected) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(!r.degenerate);
}

#[test]
fn zero_profile_scan_is_degenerate() {
    let r = scan_coupling(&PotentialProfile::constant(0.0), (-1.0, 1.0), 10, &ResonanceSettings::default()).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.roots, vec![0.0]);
}

#[test]
fn bad_inputs_rejected() {
    let p = PotentialProfile::constant(1.0);
    assert!(scan_coupling(&p, (1.0, 0.0), 10, &ResonanceSettings::default()).is_err());
    assert!(scan_coupling(&p, (0.0, 1.0), 1, &ResonanceSettings::default()).is_err());
    assert!(detect_resonance(&p, 0.0).is_err());
    assert!(detect_resonance(&PotentialProfile::new(|n| 1.0 / n), 1e-8).is_err());
}

/// Asymmetric resonant profile `alpha * (-1 - n/2)` at its first positive root.
fn asymmetric() -> PotentialProfile {
    let base = PotentialProfile::new(|n| -1.0 - 0.5 * n);
    let r = scan_coupling(&base, (0.5, 6.0), 60, &ResonanceSettings::default()).unwrap();
    base.scaled(r.roots[0])
}

#[test]
fn transmission_identities_for_asymmetric_profile() {
    let p = asymmetric().with_tangential(|s, n| (1.0 + n) * s.cos());
    let st = detect_resonance(&p, 1e-8).unwrap();
    assert!(st.resonant);
    assert!((st.theta.abs() - 1.0).abs() > 0.05);
    let h1 = solve_h1(&p, &ResonanceSettings::default()).unwrap();
    assert!((h1.end_deriv() - 1.0 / st.theta).abs() < 1e-8);
    let s: Vec<f64> = (0..8).map(|j| j as f64 * 0.7).collect();
    let kappa: Vec<f64> = s.iter().map(|x| 0.3 * x.sin() - 0.5).collect();
    let t = compute_transmission(&p, &st, &s, &kappa, 5.6).unwrap();
    let h2 = solve_h2(&p, &st, &s, &kappa).unwrap();
    for (j, sol) in h2.iter().enumerate() {
        assert!((sol.end_deriv() + t.upsilon[j] / st.theta).abs() < 1e-6);
        assert!((t.upsilon[j] - (0.5 * (t.theta * t.theta - 1.0) * kappa[j] + t.mu[j])).abs() < 1e-14);
    }
}

#[test]
fn reflected_profile_gives_flipped_transmission() {
    let length = 4.0;
    let p = asymmetric().with_tangential(|s, n| (1.0 - n * n) * (1.0 + 0.5 * (s * PI / 2.0).sin()));
    let n = 16;
    let s: Vec<f64> = (0..n).map(|j| length * j as f64 / n as f64).collect();
    let kappa: Vec<f64> = s.iter().map(|x| -1.0 + 0.2 * (x * PI / 2.0).cos()).collect();
    let st = detect_resonance(&p, 1e-8).unwrap();
    let t = compute_transmission(&p, &st, &s, &kappa, length).unwrap();
    let q = p.reflected(length);
    let sq = detect_resonance(&q, 1e-8).unwrap();
    let kq: Vec<f64> = (0..n).map(|j| -kappa[(n - j) % n]).collect();
    let tq = compute_transmission(&q, &sq, &s, &kq, length).unwrap();
    let f = t.flipped();
    assert!((tq.theta - f.theta).abs() < 1e-8);
    assert!((tq.mu1 - f.mu1).abs() < 1e-10);
    for j in 0..n {
        assert!((tq.upsilon[j] - f.upsilon[j]).abs() < 1e-7, "{j}: {} vs {}", tq.upsilon[j], f.upsilon[j]);
        assert!((tq.mu0[j] - f.mu0[j]).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wronskian_and_energy_identities(a in -6.0f64..6.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let p = PotentialProfile::new(move |n| a + b * n + c * (3.0 * n).cos());
        let st = detect_resonance(&p, 1e-8).unwrap();
        let h1 = solve_h1(&p, &ResonanceSettings::default()).unwrap();
        for i in (0..st.solution.values.len()).step_by(97) {
            let w = st.solution.values[i] * h1.derivs[i] - st.solution.derivs[i] * h1.values[i];
            prop_assert!((w - 1.0).abs() < 1e-8 * (1.0 + st.max_abs * st.max_abs));
        }
        // int h h' = (h(1)^2 - 1) / 2
        let prod: Vec<f64> = st.solution.values.iter().zip(&st.solution.derivs).map(|(h, d)| h * d).collect();
        let integral = layerspec::resonance::simpson(&prod);
        prop_assert!((integral - 0.5 * (st.theta * st.theta - 1.0)).abs() < 1e-8 * (1.0 + st.theta * st.theta));
    }

    #[test]
    fn scaling_by_one_is_identity(a in -5.0f64..5.0) {
        let p = PotentialProfile::new(move |n| a * (1.0 - n * n));
        let s1 = detect_resonance(&p, 1e-8).unwrap();
        let s2 = detect_resonance(&p.scaled(1.0), 1e-8).unwrap();
        prop_assert_eq!(s1.defect, s2.defect);
    }
}
