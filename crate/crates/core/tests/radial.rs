use std::f64::consts::PI;

use layerspec::radial::{RadialModel, RadialOperator};
use layerspec::resonance::PotentialProfile;

fn oscillator() -> RadialModel {
    RadialModel::new(1.0, |r| r * r, 7.5)
}

#[test]
fn harmonic_oscillator_levels() {
    let m = oscillator();
    let sp = m.spectrum(&RadialOperator::Free, 0.0, 8.5, 5).unwrap();
    let vals: Vec<f64> = sp.iter().map(|e| e.value).collect();
    let exact = [2.0, 4.0, 4.0, 6.0, 6.0, 6.0, 8.0, 8.0, 8.0, 8.0];
    assert_eq!(vals.len(), exact.len());
    for (a, b) in vals.iter().zip(exact) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn unit_disk_dirichlet() {
    let m = RadialModel::new(1.0, |_| 0.0, 1.3);
    let v = m.eigenvalues(&RadialOperator::Split, 0, 0.0, 6.0).unwrap();
    // only j_{0,1}^2; the thin exterior annulus starts near (pi / 0.3)^2
    assert!((v[0] - 5.783185962946784).abs() < 1e-7, "{v:?}");
}

#[test]
fn transparent_limit_is_free_operator() {
    let m = oscillator();
    for op in [RadialOperator::Limit { theta: 1.0, upsilon: 0.0 }, RadialOperator::Limit { theta: -1.0, upsilon: 0.0 }] {
        let v = m.eigenvalues(&op, 1, 0.0, 9.0).unwrap();
        assert_eq!(v.len(), 2);
        assert!((v[0] - 4.0).abs() < 1e-7 && (v[1] - 8.0).abs() < 1e-7, "{v:?}");
    }
}

#[test]
fn split_oscillator_exact_values() {
    // (1 - rho^2) exp(-rho^2/2) solves the m = 0 problem at lambda = 6 and
    // vanishes at rho = 1, both inside and outside.
    let m = oscillator();
    let v = m.eigenvalues(&RadialOperator::Split, 0, 5.0, 7.0).unwrap();
    assert_eq!(v.len(), 2);
    assert!((v[0] - 6.0).abs() < 1e-7 && (v[1] - 6.0).abs() < 1e-7, "{v:?}");
}

#[test]
fn layer_converges_towards_limit() {
    let m = oscillator();
    let well = PotentialProfile::constant(-PI * PI / 4.0);
    let v = m.eigenvalues(&RadialOperator::Layer { profile: well, epsilon: 0.1 }, 0, 0.0, 3.0).unwrap();
    assert_eq!(v.len(), 1);
    // independent shooting value
    assert!((v[0] - 2.138693).abs() < 2e-6, "{v:?}");
}

#[test]
fn nonresonant_layer_values() {
    let m = oscillator();
    let bump = PotentialProfile::constant(1.0);
    let op = RadialOperator::Layer { profile: bump, epsilon: 0.05 };
    let v0 = m.eigenvalues(&op, 0, 0.0, 6.2).unwrap();
    assert_eq!(v0.len(), 2);
    assert!((v0[0] - 5.893545).abs() < 2e-6 && (v0[1] - 6.07852).abs() < 2e-6, "{v0:?}");
    let v1 = m.eigenvalues(&op, 1, 0.0, 6.5).unwrap();
    assert!((v1[0] - 6.288208).abs() < 2e-6, "{v1:?}");
}

#[test]
fn delta_interaction_matches_closed_form() {
    // W = 0 in a Dirichlet disk of radius 2; a weak delta on the unit
    // circle pushes the ground state up by O(upsilon).
    let m = RadialModel::new(1.0, |_| 0.0, 2.0);
    let free = m.eigenvalues(&RadialOperator::Free, 0, 0.0, 4.0).unwrap();
    let small = m.eigenvalues(&RadialOperator::Limit { theta: 1.0, upsilon: 1e-6 }, 0, 0.0, 4.0).unwrap();
    assert!((free[0] - (2.404825557695773f64 / 2.0).powi(2)).abs() < 1e-7);
    assert!(small[0] > free[0] && small[0] - free[0] < 1e-5);
}
