use std::f64::consts::PI;
use std::sync::Arc;

use layerspec::assembly::{
    assemble_dirichlet_split, assemble_heps, assemble_limit, distributional_limit_check, Operator,
};
use layerspec::eigensolve::{solve, EnvelopeLdl, SolveOptions};
use layerspec::geometry::{reparametrize_arclength, ClosedCurve, CurveFrame};
use layerspec::mesh::{build_mesh, MeshKind, ModelConfig, Potential2d, Region, Side};
use layerspec::radial::{RadialModel, RadialOperator};
use layerspec::resonance::{compute_transmission, detect_resonance, PotentialProfile};
use layerspec::Error;
use proptest::prelude::*;

fn circle(r: f64) -> Arc<CurveFrame> {
    Arc::new(reparametrize_arclength(&ClosedCurve::circle(r, [0.0, 0.0]), 256).unwrap())
}

fn harmonic() -> Potential2d {
    Arc::new(|x| x[0] * x[0] + x[1] * x[1])
}

fn config(profile: PotentialProfile, eps: f64) -> ModelConfig {
    ModelConfig::new(circle(1.0), harmonic(), profile, eps, 5.0)
}

fn lowest(op: &Operator, k: usize) -> Vec<f64> {
    solve(&op.k, &op.m, &SolveOptions::lowest(k)).unwrap().eigenvalues
}

fn check_matrices(op: &Operator) {
    let kmax = op.k.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(op.k.asymmetry() <= 1e-12 * kmax, "{}: K asymmetric", op.label);
    assert!(op.m.asymmetry() <= 1e-12, "{}: M asymmetric", op.label);
    let ldl = EnvelopeLdl::factor(&op.m).unwrap();
    assert_eq!(ldl.negative_count(), 0, "{}: M not positive definite", op.label);
}

#[test]
fn circle_layer_mesh_contract() {
    let mut cfg = ModelConfig::new(circle(1.0), harmonic(), PotentialProfile::constant(1.0), 0.1, 4.0);
    cfg.density.s_cells = 96;
    cfg.density.layer_cells = 16;
    let mesh = build_mesh(&cfg, MeshKind::Layer).unwrap();
    let layer = mesh.regions.iter().filter(|r| **r == Region::Layer).count();
    // each structured cell is split into two triangles
    assert_eq!(layer, 2 * 96 * 16);
    for t in 0..mesh.triangles.len() {
        assert!(mesh.triangle_area(t) > 0.0, "triangle {t} is inverted");
    }
    assert!((mesh.total_area() - 64.0).abs() < 1e-9);
    for [a, b] in &mesh.interface_edges {
        for &i in [a, b] {
            let x = mesh.nodes[i];
            assert!((x[0].hypot(x[1]) - 1.0).abs() < 1e-10);
        }
    }
    assert!(!mesh.interface_edges.is_empty());
}

#[test]
fn interface_mesh_duplicates_curve_nodes() {
    let cfg = config(PotentialProfile::constant(1.0), 0.1);
    let mesh = build_mesh(&cfg, MeshKind::Interface).unwrap();
    assert_eq!(mesh.duplicates.len(), cfg.density.s_cells);
    for &[m, p] in &mesh.duplicates {
        assert_eq!(mesh.nodes[m], mesh.nodes[p]);
        assert_eq!(mesh.node_side[m], Side::Minus);
        assert_eq!(mesh.node_side[p], Side::Plus);
        assert!((mesh.nodes[m][0].hypot(mesh.nodes[m][1]) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn layer_width_is_checked_against_reach() {
    let e = Arc::new(reparametrize_arclength(&ClosedCurve::ellipse(2.0, 1.0), 256).unwrap());
    let mk = |eps| ModelConfig::new(e.clone(), harmonic(), PotentialProfile::constant(1.0), eps, 5.0);
    assert!(build_mesh(&mk(0.2), MeshKind::Layer).is_ok());
    assert!(matches!(build_mesh(&mk(0.3), MeshKind::Layer), Err(Error::Config(_))));
}

#[test]
fn refinement_quadruples_elements() {
    let mut cfg = config(PotentialProfile::constant(1.0), 0.1);
    let coarse = build_mesh(&cfg, MeshKind::Layer).unwrap().triangles.len();
    cfg.density.refinement = 1;
    let fine = build_mesh(&cfg, MeshKind::Layer).unwrap().triangles.len();
    let ratio = fine as f64 / coarse as f64;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn assembled_forms_are_symmetric_and_mass_is_definite() {
    let well = PotentialProfile::constant(-PI * PI / 4.0).with_tangential(|s, n| s.cos() * (1.0 + n));
    let cfg = config(well.clone(), 0.1);
    let layer = build_mesh(&cfg, MeshKind::Layer).unwrap();
    check_matrices(&assemble_heps(&layer, &cfg).unwrap());
    let iface = build_mesh(&cfg, MeshKind::Interface).unwrap();
    let f = &cfg.frame;
    let hb = detect_resonance(&well, 1e-8).unwrap();
    let t = compute_transmission(&well, &hb, &f.s, &f.kappa, f.length).unwrap();
    check_matrices(&assemble_limit(&iface, &cfg, &t).unwrap());
    let split = assemble_dirichlet_split(&iface, &cfg).unwrap();
    check_matrices(&split.minus);
    check_matrices(&split.plus);
}

#[test]
fn oscillator_ground_state() {
    let cfg = config(PotentialProfile::constant(0.0), 0.1);
    let mesh = build_mesh(&cfg, MeshKind::Layer).unwrap();
    let l = lowest(&assemble_heps(&mesh, &cfg).unwrap(), 1);
    assert!((l[0] - 2.0).abs() < 2e-3, "{l:?}");
}

#[test]
fn zero_profile_does_not_depend_on_eps() {
    let a = config(PotentialProfile::constant(0.0), 0.1);
    let b = config(PotentialProfile::constant(0.0), 0.05);
    let la = lowest(&assemble_heps(&build_mesh(&a, MeshKind::Layer).unwrap(), &a).unwrap(), 4);
    let lb = lowest(&assemble_heps(&build_mesh(&b, MeshKind::Layer).unwrap(), &b).unwrap(), 4);
    for (x, y) in la.iter().zip(&lb) {
        assert!((x - y).abs() < 2e-3 * y, "{la:?} vs {lb:?}");
    }
}

#[test]
fn transparent_limit_is_the_free_operator() {
    let zero = PotentialProfile::constant(0.0);
    let cfg = config(zero.clone(), 0.1);
    let f = &cfg.frame;
    let hb = detect_resonance(&zero, 1e-8).unwrap();
    let t = compute_transmission(&zero, &hb, &f.s, &f.kappa, f.length).unwrap();
    assert_eq!(t.theta, 1.0);
    assert!(t.upsilon.iter().all(|u| u.abs() < 1e-14));
    let lim = lowest(&assemble_limit(&build_mesh(&cfg, MeshKind::Interface).unwrap(), &cfg, &t).unwrap(), 6);
    let free = lowest(&assemble_heps(&build_mesh(&cfg, MeshKind::Layer).unwrap(), &cfg).unwrap(), 6);
    for (x, y) in lim.iter().zip(&free) {
        assert!((x - y).abs() < 2e-3 * y, "{lim:?} vs {free:?}");
    }
}

#[test]
fn sign_flip_condition_matches_radial_oracle() {
    // theta = -1 and, with U = 0 and theta^2 = 1, Upsilon = 0
    let well = PotentialProfile::constant(-PI * PI / 4.0);
    let cfg = config(well.clone(), 0.1);
    let f = &cfg.frame;
    let hb = detect_resonance(&well, 1e-8).unwrap();
    let t = compute_transmission(&well, &hb, &f.s, &f.kappa, f.length).unwrap();
    let fem = lowest(&assemble_limit(&build_mesh(&cfg, MeshKind::Interface).unwrap(), &cfg, &t).unwrap(), 4);
    let model = RadialModel::new(1.0, |r| r * r, 6.0);
    let radial: Vec<f64> = model
        .spectrum(&RadialOperator::Limit { theta: -1.0, upsilon: 0.0 }, 0.0, 9.0, 6)
        .unwrap()
        .iter()
        .map(|e| e.value)
        .collect();
    for (x, y) in fem.iter().zip(&radial) {
        assert!((x - y).abs() < 5e-3 * y, "{fem:?} vs {radial:?}");
    }
}

#[test]
fn split_ignores_transmission_data() {
    let a = config(PotentialProfile::constant(1.0), 0.1);
    let b = config(PotentialProfile::constant(-PI * PI / 4.0).with_tangential(|_, _| 3.0), 0.1);
    let mesh = build_mesh(&a, MeshKind::Interface).unwrap();
    let sa = assemble_dirichlet_split(&mesh, &a).unwrap();
    let sb = assemble_dirichlet_split(&mesh, &b).unwrap();
    assert_eq!(sa.minus.k.data, sb.minus.k.data);
    assert_eq!(sa.plus.k.data, sb.plus.k.data);
}

#[test]
fn mollified_constant_tends_to_single_layer() {
    let f = circle(1.0);
    let phi = |x: [f64; 2]| (-(x[0] - 1.0).powi(2) - x[1] * x[1]).exp();
    let p = PotentialProfile::constant(0.0).with_tangential(|_, _| 0.75);
    let r = distributional_limit_check(&p, &f, &phi, &[0.1, 0.05, 0.025]).unwrap();
    assert!(!r.divergent);
    assert!((r.mu1).abs() < 1e-14);
    // mu0 = 1.5; int_gamma phi by direct quadrature
    let n = 4096;
    let line: f64 = (0..n).map(|j| phi(f.eval(f.length * j as f64 / n as f64).point)).sum::<f64>() * f.length / n as f64;
    assert!((r.predicted - 1.5 * line).abs() < 1e-10);
    assert!(r.rows.windows(2).all(|w| w[1].error < w[0].error));
}

#[test]
fn nonzero_mean_diverges_like_inverse_eps() {
    let f = circle(1.0);
    let phi = |x: [f64; 2]| (-(x[0] - 1.0).powi(2) - x[1] * x[1]).exp();
    let p = PotentialProfile::new(|n| 1.0 - n * n);
    let r = distributional_limit_check(&p, &f, &phi, &[0.1, 0.05, 0.025]).unwrap();
    assert!(r.divergent);
    assert!((r.integral_v - 4.0 / 3.0).abs() < 1e-10);
    let last = r.rows.last().unwrap();
    assert!((last.scaled - r.divergent_coefficient).abs() < 0.02 * r.divergent_coefficient.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn layer_meshes_are_valid(radius in 0.6f64..2.0, frac in 0.05f64..0.45) {
        let f = circle(radius);
        let eps = frac * f.eps_star;
        let mut cfg = ModelConfig::new(f, harmonic(), PotentialProfile::constant(1.0), eps, radius + 3.0);
        cfg.density.s_cells = 48;
        cfg.density.layer_cells = 8;
        let mesh = build_mesh(&cfg, MeshKind::Layer).unwrap();
        for t in 0..mesh.triangles.len() {
            prop_assert!(mesh.triangle_area(t) > 0.0);
        }
        for [a, b] in &mesh.interface_edges {
            for &i in [a, b] {
                let x = mesh.nodes[i];
                prop_assert!((x[0].hypot(x[1]) - radius).abs() < 1e-10 * radius);
            }
        }
        let area = (2.0 * (radius + 3.0)).powi(2);
        prop_assert!((mesh.total_area() - area).abs() < 1e-9 * area);
    }
}
