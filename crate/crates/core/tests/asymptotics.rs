use std::f64::consts::PI;
use std::sync::Arc;

use layerspec::assembly::{assemble_heps, assemble_limit};
use layerspec::asymptotics::{
    build_quasimode, eigenvalues_within, quasimode_residual, quasimode_residual_at, run_convergence, zeta, Backend,
    ClosureField, ConvergenceSetup, DiscreteField, QuasimodeOptions,
};
use layerspec::eigensolve::{solve, SolveOptions};
use layerspec::geometry::{reparametrize_arclength, ClosedCurve, CurveFrame};
use layerspec::mesh::{build_mesh, MeshKind, ModelConfig, Potential2d};
use layerspec::resonance::{compute_transmission, detect_resonance, PotentialProfile};
use layerspec::Error;
use proptest::prelude::*;

fn circle() -> Arc<CurveFrame> {
    Arc::new(reparametrize_arclength(&ClosedCurve::circle(1.0, [0.0, 0.0]), 256).unwrap())
}

fn harmonic() -> Potential2d {
    Arc::new(|x| x[0] * x[0] + x[1] * x[1])
}

fn gauss(scale: f64) -> impl Fn([f64; 2]) -> (f64, [f64; 2]) + Clone + Send + Sync + 'static {
    move |x| {
        let e = scale * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
        (e, [-x[0] * e, -x[1] * e])
    }
}

/// Ground state of the oscillator, sign-flipped outside the unit circle.
fn flipped_ground(scale: f64) -> ClosureField {
    let g = gauss(scale);
    let h = g.clone();
    ClosureField::new(g, move |x| {
        let (v, d) = h(x);
        (-v, [-d[0], -d[1]])
    })
}

fn well() -> PotentialProfile {
    PotentialProfile::constant(-PI * PI / 4.0)
}

struct Case {
    cfg: ModelConfig,
    mesh: layerspec::mesh::InterfaceMesh,
}

fn case(profile: PotentialProfile, eps: f64) -> Case {
    let cfg = ModelConfig::new(circle(), harmonic(), profile, eps, 5.0);
    let mesh = build_mesh(&cfg, MeshKind::Layer).unwrap();
    Case { cfg, mesh }
}

#[test]
fn cutoff_plateau_and_support() {
    let beta = 0.4;
    for i in 0..=100 {
        let t = 0.2 * i as f64 / 100.0;
        assert_eq!(zeta(beta, t), 1.0);
    }
    for t in [-0.1, -1e-12, 0.4, 0.41, 3.0] {
        assert_eq!(zeta(beta, t), 0.0);
    }
}

#[test]
fn resonant_layer_profiles_satisfy_initial_conditions() {
    let p = well().with_tangential(|s, n| 0.3 * s.cos() * (1.0 + n));
    let c = case(p.clone(), 0.1);
    let f = &c.cfg.frame;
    let hb = detect_resonance(&p, 1e-8).unwrap();
    let t = compute_transmission(&p, &hb, &f.s, &f.kappa, f.length).unwrap();
    let q = build_quasimode(2.0, &flipped_ground(1.0), &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions { solvability_tol: 1.0, ..Default::default() }).unwrap();
    assert!(q.resonant);
    for j in 0..q.s.len() {
        assert!(q.v1[j].values[0].abs() < 1e-14);
        assert!(q.v2[j].values[0].abs() < 1e-14 && q.v2[j].derivs[0].abs() < 1e-14);
        // v0 = u^- h
        let h = hb.solution.values.last().unwrap();
        assert!((q.v0[j].end_value() - q.u_minus[j] * h).abs() < 1e-10);
    }
}

#[test]
fn nonresonant_quasimode_has_no_leading_layer_term() {
    let level6 = |x: [f64; 2]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let e = (-r2 / 2.0).exp();
        ((1.0 - r2) * e, [x[0] * (r2 - 3.0) * e, x[1] * (r2 - 3.0) * e])
    };
    let field = ClosureField::new(level6, |_| (0.0, [0.0, 0.0]));
    let p = PotentialProfile::constant(1.0);
    let c = case(p.clone(), 0.1);
    let hb = detect_resonance(&p, 1e-8).unwrap();
    let q = build_quasimode(6.0, &field, &c.cfg, &hb, None, &c.mesh, &QuasimodeOptions::default()).unwrap();
    assert!(!q.resonant);
    for v in &q.v0 {
        assert!(v.values.iter().all(|x| *x == 0.0));
    }
    for (j, v) in q.v1.iter().enumerate() {
        // Neumann data of the inner field at both ends
        assert!((v.derivs[0] - q.dr_minus[j]).abs() < 1e-8 * (1.0 + q.dr_minus[j].abs()));
        assert!((v.end_deriv() - q.dr_plus[j]).abs() < 1e-8 * (1.0 + q.dr_minus[j].abs()));
    }
}

#[test]
fn cutoff_must_fit_in_the_reach() {
    let c = case(well(), 0.1);
    let f = &c.cfg.frame;
    let hb = detect_resonance(&well(), 1e-8).unwrap();
    let t = compute_transmission(&well(), &hb, &f.s, &f.kappa, f.length).unwrap();
    let opts = QuasimodeOptions { beta: Some(0.5), ..Default::default() };
    let r = build_quasimode(2.0, &flipped_ground(1.0), &c.cfg, &hb, Some(&t), &c.mesh, &opts);
    assert!(matches!(r, Err(Error::Config(_))));
    let imesh = build_mesh(&c.cfg, MeshKind::Interface).unwrap();
    let r = build_quasimode(2.0, &flipped_ground(1.0), &c.cfg, &hb, Some(&t), &imesh, &QuasimodeOptions::default());
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn inconsistent_limit_pair_is_rejected() {
    // the unflipped Gaussian violates u+ = -u-
    let g = gauss(1.0);
    let field = ClosureField::new(g.clone(), g);
    let c = case(well(), 0.1);
    let f = &c.cfg.frame;
    let hb = detect_resonance(&well(), 1e-8).unwrap();
    let t = compute_transmission(&well(), &hb, &f.s, &f.kappa, f.length).unwrap();
    let r = build_quasimode(2.0, &field, &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions::default());
    assert!(matches!(r, Err(Error::Numerical(_))));
}

#[test]
fn residual_certifies_nearby_eigenvalues() {
    let hb = detect_resonance(&well(), 1e-8).unwrap();
    let mut jumps = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let c = case(well(), eps);
        let f = &c.cfg.frame;
        let t = compute_transmission(&well(), &hb, &f.s, &f.kappa, f.length).unwrap();
        let op = assemble_heps(&c.mesh, &c.cfg).unwrap();
        let q = build_quasimode(2.0, &flipped_ground(1.0), &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions::default()).unwrap();
        let r = quasimode_residual(&q, &op).unwrap();
        assert!(eigenvalues_within(&op, 2.0, r).unwrap() >= 1, "eps {eps}: no eigenvalue within {r}");
        assert!(quasimode_residual_at(&q, &op, 3.0).unwrap() > r);
        // rescaled limit field gives the same residual
        let q3 = build_quasimode(2.0, &flipped_ground(3.0), &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions::default()).unwrap();
        assert!((quasimode_residual(&q3, &op).unwrap() - r).abs() < 1e-9 * r);
        let j = q.jumps;
        jumps.push(j.value_plus.max(j.value_minus) + eps * j.deriv_plus.max(j.deriv_minus));
    }
    // jumps shrink at least linearly in eps
    for w in jumps.windows(2) {
        assert!(w[0] / w[1] > 1.4, "{jumps:?}");
    }
}

#[test]
fn free_layer_is_linear_in_n() {
    let zero = PotentialProfile::constant(0.0);
    let hb = detect_resonance(&zero, 1e-8).unwrap();
    let g = gauss(1.0);
    let field = ClosureField::new(g.clone(), g.clone());
    let slope = (-0.5f64).exp();
    let mut res = Vec::new();
    for eps in [0.1, 0.05] {
        let c = case(zero.clone(), eps);
        let f = &c.cfg.frame;
        let t = compute_transmission(&zero, &hb, &f.s, &f.kappa, f.length).unwrap();
        let op = assemble_heps(&c.mesh, &c.cfg).unwrap();
        let mut q = build_quasimode(2.0, &field, &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions::default()).unwrap();
        for (j, v) in q.v0.iter().enumerate() {
            assert!(v.values.iter().all(|x| (x - q.u_minus[j]).abs() < 1e-12));
        }
        let m = q.v1[0].values.len() - 1;
        for (j, v) in q.v1.iter().enumerate() {
            for (i, x) in v.values.iter().enumerate() {
                let n = -1.0 + 2.0 * i as f64 / m as f64;
                assert!((x - q.dr_minus[j] * (n + 1.0)).abs() < 1e-10);
            }
        }
        // the expansion is anchored at r = -eps, so the jumps are eps |d_r u|
        for jv in [q.jumps.value_plus, q.jumps.value_minus] {
            assert!((jv - eps * slope).abs() < 0.05 * eps * slope, "{:?}", q.jumps);
        }
        // the exact eigenfunction itself has residual at the mesh error
        q.nodal = c.mesh.nodes.iter().map(|x| g(*x).0).collect();
        res.push(quasimode_residual_at(&q, &op, 2.0).unwrap());
    }
    assert!(res.iter().all(|r| *r < 0.05), "{res:?}");
    assert!((res[0] - res[1]).abs() < 0.5 * res[0], "{res:?}");
}

#[test]
fn discrete_limit_pair_drives_the_quasimode() {
    let c = case(well(), 0.1);
    let f = &c.cfg.frame;
    let hb = detect_resonance(&well(), 1e-8).unwrap();
    let t = compute_transmission(&well(), &hb, &f.s, &f.kappa, f.length).unwrap();
    let imesh = build_mesh(&c.cfg, MeshKind::Interface).unwrap();
    let lim = assemble_limit(&imesh, &c.cfg, &t).unwrap();
    let r = solve(&lim.k, &lim.m, &SolveOptions::lowest(1)).unwrap();
    let nodal = lim.dofs.expand(&r.eigenvectors[0]);
    let field = DiscreteField::new(Arc::new(imesh), nodal).unwrap();
    let opts = QuasimodeOptions { solvability_tol: 0.1, ..Default::default() };
    let q = build_quasimode(r.eigenvalues[0], &field, &c.cfg, &hb, Some(&t), &c.mesh, &opts).unwrap();
    let op = assemble_heps(&c.mesh, &c.cfg).unwrap();
    let res = quasimode_residual(&q, &op).unwrap();
    let exact = build_quasimode(2.0, &flipped_ground(1.0), &c.cfg, &hb, Some(&t), &c.mesh, &QuasimodeOptions::default()).unwrap();
    let res_exact = quasimode_residual(&exact, &op).unwrap();
    assert!((res - res_exact).abs() < 0.1 * res_exact, "{res} vs {res_exact}");
}

#[test]
fn zero_profile_convergence_is_at_the_noise_floor() {
    let mut setup = ConvergenceSetup::new(circle(), harmonic(), PotentialProfile::constant(0.0), vec![0.2, 0.1, 0.05], 5.0);
    setup.w_radial = Some(Arc::new(|r| r * r));
    let rep = run_convergence(&setup, &[Backend::Radial]).unwrap();
    assert!(rep.resonant);
    assert_eq!(rep.limit, "transmission");
    for row in &rep.rows {
        assert!(row.gap < 1e-6, "{row:?}");
    }
}

#[test]
fn radial_backend_needs_radial_w() {
    let setup = ConvergenceSetup::new(circle(), harmonic(), well(), vec![0.2, 0.1], 5.0);
    assert!(matches!(run_convergence(&setup, &[Backend::Radial]), Err(Error::Unsupported(_))));
    let mut bad = ConvergenceSetup::new(circle(), harmonic(), well(), vec![0.1, 0.2], 5.0);
    bad.w_radial = Some(Arc::new(|r| r * r));
    assert!(matches!(run_convergence(&bad, &[Backend::Radial]), Err(Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cutoff_is_monotone_and_bounded(beta in 0.01f64..2.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (za, zb) = (zeta(beta, lo * beta), zeta(beta, hi * beta));
        prop_assert!((0.0..=1.0).contains(&za));
        prop_assert!(zb <= za);
    }
}
