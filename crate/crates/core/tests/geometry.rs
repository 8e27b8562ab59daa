use std::f64::consts::PI;

use layerspec::geometry::{reparametrize_arclength, ClosedCurve, Orientation, TubularMap};
use proptest::prelude::*;

#[test]
fn circle_frame_is_clockwise_with_unit_curvature() {
    for ccw in [true, false] {
        let curve = if ccw {
            ClosedCurve::circle(1.0, [0.0, 0.0])
        } else {
            ClosedCurve::from_fn(|t| [t.cos(), -t.sin()], 2.0 * PI).unwrap()
        };
        let f = reparametrize_arclength(&curve, 256).unwrap();
        assert_eq!(f.orientation, Orientation::Outward);
        assert!((f.length - 2.0 * PI).abs() < 1e-12);
        for k in &f.kappa {
            assert!((k + 1.0).abs() < 1e-10);
        }
        assert!((f.total_curvature() + 2.0 * PI).abs() < 1e-10);
        assert!((f.eps_star - 1.0).abs() < 1e-8);
        assert!(f.signed_area() < 0.0);
        // outward normal at every sample
        for (p, nu) in f.points.iter().zip(&f.normals) {
            assert!((p[0] * nu[0] + p[1] * nu[1] - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn ellipse_length_and_reach() {
    let f = reparametrize_arclength(&ClosedCurve::ellipse(2.0, 1.0), 512).unwrap();
    // perimeter by the periodic trapezoid rule on the native parameter
    let m = 4000;
    let per: f64 = (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64;
    assert!((f.length - per).abs() < 1e-10);
    assert!((f.eps_star - 0.5).abs() < 1e-4);
    assert!((f.total_curvature() + 2.0 * PI).abs() < 1e-8);
    assert!((f.signed_area() + 2.0 * PI).abs() < 1e-9);
    let c = f.centroid();
    assert!(c[0].abs() < 1e-10 && c[1].abs() < 1e-10);
    // samples are equally spaced in arc length
    let ds = f.length / f.len() as f64;
    for j in 0..f.len() {
        let a = f.points[j];
        let b = f.points[(j + 1) % f.len()];
        assert!(((a[0] - b[0]).hypot(a[1] - b[1]) - ds).abs() < 1e-4 * ds);
    }
}

#[test]
fn flipped_frame_negates_curvature() {
    let f = reparametrize_arclength(&ClosedCurve::ellipse(2.0, 1.0), 128).unwrap();
    let g = f.flipped();
    assert_eq!(g.orientation, Orientation::Inward);
    assert!((g.total_curvature() - 2.0 * PI).abs() < 1e-8);
    for s in [0.1, 1.7, 4.2] {
        let a = f.eval(s);
        let b = g.eval(f.length - s);
        assert!((a.kappa + b.kappa).abs() < 1e-9);
        assert!((a.normal[0] + b.normal[0]).abs() < 1e-9);
        assert!((a.point[0] - b.point[0]).abs() < 1e-12);
    }
}

#[test]
fn open_and_degenerate_curves_rejected() {
    assert!(ClosedCurve::from_fn(|t| [t, 0.0], 1.0).is_err());
    assert!(ClosedCurve::from_exprs("cos(t)", "sin(t)", 3.0).is_err());
    let c = ClosedCurve::from_fn(|_| [1.0, 1.0], 1.0).unwrap();
    assert!(reparametrize_arclength(&c, 64).is_err());
    assert!(ClosedCurve::from_samples(vec![[0.0, 0.0]; 3]).is_err());
}

#[test]
fn sampled_curve_matches_analytic() {
    let pts: Vec<[f64; 2]> = (0..=200)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / 200.0;
            [1.5 * t.cos(), t.sin()]
        })
        .collect();
    let f = reparametrize_arclength(&ClosedCurve::from_samples(pts).unwrap(), 128).unwrap();
    let g = reparametrize_arclength(&ClosedCurve::ellipse(1.5, 1.0), 128).unwrap();
    assert!((f.length - g.length).abs() < 1e-10);
    assert!((f.eps_star - g.eps_star).abs() < 1e-8);
}

#[test]
fn tubular_width_is_checked() {
    let f = reparametrize_arclength(&ClosedCurve::circle(1.0, [0.0, 0.0]), 64).unwrap();
    assert!(TubularMap::new(&f, 1.2).is_err());
    let t = TubularMap::new(&f, 0.5).unwrap();
    assert!(t.inverse([0.0, 0.0]).is_err());
    assert!(t.inverse([1.6, 0.0]).is_err());
    let (s, r) = t.inverse([0.0, 1.2]).unwrap();
    assert!((r - 0.2).abs() < 1e-12);
    let p = f.eval(s).point;
    assert!(p[0].abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tubular_round_trip_on_ellipse(s in 0.0f64..9.68, r in -0.45f64..0.45) {
        let f = reparametrize_arclength(&ClosedCurve::ellipse(2.0, 1.0), 256).unwrap();
        let t = TubularMap::new(&f, 0.49).unwrap();
        let s = s % f.length;
        let x = t.forward(s, r);
        let (s2, r2) = t.inverse(x).unwrap();
        let ds = (s2 - s).abs().min(f.length - (s2 - s).abs());
        prop_assert!(ds < 1e-8 * f.length);
        prop_assert!((r2 - r).abs() < 1e-8 * f.length);
    }

    #[test]
    fn frenet_relation_holds(s in 0.0f64..9.0) {
        // d(nu)/ds = -kappa * tangent
        let f = reparametrize_arclength(&ClosedCurve::ellipse(2.0, 1.0), 256).unwrap();
        let h = 1e-5;
        let a = f.eval(s - h);
        let b = f.eval(s + h);
        let m = f.eval(s);
        for i in 0..2 {
            let dn = (b.normal[i] - a.normal[i]) / (2.0 * h);
            prop_assert!((dn + m.kappa * m.tangent[i]).abs() < 1e-6);
        }
    }
}
