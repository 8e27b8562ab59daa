use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CurveFrame;
use crate::quadrature::gauss_legendre;
use crate::resonance::{profile_moments, PotentialProfile};

#[derive(Debug, Clone, Serialize)]
pub struct DistLimitRow {
    pub epsilon: f64,
    /// `int V_eps phi dx`.
    pub integral: f64,
    /// `|integral - predicted|` (finite part only when `int V != 0`).
    pub error: f64,
    /// `eps * integral`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistLimitReport {
    pub rows: Vec<DistLimitRow>,
    /// `int_gamma (-mu1 d_nu phi + (mu1 kappa + mu0) phi) ds`.
    pub predicted: f64,
    pub integral_v: f64,
    pub mu1: f64,
    /// `int V dn * int_gamma phi ds`, the coefficient of `1/eps`.
    pub divergent_coefficient: f64,
    pub divergent: bool,
    /// Least-squares slope of `log error` against `log eps`.
    pub fitted_order: Option<f64>,
}

/// Compare `int V_eps phi` with its distributional limit for a smooth test
/// function over a list of `eps`.
pub fn distributional_limit_check(
    profile: &PotentialProfile,
    frame: &CurveFrame,
    phi: &(dyn Fn([f64; 2]) -> f64 + Sync),
    eps_list: &[f64],
) -> Result<DistLimitReport> {
    if eps_list.is_empty() {
        return Err(Error::Input("no epsilon values given".into()));
    }
    for &e in eps_list {
        if !(e > 0.0 && e < frame.eps_star) {
            return Err(Error::Input(format!("epsilon {e} outside (0, eps*)")));
        }
    }
    let ns = frame.len();
    let ds = frame.length / ns as f64;
    let moments = profile_moments(profile, &frame.s, 4096);
    let h = 1e-5;
    let mut predicted = 0.0;
    let mut phi_int = 0.0;
    for j in 0..ns {
        let p = frame.points[j];
        let nu = frame.normals[j];
        let f0 = phi(p);
        let dnu = (phi([p[0] + h * nu[0], p[1] + h * nu[1]]) - phi([p[0] - h * nu[0], p[1] - h * nu[1]])) / (2.0 * h);
        predicted += (-moments.mu1 * dnu + (moments.mu1 * frame.kappa[j] + moments.mu0[j]) * f0) * ds;
        phi_int += f0 * ds;
    }
    let divergent_coefficient = moments.integral_v * phi_int;
    let scale_v = {
        let mut m: f64 = 0.0;
        for i in 0..=100 {
            m = m.max(profile.v(-1.0 + i as f64 / 50.0).abs());
        }
        m
    };
    let divergent = moments.integral_v.abs() > 1e-10 * (1.0 + scale_v);
    // Gauss-Legendre in n; the profile may be discontinuous at the ends only.
    let (gx, gw) = gauss_legendre(64);
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut acc = 0.0;
        for j in 0..ns {
            let p = frame.points[j];
            let nu = frame.normals[j];
            let k = frame.kappa[j];
            let s = frame.s[j];
            for (n, w) in gx.iter().zip(&gw) {
                let x = [p[0] + eps * n * nu[0], p[1] + eps * n * nu[1]];
                let pot = profile.v(*n) / eps + profile.u(s, *n);
                acc += w * pot * phi(x) * (1.0 - eps * n * k) * ds;
            }
        }
        let finite = if divergent { acc - divergent_coefficient / eps } else { acc };
        rows.push(DistLimitRow { epsilon: eps, integral: acc, error: (finite - predicted).abs(), scaled: eps * acc });
    }
    let fitted_order = if rows.len() >= 2 && rows.iter().all(|r| r.error > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
        Some(crate::stats::fit_line(&xs, &ys).1)
    } else {
        None
    };
    Ok(DistLimitReport {
        rows,
        predicted,
        integral_v: moments.integral_v,
        mu1: moments.mu1,
        divergent_coefficient,
        divergent,
        fitted_order,
    })
}
