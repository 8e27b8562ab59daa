//! Rotationally symmetric reference solver for circular curves.
//!
//! For `gamma = {|x| = R}` and a radial `W` the operators separate in polar
//! coordinates. Each angular momentum `m` gives a Sturm-Liouville problem
//! `-(rho u')' + (m^2/rho + rho Q) u = lambda rho u` that is solved with a
//! scaled Prüfer angle and eigenvalue counting.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::resonance::PotentialProfile;

/// Which operator to reduce.
#[derive(Debug, Clone)]
pub enum RadialOperator {
    /// `-Δ + W`.
    Free,
    /// `-Δ + W + V_eps` with an `s`-independent profile.
    Layer { profile: PotentialProfile, epsilon: f64 },
    /// Limit operator with constant transmission data.
    Limit { theta: f64, upsilon: f64 },
    /// Dirichlet condition on the circle.
    Split,
}

#[derive(Clone)]
pub struct RadialModel {
    pub radius: f64,
    pub w: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Dirichlet truncation radius.
    pub rho_max: f64,
    /// Steps per unit length away from the layer.
    pub density: f64,
    /// Steps across the layer.
    pub layer_steps: usize,
}

impl std::fmt::Debug for RadialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialModel").field("radius", &self.radius).field("rho_max", &self.rho_max).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialEigenvalue {
    pub value: f64,
    /// Angular momentum `|m|`; values with `m > 0` are doubly degenerate.
    pub m: u32,
}

/// Lift of an angle after a positive rescaling of `(u, p u')`: the image
/// stays in the half-turn `[k pi, (k + 1) pi)` of the input.
fn relift(phi: f64, su: f64, sp: f64) -> f64 {
    let k = (phi / PI).floor();
    let (s, c) = phi.sin_cos();
    let mut a = (su * s).atan2(sp * c); // in (-pi, pi]
    if a < 0.0 {
        a += PI;
    }
    // a in [0, pi) represents the same line; pick the branch in [k pi, (k+1) pi).
    let base = k * PI;
    let mut out = base + a;
    if out < phi - PI {
        out += PI;
    }
    out
}

impl RadialModel {
    pub fn new(radius: f64, w: impl Fn(f64) -> f64 + Send + Sync + 'static, rho_max: f64) -> Self {
        RadialModel { radius, w: Arc::new(w), rho_max, density: 600.0, layer_steps: 256 }
    }

    fn check(&self, op: &RadialOperator) -> Result<()> {
        if !(self.radius > 0.0 && self.rho_max > self.radius) {
            return Err(Error::Input("need 0 < R < rho_max".into()));
        }
        match op {
            RadialOperator::Layer { profile, epsilon } => {
                if profile.tangential_depends_on_s() {
                    return Err(Error::Unsupported("radial reduction needs an s-independent U".into()));
                }
                if !(*epsilon > 0.0 && *epsilon < 0.5 * self.radius) {
                    return Err(Error::Input(format!("epsilon {epsilon} must lie in (0, R/2)")));
                }
            }
            RadialOperator::Limit { theta, .. } if theta.abs() < 1e-12 || !theta.is_finite() => {
                return Err(Error::Unsupported("degenerate transmission coefficient".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Integrate the scaled Prüfer angle over `[a, b]` with constant scale `sc`.
    fn sweep(&self, phi: f64, a: f64, b: f64, steps: usize, sc: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        // phi' = (S/p) cos^2 + (g/S) sin^2, with p = rho and g = lambda rho - q.
        let rhs = |r: f64, ph: f64| {
            let (s, c) = ph.sin_cos();
            sc / r * c * c + f(r) / sc * s * s
        };
        let h = (b - a) / steps as f64;
        let mut ph = phi;
        for i in 0..steps {
            let r = a + i as f64 * h;
            let k1 = rhs(r, ph);
            let k2 = rhs(r + 0.5 * h, ph + 0.5 * h * k1);
            let k3 = rhs(r + 0.5 * h, ph + 0.5 * h * k2);
            let k4 = rhs(r + h, ph + h * k3);
            ph += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        ph
    }

    /// Prüfer angle at `rho_max` (scale one), or at `R` for the inner
    /// Dirichlet problem.
    fn angle(&self, op: &RadialOperator, m: u32, lambda: f64, inner_only: bool) -> f64 {
        let rr = self.radius;
        let mm = (m * m) as f64;
        let base = |rho: f64, extra: f64| lambda * rho - mm / rho - rho * ((self.w)(rho) + extra);
        let free = |rho: f64| base(rho, 0.0);
        // start near the origin from the regular solution
        let r0 = 1e-4;
        let w0 = (self.w)(0.0);
        let mut phi = if m == 0 {
            (1.0f64).atan2((w0 - lambda) * r0 * r0 / 2.0)
        } else {
            (1.0 / m as f64).atan()
        };
        // geometric steps up to 0.05
        let mut r = r0;
        while r < 0.05 {
            let next = (r * 1.05).min(0.05);
            phi = self.sweep(phi, r, next, 1, 1.0, &free);
            r = next;
        }
        let steps = |len: f64| ((len * self.density).ceil() as usize).max(4);
        let outer_start = match op {
            RadialOperator::Layer { profile, epsilon } => {
                let eps = *epsilon;
                phi = self.sweep(phi, 0.05, rr - eps, steps(rr - eps - 0.05), 1.0, &free);
                let vmax = (0..=64).map(|i| profile.v(-1.0 + i as f64 / 32.0).abs()).fold(0.0, f64::max);
                let sc = rr * ((vmax + 1.0) / (eps * eps) + lambda.abs() + 1.0).sqrt();
                phi = relift(phi, sc.sqrt(), 1.0 / sc.sqrt());
                let layer = |rho: f64| {
                    // the segment is exactly the support; guard against rounding at its ends
                    let n = ((rho - rr) / eps).clamp(-1.0, 1.0);
                    base(rho, profile.v(n) / (eps * eps) + profile.u(0.0, n) / eps)
                };
                let half = self.layer_steps / 2;
                phi = self.sweep(phi, rr - eps, rr, half, sc, &layer);
                phi = self.sweep(phi, rr, rr + eps, half, sc, &layer);
                phi = relift(phi, 1.0 / sc.sqrt(), sc.sqrt());
                rr + eps
            }
            RadialOperator::Limit { theta, upsilon } => {
                phi = self.sweep(phi, 0.05, rr, steps(rr - 0.05), 1.0, &free);
                // (u, p u') -> (theta u, (p u' + R Upsilon u) / theta)
                let (s, c) = phi.sin_cos();
                let (u, pu) = (s, c);
                let (u2, pu2) = (theta * u, (pu + rr * upsilon * u) / theta);
                let k = (phi / PI).floor();
                let mut a = u2.atan2(pu2);
                // keep the image in the half-turn of the input, shifted by pi for theta < 0
                let shift = if *theta < 0.0 { PI } else { 0.0 };
                let lo = k * PI + shift;
                while a < lo {
                    a += PI;
                }
                while a >= lo + PI {
                    a -= PI;
                }
                phi = if s.abs() < 1e-300 { phi + shift } else { a };
                rr
            }
            RadialOperator::Split => {
                phi = self.sweep(phi, 0.05, rr, steps(rr - 0.05), 1.0, &free);
                if inner_only {
                    return phi;
                }
                phi = 0.0;
                rr
            }
            RadialOperator::Free => 0.05,
        };
        self.sweep(phi, outer_start, self.rho_max, steps(self.rho_max - outer_start), 1.0, &free)
    }

    /// Eigenvalues of angular momentum `m` in `[lo, hi)`.
    pub fn eigenvalues(&self, op: &RadialOperator, m: u32, lo: f64, hi: f64) -> Result<Vec<f64>> {
        self.check(op)?;
        if !(lo < hi) {
            return Err(Error::Input("empty eigenvalue window".into()));
        }
        let mut out = Vec::new();
        let parts: &[bool] = if matches!(op, RadialOperator::Split) { &[true, false] } else { &[false] };
        for &inner in parts {
            let f = |l: f64| self.angle(op, m, l, inner);
            let (flo, fhi) = (f(lo), f(hi));
            let jlo = (flo / PI).floor() as i64;
            let jhi = (fhi / PI).floor() as i64;
            for j in jlo + 1..=jhi {
                let target = j as f64 * PI;
                let (mut a, mut b) = (lo, hi);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if f(mid) < target {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if b - a < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(out)
    }

    /// All eigenvalues in `[lo, hi)` with `m <= m_max`, ascending, each
    /// `m > 0` value listed twice.
    pub fn spectrum(&self, op: &RadialOperator, lo: f64, hi: f64, m_max: u32) -> Result<Vec<RadialEigenvalue>> {
        let mut out = Vec::new();
        for m in 0..=m_max {
            for v in self.eigenvalues(op, m, lo, hi)? {
                out.push(RadialEigenvalue { value: v, m });
                if m > 0 {
                    out.push(RadialEigenvalue { value: v, m });
                }
            }
        }
        out.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        Ok(out)
    }
}
