use crate::error::{Error, Result};

use super::CurveFrame;

/// The map `(s, r) -> alpha(s) + r nu(s)` on `|r| < half_width`.
#[derive(Debug, Clone, Copy)]
pub struct TubularMap<'a> {
    frame: &'a CurveFrame,
    half_width: f64,
}

impl<'a> TubularMap<'a> {
    pub fn new(frame: &'a CurveFrame, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < frame.eps_star) {
            return Err(Error::Geometry(format!(
                "tubular half-width {half_width} must lie in (0, {})",
                frame.eps_star
            )));
        }
        Ok(TubularMap { frame, half_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn forward(&self, s: f64, r: f64) -> [f64; 2] {
        let p = self.frame.eval(s);
        [p.point[0] + r * p.normal[0], p.point[1] + r * p.normal[1]]
    }

    /// Tubular coordinates `(s, r)` of `x`, with `s in [0, length)`.
    pub fn inverse(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let f = self.frame;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, p) in f.points.iter().enumerate() {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        if best_d.sqrt() >= self.half_width * 1.5 + f.length / f.points.len() as f64 {
            return Err(Error::OutOfDomain(format!("({}, {}) is far from the curve", x[0], x[1])));
        }
        let mut s = f.s[best];
        let ds_max = f.length / f.points.len() as f64;
        for _ in 0..50 {
            let p = f.eval(s);
            let d = [p.point[0] - x[0], p.point[1] - x[1]];
            let g = d[0] * p.tangent[0] + d[1] * p.tangent[1];
            let r = -(d[0] * p.normal[0] + d[1] * p.normal[1]);
            let dg = 1.0 - p.kappa * r;
            let step = (g / dg).clamp(-ds_max, ds_max);
            s -= step;
            if step.abs() < 1e-15 * f.length.max(1.0) {
                break;
            }
        }
        let s = s.rem_euclid(f.length);
        let p = f.eval(s);
        let r = (x[0] - p.point[0]) * p.normal[0] + (x[1] - p.point[1]) * p.normal[1];
        if r.abs() >= self.half_width {
            return Err(Error::OutOfDomain(format!(
                "({}, {}) has |r| = {} >= {}",
                x[0],
                x[1],
                r.abs(),
                self.half_width
            )));
        }
        Ok((s, r))
    }
}
