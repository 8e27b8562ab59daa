//! Closed curves, arc-length frames and tubular coordinates.

mod curve;
mod fourier;
mod tubular;

pub use curve::{ClosedCurve, CurveFn};
pub use fourier::PeriodicSeries;
pub use tubular::TubularMap;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Which way the frame normal points relative to the enclosed region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// `nu` points out of the interior; the curve runs clockwise.
    Outward,
    /// `nu` points into the interior; the curve runs counter-clockwise.
    Inward,
}

impl Orientation {
    /// `+1` for outward frames, `-1` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Outward => 1.0,
            Orientation::Inward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePoint {
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub kappa: f64,
}

/// Arc-length parametrisation of a closed curve with its Frenet data
/// `alpha' = tangent`, `nu = (-alpha_2', alpha_1')`, `alpha'' = kappa nu`.
#[derive(Debug, Clone)]
pub struct CurveFrame {
    pub length: f64,
    /// Uniform arc-length grid `s_j = j L / N`.
    pub s: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub tangents: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
    /// Largest admissible tubular half-width.
    pub eps_star: f64,
    pub orientation: Orientation,
    sx: PeriodicSeries,
    sy: PeriodicSeries,
}

/// Reparametrise `curve` by arc length on `grid_size` points, oriented
/// clockwise so that the frame normal points outward.
pub fn reparametrize_arclength(curve: &ClosedCurve, grid_size: usize) -> Result<CurveFrame> {
    if grid_size < 16 {
        return Err(Error::Input("frame grid needs at least 16 points".into()));
    }
    let m = if curve.is_sampled() { 0 } else { (2 * grid_size).max(256) };
    let (pts, period) = curve.sample(m);
    let x = PeriodicSeries::from_samples(&pts.iter().map(|p| p[0]).collect::<Vec<_>>(), period);
    let y = PeriodicSeries::from_samples(&pts.iter().map(|p| p[1]).collect::<Vec<_>>(), period);
    let dx = x.derivative_samples(1);
    let dy = y.derivative_samples(1);
    let speed: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let mean_speed = speed.iter().sum::<f64>() / speed.len() as f64;
    if !mean_speed.is_finite() || speed.iter().any(|v| *v <= 1e-10 * mean_speed) {
        return Err(Error::Geometry("curve parametrisation is degenerate (zero speed)".into()));
    }
    let speed_series = PeriodicSeries::from_samples(&speed, period);
    let length = speed_series.mean() * period;
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let area2: f64 = (0..pts.len()).map(|j| xs[j] * dy[j] - ys[j] * dx[j]).sum::<f64>() / pts.len() as f64 * period;
    let reverse = area2 > 0.0;

    let n = grid_size;
    let mut points = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut t = 0.0;
    let mut ts = Vec::with_capacity(n);
    for j in 0..n {
        let target = length * j as f64 / n as f64;
        if j > 0 {
            t += period * (1.0 / n as f64);
        }
        for _ in 0..60 {
            let r = speed_series.integral(t) - target;
            let dt = r / speed_series.eval(t).max(1e-12 * mean_speed);
            t -= dt;
            if dt.abs() < 1e-15 * period {
                break;
            }
        }
        ts.push(t);
        let (x1, x2) = (x.eval_deriv(t, 1), y.eval_deriv(t, 1));
        let (xx, yy) = (x.eval_deriv(t, 2), y.eval_deriv(t, 2));
        let sp = x1.hypot(x2);
        points.push([x.eval(t), y.eval(t)]);
        tangents.push([x1 / sp, x2 / sp]);
        kappa.push((x1 * yy - x2 * xx) / sp.powi(3));
    }
    if kappa.iter().any(|k| !k.is_finite()) {
        return Err(Error::Geometry("curvature is not finite".into()));
    }

    // Refine the curvature maximum on the interpolant.
    let curv_t = |t: f64| {
        let (x1, x2) = (x.eval_deriv(t, 1), y.eval_deriv(t, 1));
        let (xx, yy) = (x.eval_deriv(t, 2), y.eval_deriv(t, 2));
        ((x1 * yy - x2 * xx) / x1.hypot(x2).powi(3)).abs()
    };
    let jmax = (0..n).max_by(|&a, &b| kappa[a].abs().partial_cmp(&kappa[b].abs()).unwrap()).unwrap();
    let dt = period / n as f64;
    let (mut a, mut b) = (ts[jmax] - dt, ts[jmax] + dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if curv_t(c) > curv_t(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let kmax = curv_t(0.5 * (a + b)).max(kappa[jmax].abs());
    let mut eps_star = if kmax > 0.0 { 1.0 / kmax } else { f64::INFINITY };

    // Global bound: half the distance between points far apart along the curve.
    let sep = if kmax > 0.0 { std::f64::consts::PI / kmax } else { length / 2.0 };
    if sep < length / 2.0 {
        for i in 0..n {
            for j in i + 1..n {
                let arc = (length * (j - i) as f64 / n as f64).min(length * (n - j + i) as f64 / n as f64);
                if arc >= sep {
                    let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
                    eps_star = eps_star.min(0.5 * d);
                }
            }
        }
    }

    if reverse {
        let rev = |i: usize| (n - i) % n;
        points = (0..n).map(|i| points[rev(i)]).collect();
        tangents = (0..n).map(|i| [-tangents[rev(i)][0], -tangents[rev(i)][1]]).collect();
        kappa = (0..n).map(|i| -kappa[rev(i)]).collect();
    }
    Ok(CurveFrame::assemble(length, points, tangents, kappa, eps_star, Orientation::Outward))
}

impl CurveFrame {
    fn assemble(
        length: f64,
        points: Vec<[f64; 2]>,
        tangents: Vec<[f64; 2]>,
        kappa: Vec<f64>,
        eps_star: f64,
        orientation: Orientation,
    ) -> CurveFrame {
        let n = points.len();
        let normals = tangents.iter().map(|t| [-t[1], t[0]]).collect();
        let sx = PeriodicSeries::from_samples(&points.iter().map(|p| p[0]).collect::<Vec<_>>(), length);
        let sy = PeriodicSeries::from_samples(&points.iter().map(|p| p[1]).collect::<Vec<_>>(), length);
        CurveFrame {
            length,
            s: (0..n).map(|j| length * j as f64 / n as f64).collect(),
            points,
            tangents,
            normals,
            kappa,
            eps_star,
            orientation,
            sx,
            sy,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Frame data at an arbitrary arc length (taken modulo the length).
    pub fn eval(&self, s: f64) -> FramePoint {
        let s = s.rem_euclid(self.length);
        let (d1, d2) = (self.sx.eval_deriv(s, 1), self.sy.eval_deriv(s, 1));
        let (e1, e2) = (self.sx.eval_deriv(s, 2), self.sy.eval_deriv(s, 2));
        let sp = d1.hypot(d2);
        let tangent = [d1 / sp, d2 / sp];
        FramePoint {
            point: [self.sx.eval(s), self.sy.eval(s)],
            tangent,
            normal: [-tangent[1], tangent[0]],
            kappa: (d1 * e2 - d2 * e1) / sp.powi(3),
        }
    }

    pub fn curvature(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Input(format!("arc length {s} is not finite")));
        }
        let k = self.eval(s).kappa;
        if !k.is_finite() {
            return Err(Error::Geometry(format!("curvature undefined at s = {s}")));
        }
        Ok(k)
    }

    /// `int kappa ds`; `-2 pi` for outward frames of simple curves.
    pub fn total_curvature(&self) -> f64 {
        self.kappa.iter().sum::<f64>() * self.length / self.len() as f64
    }

    /// Signed enclosed area (negative for clockwise traversal).
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| {
                let p = self.points[j];
                let t = self.tangents[j];
                p[0] * t[1] - p[1] * t[0]
            })
            .sum::<f64>()
            * 0.5
            * self.length
            / n as f64
    }

    /// Area centroid of the enclosed region.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.len();
        let ds = self.length / n as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for j in 0..n {
            let p = self.points[j];
            let t = self.tangents[j];
            // Green: int x dA = 1/2 oint x^2 dy, int y dA = -1/2 oint y^2 dx.
            cx += 0.5 * p[0] * p[0] * t[1] * ds;
            cy -= 0.5 * p[1] * p[1] * t[0] * ds;
        }
        let a = self.signed_area();
        [cx / a, cy / a]
    }

    /// The same curve traversed the other way, `s -> L - s`, `nu -> -nu`.
    pub fn flipped(&self) -> CurveFrame {
        let n = self.len();
        let rev = |i: usize| (n - i) % n;
        let points = (0..n).map(|i| self.points[rev(i)]).collect();
        let tangents = (0..n).map(|i| [-self.tangents[rev(i)][0], -self.tangents[rev(i)][1]]).collect();
        let kappa = (0..n).map(|i| -self.kappa[rev(i)]).collect();
        let orientation = match self.orientation {
            Orientation::Outward => Orientation::Inward,
            Orientation::Inward => Orientation::Outward,
        };
        CurveFrame::assemble(self.length, points, tangents, kappa, self.eps_star, orientation)
    }

    /// Normal pointing out of the enclosed region.
    pub fn outward_normal(&self, j: usize) -> [f64; 2] {
        let o = self.orientation.sign();
        [o * self.normals[j][0], o * self.normals[j][1]]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "x1", "x2", "kappa"])?;
        for j in 0..self.len() {
            wr.serialize((self.s[j], self.points[j][0], self.points[j][1], self.kappa[j]))?;
        }
        wr.flush()?;
        Ok(())
    }
}
