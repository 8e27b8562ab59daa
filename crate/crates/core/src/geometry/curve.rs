use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type CurveFn = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
enum Source {
    /// Periodic map on `[0, period)`.
    Function { f: CurveFn, period: f64 },
    /// Points of a closed polyline-like sampling, traversed in order.
    Samples(Vec<[f64; 2]>),
}

/// A closed planar curve described either analytically or by samples.
#[derive(Clone)]
pub struct ClosedCurve {
    source: Source,
    label: String,
}

impl fmt::Debug for ClosedCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedCurve").field("label", &self.label).finish()
    }
}

impl ClosedCurve {
    pub fn from_fn(f: impl Fn(f64) -> [f64; 2] + Send + Sync + 'static, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Geometry(format!("invalid parameter period {period}")));
        }
        let f: CurveFn = Arc::new(f);
        let a = f(0.0);
        let b = f(period);
        let scale = (0..8)
            .map(|i| {
                let p = f(period * i as f64 / 8.0);
                (p[0] - a[0]).hypot(p[1] - a[1])
            })
            .fold(0.0, f64::max)
            .max(1e-300);
        if (a[0] - b[0]).hypot(a[1] - b[1]) > 1e-8 * scale {
            return Err(Error::Geometry("curve is not closed: endpoint differs from start point".into()));
        }
        Ok(ClosedCurve { source: Source::Function { f, period }, label: "parametric".into() })
    }

    /// Curve `(x1(t), x2(t))` for `t in [0, period)` from expressions in `t`.
    pub fn from_exprs(x1: &str, x2: &str, period: f64) -> Result<Self> {
        let e1 = Expr::parse(x1, &["t"]).map_err(|e| Error::Input(format!("curve x1: {e}")))?;
        let e2 = Expr::parse(x2, &["t"]).map_err(|e| Error::Input(format!("curve x2: {e}")))?;
        let mut c = Self::from_fn(move |t| [e1.eval(&[t]), e2.eval(&[t])], period)?;
        c.label = format!("({x1}, {x2})");
        Ok(c)
    }

    /// Closed curve through the given samples. A trailing copy of the
    /// first point is dropped.
    pub fn from_samples(mut pts: Vec<[f64; 2]>) -> Result<Self> {
        if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Input("curve samples contain non-finite values".into()));
        }
        if pts.len() >= 2 {
            let (a, b) = (pts[0], *pts.last().unwrap());
            if (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-12 * (1.0 + a[0].abs() + a[1].abs()) {
                pts.pop();
            }
        }
        if pts.len() < 8 {
            return Err(Error::Geometry("a sampled curve needs at least eight distinct points".into()));
        }
        Ok(ClosedCurve { source: Source::Samples(pts), label: "sampled".into() })
    }

    pub fn circle(radius: f64, center: [f64; 2]) -> Self {
        let mut c = Self::from_fn(
            move |t| [center[0] + radius * t.cos(), center[1] + radius * t.sin()],
            2.0 * std::f64::consts::PI,
        )
        .expect("circle is closed");
        c.label = format!("circle(r = {radius})");
        c
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        let mut c = Self::from_fn(move |t| [a * t.cos(), b * t.sin()], 2.0 * std::f64::consts::PI)
            .expect("ellipse is closed");
        c.label = format!("ellipse({a}, {b})");
        c
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform samples in the native parameter, and the parameter period.
    pub(crate) fn sample(&self, n: usize) -> (Vec<[f64; 2]>, f64) {
        match &self.source {
            Source::Function { f, period } => {
                ((0..n).map(|j| f(period * j as f64 / n as f64)).collect(), *period)
            }
            Source::Samples(p) => (p.clone(), p.len() as f64),
        }
    }

    pub(crate) fn is_sampled(&self) -> bool {
        matches!(self.source, Source::Samples(_))
    }
}
