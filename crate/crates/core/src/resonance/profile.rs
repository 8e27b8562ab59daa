use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::table::CubicSpline;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Transverse profile `V(n)` and optional tangential correction `U(s, n)`.
///
/// Both are extended by zero outside `n in [-1, 1]`.
#[derive(Clone)]
pub struct PotentialProfile {
    v: Fn1,
    u: Option<Fn2>,
    u_depends_on_s: bool,
    label: String,
}

impl fmt::Debug for PotentialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialProfile").field("label", &self.label).finish()
    }
}

impl PotentialProfile {
    pub fn new(v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PotentialProfile { v: Arc::new(v), u: None, u_depends_on_s: false, label: "custom".into() }
    }

    /// Constant transverse profile `V(n) = c` on `[-1, 1]`.
    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_label(format!("V = {c}"))
    }

    /// Add a tangential term `U(s, n)`.
    pub fn with_tangential(mut self, u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.u = Some(Arc::new(u));
        self.u_depends_on_s = true;
        self
    }

    /// Add an `s`-independent tangential term `U(n)`.
    pub fn with_tangential_n(mut self, u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.u = Some(Arc::new(move |_, n| u(n)));
        self.u_depends_on_s = false;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Build from expression sources: `v` in the variable `n`, `u` in `s, n`.
    pub fn from_exprs(v: &str, u: Option<&str>) -> Result<Self> {
        let ve = Expr::parse(v, &["n"]).map_err(|e| Error::Input(format!("V profile: {e}")))?;
        let mut p = Self::new(move |n| ve.eval(&[n])).with_label(format!("V = {v}"));
        if let Some(u) = u {
            let ue = Expr::parse(u, &["s", "n"]).map_err(|e| Error::Input(format!("U profile: {e}")))?;
            let dep = ue.depends_on("s");
            p = p.with_tangential(move |s, n| ue.eval(&[s, n]));
            p.u_depends_on_s = dep;
            p.label = format!("{}, U = {u}", p.label);
        }
        Ok(p)
    }

    /// Build from cubic tables of `V(n)` and optionally `U(n)`.
    pub fn from_tables(v: CubicSpline, u: Option<CubicSpline>) -> Self {
        let mut p = Self::new(move |n| v.eval(n)).with_label("tabulated");
        if let Some(u) = u {
            p = p.with_tangential_n(move |n| u.eval(n));
        }
        p
    }

    #[inline]
    pub fn v(&self, n: f64) -> f64 {
        if (-1.0..=1.0).contains(&n) {
            (self.v)(n)
        } else {
            0.0
        }
    }

    #[inline]
    pub fn u(&self, s: f64, n: f64) -> f64 {
        match &self.u {
            Some(u) if (-1.0..=1.0).contains(&n) => u(s, n),
            _ => 0.0,
        }
    }

    pub fn has_tangential(&self) -> bool {
        self.u.is_some()
    }

    pub fn tangential_depends_on_s(&self) -> bool {
        self.u.is_some() && self.u_depends_on_s
    }

    /// The profile with `V` multiplied by `alpha`; `U` is unchanged.
    pub fn scaled(&self, alpha: f64) -> Self {
        let v = self.v.clone();
        PotentialProfile {
            v: Arc::new(move |n| alpha * v(n)),
            u: self.u.clone(),
            u_depends_on_s: self.u_depends_on_s,
            label: format!("{alpha} * ({})", self.label),
        }
    }

    /// Profile seen from the reversed frame: `V(-n)` and `U(length - s, -n)`.
    pub fn reflected(&self, length: f64) -> Self {
        let v = self.v.clone();
        let u = self.u.clone().map(|u| -> Fn2 { Arc::new(move |s, n| u((length - s).rem_euclid(length), -n)) });
        PotentialProfile {
            v: Arc::new(move |n| v(-n)),
            u,
            u_depends_on_s: self.u_depends_on_s,
            label: format!("reflected({})", self.label),
        }
    }

    /// Sample the profile and check it is finite; report endpoint values.
    pub fn validate(&self, samples: usize, s_probe: &[f64]) -> Result<ProfileReport> {
        let samples = samples.max(3);
        let mut max_abs_v: f64 = 0.0;
        let mut max_abs_u: f64 = 0.0;
        for i in 0..samples {
            let n = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            let v = self.v(n);
            if !v.is_finite() {
                return Err(Error::Input(format!("V({n}) is not finite")));
            }
            max_abs_v = max_abs_v.max(v.abs());
            for &s in s_probe {
                let u = self.u(s, n);
                if !u.is_finite() {
                    return Err(Error::Input(format!("U({s}, {n}) is not finite")));
                }
                max_abs_u = max_abs_u.max(u.abs());
            }
        }
        let ends = [self.v(-1.0), self.v(1.0)];
        let scale = 1.0 + max_abs_v;
        Ok(ProfileReport {
            max_abs_v,
            max_abs_u,
            endpoint_values: ends,
            vanishes_at_ends: ends.iter().all(|e| e.abs() <= 1e-10 * scale),
        })
    }
}

/// Summary of a profile sampling pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub max_abs_v: f64,
    pub max_abs_u: f64,
    pub endpoint_values: [f64; 2],
    /// `V(+-1) = 0`. Step profiles such as square wells do not satisfy
    /// this; they are still accepted.
    pub vanishes_at_ends: bool,
}
