//! Quasimodes of `H_eps` built from a limit eigenpair.
//!
//! Inside the layer the field is `v0 + eps v1 + eps^2 v2` in the scaled
//! coordinate `n = r / eps`; outside it is the limit eigenfunction minus a
//! cut-off correction that removes the jumps of value and normal derivative
//! across `|r| = eps`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::Operator;
use crate::eigensolve::matching::PointLocator;
use crate::eigensolve::{count_below, EnvelopeLdl};
use crate::error::{Error, Result};
use crate::geometry::{PeriodicSeries, TubularMap};
use crate::mesh::{InterfaceMesh, MeshKind, ModelConfig, Side};
use crate::resonance::{rk4_grid, solve_h1, substeps_for, AuxSolution, HalfBoundState, ResonanceSettings, TransmissionData};

/// A limit eigenfunction, possibly discontinuous across the curve.
pub trait LimitField: Sync {
    /// Value at `x`, continued from side `side` of the curve.
    fn value(&self, x: [f64; 2], side: Side) -> f64;
    fn gradient(&self, x: [f64; 2], side: Side) -> [f64; 2];
}

type SideFn = Arc<dyn Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync>;

/// A field given in closed form on each side.
#[derive(Clone)]
pub struct ClosureField {
    minus: SideFn,
    plus: SideFn,
}

impl ClosureField {
    /// Each closure returns the value and gradient at a point.
    pub fn new(
        minus: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync + 'static,
        plus: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync + 'static,
    ) -> Self {
        ClosureField { minus: Arc::new(minus), plus: Arc::new(plus) }
    }

    fn side(&self, side: Side) -> &SideFn {
        if side == Side::Plus {
            &self.plus
        } else {
            &self.minus
        }
    }
}

impl LimitField for ClosureField {
    fn value(&self, x: [f64; 2], side: Side) -> f64 {
        (self.side(side))(x).0
    }

    fn gradient(&self, x: [f64; 2], side: Side) -> [f64; 2] {
        (self.side(side))(x).1
    }
}

/// A piecewise linear field on an interface mesh.
pub struct DiscreteField {
    mesh: Arc<InterfaceMesh>,
    nodal: Vec<f64>,
    locator: PointLocator,
}

impl DiscreteField {
    pub fn new(mesh: Arc<InterfaceMesh>, nodal: Vec<f64>) -> Result<Self> {
        if mesh.kind != MeshKind::Interface || nodal.len() != mesh.nodes.len() {
            return Err(Error::Contract("a discrete limit field needs nodal values on an interface mesh".into()));
        }
        let locator = PointLocator::new(&mesh);
        Ok(DiscreteField { mesh, nodal, locator })
    }

    fn locate(&self, x: [f64; 2], side: Side) -> Option<(usize, [f64; 3])> {
        let side = if side == Side::OnCurve { Side::Minus } else { side };
        self.locator.locate(&self.mesh, x, |t| self.mesh.tri_side[t] == side)
    }
}

impl LimitField for DiscreteField {
    fn value(&self, x: [f64; 2], side: Side) -> f64 {
        let Some((t, l)) = self.locate(x, side) else { return 0.0 };
        let tri = self.mesh.triangles[t];
        (0..3).map(|a| l[a] * self.nodal[tri[a]]).sum()
    }

    fn gradient(&self, x: [f64; 2], side: Side) -> [f64; 2] {
        let Some((t, _)) = self.locate(x, side) else { return [0.0; 2] };
        let [a, b, c] = self.mesh.triangles[t];
        let (p, q, r) = (self.mesh.nodes[a], self.mesh.nodes[b], self.mesh.nodes[c]);
        let (ua, ub, uc) = (self.nodal[a], self.nodal[b], self.nodal[c]);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        [
            ((ub - ua) * (r[1] - p[1]) - (uc - ua) * (q[1] - p[1])) / det,
            ((uc - ua) * (q[0] - p[0]) - (ub - ua) * (r[0] - p[0])) / det,
        ]
    }
}

/// Cut-off equal to one on `[0, beta/2]` and zero outside `[0, beta)`.
pub fn zeta(beta: f64, t: f64) -> f64 {
    if !(t >= 0.0) || t >= beta {
        return 0.0;
    }
    if t <= 0.5 * beta {
        return 1.0;
    }
    let x = (t - 0.5 * beta) / (0.5 * beta);
    1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Jumps {
    /// Largest `|[v]|` and `|[d_r v]|` over the curve at `r = eps` and `r = -eps`.
    pub value_plus: f64,
    pub value_minus: f64,
    pub deriv_plus: f64,
    pub deriv_minus: f64,
}

#[derive(Debug, Clone)]
pub struct QuasimodeOptions {
    /// Cut-off radius; defaults to `0.4 eps*`.
    pub beta: Option<f64>,
    /// Largest accepted relative residual of the transmission conditions
    /// satisfied by the limit pair.
    pub solvability_tol: f64,
    pub intervals: usize,
}

impl Default for QuasimodeOptions {
    fn default() -> Self {
        QuasimodeOptions { beta: None, solvability_tol: 1e-2, intervals: 512 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Quasimode {
    pub lambda: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub resonant: bool,
    pub s: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub dr_minus: Vec<f64>,
    pub dr_plus: Vec<f64>,
    #[serde(skip)]
    pub v0: Vec<AuxSolution>,
    #[serde(skip)]
    pub v1: Vec<AuxSolution>,
    #[serde(skip)]
    pub v2: Vec<AuxSolution>,
    pub jumps: Jumps,
    /// Relative residual of the transmission conditions of the limit pair.
    pub solvability: f64,
    /// Field values at the mesh nodes.
    #[serde(skip)]
    pub nodal: Vec<f64>,
}

impl Quasimode {
    fn around(&self, s: f64) -> (usize, usize, f64) {
        let ns = self.s.len();
        let len = self.s[1] * ns as f64;
        let t = s.rem_euclid(len) / len * ns as f64;
        let j = (t.floor() as usize).min(ns - 1);
        (j, (j + 1) % ns, t - j as f64)
    }

    /// `v0 + eps v1 + eps^2 v2` and its `n`-derivative at `(s, n)`.
    pub fn inner(&self, s: f64, n: f64) -> (f64, f64) {
        let (j0, j1, w) = self.around(s);
        let e = self.epsilon;
        let at = |j: usize| {
            let (a, da) = self.v0[j].eval(n);
            let (b, db) = self.v1[j].eval(n);
            let (c, dc) = self.v2[j].eval(n);
            (a + e * b + e * e * c, da + e * db + e * e * dc)
        };
        let (a, da) = at(j0);
        let (b, db) = at(j1);
        ((1.0 - w) * a + w * b, (1.0 - w) * da + w * db)
    }
}

/// Construct the quasimode of `H_eps` attached to the limit pair
/// `(lambda, field)` on the layer mesh `mesh`. For a non-resonant profile the
/// pair must come from the Dirichlet split and `trans` is ignored.
pub fn build_quasimode(
    lambda: f64,
    field: &dyn LimitField,
    config: &ModelConfig,
    hb: &HalfBoundState,
    trans: Option<&TransmissionData>,
    mesh: &InterfaceMesh,
    opts: &QuasimodeOptions,
) -> Result<Quasimode> {
    let frame = config.frame.as_ref();
    let eps = config.epsilon;
    let beta = opts.beta.unwrap_or(0.4 * frame.eps_star);
    if !(beta > 0.0 && 2.0 * beta < frame.eps_star) {
        return Err(Error::Config(format!("cut-off radius beta = {beta} must satisfy 0 < 2 beta < eps* = {}", frame.eps_star)));
    }
    if mesh.kind != MeshKind::Layer || (mesh.epsilon - eps).abs() > 1e-14 * eps {
        return Err(Error::Contract("quasimodes live on the layer mesh of the same epsilon".into()));
    }
    let profile = &config.profile;
    let len = frame.length;
    let ns = mesh.s_cells;
    let s: Vec<f64> = (0..ns).map(|j| len * j as f64 / ns as f64).collect();
    let pts: Vec<_> = s.iter().map(|&x| frame.eval(x)).collect();
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let u_minus: Vec<f64> = pts.iter().map(|p| field.value(p.point, Side::Minus)).collect();
    let u_plus: Vec<f64> = pts.iter().map(|p| field.value(p.point, Side::Plus)).collect();
    let dr_minus: Vec<f64> = pts.iter().map(|p| dot(field.gradient(p.point, Side::Minus), p.normal)).collect();
    let dr_plus: Vec<f64> = pts.iter().map(|p| dot(field.gradient(p.point, Side::Plus), p.normal)).collect();
    let scale = u_minus
        .iter()
        .chain(&u_plus)
        .chain(&dr_minus)
        .chain(&dr_plus)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    let resonant = hb.resonant;
    let solvability = if resonant {
        let trans = trans.ok_or_else(|| Error::Contract("a resonant quasimode needs transmission data".into()))?;
        (0..ns)
            .map(|j| {
                let th = trans.theta;
                let a = (u_plus[j] - th * u_minus[j]).abs();
                let b = (th * dr_plus[j] - dr_minus[j] - trans.upsilon_at(s[j]) * u_minus[j]).abs();
                a.max(b)
            })
            .fold(0.0, f64::max)
            / scale
    } else {
        u_minus.iter().chain(&u_plus).fold(0.0f64, |m, v| m.max(v.abs())) / scale
    };
    if !(solvability <= opts.solvability_tol) {
        return Err(Error::Numerical(format!(
            "the limit pair violates its interface conditions (relative residual {solvability:.3e}); the first-order layer problem is not solvable"
        )));
    }

    let d2u = PeriodicSeries::from_samples(&u_minus, len).derivative_samples(2);
    let settings = ResonanceSettings { intervals: opts.intervals, ..Default::default() };
    let h1_end = solve_h1(profile, &settings)?.end_deriv();
    let intervals = opts.intervals.max(8) + opts.intervals % 2;
    let sub = substeps_for(profile, intervals);
    let w = &config.w;
    let layers: Vec<(AuxSolution, AuxSolution, AuxSolution)> = (0..ns)
        .into_par_iter()
        .map(|j| {
            let (sj, kap) = (s[j], pts[j].kappa);
            let w0 = w(pts[j].point);
            // v0 = d h, v1 = a h + b h1 + c h2.
            let (d, a, b, c) = if resonant {
                (u_minus[j], 0.0, dr_minus[j], -u_minus[j])
            } else {
                (0.0, (dr_plus[j] - dr_minus[j] * h1_end) / hb.defect, dr_minus[j], 0.0)
            };
            let d2 = if resonant { d2u[j] } else { 0.0 };
            let ys = rk4_grid::<8>(intervals, sub, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], |n, y| {
                let v = profile.v(n);
                let u = profile.u(sj, n);
                let v1 = a * y[0] + b * y[2] + c * y[4];
                let dv1 = a * y[1] + b * y[3] + c * y[5];
                let f = -kap * dv1 - u * v1 + d2 * y[0] - n * kap * kap * d * y[1] - (w0 - lambda) * d * y[0];
                [y[1], v * y[0], y[3], v * y[2], y[5], v * y[4] - kap * y[1] - u * y[0], y[7], v * y[6] - f]
            })?;
            let comb = |f: &dyn Fn(&[f64; 8]) -> (f64, f64)| {
                let (values, derivs) = ys.iter().map(f).unzip();
                AuxSolution { values, derivs }
            };
            Ok((
                comb(&|y| (d * y[0], d * y[1])),
                comb(&|y| (a * y[0] + b * y[2] + c * y[4], a * y[1] + b * y[3] + c * y[5])),
                comb(&|y| (y[6], y[7])),
            ))
        })
        .collect::<Result<_>>()?;
    let (mut v0, mut v1, mut v2) = (Vec::new(), Vec::new(), Vec::new());
    for (a, b, c) in layers {
        v0.push(a);
        v1.push(b);
        v2.push(c);
    }
    let mut q = Quasimode {
        lambda,
        epsilon: eps,
        beta,
        resonant,
        s: s.clone(),
        u_minus,
        dr_minus,
        dr_plus,
        v0,
        v1,
        v2,
        jumps: Jumps::default(),
        solvability,
        nodal: Vec::new(),
    };

    // Jumps [f]_{eps} = outer - inner and [f]_{-eps} = inner - outer.
    let mut jp = Vec::with_capacity(ns);
    let mut jm = Vec::with_capacity(ns);
    for j in 0..ns {
        let p = &pts[j];
        let xp = [p.point[0] + eps * p.normal[0], p.point[1] + eps * p.normal[1]];
        let xm = [p.point[0] - eps * p.normal[0], p.point[1] - eps * p.normal[1]];
        let (ip, dip) = q.inner(s[j], 1.0);
        let (im, dim) = q.inner(s[j], -1.0);
        let vp = field.value(xp, Side::Plus) - ip;
        let dp = dot(field.gradient(xp, Side::Plus), p.normal) - dip / eps;
        let vm = im - field.value(xm, Side::Minus);
        let dm = dim / eps - dot(field.gradient(xm, Side::Minus), p.normal);
        q.jumps.value_plus = q.jumps.value_plus.max(vp.abs());
        q.jumps.deriv_plus = q.jumps.deriv_plus.max(dp.abs());
        q.jumps.value_minus = q.jumps.value_minus.max(vm.abs());
        q.jumps.deriv_minus = q.jumps.deriv_minus.max(dm.abs());
        jp.push((vp, dp));
        jm.push((vm, dm));
    }
    let interp = |tab: &[(f64, f64)], s: f64| {
        let (j0, j1, w) = q.around(s);
        ((1.0 - w) * tab[j0].0 + w * tab[j1].0, (1.0 - w) * tab[j0].1 + w * tab[j1].1)
    };
    // The correction on the minus side carries the opposite sign to the plus
    // side so that u - eta matches the inner field there as well.
    let eta = |s: f64, r: f64| -> f64 {
        if r > eps {
            let (v, d) = interp(&jp, s);
            (v + d * (r - eps)) * zeta(beta, r - eps)
        } else if r < -eps {
            let (v, d) = interp(&jm, s);
            -(v + d * (r + eps)) * zeta(beta, -r - eps)
        } else {
            0.0
        }
    };
    let reach = beta + eps;
    let tube = TubularMap::new(frame, reach.min(0.999 * frame.eps_star))?;
    let nodal: Vec<f64> = (0..mesh.nodes.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            if let Some([si, ri]) = mesh.tubular[i] {
                if ri.abs() <= eps * (1.0 + 1e-12) {
                    return q.inner(si, (ri / eps).clamp(-1.0, 1.0)).0;
                }
            }
            let side = if mesh.node_side[i] == Side::Plus { Side::Plus } else { Side::Minus };
            let u = field.value(x, side);
            let sr = match mesh.tubular[i] {
                Some([si, ri]) => Some((si, ri)),
                None => tube.inverse(x).ok(),
            };
            match sr {
                Some((si, ri)) if ri.abs() < reach => u - eta(si, ri),
                _ => u,
            }
        })
        .collect();
    q.nodal = nodal;
    Ok(q)
}

/// `|(K - lambda M) v|_{M^-1} / |v|_M` for the quasimode on the operator's mesh.
pub fn quasimode_residual(q: &Quasimode, heps: &Operator) -> Result<f64> {
    quasimode_residual_at(q, heps, q.lambda)
}

/// Residual with a trial value other than the limit eigenvalue.
pub fn quasimode_residual_at(q: &Quasimode, heps: &Operator, lambda: f64) -> Result<f64> {
    if q.nodal.len() != heps.dofs.node_dof.len() {
        return Err(Error::Contract("quasimode and operator live on different meshes".into()));
    }
    let v = heps.dofs.restrict(&q.nodal);
    let kv = heps.k.matvec(&v);
    let mv = heps.m.matvec(&v);
    let r: Vec<f64> = kv.iter().zip(&mv).map(|(a, b)| a - lambda * b).collect();
    let z = EnvelopeLdl::factor(&heps.m)?.solve(&r);
    let num: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
    if !(den > 0.0) {
        return Err(Error::Numerical("quasimode vanishes on the mesh".into()));
    }
    Ok((num.max(0.0) / den).sqrt())
}

/// Number of eigenvalues of the operator in `[lambda - delta, lambda + delta]`.
pub fn eigenvalues_within(heps: &Operator, lambda: f64, delta: f64) -> Result<usize> {
    let hi = count_below(&heps.k, &heps.m, lambda + delta)?;
    let lo = count_below(&heps.k, &heps.m, lambda - delta)?;
    Ok(hi.saturating_sub(lo))
}
