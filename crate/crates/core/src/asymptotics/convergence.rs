//! Rate of convergence of `H_eps` eigenvalues to those of the limit operator.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_dirichlet_split, assemble_heps, assemble_limit, Operator};
use crate::eigensolve::matching::{match_eigenpairs, Transfer};
use crate::eigensolve::{solve, SolveOptions, SpectralResult};
use crate::error::{Error, Result};
use crate::geometry::{CurveFrame, Orientation};
use crate::mesh::{build_mesh, InterfaceMesh, MeshDensity, MeshKind, ModelConfig, Potential2d};
use crate::radial::{RadialModel, RadialOperator};
use crate::resonance::{compute_transmission, detect_resonance, PotentialProfile, TransmissionData};
use crate::stats::{fit_line, richardson};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Backend {
    /// Separation of variables on a circle with radial `W`.
    Radial,
    /// Finite elements on two mesh levels with Richardson extrapolation.
    Fem,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Radial => "radial",
            Backend::Fem => "fem",
        })
    }
}

#[derive(Clone)]
pub struct ConvergenceSetup {
    pub frame: Arc<CurveFrame>,
    pub w: Potential2d,
    /// `W` as a function of the distance to the circle centre; needed by the
    /// radial backend.
    pub w_radial: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub profile: PotentialProfile,
    /// Decreasing list of layer widths.
    pub eps_list: Vec<f64>,
    pub half_width: f64,
    pub density: MeshDensity,
    pub band_fraction: f64,
    /// Number of lowest limit eigenvalues tracked.
    pub tracked: usize,
    /// Extra eigenpairs solved for beyond the tracked ones.
    pub extra: usize,
    pub resonance_tol: f64,
    pub solver_tol: f64,
    /// Relative eigenvalue gap below which limit eigenvalues are matched as
    /// one eigenspace. Exact degeneracies of the limit split by mesh error,
    /// so this is much looser than the solver tolerance.
    pub cluster_tol: f64,
    /// Pairs whose overlap falls below this are treated as lost.
    pub min_overlap: f64,
    pub pass_exponent: f64,
}

impl ConvergenceSetup {
    pub fn new(frame: Arc<CurveFrame>, w: Potential2d, profile: PotentialProfile, eps_list: Vec<f64>, half_width: f64) -> Self {
        ConvergenceSetup {
            frame,
            w,
            w_radial: None,
            profile,
            eps_list,
            half_width,
            density: MeshDensity::default(),
            band_fraction: 0.6,
            tracked: 3,
            extra: 3,
            resonance_tol: 1e-8,
            solver_tol: 1e-8,
            cluster_tol: 5e-3,
            min_overlap: 0.5,
            pass_exponent: 0.9,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eps_list.len() < 2 {
            return Err(Error::Config("the convergence study needs at least two epsilon values".into()));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("epsilon values must be strictly decreasing".into()));
        }
        let half = 0.5 * self.frame.eps_star;
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e < half)) {
            return Err(Error::Config(format!("epsilon = {e} is outside (0, eps*/2) = (0, {half})")));
        }
        if self.tracked == 0 {
            return Err(Error::Config("track at least one eigenvalue".into()));
        }
        Ok(())
    }

    fn config(&self, eps: f64, level: u32) -> ModelConfig {
        let mut c = ModelConfig::new(self.frame.clone(), self.w.clone(), self.profile.clone(), eps, self.half_width);
        c.density = self.density.clone();
        c.density.refinement += level;
        c.band_fraction = self.band_fraction;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub backend: Backend,
    pub eps: f64,
    pub index: usize,
    pub lambda_eps: f64,
    pub lambda_limit: f64,
    pub gap: f64,
    /// Eigenvector overlap with the limit eigenfunction, when measured.
    pub overlap: Option<f64>,
    pub lost: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub backend: Backend,
    pub index: usize,
    pub lambda_limit: f64,
    /// `|lambda_eps - lambda| ~ c eps^p`.
    pub c: f64,
    pub p: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub resonant: bool,
    pub theta: Option<f64>,
    /// `"transmission"` or `"dirichlet-split"`.
    pub limit: String,
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<RateFit>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["backend", "eps", "index", "lambda_eps", "lambda_limit", "gap", "overlap", "lost"])?;
        for r in &self.rows {
            wr.write_record([
                r.backend.to_string(),
                format!("{}", r.eps),
                r.index.to_string(),
                format!("{:.12e}", r.lambda_eps),
                format!("{:.12e}", r.lambda_limit),
                format!("{:.6e}", r.gap),
                r.overlap.map(|o| format!("{o:.6}")).unwrap_or_default(),
                r.lost.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn fit_for(&self, backend: Backend, index: usize) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.backend == backend && f.index == index)
    }
}

struct LimitModel {
    resonant: bool,
    theta: Option<f64>,
    trans: Option<TransmissionData>,
}

fn limit_model(setup: &ConvergenceSetup) -> Result<LimitModel> {
    let hb = detect_resonance(&setup.profile, setup.resonance_tol)?;
    if hb.resonant {
        let f = &setup.frame;
        let trans = compute_transmission(&setup.profile, &hb, &f.s, &f.kappa, f.length)?;
        Ok(LimitModel { resonant: true, theta: Some(hb.theta), trans: Some(trans) })
    } else {
        Ok(LimitModel { resonant: false, theta: None, trans: None })
    }
}

/// Solve `H_eps` for every epsilon, pair its eigenvalues with the limit
/// spectrum and fit the rate of convergence for each tracked eigenvalue.
pub fn run_convergence(setup: &ConvergenceSetup, backends: &[Backend]) -> Result<ConvergenceReport> {
    setup.validate()?;
    let lm = limit_model(setup)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &b in backends {
        let (r, w) = match b {
            Backend::Radial => radial_rows(setup, &lm)?,
            Backend::Fem => fem_rows(setup, &lm)?,
        };
        rows.extend(r);
        warnings.extend(w);
    }
    let mut fits = Vec::new();
    for &b in backends {
        for index in 0..setup.tracked {
            let pts: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.backend == b && r.index == index && !r.lost).collect();
            let usable: Vec<&&ConvergenceRow> = pts.iter().filter(|r| r.gap > 0.0).collect();
            let lambda_limit = pts.first().map_or(f64::NAN, |r| r.lambda_limit);
            if usable.len() < 2 {
                warnings.push(format!("{b}: eigenvalue {index} has fewer than two usable points; no rate fitted"));
                fits.push(RateFit { backend: b, index, lambda_limit, c: f64::NAN, p: f64::NAN, points: usable.len(), pass: false });
                continue;
            }
            let x: Vec<f64> = usable.iter().map(|r| r.eps.ln()).collect();
            let y: Vec<f64> = usable.iter().map(|r| r.gap.ln()).collect();
            let (a, p) = fit_line(&x, &y);
            fits.push(RateFit {
                backend: b,
                index,
                lambda_limit,
                c: a.exp(),
                p,
                points: usable.len(),
                pass: p >= setup.pass_exponent,
            });
        }
    }
    let passed = !fits.is_empty() && fits.iter().all(|f| f.pass);
    Ok(ConvergenceReport {
        resonant: lm.resonant,
        theta: lm.theta,
        limit: if lm.resonant { "transmission" } else { "dirichlet-split" }.into(),
        rows,
        fits,
        warnings,
        passed,
    })
}

fn radial_rows(setup: &ConvergenceSetup, lm: &LimitModel) -> Result<(Vec<ConvergenceRow>, Vec<String>)> {
    let f = &setup.frame;
    let w_radial = setup
        .w_radial
        .clone()
        .ok_or_else(|| Error::Unsupported("the radial backend needs W as a function of the radius".into()))?;
    let kmean = f.kappa.iter().sum::<f64>() / f.kappa.len() as f64;
    let kdev = f.kappa.iter().fold(0.0f64, |m, k| m.max((k - kmean).abs()));
    if f.orientation != Orientation::Outward || kdev > 1e-6 * kmean.abs() || kmean >= 0.0 {
        return Err(Error::Unsupported("the radial backend needs a circle with the outward frame".into()));
    }
    if setup.profile.tangential_depends_on_s() {
        return Err(Error::Unsupported("the radial backend needs a profile independent of s".into()));
    }
    let radius = -1.0 / kmean;
    let rho_max = radius + setup.half_width;
    let w = w_radial.clone();
    let model = RadialModel::new(radius, move |r| w(r), rho_max);
    let limit_op = match &lm.trans {
        Some(t) => {
            let ups = t.upsilon.iter().sum::<f64>() / t.upsilon.len() as f64;
            RadialOperator::Limit { theta: t.theta, upsilon: ups }
        }
        None => RadialOperator::Split,
    };
    let m_max = 16;
    let mut hi = 10.0;
    let lo = -200.0;
    let limit = loop {
        let sp = model.spectrum(&limit_op, lo, hi, m_max)?;
        if sp.len() >= setup.tracked + 2 || hi > 1e4 {
            break sp;
        }
        hi *= 2.0;
    };
    if limit.len() < setup.tracked {
        return Err(Error::Numerical("radial limit spectrum has too few eigenvalues".into()));
    }
    let tracked: Vec<_> = limit.iter().take(setup.tracked).cloned().collect();
    let top = tracked.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    let bottom = tracked[0].value;
    let span = (top - bottom).max(1.0);
    let rows: Vec<Vec<ConvergenceRow>> = setup
        .eps_list
        .par_iter()
        .map(|&eps| {
            let op = RadialOperator::Layer { profile: setup.profile.clone(), epsilon: eps };
            let near = model.spectrum(&op, bottom - span - 2.0, top + span + 2.0, m_max)?;
            // Nearest free partner with the same angular number.
            let mut used = vec![false; near.len()];
            let mut out = Vec::new();
            for (index, t) in tracked.iter().enumerate() {
                let best = near
                    .iter()
                    .enumerate()
                    .filter(|(k, e)| !used[*k] && e.m == t.m)
                    .min_by(|a, b| (a.1.value - t.value).abs().partial_cmp(&(b.1.value - t.value).abs()).unwrap());
                let (lambda_eps, lost) = match best {
                    Some((k, e)) => {
                        used[k] = true;
                        (e.value, false)
                    }
                    None => (f64::NAN, true),
                };
                out.push(ConvergenceRow {
                    backend: Backend::Radial,
                    eps,
                    index,
                    lambda_eps,
                    lambda_limit: t.value,
                    gap: (lambda_eps - t.value).abs(),
                    overlap: None,
                    lost,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ConvergenceRow> = rows.into_iter().flatten().collect();
    let warnings = rows
        .iter()
        .filter(|r| r.lost)
        .map(|r| format!("radial: no eigenvalue of H_eps paired with limit eigenvalue {} at eps = {}", r.index, r.eps))
        .collect();
    Ok((rows, warnings))
}

/// Limit eigenpairs as nodal fields on the interface mesh.
struct LimitSpectrum {
    mesh: InterfaceMesh,
    values: Vec<f64>,
    nodal: Vec<Vec<f64>>,
}

fn solve_limit(setup: &ConvergenceSetup, lm: &LimitModel, level: u32) -> Result<LimitSpectrum> {
    let eps0 = setup.eps_list[0];
    let cfg = setup.config(eps0, level);
    let mesh = build_mesh(&cfg, MeshKind::Interface)?;
    let k = setup.tracked + setup.extra;
    let opts = SolveOptions { tol: setup.solver_tol, ..SolveOptions::lowest(k) };
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut push = |op: &Operator, r: SpectralResult| {
        for (l, x) in r.eigenvalues.into_iter().zip(r.eigenvectors) {
            pairs.push((l, op.dofs.expand(&x)));
        }
    };
    match &lm.trans {
        Some(t) => {
            let op = assemble_limit(&mesh, &cfg, t)?;
            let r = solve(&op.k, &op.m, &opts)?;
            push(&op, r);
        }
        None => {
            let split = assemble_dirichlet_split(&mesh, &cfg)?;
            for op in [&split.minus, &split.plus] {
                let r = solve(&op.k, &op.m, &SolveOptions { k: k.min(op.k.n), ..opts.clone() })?;
                push(op, r);
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.truncate(k);
    let top = pairs.last().map_or(0.0, |p| p.0);
    cfg.check_truncation(top)?;
    let (values, nodal) = pairs.into_iter().unzip();
    Ok(LimitSpectrum { mesh, values, nodal })
}

struct LevelMatch {
    /// Per tracked index: (lambda_eps, overlap).
    found: Vec<Option<(f64, f64)>>,
}

fn solve_eps_level(setup: &ConvergenceSetup, lim: &LimitSpectrum, eps: f64, level: u32) -> Result<LevelMatch> {
    let cfg = setup.config(eps, level);
    let mesh = build_mesh(&cfg, MeshKind::Layer)?;
    let op = assemble_heps(&mesh, &cfg)?;
    let transfer = Transfer::new(&lim.mesh, &mesh)?;
    let bottom = lim.values[0];
    let top = lim.values[setup.tracked - 1];
    let margin = 1.0 + 0.5 * (top - bottom).abs() + 0.25 * bottom.abs();
    let k = setup.tracked + setup.extra;
    let mut opts = SolveOptions { tol: setup.solver_tol, ..SolveOptions::near(bottom - margin, k) };
    let b = SpectralResult {
        eigenvalues: lim.values.clone(),
        eigenvectors: lim.nodal.iter().map(|x| Ok(op.dofs.restrict(&transfer.apply(x)?))).collect::<Result<_>>()?,
        residuals: vec![0.0; lim.values.len()],
        sigma: f64::NEG_INFINITY,
        below_sigma: None,
        certified: None,
    };
    let mut found = vec![None; setup.tracked];
    for _attempt in 0..3 {
        let a = solve(&op.k, &op.m, &opts)?;
        let pairing = match_eigenpairs(&a, &b, &op.m, None, setup.cluster_tol)?;
        let mut all = true;
        for (j, slot) in found.iter_mut().enumerate() {
            *slot = pairing.pairs.iter().find(|p| p.b == j).map(|p| (p.lambda_a, p.overlap));
            if slot.map_or(true, |s| s.1 < setup.min_overlap) {
                all = false;
            }
        }
        if all {
            break;
        }
        opts.k += setup.tracked + setup.extra;
    }
    Ok(LevelMatch { found })
}

fn fem_rows(setup: &ConvergenceSetup, lm: &LimitModel) -> Result<(Vec<ConvergenceRow>, Vec<String>)> {
    let levels = [0u32, 1];
    let limits: Vec<LimitSpectrum> = levels.iter().map(|&l| solve_limit(setup, lm, l)).collect::<Result<_>>()?;
    for l in &limits {
        if l.values.len() < setup.tracked {
            return Err(Error::Numerical("limit operator returned too few eigenvalues".into()));
        }
    }
    let lim_ref: Vec<f64> =
        (0..setup.tracked).map(|j| richardson(limits[0].values[j], limits[1].values[j], 2.0)).collect();
    let per_eps: Vec<(f64, Vec<LevelMatch>)> = setup
        .eps_list
        .par_iter()
        .map(|&eps| {
            let m = levels
                .iter()
                .zip(&limits)
                .map(|(&l, lim)| solve_eps_level(setup, lim, eps, l))
                .collect::<Result<Vec<_>>>()?;
            Ok((eps, m))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (eps, m) in per_eps {
        for (index, &lambda_limit) in lim_ref.iter().enumerate() {
            let (c, f) = (m[0].found[index], m[1].found[index]);
            let (lambda_eps, overlap, lost) = match (c, f) {
                (Some(c), Some(f)) => {
                    let ov = c.1.min(f.1);
                    (richardson(c.0, f.0, 2.0), ov, ov < setup.min_overlap)
                }
                _ => (f64::NAN, 0.0, true),
            };
            if lost {
                warnings.push(format!(
                    "fem: eigenvalue {index} lost at eps = {eps} (overlap {overlap:.3}); excluded from the fit"
                ));
            }
            rows.push(ConvergenceRow {
                backend: Backend::Fem,
                eps,
                index,
                lambda_eps,
                lambda_limit,
                gap: (lambda_eps - lambda_limit).abs(),
                overlap: Some(overlap),
                lost,
            });
        }
    }
    Ok((rows, warnings))
}
