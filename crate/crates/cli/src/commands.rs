use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use layerspec::assembly::{
    assemble_dirichlet_split, assemble_heps, assemble_limit, distributional_limit_check, Operator,
};
use layerspec::asymptotics::{
    build_quasimode, eigenvalues_within, quasimode_residual, run_convergence, Backend, ConvergenceSetup,
    DiscreteField, QuasimodeOptions,
};
use layerspec::eigensolve::{solve, SolveOptions, SpectralResult};
use layerspec::geometry::CurveFrame;
use layerspec::mesh::{build_mesh, InterfaceMesh, MeshKind, ModelConfig};
use layerspec::resonance::{
    compute_transmission, detect_resonance_with, profile_moments, scan_coupling, HalfBoundState, PotentialProfile,
    ResonanceSettings, TransmissionData,
};
use serde::Serialize;

use crate::config::Loaded;
use crate::{CliError, MeshChoice, OperatorKind};

pub struct Context<'a> {
    pub cfg: &'a Loaded,
    pub out: PathBuf,
}

impl Context<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.out.join(name);
        File::create(&p).map(BufWriter::new).map_err(|e| CliError::numerical(format!("{}: {e}", p.display())))
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(self.create(name)?))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::numerical(format!("json: {e}")))?;
        writeln!(f)?;
        Ok(())
    }

    fn settings(&self) -> ResonanceSettings {
        let s = &self.cfg.cfg.solver;
        ResonanceSettings { intervals: s.ode_intervals, tol: s.resonance_tol }
    }

    fn solve_opts(&self, k: usize) -> SolveOptions {
        let s = &self.cfg.cfg.solver;
        SolveOptions { k, sigma: s.sigma, tol: s.tol, seed: self.cfg.cfg.seed, ..Default::default() }
    }
}

struct Setting {
    frame: Arc<CurveFrame>,
    profile: PotentialProfile,
    hb: HalfBoundState,
}

fn setting(ctx: &Context) -> Result<Setting, CliError> {
    let profile = ctx.cfg.profile()?;
    let frame = ctx.cfg.frame()?;
    let hb = detect_resonance_with(&profile, &ctx.settings())?;
    Ok(Setting { frame, profile, hb })
}

fn transmission(st: &Setting) -> Result<Option<TransmissionData>, CliError> {
    if !st.hb.resonant {
        return Ok(None);
    }
    let f = &st.frame;
    Ok(Some(compute_transmission(&st.profile, &st.hb, &f.s, &f.kappa, f.length)?))
}

fn model(ctx: &Context, st: &Setting, eps: f64) -> Result<ModelConfig, CliError> {
    let c = ctx.cfg.model(st.frame.clone(), ctx.cfg.w()?, st.profile.clone(), eps);
    c.validate()?;
    Ok(c)
}

pub fn resonance(ctx: &Context) -> Result<(), CliError> {
    let st = setting(ctx)?;
    let settings = ctx.settings();
    let moments = profile_moments(&st.profile, &[0.0], settings.intervals);
    let mut w = ctx.csv("resonance.csv")?;
    w.write_record(["resonant", "theta", "defect", "max_abs_h", "integral_v", "mu1"])?;
    w.write_record([
        st.hb.resonant.to_string(),
        fmt(st.hb.theta),
        fmt(st.hb.defect),
        fmt(st.hb.max_abs),
        fmt(moments.integral_v),
        fmt(moments.mu1),
    ])?;
    w.flush()?;

    let f = &st.frame;
    let mut w = ctx.csv("transmission.csv")?;
    w.write_record(["s", "kappa", "mu0", "mu", "upsilon", "theta"])?;
    match transmission(&st)? {
        Some(t) => {
            for j in 0..t.s.len() {
                w.write_record([fmt(t.s[j]), fmt(t.kappa[j]), fmt(t.mu0[j]), fmt(t.mu[j]), fmt(t.upsilon[j]), fmt(t.theta)])?;
            }
        }
        None => {
            let m = profile_moments(&st.profile, &f.s, settings.intervals);
            for j in 0..f.s.len() {
                w.write_record([fmt(f.s[j]), fmt(f.kappa[j]), fmt(m.mu0[j]), String::new(), String::new(), String::new()])?;
            }
        }
    }
    w.flush()?;

    if let Some(sc) = &ctx.cfg.cfg.scan {
        let r = scan_coupling(&st.profile, (sc.alpha_min, sc.alpha_max), sc.grid, &settings)?;
        let mut w = ctx.csv("scan.csv")?;
        w.write_record(["alpha", "defect", "resonant"])?;
        for s in &r.samples {
            w.write_record([fmt(s.alpha), fmt(s.defect), s.resonant.to_string()])?;
        }
        w.flush()?;
        let mut w = ctx.csv("scan_roots.csv")?;
        w.write_record(["alpha"])?;
        for a in &r.roots {
            w.write_record([fmt(*a)])?;
        }
        w.flush()?;
        if r.degenerate {
            eprintln!("warning: the defect vanishes on a whole interval of the scan");
        }
    }
    println!(
        "resonant = {}, theta = {}, defect = {:.3e}",
        st.hb.resonant,
        fmt(st.hb.theta),
        st.hb.defect
    );
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

struct Solved {
    part: &'static str,
    op: Operator,
    result: SpectralResult,
}

fn solve_parts(ctx: &Context, ops: Vec<(&'static str, Operator)>, k: usize) -> Result<Vec<Solved>, CliError> {
    ops.into_iter()
        .map(|(part, op)| {
            let kk = k.min(op.k.n);
            let result = solve(&op.k, &op.m, &ctx.solve_opts(kk))?;
            Ok(Solved { part, op, result })
        })
        .collect()
}

fn operators(
    ctx: &Context,
    st: &Setting,
    kind: OperatorKind,
    eps: f64,
) -> Result<(ModelConfig, InterfaceMesh, Vec<(&'static str, Operator)>), CliError> {
    let cfg = model(ctx, st, eps)?;
    match kind {
        OperatorKind::Heps => {
            let mesh = build_mesh(&cfg, MeshKind::Layer)?;
            let op = assemble_heps(&mesh, &cfg)?;
            Ok((cfg, mesh, vec![("full", op)]))
        }
        OperatorKind::Limit => {
            let trans = transmission(st)?.ok_or_else(|| {
                CliError::config(format!(
                    "the profile is not resonant (defect {:.3e}); use --operator dirichlet-split",
                    st.hb.defect
                ))
            })?;
            let mesh = build_mesh(&cfg, MeshKind::Interface)?;
            let op = assemble_limit(&mesh, &cfg, &trans)?;
            Ok((cfg, mesh, vec![("full", op)]))
        }
        OperatorKind::DirichletSplit => {
            let mesh = build_mesh(&cfg, MeshKind::Interface)?;
            let split = assemble_dirichlet_split(&mesh, &cfg)?;
            Ok((cfg, mesh, vec![("minus", split.minus), ("plus", split.plus)]))
        }
    }
}

/// Eigenpairs of all parts, sorted by eigenvalue, as nodal vectors.
fn merged(parts: &[Solved], k: usize) -> Vec<(f64, f64, &'static str, Vec<f64>)> {
    let mut all: Vec<_> = parts
        .iter()
        .flat_map(|p| {
            let r = &p.result;
            (0..r.eigenvalues.len()).map(move |i| (r.eigenvalues[i], r.residuals[i], p.part, p.op.dofs.expand(&r.eigenvectors[i])))
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(k);
    all
}

pub fn solve_cmd(ctx: &Context, kind: OperatorKind, eps: Option<f64>, k: Option<usize>) -> Result<(), CliError> {
    let st = setting(ctx)?;
    let eps = eps.unwrap_or(ctx.cfg.cfg.schedule.eps[0]);
    let k = k.unwrap_or(ctx.cfg.cfg.solver.k);
    let (cfg, mesh, ops) = operators(ctx, &st, kind, eps)?;
    let pairs = if k == 0 { Vec::new() } else { merged(&solve_parts(ctx, ops, k)?, k) };
    if let Some(top) = pairs.last() {
        if kind != OperatorKind::Heps {
            if let Err(e) = cfg.check_truncation(top.0) {
                eprintln!("warning: {e}");
            }
        }
    }
    let mut w = ctx.csv("eigenvalues.csv")?;
    w.write_record(["index", "eigenvalue", "residual", "part"])?;
    for (i, p) in pairs.iter().enumerate() {
        w.write_record([i.to_string(), fmt(p.0), fmt(p.1), p.2.to_string()])?;
    }
    w.flush()?;
    let mut w = ctx.csv("eigenvectors.csv")?;
    let mut header = vec!["node".to_string(), "x1".into(), "x2".into()];
    header.extend((0..pairs.len()).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for (n, x) in mesh.nodes.iter().enumerate() {
        let mut rec = vec![n.to_string(), fmt(x[0]), fmt(x[1])];
        rec.extend(pairs.iter().map(|p| fmt(p.3[n])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    for (i, p) in pairs.iter().enumerate() {
        println!("{i:>3}  {:.10}  ({})", p.0, p.2);
    }
    Ok(())
}


#[derive(Serialize)]
struct FitSummary {
    backend: String,
    index: usize,
    lambda_limit: f64,
    c: f64,
    p: f64,
    points: usize,
    pass: bool,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    resonant: bool,
    theta: Option<f64>,
    limit: String,
    passed: bool,
    fits: Vec<FitSummary>,
    warnings: Vec<String>,
}

/// `W` as a function of the distance to the circle centre, when it is
/// radially symmetric there.
fn radial_w(ctx: &Context, frame: &CurveFrame) -> Result<Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>, CliError> {
    let w = ctx.cfg.w_expr()?;
    let c = frame.centroid();
    let reach = 1.0 / frame.kappa.iter().fold(0.0f64, |m, k| m.max(k.abs())).max(1e-12) + ctx.cfg.cfg.mesh.half_width;
    for i in 1..=16 {
        let rho = reach * i as f64 / 16.0;
        let w0 = w.eval(&[c[0] + rho, c[1]]);
        for j in 1..12 {
            let t = j as f64 * std::f64::consts::PI / 6.0;
            let wj = w.eval(&[c[0] + rho * t.cos(), c[1] + rho * t.sin()]);
            if (wj - w0).abs() > 1e-9 * (1.0 + w0.abs()) {
                return Ok(None);
            }
        }
    }
    Ok(Some(Arc::new(move |rho| w.eval(&[c[0] + rho, c[1]]))))
}

pub fn converge(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.cfg.cfg;
    let profile = ctx.cfg.profile()?;
    let frame = ctx.cfg.frame()?;
    let mut setup = ConvergenceSetup::new(frame.clone(), ctx.cfg.w()?, profile, c.schedule.eps.clone(), c.mesh.half_width);
    setup.density.s_cells = c.mesh.s_cells;
    setup.density.layer_cells = c.mesh.layer_cells;
    setup.density.exterior_growth = c.mesh.exterior_growth;
    setup.density.refinement = c.mesh.refinement;
    setup.band_fraction = c.mesh.band_fraction;
    setup.tracked = c.converge.tracked;
    setup.resonance_tol = c.solver.resonance_tol;
    setup.solver_tol = c.solver.tol;
    setup.cluster_tol = c.converge.cluster_tol;
    setup.min_overlap = c.converge.min_overlap;
    setup.pass_exponent = c.converge.pass_exponent;
    let backends: Vec<Backend> =
        c.converge.backends.iter().map(|b| if b == "radial" { Backend::Radial } else { Backend::Fem }).collect();
    if backends.contains(&Backend::Radial) {
        setup.w_radial = radial_w(ctx, &frame)?;
        if setup.w_radial.is_none() {
            return Err(CliError::config("the radial backend needs W radially symmetric about the circle centre".into()));
        }
    }
    let report = run_convergence(&setup, &backends)?;
    report.write_csv(ctx.create("convergence.csv")?)?;
    let summary = ConvergenceSummary {
        resonant: report.resonant,
        theta: report.theta,
        limit: report.limit.clone(),
        passed: report.passed,
        fits: report
            .fits
            .iter()
            .map(|f| FitSummary {
                backend: f.backend.to_string(),
                index: f.index,
                lambda_limit: f.lambda_limit,
                c: f.c,
                p: f.p,
                points: f.points,
                pass: f.pass,
            })
            .collect(),
        warnings: report.warnings.clone(),
    };
    ctx.json("convergence.json", &summary)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.fits {
        println!("{}  index {}  limit {:.8}  p = {:.3}  {}", f.backend, f.index, f.lambda_limit, f.p, if f.pass { "ok" } else { "below target" });
    }
    Ok(())
}

#[derive(Serialize)]
struct DistSummary {
    predicted: f64,
    integral_v: f64,
    mu1: f64,
    divergent: bool,
    divergent_coefficient: f64,
    fitted_order: Option<f64>,
}

pub fn distcheck(ctx: &Context) -> Result<(), CliError> {
    let profile = ctx.cfg.profile()?;
    let frame = ctx.cfg.frame()?;
    let phi = ctx.cfg.test_fn(&frame)?;
    let report = distributional_limit_check(&profile, &frame, &*phi, &ctx.cfg.cfg.schedule.eps)?;
    let mut w = ctx.csv("distcheck.csv")?;
    w.write_record(["eps", "integral", "error", "scaled"])?;
    for r in &report.rows {
        w.write_record([fmt(r.epsilon), fmt(r.integral), fmt(r.error), fmt(r.scaled)])?;
    }
    w.flush()?;
    ctx.json(
        "distcheck.json",
        &DistSummary {
            predicted: report.predicted,
            integral_v: report.integral_v,
            mu1: report.mu1,
            divergent: report.divergent,
            divergent_coefficient: report.divergent_coefficient,
            fitted_order: report.fitted_order,
        },
    )?;
    for r in &report.rows {
        println!("eps {:<10} integral {:.10}  error {:.3e}", r.epsilon, r.integral, r.error);
    }
    Ok(())
}

pub fn quasimode(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.cfg.cfg;
    let st = setting(ctx)?;
    let trans = transmission(&st)?;
    let eps0 = c.schedule.eps[0];
    let kind = if st.hb.resonant { OperatorKind::Limit } else { OperatorKind::DirichletSplit };
    let index = c.quasimode.index;
    let (lcfg, lmesh, ops) = operators(ctx, &st, kind, eps0)?;
    let pairs = merged(&solve_parts(ctx, ops, index + 1)?, index + 1);
    let (lambda, _, _, nodal) =
        pairs.into_iter().nth(index).ok_or_else(|| CliError::numerical("limit eigenpair not found".into()))?;
    if let Err(e) = lcfg.check_truncation(lambda) {
        eprintln!("warning: {e}");
    }
    let field = DiscreteField::new(Arc::new(lmesh), nodal)?;
    let opts = QuasimodeOptions { beta: c.quasimode.beta, solvability_tol: c.quasimode.solvability_tol, ..Default::default() };
    let mut w = ctx.csv("quasimode.csv")?;
    w.write_record(["eps", "lambda", "residual", "eigenvalues_within", "beta", "solvability", "jump_value_plus", "jump_value_minus", "jump_deriv_plus", "jump_deriv_minus"])?;
    for &eps in &c.schedule.eps {
        let cfg = model(ctx, &st, eps)?;
        let mesh = build_mesh(&cfg, MeshKind::Layer)?;
        let op = assemble_heps(&mesh, &cfg)?;
        let q = build_quasimode(lambda, &field, &cfg, &st.hb, trans.as_ref(), &mesh, &opts)?;
        let r = quasimode_residual(&q, &op)?;
        let count = eigenvalues_within(&op, lambda, r)?;
        let j = &q.jumps;
        w.write_record([
            fmt(eps),
            fmt(lambda),
            fmt(r),
            count.to_string(),
            fmt(q.beta),
            fmt(q.solvability),
            fmt(j.value_plus),
            fmt(j.value_minus),
            fmt(j.deriv_plus),
            fmt(j.deriv_minus),
        ])?;
        println!("eps {eps:<10} lambda {lambda:.8}  residual {r:.5}  eigenvalues within {count}");
    }
    w.flush()?;
    Ok(())
}

pub fn mesh_dump(ctx: &Context, kind: MeshChoice, eps: Option<f64>) -> Result<(), CliError> {
    let st = setting(ctx)?;
    let eps = eps.unwrap_or(ctx.cfg.cfg.schedule.eps[0]);
    let cfg = model(ctx, &st, eps)?;
    let mk = match kind {
        MeshChoice::Layer => MeshKind::Layer,
        MeshChoice::Interface => MeshKind::Interface,
    };
    let mesh = build_mesh(&cfg, mk)?;
    mesh.write_tables(&ctx.out)?;
    st.frame.write_csv(ctx.create("frame.csv")?)?;
    println!("{} nodes, {} triangles", mesh.node_count(), mesh.triangles.len());
    Ok(())
}
