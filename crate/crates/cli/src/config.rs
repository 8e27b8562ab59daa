//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use layerspec::expr::Expr;
use layerspec::geometry::{reparametrize_arclength, ClosedCurve, CurveFrame};
use layerspec::mesh::{MeshDensity, ModelConfig, Potential2d};
use layerspec::resonance::PotentialProfile;
use layerspec::table::CubicSpline;
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the eigensolver start vectors.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub profile: ProfileSection,
    pub curve: CurveSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub distcheck: DistcheckSection,
    #[serde(default)]
    pub quasimode: QuasimodeSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `V` as an expression in `n`.
    pub v: Option<Spanned<String>>,
    /// `U` as an expression in `s` and `n`.
    pub u: Option<Spanned<String>>,
    /// CSV table with columns `n, v`.
    pub v_table: Option<String>,
    /// CSV table with columns `n, u`.
    pub u_table: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Circle,
    Ellipse,
    Expr,
    Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub kind: CurveKind,
    pub radius: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub x1: Option<Spanned<String>>,
    pub x2: Option<Spanned<String>>,
    pub period: Option<f64>,
    /// CSV table with columns `x1, x2`.
    pub table: Option<String>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    512
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `W` as an expression in `x1, x2`.
    pub w: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub eps: Vec<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { eps: vec![0.2, 0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub half_width: f64,
    pub s_cells: usize,
    pub layer_cells: usize,
    pub exterior_growth: f64,
    pub refinement: u32,
    pub band_fraction: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        let d = MeshDensity::default();
        MeshSection {
            half_width: 5.0,
            s_cells: d.s_cells,
            layer_cells: d.layer_cells,
            exterior_growth: d.exterior_growth,
            refinement: 0,
            band_fraction: 0.6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub k: usize,
    pub tol: f64,
    pub sigma: Option<f64>,
    pub resonance_tol: f64,
    pub ode_intervals: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { k: 6, tol: 1e-8, sigma: None, resonance_tol: 1e-8, ode_intervals: 2048 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub alpha_min: f64,
    pub alpha_max: f64,
    #[serde(default = "default_scan_grid")]
    pub grid: usize,
}

fn default_scan_grid() -> usize {
    400
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    pub tracked: usize,
    pub backends: Vec<String>,
    pub min_overlap: f64,
    pub cluster_tol: f64,
    pub pass_exponent: f64,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            tracked: 3,
            backends: vec!["fem".into()],
            min_overlap: 0.5,
            cluster_tol: 5e-3,
            pass_exponent: 0.9,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistcheckSection {
    /// Test function in `x1, x2`; defaults to a Gaussian centred on the
    /// curve point `s = 0`.
    pub test_fn: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasimodeSection {
    /// Which limit eigenpair, counted from the bottom.
    pub index: usize,
    pub beta: Option<f64>,
    pub solvability_tol: f64,
}

impl Default for QuasimodeSection {
    fn default() -> Self {
        QuasimodeSection { index: 0, beta: None, solvability_tol: 0.1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

/// A parsed configuration together with its source, for error locations.
pub struct Loaded {
    pub cfg: ExperimentConfig,
    pub path: PathBuf,
    source: String,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: cannot read config: {e}", path.display())))?;
    let cfg: ExperimentConfig =
        toml::from_str(&source).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let loaded = Loaded { cfg, path: path.to_path_buf(), source };
    loaded.check_ranges()?;
    loaded.check_exprs()?;
    Ok(loaded)
}

impl Loaded {
    fn at(&self, key: &str, span: &Spanned<String>, msg: impl std::fmt::Display) -> CliError {
        CliError::config(format!("{}:{}: {key}: {msg}", self.path.display(), line_of(&self.source, span.span().start)))
    }

    fn expr(&self, key: &str, span: &Spanned<String>, vars: &[&str]) -> Result<Expr, CliError> {
        Expr::parse(span.get_ref(), vars).map_err(|e| self.at(key, span, e))
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    /// Parse every expression so that a bad one fails whatever the command.
    fn check_exprs(&self) -> Result<(), CliError> {
        let c = &self.cfg;
        let mut all: Vec<(&str, &Spanned<String>, &[&str])> = vec![("potential.w", &c.potential.w, &["x1", "x2"])];
        if let Some(v) = &c.profile.v {
            all.push(("profile.v", v, &["n"]));
        }
        if let Some(u) = &c.profile.u {
            all.push(("profile.u", u, &["s", "n"]));
        }
        if let Some(x) = &c.curve.x1 {
            all.push(("curve.x1", x, &["t"]));
        }
        if let Some(x) = &c.curve.x2 {
            all.push(("curve.x2", x, &["t"]));
        }
        if let Some(f) = &c.distcheck.test_fn {
            all.push(("distcheck.test_fn", f, &["x1", "x2"]));
        }
        for (key, span, vars) in all {
            self.expr(key, span, vars)?;
        }
        Ok(())
    }

    fn check_ranges(&self) -> Result<(), CliError> {
        let c = &self.cfg;
        let bad = |m: String| Err(CliError::config(format!("{}: {m}", self.path.display())));
        if c.schedule.eps.is_empty() || c.schedule.eps.iter().any(|e| !(*e > 0.0)) {
            return bad("schedule.eps must be a non-empty list of positive values".into());
        }
        if !(c.mesh.half_width > 0.0) {
            return bad("mesh.half_width must be positive".into());
        }
        if !(c.solver.tol > 0.0 && c.solver.tol < 1.0) || !(c.solver.resonance_tol > 0.0) {
            return bad("solver tolerances must be positive and below one".into());
        }
        if c.solver.ode_intervals < 16 {
            return bad("solver.ode_intervals must be at least 16".into());
        }
        if c.curve.grid < 16 {
            return bad("curve.grid must be at least 16".into());
        }
        if let Some(s) = &c.scan {
            if !(s.alpha_min < s.alpha_max) || s.grid < 2 {
                return bad("scan needs alpha_min < alpha_max and grid >= 2".into());
            }
        }
        if c.converge.tracked == 0 || !(c.converge.min_overlap >= 0.0 && c.converge.min_overlap <= 1.0) {
            return bad("converge.tracked must be positive and converge.min_overlap in [0, 1]".into());
        }
        for b in &c.converge.backends {
            if b != "fem" && b != "radial" {
                return bad(format!("unknown convergence backend '{b}' (expected fem or radial)"));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<PotentialProfile, CliError> {
        let p = &self.cfg.profile;
        let profile = match (&p.v, &p.v_table) {
            (Some(v), None) => {
                self.expr("profile.v", v, &["n"])?;
                match (&p.u, &p.u_table) {
                    (Some(u), None) => {
                        self.expr("profile.u", u, &["s", "n"])?;
                        PotentialProfile::from_exprs(v.get_ref(), Some(u.get_ref()))?
                    }
                    (None, Some(t)) => {
                        let ut = self.table(t)?;
                        let ve = self.expr("profile.v", v, &["n"])?;
                        PotentialProfile::new(move |n| ve.eval(&[n]))
                            .with_tangential_n(move |n| ut.eval(n))
                            .with_label(format!("V = {}", v.get_ref()))
                    }
                    (None, None) => PotentialProfile::from_exprs(v.get_ref(), None)?,
                    _ => return Err(CliError::config("give at most one of profile.u and profile.u_table".into())),
                }
            }
            (None, Some(t)) => {
                let vt = self.table(t)?;
                let ut = match (&p.u, &p.u_table) {
                    (None, Some(t)) => Some(self.table(t)?),
                    (None, None) => None,
                    _ => return Err(CliError::config("a tabulated V takes a tabulated U (profile.u_table)".into())),
                };
                PotentialProfile::from_tables(vt, ut)
            }
            _ => return Err(CliError::config("give exactly one of profile.v and profile.v_table".into())),
        };
        profile.validate(257, &[0.0])?;
        Ok(profile)
    }

    fn read_pairs(&self, file: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let path = self.resolve(file);
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let num = |k: usize| -> Result<f64, CliError> {
                rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| {
                    CliError::config(format!("{}:{}: expected two numeric columns", path.display(), i + 2))
                })
            };
            a.push(num(0)?);
            b.push(num(1)?);
        }
        Ok((a, b))
    }

    fn table(&self, file: &str) -> Result<CubicSpline, CliError> {
        let (x, y) = self.read_pairs(file)?;
        Ok(CubicSpline::new(x, y)?)
    }

    pub fn frame(&self) -> Result<Arc<CurveFrame>, CliError> {
        let c = &self.cfg.curve;
        let missing = |k: &str| CliError::config(format!("curve.{k} is required for this curve kind"));
        let curve = match c.kind {
            CurveKind::Circle => {
                let r = c.radius.ok_or_else(|| missing("radius"))?;
                if !(r > 0.0) {
                    return Err(CliError::config("curve.radius must be positive".into()));
                }
                ClosedCurve::circle(r, c.center.unwrap_or([0.0, 0.0]))
            }
            CurveKind::Ellipse => {
                let (a, b) = (c.a.ok_or_else(|| missing("a"))?, c.b.ok_or_else(|| missing("b"))?);
                if !(a > 0.0 && b > 0.0) {
                    return Err(CliError::config("ellipse semi-axes must be positive".into()));
                }
                ClosedCurve::ellipse(a, b)
            }
            CurveKind::Expr => {
                let x1 = c.x1.as_ref().ok_or_else(|| missing("x1"))?;
                let x2 = c.x2.as_ref().ok_or_else(|| missing("x2"))?;
                self.expr("curve.x1", x1, &["t"])?;
                self.expr("curve.x2", x2, &["t"])?;
                ClosedCurve::from_exprs(x1.get_ref(), x2.get_ref(), c.period.unwrap_or(2.0 * std::f64::consts::PI))?
            }
            CurveKind::Table => {
                let (x, y) = self.read_pairs(c.table.as_ref().ok_or_else(|| missing("table"))?)?;
                ClosedCurve::from_samples(x.into_iter().zip(y).map(|(a, b)| [a, b]).collect())?
            }
        };
        Ok(Arc::new(reparametrize_arclength(&curve, c.grid)?))
    }

    pub fn w_expr(&self) -> Result<Expr, CliError> {
        self.expr("potential.w", &self.cfg.potential.w, &["x1", "x2"])
    }

    pub fn w(&self) -> Result<Potential2d, CliError> {
        let e = self.w_expr()?;
        Ok(Arc::new(move |x| e.eval(&x)))
    }

    pub fn test_fn(&self, frame: &CurveFrame) -> Result<Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>, CliError> {
        match &self.cfg.distcheck.test_fn {
            Some(src) => {
                let e = self.expr("distcheck.test_fn", src, &["x1", "x2"])?;
                Ok(Arc::new(move |x| e.eval(&x)))
            }
            None => {
                let p = frame.eval(0.0).point;
                let w = 0.25 * frame.eps_star;
                Ok(Arc::new(move |x| (-((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)) / (w * w)).exp()))
            }
        }
    }

    pub fn model(&self, frame: Arc<CurveFrame>, w: Potential2d, profile: PotentialProfile, eps: f64) -> ModelConfig {
        let m = &self.cfg.mesh;
        let mut c = ModelConfig::new(frame, w, profile, eps, m.half_width);
        c.density.s_cells = m.s_cells;
        c.density.layer_cells = m.layer_cells;
        c.density.exterior_growth = m.exterior_growth;
        c.density.refinement = m.refinement;
        c.band_fraction = m.band_fraction;
        c
    }
}
