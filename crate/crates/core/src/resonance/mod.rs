//! The one-dimensional transverse problem `-h'' + V h = 0` on `[-1, 1]`:
//! resonance detection, the auxiliary solutions and the transmission data
//! of the limit operator.

mod profile;

pub use profile::{Fn1, Fn2, PotentialProfile, ProfileReport};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ResonanceSettings {
    /// Uniform grid intervals on `[-1, 1]`; rounded up to an even number.
    pub intervals: usize,
    /// Relative tolerance of the resonance test.
    pub tol: f64,
}

impl Default for ResonanceSettings {
    fn default() -> Self {
        ResonanceSettings { intervals: 2048, tol: 1e-8 }
    }
}

impl ResonanceSettings {
    fn grid(&self) -> usize {
        let n = self.intervals.max(8);
        n + n % 2
    }
}

/// Classical fourth order Runge-Kutta on the uniform grid of `[-1, 1]`,
/// recording the state at every grid point.
pub fn rk4_grid<const D: usize>(
    intervals: usize,
    substeps: usize,
    y0: [f64; D],
    f: impl Fn(f64, &[f64; D]) -> [f64; D],
) -> Result<Vec<[f64; D]>> {
    let h = 2.0 / (intervals * substeps) as f64;
    let mut out = Vec::with_capacity(intervals + 1);
    let mut y = y0;
    out.push(y);
    let axpy = |y: &[f64; D], a: f64, k: &[f64; D]| -> [f64; D] {
        let mut r = *y;
        for i in 0..D {
            r[i] += a * k[i];
        }
        r
    };
    for i in 0..intervals {
        for j in 0..substeps {
            let t = -1.0 + ((i * substeps + j) as f64) * h;
            let k1 = f(t, &y);
            let k2 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &k1));
            let k3 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &k2));
            let k4 = f(t + h, &axpy(&y, h, &k3));
            for d in 0..D {
                y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("transverse ODE blew up near n = {}", -1.0 + 2.0 * (i + 1) as f64 / intervals as f64)));
        }
        out.push(y);
    }
    Ok(out)
}

/// Substeps per grid interval so that `h * sqrt(max|V| + max|U|)` stays small.
pub(crate) fn substeps_for(profile: &PotentialProfile, intervals: usize) -> usize {
    let mut k: f64 = 0.0;
    for i in 0..=64 {
        let n = -1.0 + i as f64 / 32.0;
        k = k.max(profile.v(n).abs() + profile.u(0.0, n).abs());
    }
    let dn = 2.0 / intervals as f64;
    ((dn * k.sqrt()) / 0.005).ceil().clamp(1.0, 10_000.0) as usize
}

/// Composite Simpson rule on `[-1, 1]` for samples on an even uniform grid.
pub fn simpson(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n % 2 == 0);
    let h = 2.0 / n as f64;
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
    }
    acc * h / 3.0
}

fn grid_point(i: usize, intervals: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / intervals as f64
}

fn hermite(values: &[f64], derivs: &[f64], n: f64) -> (f64, f64) {
    let intervals = values.len() - 1;
    let t = ((n + 1.0) / 2.0 * intervals as f64).clamp(0.0, intervals as f64);
    let i = (t.floor() as usize).min(intervals - 1);
    let x = t - i as f64;
    let h = 2.0 / intervals as f64;
    let (y0, y1, d0, d1) = (values[i], values[i + 1], derivs[i] * h, derivs[i + 1] * h);
    let x2 = x * x;
    let x3 = x2 * x;
    let v = (2.0 * x3 - 3.0 * x2 + 1.0) * y0 + (x3 - 2.0 * x2 + x) * d0 + (-2.0 * x3 + 3.0 * x2) * y1 + (x3 - x2) * d1;
    let dv = ((6.0 * x2 - 6.0 * x) * y0 + (3.0 * x2 - 4.0 * x + 1.0) * d0 + (-6.0 * x2 + 6.0 * x) * y1 + (3.0 * x2 - 2.0 * x) * d1) / h;
    (v, dv)
}

/// A solution of a transverse ODE sampled on the uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct AuxSolution {
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl AuxSolution {
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    /// Value and derivative at `n`, by cubic Hermite interpolation.
    pub fn eval(&self, n: f64) -> (f64, f64) {
        hermite(&self.values, &self.derivs, n)
    }

    pub fn end_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn end_deriv(&self) -> f64 {
        *self.derivs.last().unwrap()
    }
}

/// Solution of `-h'' + V h = 0`, `h(-1) = 1`, `h'(-1) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct HalfBoundState {
    pub solution: AuxSolution,
    /// `h(1)`. Only meaningful as the transmission coefficient when `resonant`.
    pub theta: f64,
    /// `h'(1)`.
    pub defect: f64,
    pub resonant: bool,
    pub max_abs: f64,
}

impl HalfBoundState {
    pub fn eval(&self, n: f64) -> (f64, f64) {
        self.solution.eval(n)
    }

    pub fn intervals(&self) -> usize {
        self.solution.intervals()
    }
}

/// Integrate the half-bound state and decide resonance with tolerance `tol`.
pub fn detect_resonance(profile: &PotentialProfile, tol: f64) -> Result<HalfBoundState> {
    detect_resonance_with(profile, &ResonanceSettings { tol, ..Default::default() })
}

pub fn detect_resonance_with(profile: &PotentialProfile, settings: &ResonanceSettings) -> Result<HalfBoundState> {
    if !(settings.tol > 0.0) {
        return Err(Error::Input("resonance tolerance must be positive".into()));
    }
    profile.validate(129, &[0.0])?;
    let intervals = settings.grid();
    let sub = substeps_for(profile, intervals);
    let ys = rk4_grid(intervals, sub, [1.0, 0.0], |n, y| [y[1], profile.v(n) * y[0]])?;
    let values: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let derivs: Vec<f64> = ys.iter().map(|y| y[1]).collect();
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let theta = *values.last().unwrap();
    let defect = *derivs.last().unwrap();
    let resonant = defect.abs() <= settings.tol * (1.0 + max_abs);
    Ok(HalfBoundState { solution: AuxSolution { values, derivs }, theta, defect, resonant, max_abs })
}

/// Solution of `-h1'' + V h1 = 0`, `h1(-1) = 0`, `h1'(-1) = 1`.
pub fn solve_h1(profile: &PotentialProfile, settings: &ResonanceSettings) -> Result<AuxSolution> {
    let intervals = settings.grid();
    let sub = substeps_for(profile, intervals);
    let ys = rk4_grid(intervals, sub, [0.0, 1.0], |n, y| [y[1], profile.v(n) * y[0]])?;
    Ok(AuxSolution { values: ys.iter().map(|y| y[0]).collect(), derivs: ys.iter().map(|y| y[1]).collect() })
}

/// Solutions of `-h2'' + V h2 = kappa h' + U(s, .) h` with zero Cauchy data
/// at `n = -1`, one per sample `(s, kappa)`.
pub fn solve_h2(
    profile: &PotentialProfile,
    h: &HalfBoundState,
    s: &[f64],
    kappa: &[f64],
) -> Result<Vec<AuxSolution>> {
    if !h.resonant {
        return Err(Error::Contract("h2 requires a resonant profile".into()));
    }
    if s.len() != kappa.len() {
        return Err(Error::Input("s and kappa sample counts differ".into()));
    }
    let intervals = h.intervals();
    let sub = substeps_for(profile, intervals);
    s.iter()
        .zip(kappa)
        .map(|(&si, &ki)| {
            let ys = rk4_grid(intervals, sub, [1.0, 0.0, 0.0, 0.0], |n, y| {
                let v = profile.v(n);
                [y[1], v * y[0], y[3], v * y[2] - ki * y[1] - profile.u(si, n) * y[0]]
            })?;
            Ok(AuxSolution { values: ys.iter().map(|y| y[2]).collect(), derivs: ys.iter().map(|y| y[3]).collect() })
        })
        .collect()
}

/// Integral moments of a profile that exist whether or not it is resonant.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileMoments {
    /// `int V dn`.
    pub integral_v: f64,
    /// `-int n V dn`.
    pub mu1: f64,
    /// `int U(s, n) dn` per requested `s`.
    pub mu0: Vec<f64>,
}

pub fn profile_moments(profile: &PotentialProfile, s: &[f64], intervals: usize) -> ProfileMoments {
    let n_int = intervals.max(8) + intervals % 2;
    let grid: Vec<f64> = (0..=n_int).map(|i| grid_point(i, n_int)).collect();
    let vv: Vec<f64> = grid.iter().map(|&n| profile.v(n)).collect();
    let nv: Vec<f64> = grid.iter().zip(&vv).map(|(n, v)| -n * v).collect();
    let mu0 = s
        .iter()
        .map(|&si| simpson(&grid.iter().map(|&n| profile.u(si, n)).collect::<Vec<_>>()))
        .collect();
    ProfileMoments { integral_v: simpson(&vv), mu1: simpson(&nv), mu0 }
}

/// Transmission data of the limit operator along the curve.
#[derive(Debug, Clone, Serialize)]
pub struct TransmissionData {
    /// Arc-length samples, uniform on `[0, length)`.
    pub s: Vec<f64>,
    pub length: f64,
    pub kappa: Vec<f64>,
    pub theta: f64,
    /// `int U h^2 dn`.
    pub mu: Vec<f64>,
    /// `int U dn`.
    pub mu0: Vec<f64>,
    /// `-int n V dn`.
    pub mu1: f64,
    /// `(theta^2 - 1) kappa / 2 + mu`.
    pub upsilon: Vec<f64>,
}

impl TransmissionData {
    /// Periodic linear interpolation of a sampled quantity.
    fn interp(&self, data: &[f64], s: f64) -> f64 {
        let n = self.s.len();
        let ds = self.length / n as f64;
        let t = s.rem_euclid(self.length) / ds;
        let i = (t.floor() as usize).min(n - 1);
        let w = t - i as f64;
        (1.0 - w) * data[i] + w * data[(i + 1) % n]
    }

    pub fn upsilon_at(&self, s: f64) -> f64 {
        self.interp(&self.upsilon, s)
    }

    pub fn kappa_at(&self, s: f64) -> f64 {
        self.interp(&self.kappa, s)
    }

    pub fn mu_at(&self, s: f64) -> f64 {
        self.interp(&self.mu, s)
    }

    /// Data for the reversed frame `s -> length - s`, `n -> -n`.
    pub fn flipped(&self) -> TransmissionData {
        let n = self.s.len();
        let rev = |d: &[f64]| -> Vec<f64> { (0..n).map(|i| d[(n - i) % n]).collect() };
        let theta = 1.0 / self.theta;
        let kappa: Vec<f64> = rev(&self.kappa).iter().map(|k| -k).collect();
        let mu: Vec<f64> = rev(&self.mu).iter().map(|m| m / (self.theta * self.theta)).collect();
        let upsilon = kappa.iter().zip(&mu).map(|(k, m)| 0.5 * (theta * theta - 1.0) * k + m).collect();
        TransmissionData {
            s: self.s.clone(),
            length: self.length,
            kappa,
            theta,
            mu,
            mu0: rev(&self.mu0),
            mu1: -self.mu1,
            upsilon,
        }
    }
}

/// Transmission data for a resonant profile along samples `(s, kappa)` of
/// a closed curve of the given length.
pub fn compute_transmission(
    profile: &PotentialProfile,
    h: &HalfBoundState,
    s: &[f64],
    kappa: &[f64],
    length: f64,
) -> Result<TransmissionData> {
    if !h.resonant {
        return Err(Error::Contract(format!(
            "transmission data requested for a non-resonant profile (defect {:.3e})",
            h.defect
        )));
    }
    if s.is_empty() || s.len() != kappa.len() {
        return Err(Error::Input("s and kappa samples must be non-empty and of equal length".into()));
    }
    let intervals = h.intervals();
    let grid: Vec<f64> = (0..=intervals).map(|i| grid_point(i, intervals)).collect();
    let h2: Vec<f64> = h.solution.values.iter().map(|v| v * v).collect();
    let moments = profile_moments(profile, s, intervals);
    let theta = h.theta;
    let mu: Vec<f64> = s
        .iter()
        .map(|&si| simpson(&grid.iter().zip(&h2).map(|(&n, hh)| profile.u(si, n) * hh).collect::<Vec<_>>()))
        .collect();
    let upsilon = kappa.iter().zip(&mu).map(|(k, m)| 0.5 * (theta * theta - 1.0) * k + m).collect();
    Ok(TransmissionData {
        s: s.to_vec(),
        length,
        kappa: kappa.to_vec(),
        theta,
        mu,
        mu0: moments.mu0,
        mu1: moments.mu1,
        upsilon,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSample {
    pub alpha: f64,
    pub defect: f64,
    pub resonant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    /// Couplings `alpha` at which `alpha V` is resonant, ascending.
    pub roots: Vec<f64>,
    pub samples: Vec<ScanSample>,
    /// The defect vanished identically over the scan (e.g. `V = 0`).
    pub degenerate: bool,
}

/// Find the couplings `alpha` in `range` for which `alpha * V` is resonant.
pub fn scan_coupling(
    base: &PotentialProfile,
    range: (f64, f64),
    grid: usize,
    settings: &ResonanceSettings,
) -> Result<ScanResult> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Input(format!("invalid coupling range [{lo}, {hi}]")));
    }
    if grid < 2 {
        return Err(Error::Input("coupling grid needs at least two points".into()));
    }
    let eval = |a: f64| detect_resonance_with(&base.scaled(a), settings);
    let mut samples = Vec::with_capacity(grid);
    for i in 0..grid {
        let alpha = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let st = eval(alpha)?;
        samples.push(ScanSample { alpha, defect: st.defect, resonant: st.resonant });
    }
    if samples.iter().all(|s| s.resonant) {
        let roots = if lo <= 0.0 && hi >= 0.0 { vec![0.0] } else { vec![] };
        return Ok(ScanResult { roots, samples, degenerate: true });
    }
    let mut roots: Vec<f64> = Vec::new();
    for w in samples.windows(2) {
        if w[0].defect.signum() * w[1].defect.signum() < 0.0 {
            let (mut a, mut b) = (w[0].alpha, w[1].alpha);
            let mut fa = w[0].defect;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = eval(m)?.defect;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa.signum() == fm.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    // Touching zeros without a sign change (double roots).
    let step = (hi - lo) / (grid - 1) as f64;
    for (i, smp) in samples.iter().enumerate() {
        if smp.resonant && local_min(&samples, i) && !roots.iter().any(|r| (r - smp.alpha).abs() <= step) {
            roots.push(smp.alpha);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * step);
    Ok(ScanResult { roots, samples, degenerate: false })
}

fn local_min(samples: &[ScanSample], i: usize) -> bool {
    let d = samples[i].defect.abs();
    (i == 0 || samples[i - 1].defect.abs() >= d) && (i + 1 == samples.len() || samples[i + 1].defect.abs() >= d)
}
