//! Generalised symmetric eigenproblems `K x = lambda M x`.

mod dense;
mod envelope;
mod lanczos;
pub mod matching;

pub use dense::dense_generalized;
pub use envelope::{rcm_ordering, EnvelopeLdl};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};
use lanczos::Lanczos;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Number of eigenpairs wanted.
    pub k: usize,
    /// Eigenvalues `>= sigma` nearest to it are returned; `None` means the
    /// bottom of the spectrum.
    pub sigma: Option<f64>,
    /// Relative residual tolerance.
    pub tol: f64,
    pub block_size: usize,
    pub max_basis: usize,
    /// Problems up to this size are solved densely.
    pub dense_threshold: usize,
    pub seed: u64,
    /// Confirm with an inertia count that no eigenvalue in the window was missed.
    pub certify: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            k: 6,
            sigma: None,
            tol: 1e-8,
            block_size: 4,
            max_basis: 400,
            dense_threshold: 500,
            seed: 7,
            certify: true,
        }
    }
}

impl SolveOptions {
    pub fn lowest(k: usize) -> Self {
        SolveOptions { k, ..Default::default() }
    }

    pub fn near(sigma: f64, k: usize) -> Self {
        SolveOptions { k, sigma: Some(sigma), ..Default::default() }
    }
}

/// Eigenpairs with their residuals.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// `M`-normalised eigenvectors in DOF numbering.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// `|K x - lambda M x| / (|K x| + |lambda| |M x|)`.
    pub residuals: Vec<f64>,
    pub sigma: f64,
    /// Number of eigenvalues strictly below `sigma`, from the inertia.
    pub below_sigma: Option<usize>,
    /// `Some(true)` when an inertia count confirmed that the returned values
    /// are all the eigenvalues in `[sigma, max]`.
    pub certified: Option<bool>,
}

pub fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let mx = m.matvec(x);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
    norm2(&r) / (norm2(&kx) + lambda.abs() * norm2(&mx)).max(f64::MIN_POSITIVE)
}

/// Factor `K - sigma M`, nudging `sigma` if a pivot breaks down.
pub fn factor_shifted(k: &CsrMatrix, m: &CsrMatrix, sigma: f64) -> Result<(EnvelopeLdl, f64)> {
    let mut s = sigma;
    let mut last = None;
    for attempt in 0..4 {
        match EnvelopeLdl::factor(&k.add_scaled(m, -s)) {
            Ok(f) => return Ok((f, s)),
            Err(e) => {
                last = Some(e);
                s = sigma - 1e-6 * (1.0 + sigma.abs()) * 10f64.powi(attempt);
            }
        }
    }
    Err(last.unwrap())
}

/// Number of eigenvalues of `K x = lambda M x` below `sigma`.
pub fn count_below(k: &CsrMatrix, m: &CsrMatrix, sigma: f64) -> Result<usize> {
    Ok(factor_shifted(k, m, sigma)?.0.negative_count())
}

fn validate(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<()> {
    if k.n != m.n {
        return Err(Error::Input("K and M differ in size".into()));
    }
    if opts.k == 0 || opts.k > k.n {
        return Err(Error::Input(format!("cannot compute {} eigenpairs of a {}-dimensional problem", opts.k, k.n)));
    }
    if k.asymmetry() > 1e-10 || m.asymmetry() > 1e-10 {
        return Err(Error::Input("operator matrices are not symmetric".into()));
    }
    Ok(())
}

/// Solve for the `opts.k` eigenpairs at or above `opts.sigma` (or the lowest).
pub fn solve(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<SpectralResult> {
    validate(k, m, opts)?;
    if k.n <= opts.dense_threshold {
        return solve_dense(k, m, opts);
    }
    let sigma = match opts.sigma {
        Some(s) => s,
        None => spectrum_floor(k, m)?,
    };
    solve_shift_invert(k, m, sigma, opts)
}

/// A shift below the whole spectrum, found by inertia counts.
pub fn spectrum_floor(k: &CsrMatrix, m: &CsrMatrix) -> Result<f64> {
    let mut s = -1.0;
    for _ in 0..60 {
        if count_below(k, m, s)? == 0 {
            return Ok(s);
        }
        s = 2.0 * s - 1.0;
    }
    Err(Error::Numerical("spectrum appears unbounded below".into()))
}

fn solve_dense(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<SpectralResult> {
    let (vals, vecs) = dense_generalized(k, m)?;
    let sigma = opts.sigma.unwrap_or(f64::NEG_INFINITY);
    let start = vals.iter().position(|&v| v >= sigma).unwrap_or(vals.len());
    if vals.len() - start < opts.k {
        return Err(Error::NonConvergence {
            message: format!("only {} eigenvalues above sigma = {sigma}", vals.len() - start),
            partial: vals[start..].to_vec(),
        });
    }
    let idx = start..start + opts.k;
    let eigenvalues: Vec<f64> = vals[idx.clone()].to_vec();
    let eigenvectors: Vec<Vec<f64>> = vecs[idx].to_vec();
    let residuals = eigenvalues.iter().zip(&eigenvectors).map(|(&l, x)| relative_residual(k, m, l, x)).collect();
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        residuals,
        sigma,
        below_sigma: Some(start),
        certified: Some(true),
    })
}

fn solve_shift_invert(k: &CsrMatrix, m: &CsrMatrix, sigma: f64, opts: &SolveOptions) -> Result<SpectralResult> {
    let (fact, sigma) = factor_shifted(k, m, sigma)?;
    let below = fact.negative_count();
    let op = |x: &[f64]| fact.solve(&m.matvec(x));
    let mut lz = Lanczos::new(m, op, opts.block_size.max(1), opts.seed);
    let mut want = opts.k;
    let mut certify_checked_at: Option<usize> = None;
    let mut best: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    // Residuals bottom out at a roundoff floor; accept a stagnated set that
    // is within a hundred times the tolerance.
    let mut stalled = 0;
    let mut prev_worst = f64::INFINITY;
    while lz.dim() < opts.max_basis.min(k.n) {
        if lz.step() == 0 {
            break;
        }
        if lz.dim() < want + opts.block_size {
            continue;
        }
        let ritz = lz.ritz();
        let candidates: Vec<_> = ritz.iter().filter(|r| r.theta > 0.0).take(want).collect();
        if candidates.len() < want {
            continue;
        }
        let mut pairs = Vec::with_capacity(want);
        for r in candidates {
            let mut x = lz.ritz_vector(&r.coeffs);
            let xm = m.inner(&x, &x).sqrt();
            for v in &mut x {
                *v /= xm;
            }
            let lambda = k.inner(&x, &x);
            let res = relative_residual(k, m, lambda, &x);
            pairs.push((lambda, x, res));
        }
        let worst = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
        if worst > 0.5 * prev_worst {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev_worst = prev_worst.min(worst);
        let converged = worst <= opts.tol || (stalled >= 3 && worst <= 100.0 * opts.tol);
        best = pairs;
        if !converged {
            continue;
        }
        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if opts.certify && certify_checked_at != Some(lz.dim()) {
            certify_checked_at = Some(lz.dim());
            let top = best.last().unwrap().0;
            let tau = top + 1e-7 * (1.0 + top.abs());
            let count = count_below(k, m, tau)?;
            let found = below + best.len();
            if count > found && lz.dim() + opts.block_size < opts.max_basis.min(k.n) {
                // Missed eigenvalues in the window: ask for more pairs.
                want += count - found;
                continue;
            }
            return Ok(finish(best, opts.k, sigma, below, Some(count == found)));
        }
        return Ok(finish(best, opts.k, sigma, below, None));
    }
    best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Err(Error::NonConvergence {
        message: format!("Lanczos did not converge within a basis of {}", lz.dim()),
        partial: best.iter().filter(|p| p.2 <= 100.0 * opts.tol).map(|p| p.0).collect(),
    })
}

fn finish(
    pairs: Vec<(f64, Vec<f64>, f64)>,
    k: usize,
    sigma: f64,
    below: usize,
    certified: Option<bool>,
) -> SpectralResult {
    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    let mut residuals = Vec::new();
    for (l, x, r) in pairs.into_iter().take(k) {
        eigenvalues.push(l);
        eigenvectors.push(x);
        residuals.push(r);
    }
    SpectralResult { eigenvalues, eigenvectors, residuals, sigma, below_sigma: Some(below), certified }
}
