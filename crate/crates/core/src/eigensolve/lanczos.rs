//! Shift-invert block Lanczos with full reorthogonalisation.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::{dot, CsrMatrix};

pub(crate) struct Basis<'a> {
    m: &'a CsrMatrix,
    pub q: Vec<Vec<f64>>,
}

impl<'a> Basis<'a> {
    pub fn new(m: &'a CsrMatrix) -> Self {
        Basis { m, q: Vec::new() }
    }

    /// `M`-orthogonalise `w` against the basis and append it; false if it
    /// was (numerically) dependent.
    pub fn push(&mut self, mut w: Vec<f64>) -> bool {
        let orig = self.m.inner(&w, &w).sqrt();
        if !(orig > 0.0) || !orig.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let mw = self.m.matvec(&w);
            for qa in &self.q {
                let c = dot(qa, &mw);
                for (wi, qi) in w.iter_mut().zip(qa) {
                    *wi -= c * qi;
                }
            }
        }
        let nrm = self.m.inner(&w, &w).sqrt();
        if nrm < 1e-10 * orig {
            return false;
        }
        for wi in &mut w {
            *wi /= nrm;
        }
        self.q.push(w);
        true
    }
}

pub(crate) struct RitzPair {
    pub theta: f64,
    pub coeffs: Vec<f64>,
}

/// Incrementally built projection `T = Q^T M Op Q`.
pub(crate) struct Lanczos<'a, F: Fn(&[f64]) -> Vec<f64>> {
    pub basis: Basis<'a>,
    op: F,
    m: &'a CsrMatrix,
    t: Vec<Vec<f64>>,
    pending: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    n: usize,
}

impl<'a, F: Fn(&[f64]) -> Vec<f64>> Lanczos<'a, F> {
    pub fn new(m: &'a CsrMatrix, op: F, block: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.n;
        let pending = (0..block.min(n)).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        Lanczos { basis: Basis::new(m), op, m, t: Vec::new(), pending, rng, n }
    }

    pub fn dim(&self) -> usize {
        self.basis.q.len()
    }

    /// Extend the basis by one block; returns the number of vectors added.
    pub fn step(&mut self) -> usize {
        let block = std::mem::take(&mut self.pending);
        let start = self.basis.q.len();
        let want = block.len().max(1);
        for w in block {
            self.basis.push(w);
        }
        // Deflated directions are replaced by random ones.
        let mut tries = 0;
        while self.basis.q.len() - start < want && self.basis.q.len() < self.n && tries < 4 * want {
            let r: Vec<f64> = (0..self.n).map(|_| self.rng.random::<f64>() - 0.5).collect();
            self.basis.push(r);
            tries += 1;
        }
        let end = self.basis.q.len();
        for c in start..end {
            let y = (self.op)(&self.basis.q[c]);
            let my = self.m.matvec(&y);
            for row in self.t.iter_mut() {
                row.push(0.0);
            }
            self.t.push(vec![0.0; c + 1]);
            for a in 0..=c {
                let v = dot(&self.basis.q[a], &my);
                self.t[a][c] = v;
                self.t[c][a] = v;
            }
            self.pending.push(y);
        }
        end - start
    }

    /// Ritz pairs of the current projection, largest `theta` first.
    pub fn ritz(&self) -> Vec<RitzPair> {
        let m = self.dim();
        let t = DMatrix::from_fn(m, m, |i, j| if j <= i { self.t[j][i] } else { self.t[i][j] });
        let eig = SymmetricEigen::new(t);
        let mut out: Vec<RitzPair> = (0..m)
            .map(|i| RitzPair { theta: eig.eigenvalues[i], coeffs: eig.eigenvectors.column(i).iter().copied().collect() })
            .collect();
        out.sort_by(|a, b| b.theta.partial_cmp(&a.theta).unwrap());
        out
    }

    pub fn ritz_vector(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (c, q) in coeffs.iter().zip(&self.basis.q) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += c * qi;
            }
        }
        x
    }
}
