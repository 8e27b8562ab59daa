//! Envelope (skyline) `L D L^T` factorisation of sparse symmetric matrices.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// `P A P^T = L D L^T` with `L` stored row-wise inside the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    rowptr: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

fn envelope_size(a: &CsrMatrix, inv: &[usize]) -> usize {
    let mut first: Vec<usize> = (0..a.n).collect();
    for i in 0..a.n {
        for (j, _) in a.row(i) {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                first[pi] = first[pi].min(pj);
            }
        }
    }
    first.iter().enumerate().map(|(i, f)| i - f).sum()
}

/// Reverse Cuthill-McKee ordering, `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.indptr[i + 1] - a.indptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize, visited: &[bool]| -> usize {
        let mut seen = visited.to_vec();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for (w, _) in a.row(v) {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
        last
    };
    for root in 0..n {
        if visited[root] {
            continue;
        }
        // pseudo-peripheral start: two sweeps of BFS
        let start = bfs_last(bfs_last(root, &visited), &visited);
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|(w, _)| w).filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| degree[w]);
            for w in nb {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

impl EnvelopeLdl {
    /// Factor `a`, choosing between the natural and RCM orderings.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let natural: Vec<usize> = (0..a.n).collect();
        let rcm = rcm_ordering(a);
        let inv_of = |p: &[usize]| {
            let mut inv = vec![0; p.len()];
            for (new, &old) in p.iter().enumerate() {
                inv[old] = new;
            }
            inv
        };
        let perm = if envelope_size(a, &inv_of(&rcm)) < envelope_size(a, &natural) { rcm } else { natural };
        Self::factor_with(a, perm)
    }

    pub fn factor_with(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut rowptr = vec![0usize; n + 1];
        for i in 0..n {
            rowptr[i + 1] = rowptr[i] + (i - first[i]);
        }
        let mut l = vec![0.0; rowptr[n]];
        let mut d = vec![0.0; n];
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        let mut t = vec![0.0; n];
        for i in 0..n {
            let old = perm[i];
            let fi = first[i];
            let mut diag = 0.0;
            for k in fi..i {
                t[k] = 0.0;
            }
            for (j, v) in a.row(old) {
                let pj = inv[j];
                if pj < i {
                    t[pj] = v;
                } else if pj == i {
                    diag = v;
                }
            }
            // t_j <- a_ij - sum_k t_k l_jk, then l_ij = t_j / d_j
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let lj = &l[rowptr[j] + (lo - fj)..rowptr[j] + (j - fj)];
                let s: f64 = t[lo..j].iter().zip(lj).map(|(a, b)| a * b).sum();
                t[j] -= s;
            }
            let li = &mut l[rowptr[i]..rowptr[i + 1]];
            for (k, j) in (fi..i).enumerate() {
                let lij = t[j] / d[j];
                diag -= t[j] * lij;
                li[k] = lij;
            }
            if !(diag.abs() > 1e-14 * scale) {
                return Err(Error::Numerical(format!("singular pivot {diag:.3e} at row {i}")));
            }
            d[i] = diag;
        }
        Ok(EnvelopeLdl { n, perm, first, rowptr, l, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots, i.e. of negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn envelope(&self) -> usize {
        self.l.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let li = &self.l[self.rowptr[i]..self.rowptr[i + 1]];
            let s: f64 = li.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let li = &self.l[self.rowptr[i]..self.rowptr[i + 1]];
            for (yj, lij) in y[fi..i].iter_mut().zip(li) {
                *yj -= lij * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
