//! Pairing eigenvectors of two discretisations, possibly on different meshes.

use nalgebra::DMatrix;
use serde::Serialize;

use super::SpectralResult;
use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{InterfaceMesh, MeshKind, Side};
use crate::sparse::CsrMatrix;

/// Uniform bins over the bounding box of a mesh.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: [f64; 2],
    cell: [f64; 2],
    nb: usize,
    bins: Vec<Vec<usize>>,
}

fn barycentric(p: [[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl PointLocator {
    pub fn new(mesh: &InterfaceMesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let nb = ((mesh.triangles.len() as f64 / 4.0).sqrt().ceil() as usize).clamp(1, 2048);
        let cell = [((hi[0] - lo[0]) / nb as f64).max(1e-300), ((hi[1] - lo[1]) / nb as f64).max(1e-300)];
        let mut loc = PointLocator { lo, cell, nb, bins: vec![Vec::new(); nb * nb] };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut a = [usize::MAX; 2];
            let mut b = [0usize; 2];
            for &i in tri {
                let c = loc.cell_of(mesh.nodes[i]);
                for k in 0..2 {
                    a[k] = a[k].min(c[k]);
                    b[k] = b[k].max(c[k]);
                }
            }
            for ix in a[0]..=b[0] {
                for iy in a[1]..=b[1] {
                    loc.bins[iy * nb + ix].push(t);
                }
            }
        }
        loc
    }

    fn cell_of(&self, x: [f64; 2]) -> [usize; 2] {
        let f = |k: usize| (((x[k] - self.lo[k]) / self.cell[k]).floor().max(0.0) as usize).min(self.nb - 1);
        [f(0), f(1)]
    }

    /// Triangle containing `x` among those accepted by `keep`, with the
    /// barycentric coordinates of `x`. Points slightly outside every
    /// candidate fall back to the closest one, coordinates clamped.
    pub fn locate(&self, mesh: &InterfaceMesh, x: [f64; 2], keep: impl Fn(usize) -> bool) -> Option<(usize, [f64; 3])> {
        let c = self.cell_of(x);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for ring in 0..3usize {
            let (x0, x1) = (c[0].saturating_sub(ring), (c[0] + ring).min(self.nb - 1));
            let (y0, y1) = (c[1].saturating_sub(ring), (c[1] + ring).min(self.nb - 1));
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    for &t in &self.bins[iy * self.nb + ix] {
                        if !keep(t) {
                            continue;
                        }
                        let [a, b, d] = mesh.triangles[t];
                        let l = barycentric([mesh.nodes[a], mesh.nodes[b], mesh.nodes[d]], x);
                        let worst = l[0].min(l[1]).min(l[2]);
                        if worst >= -1e-10 {
                            return Some((t, l));
                        }
                        if best.as_ref().map_or(true, |b| worst > b.2) {
                            best = Some((t, l, worst));
                        }
                    }
                }
            }
            if best.is_some() {
                break;
            }
        }
        best.map(|(t, l, _)| {
            let c: Vec<f64> = l.iter().map(|v| v.max(0.0)).collect();
            let s: f64 = c.iter().sum();
            (t, [c[0] / s, c[1] / s, c[2] / s])
        })
    }
}

/// Linear interpolation of nodal fields from one mesh onto the nodes of
/// another. Fields on interface meshes may jump across the curve, so target
/// points are looked up on their own side.
#[derive(Debug, Clone)]
pub struct Transfer {
    weights: Vec<[(usize, f64); 3]>,
    n_src: usize,
}

impl Transfer {
    pub fn new(src: &InterfaceMesh, dst: &InterfaceMesh) -> Result<Self> {
        let loc = PointLocator::new(src);
        let sided = src.kind == MeshKind::Interface;
        let mut weights = Vec::with_capacity(dst.nodes.len());
        for (i, &x) in dst.nodes.iter().enumerate() {
            let side = match dst.node_side[i] {
                Side::OnCurve => Side::Minus,
                s => s,
            };
            let found = loc.locate(src, x, |t| !sided || src.tri_side[t] == side);
            let (t, l) = found.ok_or_else(|| Error::Geometry(format!("node {i} at {x:?} is outside the source mesh")))?;
            let tri = src.triangles[t];
            weights.push([(tri[0], l[0]), (tri[1], l[1]), (tri[2], l[2])]);
        }
        Ok(Transfer { weights, n_src: src.nodes.len() })
    }

    pub fn apply(&self, src_nodal: &[f64]) -> Result<Vec<f64>> {
        if src_nodal.len() != self.n_src {
            return Err(Error::Contract("field does not live on the source mesh".into()));
        }
        Ok(self.weights.iter().map(|w| w.iter().map(|(i, c)| c * src_nodal[*i]).sum()).collect())
    }

    /// DOF vector of the source operator to a DOF vector of the target one.
    pub fn map_dofs(&self, src_dofs: &DofMap, dst_dofs: &DofMap, x: &[f64]) -> Result<Vec<f64>> {
        Ok(dst_dofs.restrict(&self.apply(&src_dofs.expand(x))?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairMatch {
    pub a: usize,
    pub b: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub gap: f64,
    /// Overlap of `a` with the eigenspace of `b`'s cluster, in `[0, 1]`.
    pub overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterMatch {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// Principal angles between the two spans, ascending.
    pub principal_angles: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pairing {
    pub pairs: Vec<PairMatch>,
    pub clusters: Vec<ClusterMatch>,
}

impl Pairing {
    pub fn partner_of(&self, a: usize) -> Option<&PairMatch> {
        self.pairs.iter().find(|p| p.a == a)
    }
}

fn clusters(vals: &[f64], tol: f64) -> Vec<usize> {
    // Label of each index; values are sorted ascending.
    let mut label = vec![0; vals.len()];
    for i in 1..vals.len() {
        let same = (vals[i] - vals[i - 1]).abs() <= tol * vals[i].abs().max(vals[i - 1].abs());
        label[i] = if same { label[i - 1] } else { label[i - 1] + 1 };
    }
    label
}

fn m_orthonormal(m: &CsrMatrix, vs: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut x = (*v).clone();
        for _ in 0..2 {
            for q in &out {
                let c = m.inner(q, &x);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * qi;
                }
            }
        }
        let nrm = m.inner(&x, &x).sqrt();
        if nrm > 1e-12 {
            out.push(x.iter().map(|v| v / nrm).collect());
        }
    }
    out
}

/// Pair the eigenvectors of `a` with those of `b` by `M`-overlap, one to
/// one, treating near-degenerate eigenvalues of `b` as a single eigenspace.
/// `map` carries `b`'s vectors into `a`'s DOF space.
pub fn match_eigenpairs(
    a: &SpectralResult,
    b: &SpectralResult,
    m: &CsrMatrix,
    map: Option<&dyn Fn(&[f64]) -> Result<Vec<f64>>>,
    cluster_tol: f64,
) -> Result<Pairing> {
    let na = a.eigenvalues.len();
    let nb = b.eigenvalues.len();
    let mut bv = Vec::with_capacity(nb);
    for x in &b.eigenvectors {
        let y = match map {
            Some(f) => f(x)?,
            None => x.clone(),
        };
        if y.len() != m.n {
            return Err(Error::Contract(format!("vector of length {} cannot be compared in dimension {}", y.len(), m.n)));
        }
        bv.push(y);
    }
    if a.eigenvectors.iter().any(|x| x.len() != m.n) {
        return Err(Error::Contract("first result does not match the mass matrix".into()));
    }
    let mb: Vec<Vec<f64>> = bv.iter().map(|y| m.matvec(y)).collect();
    let bn: Vec<f64> = bv.iter().zip(&mb).map(|(y, my)| y.iter().zip(my).map(|(p, q)| p * q).sum::<f64>().sqrt()).collect();
    let mut ov = vec![vec![0.0; nb]; na];
    for (i, x) in a.eigenvectors.iter().enumerate() {
        let xn = m.inner(x, x).sqrt();
        for j in 0..nb {
            let d: f64 = x.iter().zip(&mb[j]).map(|(p, q)| p * q).sum();
            ov[i][j] = if xn > 0.0 && bn[j] > 0.0 { (d / (xn * bn[j])).abs().min(1.0) } else { 0.0 };
        }
    }
    let lb = clusters(&b.eigenvalues, cluster_tol);
    let mut cand = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            let s: f64 = (0..nb).filter(|&k| lb[k] == lb[j]).map(|k| ov[i][k] * ov[i][k]).sum::<f64>().sqrt().min(1.0);
            cand.push((i, j, s, (a.eigenvalues[i] - b.eigenvalues[j]).abs()));
        }
    }
    cand.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap().then(x.3.partial_cmp(&y.3).unwrap()));
    let mut used_a = vec![false; na];
    let mut used_b = vec![false; nb];
    let mut pairs = Vec::new();
    for (i, j, s, gap) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        pairs.push(PairMatch { a: i, b: j, lambda_a: a.eigenvalues[i], lambda_b: b.eigenvalues[j], gap, overlap: s });
    }
    pairs.sort_by_key(|p| p.a);

    let la = clusters(&a.eigenvalues, cluster_tol);
    let mut out_clusters = Vec::new();
    let n_la = la.last().map_or(0, |l| l + 1);
    for c in 0..n_la {
        let ai: Vec<usize> = (0..na).filter(|&i| la[i] == c).collect();
        let mut bj: Vec<usize> = Vec::new();
        for p in pairs.iter().filter(|p| ai.contains(&p.a)) {
            for k in (0..nb).filter(|&k| lb[k] == lb[p.b]) {
                if !bj.contains(&k) {
                    bj.push(k);
                }
            }
        }
        if (ai.len() < 2 && bj.len() < 2) || bj.is_empty() {
            continue;
        }
        bj.sort();
        let qa = m_orthonormal(m, &ai.iter().map(|&i| &a.eigenvectors[i]).collect::<Vec<_>>());
        let qb = m_orthonormal(m, &bj.iter().map(|&j| &bv[j]).collect::<Vec<_>>());
        if qa.is_empty() || qb.is_empty() {
            continue;
        }
        let mut g = DMatrix::zeros(qa.len(), qb.len());
        for (r, x) in qa.iter().enumerate() {
            for (col, y) in qb.iter().enumerate() {
                g[(r, col)] = m.inner(x, y);
            }
        }
        let sv = g.singular_values();
        let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();
        angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out_clusters.push(ClusterMatch { a: ai, b: bj, principal_angles: angles });
    }
    Ok(Pairing { pairs, clusters: out_clusters })
}
