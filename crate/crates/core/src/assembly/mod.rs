//! Finite element assembly of `H_eps`, the limit operator and the
//! Dirichlet split, plus the distributional limit check.

mod distlimit;

pub use distlimit::{distributional_limit_check, DistLimitReport, DistLimitRow};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{InterfaceMesh, MeshKind, ModelConfig, Region, Side};
use crate::quadrature::{gauss_legendre, triangle_rule, MID_EDGE};
use crate::resonance::TransmissionData;
use crate::sparse::CsrMatrix;

/// Map from mesh nodes to unknowns: node `i` carries `coef * x[dof]`.
#[derive(Debug, Clone, Serialize)]
pub struct DofMap {
    pub n_dofs: usize,
    pub node_dof: Vec<Option<(usize, f64)>>,
    /// Node whose value equals the unknown (coefficient one).
    pub primary: Vec<usize>,
}

impl DofMap {
    fn build(n_nodes: usize, mut assign: impl FnMut(usize) -> Option<Option<(usize, f64)>>) -> DofMap {
        // First pass: plain unknowns; `assign` returns Some(None) for them.
        let mut node_dof = vec![None; n_nodes];
        let mut primary = Vec::new();
        let mut deferred = Vec::new();
        for i in 0..n_nodes {
            match assign(i) {
                Some(None) => {
                    node_dof[i] = Some((primary.len(), 1.0));
                    primary.push(i);
                }
                Some(Some(link)) => deferred.push((i, link)),
                None => {}
            }
        }
        // Linked nodes refer to another node's unknown by node index.
        for (i, (other, coef)) in deferred {
            let (d, c) = node_dof[other].expect("link target is an unknown");
            node_dof[i] = Some((d, c * coef));
        }
        DofMap { n_dofs: primary.len(), node_dof, primary }
    }

    /// Node values of a DOF vector; eliminated nodes get zero.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.node_dof.iter().map(|d| d.map_or(0.0, |(k, c)| c * x[k])).collect()
    }

    /// DOF vector taking the value at each primary node.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.primary.iter().map(|&i| nodal[i]).collect()
    }
}

/// Stiffness-plus-potential and mass matrices of one operator.
#[derive(Debug, Clone)]
pub struct Operator {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub dofs: DofMap,
    pub label: String,
}

fn p1_local(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    (area, g)
}

/// Local matrices for `int grad u grad v + q u v` and `int u v`.
fn element_matrices(p: [[f64; 2]; 3], rule: &[([f64; 3], f64)], q: impl Fn(&[f64; 3]) -> f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let (area, g) = p1_local(p);
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            m[a][b] = area / 12.0 * if a == b { 2.0 } else { 1.0 };
        }
    }
    for (l, w) in rule {
        let v = q(l) * w * area;
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] += v * l[a] * l[b];
            }
        }
    }
    (k, m)
}

fn assemble_with(
    mesh: &InterfaceMesh,
    dofs: &DofMap,
    include: impl Fn(usize) -> bool + Sync,
    local: impl Fn(usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) + Sync,
) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let chunks: Vec<_> = (0..mesh.triangles.len())
        .collect::<Vec<_>>()
        .par_chunks(4096)
        .map(|ts| {
            let mut kt = Vec::with_capacity(ts.len() * 9);
            let mut mt = Vec::with_capacity(ts.len() * 9);
            for &t in ts {
                if !include(t) {
                    continue;
                }
                let tri = mesh.triangles[t];
                let map: Vec<Option<(usize, f64)>> = tri.iter().map(|&i| dofs.node_dof[i]).collect();
                if map.iter().all(|m| m.is_none()) {
                    continue;
                }
                let (kl, ml) = local(t);
                for a in 0..3 {
                    let Some((da, ca)) = map[a] else { continue };
                    for b in 0..3 {
                        let Some((db, cb)) = map[b] else { continue };
                        kt.push((da, db, ca * cb * kl[a][b]));
                        mt.push((da, db, ca * cb * ml[a][b]));
                    }
                }
            }
            (kt, mt)
        })
        .collect();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for (k, m) in chunks {
        kt.extend(k);
        mt.extend(m);
    }
    (kt, mt)
}

fn vertices(mesh: &InterfaceMesh, t: usize) -> [[f64; 2]; 3] {
    let [a, b, c] = mesh.triangles[t];
    [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]]
}

fn bulk_local(mesh: &InterfaceMesh, config: &ModelConfig, t: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let p = vertices(mesh, t);
    element_matrices(p, &MID_EDGE, |l| {
        (config.w)([l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0], l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1]])
    })
}

/// Assemble `H_eps = -Δ + W + V_eps` with Dirichlet data on the box boundary.
pub fn assemble_heps(mesh: &InterfaceMesh, config: &ModelConfig) -> Result<Operator> {
    if mesh.kind != MeshKind::Layer {
        return Err(Error::Contract("H_eps needs a layer-resolving mesh".into()));
    }
    let eps = config.epsilon;
    if (mesh.epsilon - eps).abs() > 1e-14 * eps {
        return Err(Error::Contract("mesh was built for a different epsilon".into()));
    }
    let dofs = DofMap::build(mesh.nodes.len(), |i| if mesh.boundary[i] { None } else { Some(None) });
    let rule = triangle_rule(4);
    let len = mesh.length;
    let profile = &config.profile;
    let (kt, mt) = assemble_with(mesh, &dofs, |_| true, |t| {
        if mesh.regions[t] != Region::Layer {
            return bulk_local(mesh, config, t);
        }
        let p = vertices(mesh, t);
        let tri = mesh.triangles[t];
        let mut sr = [[0.0; 2]; 3];
        for (k, &i) in tri.iter().enumerate() {
            sr[k] = mesh.tubular[i].expect("layer nodes carry tubular coordinates");
        }
        let smin = sr.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        for v in sr.iter_mut() {
            if v[0] - smin > 0.5 * len {
                v[0] -= len;
            }
        }
        element_matrices(p, &rule, |l| {
            let x = [l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0], l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1]];
            let s = (l[0] * sr[0][0] + l[1] * sr[1][0] + l[2] * sr[2][0]).rem_euclid(len);
            let n = (l[0] * sr[0][1] + l[1] * sr[1][1] + l[2] * sr[2][1]) / eps;
            (config.w)(x) + profile.v(n) / (eps * eps) + profile.u(s, n) / eps
        })
    });
    let n = dofs.n_dofs;
    Ok(Operator { k: CsrMatrix::from_triplets(n, kt), m: CsrMatrix::from_triplets(n, mt), dofs, label: format!("H_eps (eps = {eps})") })
}

fn require_interface(mesh: &InterfaceMesh) -> Result<()> {
    if mesh.kind != MeshKind::Interface || mesh.duplicates.is_empty() {
        return Err(Error::Contract("this operator needs an interface mesh with duplicated curve nodes".into()));
    }
    Ok(())
}

/// Assemble the limit operator with transmission `u+ = theta u-`,
/// `theta d_nu u+ - d_nu u- = Upsilon u-`.
pub fn assemble_limit(mesh: &InterfaceMesh, config: &ModelConfig, trans: &TransmissionData) -> Result<Operator> {
    require_interface(mesh)?;
    let theta = trans.theta;
    if !theta.is_finite() || theta.abs() < 1e-12 {
        return Err(Error::Unsupported(format!("transmission coefficient theta = {theta} is degenerate")));
    }
    if (trans.length - mesh.length).abs() > 1e-8 * mesh.length {
        return Err(Error::Contract("transmission data and mesh use different curve lengths".into()));
    }
    let mut link = vec![None; mesh.nodes.len()];
    for d in &mesh.duplicates {
        link[d[1]] = Some(d[0]);
    }
    let dofs = DofMap::build(mesh.nodes.len(), |i| {
        if mesh.boundary[i] {
            None
        } else if let Some(m) = link[i] {
            Some(Some((m, theta)))
        } else {
            Some(None)
        }
    });
    let (mut kt, mt) = assemble_with(mesh, &dofs, |_| true, |t| bulk_local(mesh, config, t));
    // Curve term int Upsilon u- v- ds on each interface edge.
    let (gx, gw) = gauss_legendre(3);
    let ds = mesh.length / mesh.s_cells as f64;
    for e in &mesh.interface_edges {
        let sa = mesh.tubular[e[0]].unwrap()[0];
        let mut sb = mesh.tubular[e[1]].unwrap()[0];
        if (sb - sa).abs() > 0.5 * mesh.length {
            sb += if sb < sa { mesh.length } else { -mesh.length };
        }
        let mut loc = [[0.0; 2]; 2];
        for (x, w) in gx.iter().zip(&gw) {
            let t = 0.5 * (x + 1.0);
            let phi = [1.0 - t, t];
            let ups = trans.upsilon_at(sa + t * (sb - sa));
            for a in 0..2 {
                for b in 0..2 {
                    loc[a][b] += 0.5 * w * ds * ups * phi[a] * phi[b];
                }
            }
        }
        for a in 0..2 {
            let Some((da, _)) = dofs.node_dof[e[a]] else { continue };
            for b in 0..2 {
                let Some((db, _)) = dofs.node_dof[e[b]] else { continue };
                kt.push((da, db, loc[a][b]));
            }
        }
    }
    let n = dofs.n_dofs;
    Ok(Operator { k: CsrMatrix::from_triplets(n, kt), m: CsrMatrix::from_triplets(n, mt), dofs, label: format!("limit (theta = {theta})") })
}

/// The two Dirichlet problems on either side of the curve.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    pub minus: Operator,
    pub plus: Operator,
}

pub fn assemble_dirichlet_split(mesh: &InterfaceMesh, config: &ModelConfig) -> Result<SplitOperator> {
    require_interface(mesh)?;
    let mut on_curve = vec![false; mesh.nodes.len()];
    for d in &mesh.duplicates {
        on_curve[d[0]] = true;
        on_curve[d[1]] = true;
    }
    let build = |side: Side, label: &str| {
        let dofs = DofMap::build(mesh.nodes.len(), |i| {
            if mesh.boundary[i] || on_curve[i] || mesh.node_side[i] != side {
                None
            } else {
                Some(None)
            }
        });
        let (kt, mt) = assemble_with(mesh, &dofs, |t| mesh.tri_side[t] == side, |t| bulk_local(mesh, config, t));
        let n = dofs.n_dofs;
        Operator { k: CsrMatrix::from_triplets(n, kt), m: CsrMatrix::from_triplets(n, mt), dofs, label: label.to_string() }
    };
    Ok(SplitOperator { minus: build(Side::Minus, "Dirichlet (minus side)"), plus: build(Side::Plus, "Dirichlet (plus side)") })
}
