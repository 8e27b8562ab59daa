//! Structured triangulations of the truncated domain adapted to the curve.
//!
//! The domain `[-L, L]^2` is covered by rings: a fan around an interior
//! centre, rings in the interior of the curve, a band of tubular levels
//! `r = const` around it, and rings blending the band into the box
//! boundary. In the band the levels resolve the layer `|r| < eps`
//! uniformly and are graded geometrically away from it.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CurveFrame, Orientation};
use crate::resonance::PotentialProfile;

pub type Potential2d = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Mesh resolution controls. Counts left as `None` are derived from the
/// spacing along the curve.
#[derive(Debug, Clone, Serialize)]
pub struct MeshDensity {
    /// Cells along the curve.
    pub s_cells: usize,
    /// Cells across the layer `|r| < eps` (even).
    pub layer_cells: usize,
    pub interior_cells: Option<usize>,
    /// Cells on each side of the layer inside the band.
    pub band_cells: Option<usize>,
    pub exterior_cells: Option<usize>,
    /// Ratio of the outermost to the innermost exterior spacing.
    pub exterior_growth: f64,
    /// Uniform refinement level; every count is multiplied by `2^refinement`.
    pub refinement: u32,
}

impl Default for MeshDensity {
    fn default() -> Self {
        MeshDensity {
            s_cells: 128,
            layer_cells: 32,
            interior_cells: None,
            band_cells: None,
            exterior_cells: None,
            exterior_growth: 4.0,
            refinement: 0,
        }
    }
}

/// Everything needed to mesh and assemble one operator.
#[derive(Clone)]
pub struct ModelConfig {
    pub frame: Arc<CurveFrame>,
    pub w: Potential2d,
    pub profile: PotentialProfile,
    pub epsilon: f64,
    /// Box half-width `L` of the computational domain `[-L, L]^2`.
    pub half_width: f64,
    pub density: MeshDensity,
    /// Half-width of the tubular band as a fraction of `eps*`.
    pub band_fraction: f64,
}

impl std::fmt::Debug for ModelConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelConfig")
            .field("epsilon", &self.epsilon)
            .field("half_width", &self.half_width)
            .field("density", &self.density)
            .field("profile", &self.profile)
            .finish()
    }
}

impl ModelConfig {
    pub fn new(frame: Arc<CurveFrame>, w: Potential2d, profile: PotentialProfile, epsilon: f64, half_width: f64) -> Self {
        ModelConfig { frame, w, profile, epsilon, half_width, density: MeshDensity::default(), band_fraction: 0.6 }
    }

    pub fn band_radius(&self) -> f64 {
        self.band_fraction * self.frame.eps_star
    }

    pub fn validate(&self) -> Result<()> {
        let es = self.frame.eps_star;
        if !(self.epsilon > 0.0 && self.epsilon < 0.5 * es) {
            return Err(Error::Config(format!("epsilon = {} must lie in (0, eps*/2) = (0, {})", self.epsilon, 0.5 * es)));
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::Config("band_fraction must lie in (0, 1)".into()));
        }
        if self.band_radius() <= 1.2 * self.epsilon {
            return Err(Error::Config(format!(
                "band radius {} too small for epsilon {}",
                self.band_radius(),
                self.epsilon
            )));
        }
        let d = &self.density;
        if d.s_cells < 8 || d.layer_cells < 4 || d.layer_cells % 2 != 0 {
            return Err(Error::Config("need s_cells >= 8 and an even layer_cells >= 4".into()));
        }
        if !(d.exterior_growth >= 1.0) {
            return Err(Error::Config("exterior_growth must be >= 1".into()));
        }
        Ok(())
    }

    /// Minimum of `W` over the box boundary.
    pub fn boundary_w_min(&self) -> f64 {
        let l = self.half_width;
        let mut m = f64::INFINITY;
        for i in 0..=200 {
            let t = -l + 2.0 * l * i as f64 / 200.0;
            for p in [[t, -l], [t, l], [-l, t], [l, t]] {
                m = m.min((self.w)(p));
            }
        }
        m
    }

    /// Fails when `W` on the box boundary is not comfortably above `lambda_max`.
    pub fn check_truncation(&self, lambda_max: f64) -> Result<()> {
        let wmin = self.boundary_w_min();
        if wmin < 2.0 * lambda_max.max(0.0) + 1.0 {
            return Err(Error::Config(format!(
                "W on the box boundary ({wmin:.3}) is too small relative to the requested eigenvalues ({lambda_max:.3}); enlarge the box"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeshKind {
    /// Resolves the layer `|r| < eps` for `H_eps`.
    Layer,
    /// Duplicates the curve nodes for the limit and split operators.
    Interface,
}

/// Position relative to the curve, measured with the frame normal:
/// `Minus` means `r < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Minus,
    Plus,
    OnCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Minus,
    Plus,
    /// Inside `|r| < eps`; carries the layer potential.
    Layer,
}

#[derive(Debug, Clone)]
pub struct InterfaceMesh {
    pub kind: MeshKind,
    pub nodes: Vec<[f64; 2]>,
    /// Frame coordinates `(s, r)` of band nodes.
    pub tubular: Vec<Option<[f64; 2]>>,
    pub node_side: Vec<Side>,
    pub boundary: Vec<bool>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Side of the curve each triangle lies on.
    pub tri_side: Vec<Side>,
    /// Consecutive curve nodes (the `Minus` copies for interface meshes).
    pub interface_edges: Vec<[usize; 2]>,
    /// `(minus copy, plus copy)` of each curve node of an interface mesh.
    pub duplicates: Vec<[usize; 2]>,
    pub orientation: Orientation,
    pub length: f64,
    pub epsilon: f64,
    pub s_cells: usize,
    pub band_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ring {
    Interior(f64),
    /// Outward tubular distance.
    Band(f64),
    Exterior(f64),
}

/// Geometric grading `x_k`, `k = 0..=n`, on `[0, 1]` with end/start spacing
/// ratio `exp(a)`.
fn graded(n: usize, a: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let xi = k as f64 / n as f64;
            if a.abs() < 1e-9 {
                xi
            } else {
                ((a * xi).exp() - 1.0) / (a.exp() - 1.0)
            }
        })
        .collect()
}

/// Cells needed on a graded interval of length `d` whose first spacing is `h0`
/// and last is about `h1`, and the grading exponent.
fn graded_cells(d: f64, h0: f64, h1: f64) -> (usize, f64) {
    if h1 <= h0 * 1.05 {
        return ((d / h0).ceil().max(1.0) as usize, 0.0);
    }
    let a = (h1 / h0).ln();
    let n = (d * a / (h0 * (a.exp() - 1.0))).ceil().max(1.0) as usize;
    (n, a)
}

/// Build the mesh for `config`.
pub fn build_mesh(config: &ModelConfig, kind: MeshKind) -> Result<InterfaceMesh> {
    config.validate()?;
    let frame = &config.frame;
    let orient = frame.orientation;
    let o = orient.sign();
    // Mesh in the canonical clockwise order so both frame orientations give
    // the same triangulation.
    let geo = match orient {
        Orientation::Outward => frame.as_ref().clone(),
        Orientation::Inward => frame.flipped(),
    };
    let len = geo.length;
    let d = &config.density;
    let scale = 1usize << d.refinement;
    let ns = d.s_cells * scale;
    let eps = config.epsilon;
    let rb = config.band_radius();
    let l = config.half_width;
    let hs = len / d.s_cells as f64;

    let mut s_geo = Vec::with_capacity(ns);
    let mut on_curve = Vec::with_capacity(ns);
    let mut nu_out = Vec::with_capacity(ns);
    for j in 0..ns {
        let s = len * j as f64 / ns as f64;
        let p = geo.eval(s);
        s_geo.push(s);
        on_curve.push(p.point);
        nu_out.push(p.normal);
    }
    let c = geo.centroid();
    let at = |j: usize, r: f64| [on_curve[j][0] + r * nu_out[j][0], on_curve[j][1] + r * nu_out[j][1]];

    for j in 0..ns {
        let q = at(j, rb);
        if q[0].abs() >= 0.98 * l || q[1].abs() >= 0.98 * l {
            return Err(Error::Config(format!("the band around the curve leaves the box [-{l}, {l}]^2")));
        }
    }
    if c[0].abs() >= l || c[1].abs() >= l {
        return Err(Error::Config("curve centroid lies outside the box".into()));
    }

    let mean_in = (0..ns).map(|j| { let q = at(j, -rb); (q[0] - c[0]).hypot(q[1] - c[1]) }).sum::<f64>() / ns as f64;
    let box_hit = |j: usize| -> [f64; 2] {
        let q = at(j, rb);
        let dir = [q[0] - c[0], q[1] - c[1]];
        let mut t = f64::INFINITY;
        for k in 0..2 {
            if dir[k] > 0.0 {
                t = t.min((l - c[k]) / dir[k]);
            } else if dir[k] < 0.0 {
                t = t.min((-l - c[k]) / dir[k]);
            }
        }
        [c[0] + t * dir[0], c[1] + t * dir[1]]
    };
    let mean_out = (0..ns).map(|j| { let q = at(j, rb); let b = box_hit(j); (b[0] - q[0]).hypot(b[1] - q[1]) }).sum::<f64>() / ns as f64;

    let n_in = d.interior_cells.unwrap_or_else(|| (mean_in / hs).ceil().max(2.0) as usize) * scale;
    let (n_out0, a_out) = graded_cells(mean_out, hs, hs * d.exterior_growth);
    let n_out = d.exterior_cells.unwrap_or(n_out0) * scale;

    let mut rings: Vec<Ring> = Vec::new();
    for i in 1..n_in {
        rings.push(Ring::Interior(i as f64 / n_in as f64));
    }
    let mut band: Vec<f64> = Vec::new();
    match kind {
        MeshKind::Layer => {
            let nl = d.layer_cells * scale;
            let hl = 2.0 * eps / d.layer_cells as f64;
            let (nb0, a) = graded_cells(rb - eps, hl, hs);
            let nb = d.band_cells.unwrap_or(nb0) * scale;
            let g = graded(nb, a);
            for k in (1..=nb).rev() {
                band.push(-(eps + (rb - eps) * g[k]));
            }
            for k in 0..=nl {
                band.push(-eps + 2.0 * eps * k as f64 / nl as f64);
            }
            for gk in g.iter().skip(1) {
                band.push(eps + (rb - eps) * gk);
            }
        }
        MeshKind::Interface => {
            let nb = d.band_cells.unwrap_or_else(|| (rb / hs).ceil().max(2.0) as usize) * scale;
            for k in 0..=2 * nb {
                band.push(-rb + rb * k as f64 / nb as f64);
            }
        }
    }
    let curve_level = band.iter().position(|r| r.abs() < 1e-14 * rb.max(1.0));
    let curve_level = curve_level.ok_or_else(|| Error::Geometry("band levels miss the curve".into()))?;
    band[curve_level] = 0.0;
    rings.extend(band.iter().map(|&r| Ring::Band(r)));
    let g_out = graded(n_out, a_out);
    for gk in g_out.iter().skip(1) {
        rings.push(Ring::Exterior(*gk));
    }

    // Nodes.
    let inner_side = if o > 0.0 { Side::Minus } else { Side::Plus };
    let outer_side = if o > 0.0 { Side::Plus } else { Side::Minus };
    let mut nodes = vec![c];
    let mut tubular = vec![None];
    let mut node_side = vec![inner_side];
    let mut boundary = vec![false];
    // (first node index, connects to the next ring)
    let mut ring_start: Vec<(usize, bool)> = Vec::new();
    let mut ring_kind: Vec<Ring> = Vec::new();
    let mut duplicates = Vec::new();
    let mut curve_ring_minus = 0;
    let frame_s = |sg: f64| if o > 0.0 { sg } else { (len - sg).rem_euclid(len) };
    for (idx, ring) in rings.iter().enumerate() {
        let copies = if kind == MeshKind::Interface && matches!(ring, Ring::Band(r) if *r == 0.0) { 2 } else { 1 };
        for copy in 0..copies {
            let start = nodes.len();
            ring_start.push((start, !(copies == 2 && copy == 0)));
            ring_kind.push(*ring);
            for j in 0..ns {
                let (p, tub, side, bnd) = match *ring {
                    Ring::Interior(t) => {
                        let q = at(j, -rb);
                        ([c[0] + t * (q[0] - c[0]), c[1] + t * (q[1] - c[1])], None, inner_side, false)
                    }
                    Ring::Band(r) => {
                        let side = if r < 0.0 {
                            inner_side
                        } else if r > 0.0 {
                            outer_side
                        } else if copies == 2 {
                            if copy == 0 { inner_side } else { outer_side }
                        } else {
                            Side::OnCurve
                        };
                        (at(j, r), Some([frame_s(s_geo[j]), o * r]), side, false)
                    }
                    Ring::Exterior(t) => {
                        let q = at(j, rb);
                        let b = box_hit(j);
                        let last = idx + 1 == rings.len();
                        ([(1.0 - t) * q[0] + t * b[0], (1.0 - t) * q[1] + t * b[1]], None, outer_side, last)
                    }
                };
                nodes.push(p);
                tubular.push(tub);
                node_side.push(side);
                boundary.push(bnd);
            }
            if matches!(ring, Ring::Band(r) if *r == 0.0) && (copies == 1 || (copy == 0) == (o > 0.0)) {
                curve_ring_minus = start;
            }
        }
        if copies == 2 {
            let (inner, outer) = (ring_start[ring_start.len() - 2].0, ring_start[ring_start.len() - 1].0);
            for j in 0..ns {
                let (mi, pl) = if o > 0.0 { (inner + j, outer + j) } else { (outer + j, inner + j) };
                duplicates.push([mi, pl]);
            }
        }
    }

    // Triangles.
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut tri_side = Vec::new();
    let region_between = |a: &Ring, b: &Ring| -> (Region, Side) {
        match (a, b) {
            (Ring::Band(ra), Ring::Band(rb_)) => {
                let side = if *rb_ <= 0.0 && *ra <= 0.0 { inner_side } else { outer_side };
                let geo_side = if side == Side::Minus { Region::Minus } else { Region::Plus };
                if kind == MeshKind::Layer && *ra >= -eps * (1.0 + 1e-12) && *rb_ <= eps * (1.0 + 1e-12) {
                    (Region::Layer, side)
                } else {
                    (geo_side, side)
                }
            }
            (Ring::Interior(_), _) => (if inner_side == Side::Minus { Region::Minus } else { Region::Plus }, inner_side),
            _ => (if outer_side == Side::Minus { Region::Minus } else { Region::Plus }, outer_side),
        }
    };
    let fan_region = if inner_side == Side::Minus { Region::Minus } else { Region::Plus };
    let first = ring_start[0].0;
    for j in 0..ns {
        triangles.push([0, first + (j + 1) % ns, first + j]);
        regions.push(fan_region);
        tri_side.push(inner_side);
    }
    for k in 0..ring_start.len() - 1 {
        let (a0, connects) = ring_start[k];
        if !connects {
            continue;
        }
        let b0 = ring_start[k + 1].0;
        let (reg, side) = region_between(&ring_kind[k], &ring_kind[k + 1]);
        for j in 0..ns {
            let j1 = (j + 1) % ns;
            triangles.push([a0 + j, a0 + j1, b0 + j1]);
            triangles.push([a0 + j, b0 + j1, b0 + j]);
            regions.push(reg);
            regions.push(reg);
            tri_side.push(side);
            tri_side.push(side);
        }
    }
    // Consistent counter-clockwise orientation, or a tangled mesh.
    let area = |t: &[usize; 3]| {
        let (p, q, r) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    };
    let positive = triangles.iter().filter(|t| area(t) > 0.0).count();
    let flip = positive * 2 < triangles.len();
    for t in triangles.iter_mut() {
        if flip {
            t.swap(1, 2);
        }
        let a = area(t);
        if !(a > 0.0) {
            return Err(Error::Geometry(
                "mesh is tangled; the curve is not star-shaped about its centroid or the band is too wide".into(),
            ));
        }
    }
    let interface_edges = (0..ns).map(|j| [curve_ring_minus + j, curve_ring_minus + (j + 1) % ns]).collect();
    Ok(InterfaceMesh {
        kind,
        nodes,
        tubular,
        node_side,
        boundary,
        triangles,
        regions,
        tri_side,
        interface_edges,
        duplicates,
        orientation: orient,
        length: len,
        epsilon: eps,
        s_cells: ns,
        band_radius: rb,
    })
}

impl InterfaceMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Write node, element and interface tables to `dir`.
    pub fn write_tables(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("nodes.txt"))?);
        writeln!(w, "# id x1 x2 side boundary s r")?;
        for (i, p) in self.nodes.iter().enumerate() {
            let (s, r) = self.tubular[i].map(|t| (t[0], t[1])).unwrap_or((f64::NAN, f64::NAN));
            writeln!(w, "{i} {:.15e} {:.15e} {:?} {} {s:.15e} {r:.15e}", p[0], p[1], self.node_side[i], self.boundary[i] as u8)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("elements.txt"))?);
        writeln!(w, "# id n1 n2 n3 region")?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{i} {} {} {} {:?}", t[0], t[1], t[2], self.regions[i])?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("interface.txt"))?);
        writeln!(w, "# id n1 n2 [plus copies]")?;
        for (i, e) in self.interface_edges.iter().enumerate() {
            if self.duplicates.is_empty() {
                writeln!(w, "{i} {} {}", e[0], e[1])?;
            } else {
                let plus = |m: usize| self.duplicates.iter().find(|d| d[0] == m).map(|d| d[1]).unwrap();
                writeln!(w, "{i} {} {} {} {}", e[0], e[1], plus(e[0]), plus(e[1]))?;
            }
        }
        Ok(())
    }
}
