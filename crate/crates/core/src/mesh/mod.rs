//! Interface-conforming triangulations with doubled interface vertices.

mod io;
mod structured;
mod unstructured;

pub use io::{read_mesh, write_mesh, write_vtk};

use crate::error::{Error, Result};
use crate::geometry::index::EdgeIndex;
use crate::geometry::{Point, TwoSidedDomain};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshMode {
    StructuredGridAligned,
    Unstructured,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Minimum angle requested from unstructured refinement, in degrees.
    pub min_angle_deg: f64,
    /// Cap on vertices created by unstructured refinement.
    pub max_vertices: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            min_angle_deg: 20.0,
            max_vertices: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [usize; 3],
    pub side: Side,
}

/// The two copies of a vertex lying on the interface.
///
/// After a partial merge a collapsed pair has `plus == minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePair {
    pub plus: usize,
    pub minus: usize,
    pub point: Point,
    /// Arc-length parameter along the chain: segment index plus fraction.
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    /// Pair indices, ordered along the chain.
    pub pairs: [usize; 2],
    pub length: f64,
    pub segment: usize,
}

/// Triangulation of the box with plus and minus copies of interface vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<Triangle>,
    pub interface_pairs: Vec<InterfacePair>,
    pub interface_edges: Vec<InterfaceEdge>,
    pub h: f64,
    /// Endpoints of the interface segments the mesh was built against.
    pub interface_segments: Vec<(Point, Point)>,
    /// Interface fully identified (continuous field across it).
    pub merged: bool,
}

/// Builds a conforming two-sided mesh of the domain's box.
pub fn triangulate(domain: &TwoSidedDomain, h: f64, mode: MeshMode) -> Result<TwoSidedMesh> {
    triangulate_with(domain, h, mode, &MeshOptions::default())
}

pub fn triangulate_with(
    domain: &TwoSidedDomain,
    h: f64,
    mode: MeshMode,
    options: &MeshOptions,
) -> Result<TwoSidedMesh> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Mesh(format!("mesh size h = {h} must be positive")));
    }
    if domain.interface.segment_count() == 0 {
        return Err(Error::Mesh("interface has no segments".into()));
    }
    if !domain.interface.is_simple() {
        return Err(Error::Mesh("interface chain is not simple".into()));
    }
    let (pts, tris) = match mode {
        MeshMode::StructuredGridAligned => structured::grid(domain, h)?,
        MeshMode::Unstructured => unstructured::refine(domain, h, options)?,
    };
    double_interface(domain, pts, tris, h)
}

/// Picks the structured grid when the chain sits on a lattice of pitch `h`.
pub fn default_mode(domain: &TwoSidedDomain, h: f64) -> MeshMode {
    if structured::grid_compatible(domain, h) {
        MeshMode::StructuredGridAligned
    } else {
        MeshMode::Unstructured
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Tags triangles by centroid, splits vertices used by both sides and
/// collects the interface pairs and edges.
fn double_interface(
    domain: &TwoSidedDomain,
    pts: Vec<Point>,
    mut tris: Vec<[usize; 3]>,
    h: f64,
) -> Result<TwoSidedMesh> {
    let chain = &domain.interface;
    let tol = 1e-9 * chain.base_length.min(h);
    let plus_index = EdgeIndex::new(&domain.plus_region);
    let mut sides = Vec::with_capacity(tris.len());
    for t in tris.iter_mut() {
        let a = signed_area(pts[t[0]], pts[t[1]], pts[t[2]]);
        if a.abs() <= 1e-14 * h * h {
            return Err(Error::Mesh("degenerate triangle".into()));
        }
        if a < 0.0 {
            t.swap(1, 2);
        }
        let c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) * (1.0 / 3.0);
        sides.push(if plus_index.contains(c) {
            Side::Plus
        } else {
            Side::Minus
        });
    }
    let n = pts.len();
    let mut used = vec![[false; 2]; n];
    for (t, &s) in tris.iter().zip(&sides) {
        for &v in t {
            used[v][s as usize] = true;
        }
    }
    let seg_list: Vec<(Point, Point)> = chain.segments().collect();
    let seg_index = EdgeIndex::from_edges(seg_list.clone());
    let mut new_id = vec![[usize::MAX; 2]; n];
    let mut vertices = Vec::with_capacity(n + n / 8);
    let mut pairs_raw = Vec::new();
    for v in 0..n {
        let [p_used, m_used] = used[v];
        if !p_used && !m_used {
            continue;
        }
        if p_used {
            new_id[v][0] = vertices.len();
            vertices.push(pts[v]);
        }
        if m_used {
            new_id[v][1] = vertices.len();
            vertices.push(pts[v]);
        }
        if p_used && m_used {
            let segs = seg_index.edges_near(pts[v], tol);
            let Some(position) = segs
                .iter()
                .map(|&s| chain.chain_position(s, pts[v]))
                .min_by(f64::total_cmp)
            else {
                return Err(Error::Mesh(format!(
                    "vertex ({}, {}) is shared by both sides but is off the interface",
                    pts[v].x, pts[v].y
                )));
            };
            pairs_raw.push((position, v));
        }
    }
    let triangles: Vec<Triangle> = tris
        .iter()
        .zip(&sides)
        .map(|(t, &s)| Triangle {
            v: t.map(|g| new_id[g][s as usize]),
            side: s,
        })
        .collect();
    pairs_raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut pair_of = vec![usize::MAX; n];
    let interface_pairs: Vec<InterfacePair> = pairs_raw
        .iter()
        .enumerate()
        .map(|(k, &(position, v))| {
            pair_of[v] = k;
            InterfacePair {
                plus: new_id[v][0],
                minus: new_id[v][1],
                point: pts[v],
                position,
            }
        })
        .collect();
    // Geometric edges with one plus and one minus neighbour lie on the interface.
    let mut edge_sides: BTreeMap<(usize, usize), [bool; 2]> = BTreeMap::new();
    for (t, &s) in tris.iter().zip(&sides) {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edge_sides.entry((a.min(b), a.max(b))).or_default()[s as usize] = true;
        }
    }
    let mut interface_edges = Vec::new();
    for (&(a, b), s) in &edge_sides {
        if !(s[0] && s[1]) {
            continue;
        }
        let mid = pts[a].lerp(pts[b], 0.5);
        let owners: Vec<usize> = seg_index
            .edges_near(mid, tol)
            .into_iter()
            .filter(|&k| {
                let (p, q) = seg_list[k];
                crate::geometry::point_segment_distance(pts[a], p, q) <= tol
                    && crate::geometry::point_segment_distance(pts[b], p, q) <= tol
            })
            .collect();
        let Some(&segment) = owners.first() else {
            return Err(Error::Mesh("interface edge does not lie on a chain segment".into()));
        };
        let (pa, pb) = (pair_of[a], pair_of[b]);
        if pa == usize::MAX || pb == usize::MAX {
            return Err(Error::Mesh("interface edge endpoint is not doubled".into()));
        }
        let pos = |p: usize| chain.chain_position(segment, interface_pairs[p].point);
        let pairs = if pos(pa) <= pos(pb) { [pa, pb] } else { [pb, pa] };
        interface_edges.push(InterfaceEdge {
            pairs,
            length: pts[a].dist(pts[b]),
            segment,
        });
    }
    interface_edges.sort_by(|x, y| {
        let px = chain.chain_position(x.segment, interface_pairs[x.pairs[0]].point);
        let py = chain.chain_position(y.segment, interface_pairs[y.pairs[0]].point);
        px.total_cmp(&py)
    });
    let mesh = TwoSidedMesh {
        vertices,
        triangles,
        interface_pairs,
        interface_edges,
        h,
        interface_segments: seg_list,
        merged: false,
    };
    let covered = mesh.segment_coverage();
    for (k, (&c, l)) in covered.iter().zip(chain.segment_lengths()).enumerate() {
        if (c - l).abs() > 1e-12 * l.max(1.0) * 10.0 {
            return Err(Error::Mesh(format!(
                "interface segment {k} is not resolved by the mesh (covered {c} of {l})"
            )));
        }
    }
    Ok(mesh)
}

impl TwoSidedMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Total interface-edge length per chain segment.
    pub fn segment_coverage(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.interface_segments.len()];
        for e in &self.interface_edges {
            c[e.segment] += e.length;
        }
        c
    }

    pub fn triangle_area(&self, t: &Triangle) -> f64 {
        let [a, b, c] = t.v.map(|k| self.vertices[k]);
        signed_area(a, b, c)
    }

    pub fn side_area(&self, side: Side) -> f64 {
        self.triangles
            .iter()
            .filter(|t| t.side == side)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Per-vertex flags `[used by plus, used by minus]`.
    pub fn vertex_sides(&self) -> Vec<[bool; 2]> {
        let mut u = vec![[false; 2]; self.vertices.len()];
        for t in &self.triangles {
            for &v in &t.v {
                u[v][t.side as usize] = true;
            }
        }
        u
    }

    /// Vertices touched by `side`'s triangles, in increasing id order.
    pub fn side_vertices(&self, side: Side) -> Vec<usize> {
        self.vertex_sides()
            .iter()
            .enumerate()
            .filter(|(_, s)| s[side as usize])
            .map(|(k, _)| k)
            .collect()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let p = t.v.map(|k| self.vertices[k]);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let w = p[(k + 2) % 3] - p[k];
                let ang = (u.dot(w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos();
                best = best.min(ang.to_degrees());
            }
        }
        best
    }

    /// Fully identifies plus and minus copies (continuous field across the
    /// interface). Idempotent.
    pub fn merge_interface(&self) -> TwoSidedMesh {
        self.merge_interface_mapped().0
    }

    pub fn merge_interface_mapped(&self) -> (TwoSidedMesh, Vec<usize>) {
        let all = vec![true; self.interface_segments.len()];
        let (mut m, map) = self.merge_segments_mapped(&all);
        m.interface_pairs.clear();
        m.interface_edges.clear();
        m.merged = true;
        (m, map)
    }

    /// Identifies plus and minus copies at every pair touching a segment
    /// flagged in `infinite`; edges on those segments are dropped and their
    /// pairs kept as collapsed (`plus == minus`).
    pub fn merge_segments(&self, infinite: &[bool]) -> TwoSidedMesh {
        self.merge_segments_mapped(infinite).0
    }

    /// As [`Self::merge_segments`], also returning the new id of every old vertex.
    pub fn merge_segments_mapped(&self, infinite: &[bool]) -> (TwoSidedMesh, Vec<usize>) {
        if self.merged {
            return (self.clone(), (0..self.vertices.len()).collect());
        }
        let mut collapse = vec![false; self.interface_pairs.len()];
        for e in &self.interface_edges {
            if infinite.get(e.segment).copied().unwrap_or(false) {
                collapse[e.pairs[0]] = true;
                collapse[e.pairs[1]] = true;
            }
        }
        // Old id -> surviving old id.
        let mut target: Vec<usize> = (0..self.vertices.len()).collect();
        for (p, &c) in self.interface_pairs.iter().zip(&collapse) {
            if c && p.plus != p.minus {
                target[p.minus] = p.plus;
            }
        }
        let mut renum = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (k, &t) in target.iter().enumerate() {
            if t == k {
                renum[k] = vertices.len();
                vertices.push(self.vertices[k]);
            }
        }
        let map = |k: usize| renum[target[k]];
        let triangles = self
            .triangles
            .iter()
            .map(|t| Triangle {
                v: t.v.map(map),
                side: t.side,
            })
            .collect();
        let interface_pairs = self
            .interface_pairs
            .iter()
            .map(|p| InterfacePair {
                plus: map(p.plus),
                minus: map(p.minus),
                ..*p
            })
            .collect();
        let interface_edges = self
            .interface_edges
            .iter()
            .filter(|e| !infinite.get(e.segment).copied().unwrap_or(false))
            .copied()
            .collect();
        let old_to_new = (0..self.vertices.len()).map(map).collect();
        let mesh = TwoSidedMesh {
            vertices,
            triangles,
            interface_pairs,
            interface_edges,
            h: self.h,
            interface_segments: self.interface_segments.clone(),
            merged: false,
        };
        (mesh, old_to_new)
    }
}

/// Interface pairs ordered along the chain.
pub fn interface_dof_pairs(mesh: &TwoSidedMesh) -> &[InterfacePair] {
    &mesh.interface_pairs
}
