//! Piecewise-linear element matrices on two-sided meshes.

use crate::geometry::Point;
use crate::linalg::{csr_from_triplets, SparseMatrix};
use crate::mesh::{Side, TwoSidedMesh};
use rayon::prelude::*;

/// Gradients of the three barycentric hat functions and the triangle area.
pub fn hat_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
    let s = 1.0 / (2.0 * area);
    let g = [
        (p[2] - p[1]).perp() * s,
        (p[0] - p[2]).perp() * s,
        (p[1] - p[0]).perp() * s,
    ];
    (g, area)
}

fn assemble_local<F>(mesh: &TwoSidedMesh, weight: impl Fn(Side) -> f64 + Sync, local: F) -> SparseMatrix
where
    F: Fn([Point; 3]) -> [[f64; 3]; 3] + Sync,
{
    let blocks: Vec<Option<[[f64; 3]; 3]>> = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let w = weight(t.side);
            if w == 0.0 {
                return None;
            }
            let m = local(t.v.map(|k| mesh.vertices[k]));
            Some(m.map(|row| row.map(|v| w * v)))
        })
        .collect();
    let mut entries = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, b) in mesh.triangles.iter().zip(&blocks) {
        if let Some(b) = b {
            for i in 0..3 {
                for j in 0..3 {
                    entries.push((t.v[i], t.v[j], b[i][j]));
                }
            }
        }
    }
    csr_from_triplets(mesh.n_vertices(), &entries)
}

/// `∫ w(side) ∇φ_i·∇φ_j`.
pub fn stiffness(mesh: &TwoSidedMesh, weight: impl Fn(Side) -> f64 + Sync) -> SparseMatrix {
    assemble_local(mesh, weight, |p| {
        let (g, area) = hat_gradients(p);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = area * g[i].dot(g[j]);
            }
        }
        k
    })
}

/// `∫ w(side) φ_i φ_j`, or its row-sum diagonal when `lumped`.
pub fn mass(mesh: &TwoSidedMesh, weight: impl Fn(Side) -> f64 + Sync, lumped: bool) -> SparseMatrix {
    assemble_local(mesh, weight, |p| {
        let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            if lumped {
                m[i][i] = area / 3.0;
            } else {
                for j in 0..3 {
                    m[i][j] = if i == j { area / 6.0 } else { area / 12.0 };
                }
            }
        }
        m
    })
}

/// Jump coupling `Σ_e c_e ∫_e ⟦u⟧⟦v⟧` with the trapezoid rule on each edge.
///
/// `edge_weight[e]` is the conductance times the measure carried by edge `e`.
pub fn coupling(mesh: &TwoSidedMesh, edge_weight: &[f64]) -> SparseMatrix {
    let mut entries = Vec::with_capacity(8 * mesh.interface_edges.len());
    for (e, &c) in mesh.interface_edges.iter().zip(edge_weight) {
        if c == 0.0 {
            continue;
        }
        for &pi in &e.pairs {
            let p = mesh.interface_pairs[pi];
            if p.plus == p.minus {
                continue;
            }
            let h = 0.5 * c;
            entries.push((p.plus, p.plus, h));
            entries.push((p.plus, p.minus, -h));
            entries.push((p.minus, p.plus, -h));
            entries.push((p.minus, p.minus, h));
        }
    }
    csr_from_triplets(mesh.n_vertices(), &entries)
}

/// Which sides use each vertex: plus only, minus only, or both after a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSide {
    Plus,
    Minus,
    Both,
}

pub fn dof_sides(mesh: &TwoSidedMesh) -> Vec<DofSide> {
    mesh.vertex_sides()
        .into_iter()
        .map(|s| match s {
            [true, false] => DofSide::Plus,
            [false, true] => DofSide::Minus,
            _ => DofSide::Both,
        })
        .collect()
}

/// Nodal interpolant of a two-sided field.
///
/// A vertex shared by both sides takes the mean of the one-sided values
/// weighted by each side's share of its star, so `∫ u` over the lumped
/// mass matches the one-sided data.
pub fn interpolate(mesh: &TwoSidedMesh, f: impl Fn(Point, Side) -> f64) -> Vec<f64> {
    let sides = dof_sides(mesh);
    let mut star = vec![[0.0; 2]; mesh.n_vertices()];
    if sides.contains(&DofSide::Both) {
        for t in &mesh.triangles {
            let a = mesh.triangle_area(t);
            for &v in &t.v {
                star[v][t.side as usize] += a;
            }
        }
    }
    sides
        .into_iter()
        .zip(&mesh.vertices)
        .zip(&star)
        .map(|((s, &p), w)| match s {
            DofSide::Plus => f(p, Side::Plus),
            DofSide::Minus => f(p, Side::Minus),
            DofSide::Both => {
                (w[0] * f(p, Side::Plus) + w[1] * f(p, Side::Minus)) / (w[0] + w[1])
            }
        })
        .collect()
}
