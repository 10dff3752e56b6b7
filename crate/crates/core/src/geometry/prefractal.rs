use super::{segment_segment_distance, Point};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Generation cap used by the plain generator entry points.
pub const DEFAULT_MAX_GENERATION: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Flat,
    Minkowski,
    Koch,
    Custom,
}

impl Family {
    /// Similarity dimension of the limit curve; 1 for chains without a motif.
    pub fn similarity_dimension(self) -> f64 {
        match self {
            Family::Minkowski => 8f64.ln() / 4f64.ln(),
            Family::Koch => 4f64.ln() / 3f64.ln(),
            Family::Flat | Family::Custom => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Flat => "flat",
            Family::Minkowski => "minkowski",
            Family::Koch => "koch",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(Family::Flat),
            "minkowski" => Ok(Family::Minkowski),
            "koch" => Ok(Family::Koch),
            "custom" => Ok(Family::Custom),
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

/// The interface as an ordered polygonal chain.
///
/// Open chains run from one wall anchor to the other and the plus side lies
/// below them. Closed chains do not repeat the first vertex and enclose the
/// plus side.
#[derive(Debug, Clone, PartialEq)]
pub struct PolylineInterface {
    pub vertices: Vec<Point>,
    pub generation: u32,
    pub family: Family,
    pub base_length: f64,
    pub closed: bool,
}

// Motifs in the frame (along, left normal) of a unit segment.
const MINKOWSKI_MOTIF: [(f64, f64); 9] = [
    (0.0, 0.0),
    (0.25, 0.0),
    (0.25, 0.25),
    (0.5, 0.25),
    (0.5, 0.0),
    (0.5, -0.25),
    (0.75, -0.25),
    (0.75, 0.0),
    (1.0, 0.0),
];

fn koch_motif() -> [(f64, f64); 5] {
    [
        (0.0, 0.0),
        (1.0 / 3.0, 0.0),
        (0.5, 3f64.sqrt() / 6.0),
        (2.0 / 3.0, 0.0),
        (1.0, 0.0),
    ]
}

fn refine(vertices: &[Point], motif: &[(f64, f64)]) -> Vec<Point> {
    let mut out = Vec::with_capacity((vertices.len() - 1) * (motif.len() - 1) + 1);
    out.push(vertices[0]);
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let t = b - a;
        let n = t.perp();
        for &(u, v) in &motif[1..motif.len() - 1] {
            out.push(a + t * u + n * v);
        }
        out.push(b);
    }
    out
}

fn check_cap(generation: u32, cap: u32) -> Result<()> {
    if generation > cap {
        return Err(Error::ResourceBound {
            what: "generation",
            requested: generation as usize,
            cap: cap as usize,
        });
    }
    Ok(())
}

fn check_base(base: [Point; 2]) -> Result<f64> {
    let len = base[0].dist(base[1]);
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::Geometry("degenerate base segment".into()));
    }
    Ok(len)
}

/// Straight generation-0 chain.
pub fn flat_interface(base: [Point; 2]) -> Result<PolylineInterface> {
    let len = check_base(base)?;
    Ok(PolylineInterface {
        vertices: base.to_vec(),
        generation: 0,
        family: Family::Flat,
        base_length: len,
        closed: false,
    })
}

/// Square-wave prefractal with the default generation cap.
pub fn minkowski_prefractal(generation: u32, base: [Point; 2]) -> Result<PolylineInterface> {
    minkowski_prefractal_capped(generation, base, DEFAULT_MAX_GENERATION)
}

pub fn minkowski_prefractal_capped(
    generation: u32,
    base: [Point; 2],
    max_generation: u32,
) -> Result<PolylineInterface> {
    check_cap(generation, max_generation)?;
    let len = check_base(base)?;
    if base[0].x != base[1].x && base[0].y != base[1].y {
        return Err(Error::Geometry(
            "square-wave generator needs an axis-aligned base segment".into(),
        ));
    }
    let mut v = base.to_vec();
    for _ in 0..generation {
        v = refine(&v, &MINKOWSKI_MOTIF);
    }
    Ok(PolylineInterface {
        vertices: v,
        generation,
        family: Family::Minkowski,
        base_length: len,
        closed: false,
    })
}

/// Koch curve prefractal with the default generation cap.
pub fn koch_prefractal(generation: u32, base: [Point; 2]) -> Result<PolylineInterface> {
    koch_prefractal_capped(generation, base, DEFAULT_MAX_GENERATION)
}

pub fn koch_prefractal_capped(
    generation: u32,
    base: [Point; 2],
    max_generation: u32,
) -> Result<PolylineInterface> {
    check_cap(generation, max_generation)?;
    let len = check_base(base)?;
    let motif = koch_motif();
    let mut v = base.to_vec();
    for _ in 0..generation {
        v = refine(&v, &motif);
    }
    Ok(PolylineInterface {
        vertices: v,
        generation,
        family: Family::Koch,
        base_length: len,
        closed: false,
    })
}

impl PolylineInterface {
    /// User-supplied chain. Near-duplicate consecutive vertices are merged.
    pub fn custom(vertices: Vec<Point>, closed: bool) -> Result<Self> {
        let min_count = if closed { 3 } else { 2 };
        if vertices.len() < min_count {
            return Err(Error::Geometry(format!(
                "chain needs at least {min_count} vertices"
            )));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Geometry("non-finite vertex".into()));
        }
        let scale = super::bbox_of(&vertices).diameter().max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale;
        let mut v: Vec<Point> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if v.last().is_none_or(|q| q.dist(p) > tol) {
                v.push(p);
            }
        }
        if closed && v.len() > 1 && v[0].dist(v[v.len() - 1]) <= tol {
            v.pop();
        }
        if v.len() < min_count {
            return Err(Error::Geometry("chain collapses after vertex dedup".into()));
        }
        let base_length = if closed {
            v.windows(2).map(|w| w[0].dist(w[1])).sum::<f64>() + v[v.len() - 1].dist(v[0])
        } else {
            v[0].dist(v[v.len() - 1])
        };
        let chain = PolylineInterface {
            vertices: v,
            generation: 0,
            family: Family::Custom,
            base_length,
            closed,
        };
        if let Some((i, j)) = chain.find_self_intersection() {
            return Err(Error::Geometry(format!(
                "chain is not simple: segments {i} and {j} meet"
            )));
        }
        Ok(chain)
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.segments().map(|(a, b)| a.dist(b)).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn min_segment_length(&self) -> f64 {
        self.segment_lengths()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Absolute snapping tolerance for coordinates on this chain.
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.base_length
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.segments().all(|(a, b)| a.x == b.x || a.y == b.y)
    }

    /// Same chain traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut c = self.clone();
        c.vertices.reverse();
        c
    }

    pub fn is_simple(&self) -> bool {
        self.find_self_intersection().is_none()
    }

    /// First pair of segments that meet illegally, if any.
    ///
    /// Adjacent segments may share their common endpoint but must not fold
    /// back onto each other; all other pairs must stay apart.
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.segment_count();
        let tol = self.tolerance();
        for i in 0..n {
            let j = i + 1;
            if j == n && !self.closed {
                break;
            }
            let (a, b) = self.segment(i);
            let (_, c) = self.segment(j % n);
            let (u, w) = (b - a, c - b);
            if u.cross(w).abs() <= tol * (u.norm() + w.norm()) && u.dot(w) < 0.0 {
                return Some((i, j % n));
            }
        }
        if n < 3 {
            return None;
        }
        let adjacent = |i: usize, j: usize| {
            j == i + 1 || (self.closed && i == 0 && j == n - 1)
        };
        let cell = (self.total_length() / n as f64).max(tol * 10.0);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, (a, b)) in self.segments().enumerate() {
            let (x0, x1) = (a.x.min(b.x) - tol, a.x.max(b.x) + tol);
            let (y0, y1) = (a.y.min(b.y) - tol, a.y.max(b.y) + tol);
            for cx in (x0 / cell).floor() as i64..=(x1 / cell).floor() as i64 {
                for cy in (y0 / cell).floor() as i64..=(y1 / cell).floor() as i64 {
                    grid.entry((cx, cy)).or_default().push(k);
                }
            }
        }
        let mut candidates = Vec::new();
        for list in grid.values() {
            for (p, &i) in list.iter().enumerate() {
                for &j in &list[p + 1..] {
                    let (i, j) = (i.min(j), i.max(j));
                    if !adjacent(i, j) {
                        candidates.push((i, j));
                    }
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        candidates.into_iter().find(|&(i, j)| {
            let (a, b) = self.segment(i);
            let (c, d) = self.segment(j);
            segment_segment_distance(a, b, c, d) <= tol
        })
    }

    /// Arc-length position of a point lying on segment `seg`.
    pub(crate) fn chain_position(&self, seg: usize, p: Point) -> f64 {
        let (a, b) = self.segment(seg);
        let len = a.dist(b);
        let t = ((p - a).dot(b - a) / (len * len)).clamp(0.0, 1.0);
        seg as f64 + t
    }
}
