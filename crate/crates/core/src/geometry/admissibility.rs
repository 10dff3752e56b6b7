use super::index::EdgeIndex;
use super::{Point, Rect, Region, TwoSidedDomain};
use crate::error::{invalid, Result};
use crate::measure::{self, arc_length_samples, BoundaryMeasure, CenterSample, RadiusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Sample counts and seeds shared by the admissibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub n_boundary_samples: usize,
    /// Cone apexes sampled per boundary point.
    pub n_cone_samples: usize,
    pub n_directions: usize,
    pub n_pairs: usize,
    pub n_centers: usize,
    pub n_radii: usize,
    pub seed: u64,
    /// Lattice pitch of the path graph; defaults to a quarter of the shortest
    /// boundary edge.
    pub uniform_pitch: Option<f64>,
    pub max_grid_nodes: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_boundary_samples: 200,
            n_cone_samples: 48,
            n_directions: 72,
            n_pairs: 1000,
            n_centers: 1000,
            n_radii: 20,
            seed: 0,
            uniform_pitch: None,
            max_grid_nodes: 250_000,
        }
    }
}

/// Which admissible class is being tested, with its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdmissibilityMode {
    /// Cone property plus perimeter density `H1(Γ ∩ B_r(x)) <= c_hat r`.
    Lipschitz { c_hat: f64 },
    /// Uniform-domain condition plus d-upper / s-lower measure regularity.
    Uniform { d: f64, s: f64, c_d: f64, c_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityConstraints {
    pub volume: f64,
    pub confinement: Option<Rect>,
    pub eps: f64,
    pub mode: AdmissibilityMode,
}

/// A pass/fail flag, the quantity that decided it and where it was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flag {
    pub ok: bool,
    pub value: f64,
    pub witness: Option<Point>,
    pub radius: Option<f64>,
}

impl Flag {
    fn scan(ok: bool, s: measure::ScanResult) -> Self {
        Flag {
            ok,
            value: s.estimate,
            witness: Some(s.center),
            radius: Some(s.radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeWitness {
    pub x: Point,
    /// Direction that held for the most apexes before failing.
    pub direction: Point,
    /// Apex whose cone left the domain.
    pub y: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeCheck {
    pub passed: bool,
    pub eps: f64,
    pub points_checked: usize,
    pub witness: Option<ConeWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformWitness {
    pub x: Point,
    pub y: Point,
    /// Path length over `|x - y|`.
    pub length_ratio: f64,
    /// Minimum over path points of `d(z) |x-y| / (|x-z| |y-z|)`.
    pub clearance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformCheck {
    pub passed: bool,
    pub eps: f64,
    pub pairs_checked: usize,
    pub pitch: f64,
    /// Pair with the smallest margin against the two bounds.
    pub worst: Option<UniformWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub volume_ok: Flag,
    pub confinement_ok: Flag,
    pub cone: Option<ConeCheck>,
    pub uniform: Option<UniformCheck>,
    pub perimeter_density_ok: Option<Flag>,
    pub upper_regularity_ok: Option<Flag>,
    pub lower_regularity_ok: Option<Flag>,
}

impl AdmissibilityReport {
    /// All evaluated flags pass.
    pub fn admissible(&self) -> bool {
        self.volume_ok.ok
            && self.confinement_ok.ok
            && self.cone.as_ref().is_none_or(|c| c.passed)
            && self.uniform.as_ref().is_none_or(|c| c.passed)
            && self.perimeter_density_ok.is_none_or(|f| f.ok)
            && self.upper_regularity_ok.is_none_or(|f| f.ok)
            && self.lower_regularity_ok.is_none_or(|f| f.ok)
    }

    /// One `name=value` token per evaluated flag.
    pub fn summary(&self) -> String {
        let b = |x: bool| if x { "pass" } else { "fail" };
        let mut parts = vec![
            format!("volume={}({:.12})", b(self.volume_ok.ok), self.volume_ok.value),
            format!("confinement={}", b(self.confinement_ok.ok)),
        ];
        if let Some(c) = &self.cone {
            parts.push(format!("cone={}", b(c.passed)));
        }
        if let Some(u) = &self.uniform {
            parts.push(format!("uniform={}", b(u.passed)));
        }
        if let Some(f) = self.perimeter_density_ok {
            parts.push(format!("perimeter_density={}({:.4})", b(f.ok), f.value));
        }
        if let Some(f) = self.upper_regularity_ok {
            parts.push(format!("upper_regularity={}({:.4})", b(f.ok), f.value));
        }
        if let Some(f) = self.lower_regularity_ok {
            parts.push(format!("lower_regularity={}({:.4})", b(f.ok), f.value));
        }
        parts.join(" ")
    }
}

/// Aggregates the volume, confinement and class-specific checks.
pub fn check_admissible(
    domain: &TwoSidedDomain,
    measure: Option<&BoundaryMeasure>,
    constraints: &AdmissibilityConstraints,
    sampling: &SamplingConfig,
) -> Result<AdmissibilityReport> {
    if !(constraints.volume > 0.0 && constraints.eps > 0.0) {
        return invalid("volume and eps must be positive");
    }
    let v = domain.volume_plus;
    let volume_ok = Flag {
        ok: (v - constraints.volume).abs() <= 1e-9 * constraints.volume,
        value: v,
        witness: None,
        radius: None,
    };
    let confinement_ok = match constraints.confinement {
        None => Flag {
            ok: true,
            value: 0.0,
            witness: None,
            radius: None,
        },
        Some(g) => {
            let tol = domain.interface.tolerance();
            let (mut worst, mut at) = (f64::NEG_INFINITY, None);
            for &p in &domain.interface.vertices {
                let excess = (g.min.x - p.x)
                    .max(p.x - g.max.x)
                    .max(g.min.y - p.y)
                    .max(p.y - g.max.y);
                if excess > worst {
                    worst = excess;
                    at = Some(p);
                }
            }
            Flag {
                ok: worst <= tol,
                value: worst,
                witness: at,
                radius: None,
            }
        }
    };
    let chain = &domain.interface;
    let min_seg = chain.min_segment_length();
    let centers = CenterSample::ArcLengthAndVertices(sampling.n_centers);
    let mut report = AdmissibilityReport {
        volume_ok,
        confinement_ok,
        cone: None,
        uniform: None,
        perimeter_density_ok: None,
        upper_regularity_ok: None,
        lower_regularity_ok: None,
    };
    match constraints.mode {
        AdmissibilityMode::Lipschitz { c_hat } => {
            report.cone = Some(check_epsilon_cone_with(
                domain,
                constraints.eps,
                sampling.n_boundary_samples,
                sampling.n_cone_samples,
                sampling.n_directions,
            ));
            let arc = measure::arc_length_measure(chain.clone());
            let radii = RadiusGrid::new(min_seg / 4.0, domain.bounds.diameter(), sampling.n_radii);
            let s = measure::scan(&arc, 1.0, &centers, &radii.radii(), false);
            report.perimeter_density_ok = Some(Flag::scan(s.estimate <= c_hat, s));
        }
        AdmissibilityMode::Uniform { d, s, c_d, c_s } => {
            let Some(m) = measure else {
                return invalid("uniform mode needs a boundary measure");
            };
            report.uniform = Some(check_uniform_domain_with(domain, constraints.eps, sampling));
            let radii = RadiusGrid::new(min_seg.min(1.0), 1.0, sampling.n_radii);
            let up = measure::upper_regularity_scan(m, d, &centers, radii)?;
            let lo = measure::lower_regularity_scan(m, s, &centers, radii)?;
            report.upper_regularity_ok = Some(Flag::scan(up.estimate <= c_d, up));
            report.lower_regularity_ok = Some(Flag::scan(lo.estimate >= c_s, lo));
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Cone property

/// Sampled cone-property check of the hot side at points of the interface.
pub fn check_epsilon_cone(
    domain: &TwoSidedDomain,
    eps: f64,
    n_boundary_samples: usize,
    n_cone_samples: usize,
) -> ConeCheck {
    check_epsilon_cone_with(domain, eps, n_boundary_samples, n_cone_samples, 72)
}

fn check_epsilon_cone_with(
    domain: &TwoSidedDomain,
    eps: f64,
    n_boundary_samples: usize,
    n_cone_samples: usize,
    n_directions: usize,
) -> ConeCheck {
    let mut pts = arc_length_samples(&domain.interface, n_boundary_samples);
    pts.extend_from_slice(&domain.interface.vertices);
    check_epsilon_cone_region(&domain.plus_region, &pts, eps, n_cone_samples, n_directions)
}

/// Cone-property check of `region` at the given boundary points.
pub fn check_epsilon_cone_region(
    region: &Region,
    boundary_points: &[Point],
    eps: f64,
    n_cone_samples: usize,
    n_directions: usize,
) -> ConeCheck {
    ConePlan::new(region, boundary_points, eps, n_cone_samples, n_directions).check(eps)
}

struct ConePoint {
    x: Point,
    directions: Vec<Point>,
    apexes: Vec<Point>,
    local: Vec<usize>,
}

/// Samples drawn once at a reference radius so that checks at any smaller
/// radius reuse them.
pub struct ConePlan {
    index: EdgeIndex,
    eps_ref: f64,
    tol: f64,
    points: Vec<ConePoint>,
}

impl ConePlan {
    pub fn new(
        region: &Region,
        boundary_points: &[Point],
        eps_ref: f64,
        n_cone_samples: usize,
        n_directions: usize,
    ) -> Self {
        let index = EdgeIndex::new(region);
        let tol = 1e-12 * region.bbox().diameter();
        let eps_ref = eps_ref.max(0.0);
        let points = boundary_points
            .par_iter()
            .map(|&x| {
                let local = index.edges_near(x, 2.0 * eps_ref + tol);
                let mut directions = Vec::new();
                let incident: Vec<(Point, Point)> = index
                    .edges_near(x, tol)
                    .into_iter()
                    .map(|k| index.edges[k])
                    .collect();
                let mut normal_sum = Point::default();
                for &(a, b) in &incident {
                    let t = b - a;
                    let n = t.perp() * (1.0 / t.norm());
                    normal_sum = normal_sum + n;
                    directions.push(n);
                }
                if normal_sum.norm() > 1e-9 {
                    directions.insert(0, normal_sum * (1.0 / normal_sum.norm()));
                }
                for k in 0..n_directions {
                    let th = 2.0 * PI * k as f64 / n_directions as f64;
                    directions.push(Point::new(th.cos(), th.sin()));
                }
                let mut apexes = vec![x];
                for &k in &local {
                    let (a, b) = index.edges[k];
                    for p in [a, b] {
                        if p.dist(x) < eps_ref && p.dist(x) > tol {
                            apexes.push(p);
                        }
                    }
                    let (t0, t1) = disk_interval(a, b, x, eps_ref);
                    if t1 > t0 {
                        for f in [0.25, 0.5, 0.75] {
                            apexes.push(a.lerp(b, t0 + f * (t1 - t0)));
                        }
                    }
                }
                let rings = ((n_cone_samples as f64 / 8.0).sqrt().ceil() as usize).max(1);
                let per_ring = (n_cone_samples / rings).max(4);
                for r in 0..rings {
                    let rho = eps_ref * (r as f64 + 0.5) / rings as f64;
                    for a in 0..per_ring {
                        let th = 2.0 * PI * (a as f64 + 0.5 * (r % 2) as f64) / per_ring as f64;
                        let y = x + Point::new(th.cos(), th.sin()) * rho;
                        if index.contains(y) || index.distance(y) <= tol {
                            apexes.push(y);
                        }
                    }
                }
                apexes.dedup_by(|a, b| a.dist(*b) <= tol);
                ConePoint {
                    x,
                    directions,
                    apexes,
                    local,
                }
            })
            .collect();
        ConePlan {
            index,
            eps_ref,
            tol,
            points,
        }
    }

    /// Runs the check at `eps <= eps_ref` on the stored samples.
    pub fn check(&self, eps: f64) -> ConeCheck {
        let eps = eps.min(self.eps_ref);
        let outcomes: Vec<Option<ConeWitness>> = self
            .points
            .par_iter()
            .map(|cp| self.check_point(cp, eps))
            .collect();
        let witness = outcomes.into_iter().flatten().next();
        ConeCheck {
            passed: witness.is_none() && eps > 0.0,
            eps,
            points_checked: self.points.len(),
            witness: if eps > 0.0 {
                witness
            } else {
                self.points.first().map(|p| ConeWitness {
                    x: p.x,
                    direction: Point::default(),
                    y: p.x,
                })
            },
        }
    }

    fn check_point(&self, cp: &ConePoint, eps: f64) -> Option<ConeWitness> {
        if eps <= 0.0 {
            return None;
        }
        let apexes: Vec<Point> = cp
            .apexes
            .iter()
            .copied()
            .filter(|y| y.dist(cp.x) < eps)
            .collect();
        let mut best: Option<(usize, ConeWitness)> = None;
        for &xi in &cp.directions {
            let mut held = 0;
            let mut failed_at = None;
            for &y in &apexes {
                if self.sector_inside(&cp.local, y, xi, eps) {
                    held += 1;
                } else {
                    failed_at = Some(y);
                    break;
                }
            }
            match failed_at {
                None => return None,
                Some(y) => {
                    if best.as_ref().is_none_or(|(h, _)| held > *h) {
                        best = Some((
                            held,
                            ConeWitness {
                                x: cp.x,
                                direction: xi,
                                y,
                            },
                        ));
                    }
                }
            }
        }
        best.map(|(_, w)| w)
    }

    /// Open truncated cone with apex `y`, axis `xi`, half-angle and height `eps`.
    fn sector_inside(&self, local: &[usize], y: Point, xi: Point, eps: f64) -> bool {
        let half = eps.min(PI);
        for &k in local {
            let (a, b) = self.index.edges[k];
            if segment_hits_sector(a, b, y, xi, half, eps, self.tol) {
                return false;
            }
        }
        self.index.contains(y + xi * (0.5 * eps))
    }
}

/// Parameter interval of `[a, b]` inside the open disk `B_r(c)`.
fn disk_interval(a: Point, b: Point, c: Point, r: f64) -> (f64, f64) {
    let d = b - a;
    let f = a - c;
    let qa = d.dot(d);
    let qb = f.dot(d);
    let disc = qb * qb - qa * (f.dot(f) - r * r);
    if qa == 0.0 || disc <= 0.0 {
        return (1.0, 0.0);
    }
    let s = disc.sqrt();
    (((-qb - s) / qa).max(0.0), ((-qb + s) / qa).min(1.0))
}

fn rotate(v: Point, th: f64) -> Point {
    let (s, c) = th.sin_cos();
    Point::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Whether segment `[a, b]` meets the open sector of the given half-angle.
fn segment_hits_sector(a: Point, b: Point, y: Point, xi: Point, half: f64, r: f64, tol: f64) -> bool {
    let (t0, t1) = disk_interval(a, b, y, r);
    let dt = tol / a.dist(b).max(tol);
    let (t0, t1) = (t0 + dt, t1 - dt);
    if t1 <= t0 {
        return false;
    }
    // Split the wedge into convex pieces of span at most pi/2.
    let pieces = ((2.0 * half) / (0.5 * PI)).ceil().max(1.0) as usize;
    let span = 2.0 * half / pieces as f64;
    let overlap = 1e-9;
    let ab = b - a;
    let ay = a - y;
    let gtol = tol * r.max(1.0);
    for p in 0..pieces {
        let lo = -half + p as f64 * span - if p > 0 { overlap } else { 0.0 };
        let hi = -half + (p + 1) as f64 * span + if p + 1 < pieces { overlap } else { 0.0 };
        let r_lo = rotate(xi, lo);
        let r_hi = rotate(xi, hi);
        // v strictly counter-clockwise of r_lo and clockwise of r_hi.
        let (mut s0, mut s1) = (t0, t1);
        for (g0, g1) in [
            (r_lo.cross(ay), r_lo.cross(ab)),
            (ay.cross(r_hi), ab.cross(r_hi)),
        ] {
            if g1 > 0.0 {
                s0 = s0.max((gtol - g0) / g1);
            } else if g1 < 0.0 {
                s1 = s1.min((gtol - g0) / g1);
            } else if g0 <= gtol {
                s1 = s0 - 1.0;
            }
        }
        if s1 > s0 {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Uniform-domain condition

/// Sampled uniform-domain check of the hot side.
pub fn check_uniform_domain(domain: &TwoSidedDomain, eps: f64, n_pairs: usize) -> UniformCheck {
    let cfg = SamplingConfig {
        n_pairs,
        ..SamplingConfig::default()
    };
    check_uniform_domain_with(domain, eps, &cfg)
}

fn check_uniform_domain_with(domain: &TwoSidedDomain, eps: f64, cfg: &SamplingConfig) -> UniformCheck {
    check_uniform_region(&domain.plus_region, eps, cfg)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

struct PathGraph {
    index: EdgeIndex,
    origin: Point,
    pitch: f64,
    nx: usize,
    ny: usize,
    /// Clearance of inside nodes; negative marks outside nodes.
    clearance: Vec<f64>,
    /// Clearance at the midpoint towards each neighbour (NaN when invalid).
    mid_clearance: Vec<[f64; 8]>,
}

impl PathGraph {
    fn new(region: &Region, pitch: f64) -> Self {
        let index = EdgeIndex::new(region);
        let bb = region.bbox();
        let nx = ((bb.width() / pitch).ceil() as usize).max(1);
        let ny = ((bb.height() / pitch).ceil() as usize).max(1);
        let origin = bb.min;
        let pos = |i: usize, j: usize| {
            Point::new(
                origin.x + (i as f64 + 0.5) * pitch,
                origin.y + (j as f64 + 0.5) * pitch,
            )
        };
        let clearance: Vec<f64> = (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let p = pos(k % nx, k / nx);
                if index.contains(p) {
                    index.distance(p)
                } else {
                    -1.0
                }
            })
            .collect();
        let mid_clearance: Vec<[f64; 8]> = (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let mut out = [f64::NAN; 8];
                if clearance[k] < 0.0 {
                    return out;
                }
                for (n, &(di, dj)) in NEIGHBOURS.iter().enumerate() {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                        continue;
                    }
                    let q = ii as usize + jj as usize * nx;
                    let len = pitch * ((di * di + dj * dj) as f64).sqrt();
                    if clearance[q] < 0.0 || clearance[k] + clearance[q] <= len {
                        continue;
                    }
                    let m = pos(i, j).lerp(pos(ii as usize, jj as usize), 0.5);
                    out[n] = index.distance(m);
                }
                out
            })
            .collect();
        PathGraph {
            index,
            origin,
            pitch,
            nx,
            ny,
            clearance,
            mid_clearance,
        }
    }

    fn pos(&self, k: usize) -> Point {
        Point::new(
            self.origin.x + ((k % self.nx) as f64 + 0.5) * self.pitch,
            self.origin.y + ((k / self.nx) as f64 + 0.5) * self.pitch,
        )
    }

    /// Inside nodes within two pitches of `p` reachable by a clear segment.
    fn attach(&self, p: Point) -> Vec<usize> {
        let ci = ((p.x - self.origin.x) / self.pitch - 0.5).round() as isize;
        let cj = ((p.y - self.origin.y) / self.pitch - 0.5).round() as isize;
        let mut out = Vec::new();
        for dj in -2..=2 {
            for di in -2..=2 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                    continue;
                }
                let k = i as usize + j as usize * self.nx;
                if self.clearance[k] > 0.0 && self.index.segment_clear(p, self.pos(k)) {
                    out.push(k);
                }
            }
        }
        out
    }
}

fn cigar(dz: f64, x: Point, y: Point, z: Point) -> f64 {
    let denom = x.dist(z) * y.dist(z);
    if denom == 0.0 {
        f64::INFINITY
    } else {
        dz * x.dist(y) / denom
    }
}

struct PathOutcome {
    length: f64,
    clearance: f64,
}

/// Uniform-domain check on an arbitrary region.
///
/// Pairs are drawn uniformly in the region. Each pair first tries the straight
/// segment; otherwise a shortest path is searched on a lattice graph inside
/// the region restricted to points meeting the clearance bound, and its length
/// is compared with `|x - y| / eps`.
pub fn check_uniform_region(region: &Region, eps: f64, cfg: &SamplingConfig) -> UniformCheck {
    let bb = region.bbox();
    let min_edge = region
        .boundary_edges()
        .iter()
        .map(|(a, b)| a.dist(*b))
        .fold(f64::INFINITY, f64::min);
    let mut pitch = cfg.uniform_pitch.unwrap_or(min_edge / 4.0);
    let area = bb.area();
    if area / (pitch * pitch) > cfg.max_grid_nodes as f64 {
        pitch = (area / cfg.max_grid_nodes as f64).sqrt();
    }
    let graph = PathGraph::new(region, pitch);
    let tol = 1e-12 * bb.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    let mut attempts = 0usize;
    while pairs.len() < cfg.n_pairs && attempts < 1000 * cfg.n_pairs.max(1) {
        attempts += 1;
        let mut draw = || {
            Point::new(
                rng.gen_range(bb.min.x..bb.max.x),
                rng.gen_range(bb.min.y..bb.max.y),
            )
        };
        let (x, y) = (draw(), draw());
        let ok = |p: Point| graph.index.contains(p) && graph.index.distance(p) > tol;
        if ok(x) && ok(y) && x.dist(y) > tol {
            pairs.push((x, y));
        }
    }
    let results: Vec<UniformWitness> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let out = join_pair(&graph, x, y, eps);
            UniformWitness {
                x,
                y,
                length_ratio: out.length / x.dist(y),
                clearance_ratio: out.clearance,
            }
        })
        .collect();
    let margin = |w: &UniformWitness| (1.0 / (eps * w.length_ratio)).min(w.clearance_ratio / eps);
    let mut worst: Option<UniformWitness> = None;
    for w in results {
        if worst.as_ref().is_none_or(|b| margin(&w) < margin(b)) {
            worst = Some(w);
        }
    }
    UniformCheck {
        passed: eps > 0.0 && worst.as_ref().is_none_or(|w| margin(w) >= 1.0),
        eps,
        pairs_checked: pairs.len(),
        pitch,
        worst,
    }
}

fn join_pair(g: &PathGraph, x: Point, y: Point, eps: f64) -> PathOutcome {
    let dist = |p: Point| g.index.distance(p);
    // Straight segment with sampled clearance.
    if g.index.segment_clear(x, y) {
        let c = (1..16)
            .map(|k| {
                let z = x.lerp(y, k as f64 / 16.0);
                cigar(dist(z), x, y, z)
            })
            .fold(f64::INFINITY, f64::min);
        if c >= eps {
            return PathOutcome {
                length: x.dist(y),
                clearance: c,
            };
        }
    }
    let link_clearance = |p: Point, k: usize| {
        let q = g.pos(k);
        (1..4)
            .map(|s| {
                let z = p.lerp(q, s as f64 / 4.0);
                cigar(dist(z), x, y, z)
            })
            .fold(cigar(g.clearance[k], x, y, q), f64::min)
    };
    let src: Vec<(usize, f64)> = g.attach(x).into_iter().map(|k| (k, link_clearance(x, k))).collect();
    let dst: Vec<(usize, f64)> = g.attach(y).into_iter().map(|k| (k, link_clearance(y, k))).collect();
    if let Some(len) = constrained_shortest(g, x, y, &src, &dst, eps) {
        return PathOutcome {
            length: len,
            clearance: eps,
        };
    }
    let (bottleneck, len) = widest_path(g, x, y, &src, &dst);
    PathOutcome {
        length: len,
        clearance: bottleneck,
    }
}

fn neighbour(g: &PathGraph, k: usize, n: usize) -> Option<(usize, f64, f64)> {
    let mc = g.mid_clearance[k][n];
    if mc.is_nan() {
        return None;
    }
    let (di, dj) = NEIGHBOURS[n];
    let q = ((k % g.nx) as isize + di) as usize + ((k / g.nx) as isize + dj) as usize * g.nx;
    let len = g.pitch * ((di * di + dj * dj) as f64).sqrt();
    Some((q, len, mc))
}

/// Dijkstra over nodes and edges satisfying the clearance bound.
fn constrained_shortest(
    g: &PathGraph,
    x: Point,
    y: Point,
    src: &[(usize, f64)],
    dst: &[(usize, f64)],
    eps: f64,
) -> Option<f64> {
    let n = g.clearance.len();
    let allowed = |k: usize| g.clearance[k] > 0.0 && cigar(g.clearance[k], x, y, g.pos(k)) >= eps;
    let mut best = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &(k, c) in src {
        if c >= eps && allowed(k) {
            let d = x.dist(g.pos(k));
            if d < best[k] {
                best[k] = d;
                heap.push(HeapItem(d, k));
            }
        }
    }
    let mut exit = vec![f64::NAN; n];
    for &(k, c) in dst {
        if c >= eps {
            exit[k] = y.dist(g.pos(k));
        }
    }
    let mut answer = f64::INFINITY;
    while let Some(HeapItem(d, k)) = heap.pop() {
        if d > best[k] {
            continue;
        }
        if d >= answer {
            break;
        }
        if !exit[k].is_nan() {
            answer = answer.min(d + exit[k]);
        }
        let pk = g.pos(k);
        for nb in 0..8 {
            let Some((q, len, mc)) = neighbour(g, k, nb) else {
                continue;
            };
            if !allowed(q) {
                continue;
            }
            let m = pk.lerp(g.pos(q), 0.5);
            if cigar(mc, x, y, m) < eps {
                continue;
            }
            let nd = d + len;
            if nd < best[q] {
                best[q] = nd;
                heap.push(HeapItem(nd, q));
            }
        }
    }
    answer.is_finite().then_some(answer)
}

/// Path maximizing the minimum clearance ratio; returns (bottleneck, length).
fn widest_path(
    g: &PathGraph,
    x: Point,
    y: Point,
    src: &[(usize, f64)],
    dst: &[(usize, f64)],
) -> (f64, f64) {
    let n = g.clearance.len();
    let mut width = vec![f64::NEG_INFINITY; n];
    let mut length = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    let node_c = |k: usize| cigar(g.clearance[k], x, y, g.pos(k));
    for &(k, c) in src {
        let w = c.min(node_c(k));
        if w > width[k] {
            width[k] = w;
            length[k] = x.dist(g.pos(k));
            heap.push(HeapItem(-w, k));
        }
    }
    while let Some(HeapItem(neg_w, k)) = heap.pop() {
        let w = -neg_w;
        if w < width[k] {
            continue;
        }
        let pk = g.pos(k);
        for nb in 0..8 {
            let Some((q, len, mc)) = neighbour(g, k, nb) else {
                continue;
            };
            let m = pk.lerp(g.pos(q), 0.5);
            let nw = w.min(cigar(mc, x, y, m)).min(node_c(q));
            if nw > width[q] {
                width[q] = nw;
                length[q] = length[k] + len;
                heap.push(HeapItem(-nw, q));
            }
        }
    }
    let mut best = (0.0, f64::INFINITY);
    for &(k, c) in dst {
        let w = width[k].min(c);
        if w > best.0 || (w == best.0 && length[k] < best.1) {
            best = (w, length[k] + y.dist(g.pos(k)));
        }
    }
    best
}
