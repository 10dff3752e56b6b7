//! Segment-wise boundary measures on the interface and their regularity scans.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, PolylineInterface};
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Measure with uniform density on each interface segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeasure {
    pub interface: Arc<PolylineInterface>,
    pub segment_weights: Vec<f64>,
    pub exponent_d: f64,
    pub declared_c_d: Option<f64>,
    /// Declared lower regularity `(s, c_s)`.
    pub declared_lower: Option<(f64, f64)>,
}

/// Weight `length_i^d` on every segment.
pub fn hausdorff_like_measure(
    interface: impl Into<Arc<PolylineInterface>>,
    d: f64,
) -> Result<BoundaryMeasure> {
    if !(1.0..2.0).contains(&d) {
        return invalid(format!("exponent d = {d} outside [1, 2)"));
    }
    let interface = interface.into();
    let segment_weights = interface.segment_lengths().iter().map(|l| l.powf(d)).collect();
    Ok(BoundaryMeasure {
        interface,
        segment_weights,
        exponent_d: d,
        declared_c_d: None,
        declared_lower: None,
    })
}

/// Arc-length measure (d = 1).
pub fn arc_length_measure(interface: impl Into<Arc<PolylineInterface>>) -> BoundaryMeasure {
    hausdorff_like_measure(interface, 1.0).expect("d = 1 is in range")
}

impl BoundaryMeasure {
    /// Arbitrary nonnegative weights, one per segment.
    pub fn from_weights(
        interface: impl Into<Arc<PolylineInterface>>,
        weights: Vec<f64>,
        d: f64,
    ) -> Result<Self> {
        let interface = interface.into();
        if weights.len() != interface.segment_count() {
            return invalid(format!(
                "{} weights for {} segments",
                weights.len(),
                interface.segment_count()
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and nonnegative");
        }
        Ok(BoundaryMeasure {
            interface,
            segment_weights: weights,
            exponent_d: d,
            declared_c_d: None,
            declared_lower: None,
        })
    }

    pub fn with_declared_upper(mut self, c_d: f64) -> Self {
        self.declared_c_d = Some(c_d);
        self
    }

    pub fn with_declared_lower(mut self, s: f64, c_s: f64) -> Self {
        self.declared_lower = Some((s, c_s));
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.segment_weights.iter().sum()
    }

    /// True when every segment carries positive mass.
    pub fn has_full_support(&self) -> bool {
        self.segment_weights.iter().all(|&w| w > 0.0)
    }

    /// Same measure described on the reversed chain.
    pub fn reoriented(&self) -> Self {
        let mut m = self.clone();
        m.interface = Arc::new(self.interface.reversed());
        m.segment_weights.reverse();
        m
    }

    pub fn midpoints(&self) -> Vec<Point> {
        self.interface.segments().map(|(a, b)| a.lerp(b, 0.5)).collect()
    }

    /// Mass of the disk of radius `r` about `c`, prorating each segment by
    /// its clipped length. `closed` selects the closed disk.
    pub fn ball_mass(&self, c: Point, r: f64, closed: bool) -> f64 {
        self.interface
            .segments()
            .zip(&self.segment_weights)
            .map(|((a, b), &w)| w * clipped_fraction(a, b, c, r, closed))
            .sum()
    }
}

/// Fraction of segment `[a, b]` lying in the disk `B_r(c)`.
pub fn clipped_fraction(a: Point, b: Point, c: Point, r: f64, closed: bool) -> f64 {
    let d = b - a;
    let f = a - c;
    let qa = d.dot(d);
    if qa == 0.0 {
        return 0.0;
    }
    let qb = f.dot(d);
    let qc = f.dot(f) - r * r;
    let disc = qb * qb - qa * qc;
    if disc < 0.0 || (disc == 0.0 && !closed) {
        return 0.0;
    }
    let s = disc.sqrt();
    let t1 = ((-qb - s) / qa).max(0.0);
    let t2 = ((-qb + s) / qa).min(1.0);
    (t2 - t1).max(0.0)
}

/// Length of segment `[a, b]` inside the disk `B_r(c)`.
pub fn clipped_length(a: Point, b: Point, c: Point, r: f64) -> f64 {
    clipped_fraction(a, b, c, r, true) * a.dist(b)
}

/// Where to put scan centers.
#[derive(Debug, Clone, PartialEq)]
pub enum CenterSample {
    Vertices,
    Midpoints,
    /// `n` points equally spaced in arc length, endpoints included.
    ArcLength(usize),
    /// Arc-length samples plus every chain vertex.
    ArcLengthAndVertices(usize),
    Points(Vec<Point>),
}

impl CenterSample {
    pub fn resolve(&self, chain: &PolylineInterface) -> Vec<Point> {
        match self {
            CenterSample::Vertices => chain.vertices.clone(),
            CenterSample::Midpoints => chain.segments().map(|(a, b)| a.lerp(b, 0.5)).collect(),
            CenterSample::ArcLength(n) => arc_length_samples(chain, *n),
            CenterSample::ArcLengthAndVertices(n) => {
                let mut v = arc_length_samples(chain, *n);
                v.extend_from_slice(&chain.vertices);
                v
            }
            CenterSample::Points(p) => p.clone(),
        }
    }
}

/// `n` points equally spaced along the chain by arc length.
pub fn arc_length_samples(chain: &PolylineInterface, n: usize) -> Vec<Point> {
    if n == 0 {
        return Vec::new();
    }
    let lengths = chain.segment_lengths();
    let total: f64 = lengths.iter().sum();
    let denom = if chain.closed || n == 1 { n } else { n - 1 } as f64;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut start = 0.0;
    for k in 0..n {
        let s = if n == 1 { 0.5 * total } else { total * k as f64 / denom };
        while seg + 1 < lengths.len() && start + lengths[seg] < s {
            start += lengths[seg];
            seg += 1;
        }
        let (a, b) = chain.segment(seg);
        let t = ((s - start) / lengths[seg]).clamp(0.0, 1.0);
        out.push(a.lerp(b, t));
    }
    out
}

/// Geometric radius grid `r_min .. r_max` with `count` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl RadiusGrid {
    pub fn new(r_min: f64, r_max: f64, count: usize) -> Self {
        RadiusGrid { r_min, r_max, count }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.r_max];
        }
        let q = (self.r_max / self.r_min).ln() / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.r_max
                } else {
                    self.r_min * (q * k as f64).exp()
                }
            })
            .collect()
    }

    fn validate_unit(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max <= 1.0) || self.count == 0 {
            return invalid(format!(
                "radius grid [{}, {}] x {} not inside (0, 1]",
                self.r_min, self.r_max, self.count
            ));
        }
        Ok(())
    }
}

/// Extremal ratio found by a scan and the sample realizing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanResult {
    pub estimate: f64,
    pub center: Point,
    pub radius: f64,
}

/// Largest `mu(B_r(x)) / r^d` over the sampled centers and radii (open balls).
pub fn upper_regularity_scan(
    measure: &BoundaryMeasure,
    d: f64,
    centers: &CenterSample,
    radii: RadiusGrid,
) -> Result<ScanResult> {
    radii.validate_unit()?;
    Ok(scan(measure, d, centers, &radii.radii(), false))
}

/// Smallest `mu(closed B_r(x)) / r^s` over the sampled centers and radii.
pub fn lower_regularity_scan(
    measure: &BoundaryMeasure,
    s: f64,
    centers: &CenterSample,
    radii: RadiusGrid,
) -> Result<ScanResult> {
    radii.validate_unit()?;
    Ok(scan(measure, s, centers, &radii.radii(), true))
}

/// Scan without the unit-radius restriction; `lower` picks min over closed balls.
pub(crate) fn scan(
    measure: &BoundaryMeasure,
    exponent: f64,
    centers: &CenterSample,
    radii: &[f64],
    lower: bool,
) -> ScanResult {
    let pts = centers.resolve(&measure.interface);
    let segs: Vec<(Point, Point, f64)> = measure
        .interface
        .segments()
        .zip(&measure.segment_weights)
        .map(|((a, b), &w)| (a, b, w))
        .collect();
    let per_center: Vec<ScanResult> = pts
        .par_iter()
        .map(|&c| {
            let mut best = ScanResult {
                estimate: if lower { f64::INFINITY } else { f64::NEG_INFINITY },
                center: c,
                radius: radii[0],
            };
            for &r in radii {
                let m: f64 = segs
                    .iter()
                    .map(|&(a, b, w)| w * clipped_fraction(a, b, c, r, lower))
                    .sum();
                let q = m / r.powf(exponent);
                if (lower && q < best.estimate) || (!lower && q > best.estimate) {
                    best.estimate = q;
                    best.radius = r;
                }
            }
            best
        })
        .collect();
    let mut it = per_center.into_iter();
    let first = it.next().unwrap_or(ScanResult {
        estimate: f64::NAN,
        center: Point::default(),
        radius: f64::NAN,
    });
    it.fold(first, |acc, s| {
        if (lower && s.estimate < acc.estimate) || (!lower && s.estimate > acc.estimate) {
            s
        } else {
            acc
        }
    })
}

/// Midpoint rule: `sum_i w_i phi(midpoint_i)`.
pub fn integrate_against(measure: &BoundaryMeasure, phi: impl Fn(Point) -> f64) -> f64 {
    measure
        .interface
        .segments()
        .zip(&measure.segment_weights)
        .map(|((a, b), &w)| w * phi(a.lerp(b, 0.5)))
        .sum()
}

/// `gaps[k][m] = |int phi_k dmu_{m+1} - int phi_k dmu_m|`.
pub fn weak_convergence_gaps(
    measures: &[BoundaryMeasure],
    test_set: &[&(dyn Fn(Point) -> f64 + Sync)],
) -> Result<Vec<Vec<f64>>> {
    if test_set.is_empty() {
        return invalid("empty test set");
    }
    if measures.len() < 2 {
        return invalid("need at least two measures");
    }
    Ok(test_set
        .iter()
        .map(|phi| {
            let ints: Vec<f64> = measures.iter().map(|m| integrate_against(m, phi)).collect();
            ints.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
        })
        .collect())
}

/// Writes `# d total_mass`, the values, optional comments, then `i weight` lines.
pub fn write_measure<W: Write>(m: &BoundaryMeasure, comments: &[String], mut w: W) -> Result<()> {
    writeln!(w, "# d total_mass")?;
    writeln!(w, "# {:.16e} {:.16e}", m.exponent_d, m.total_mass())?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for (i, x) in m.segment_weights.iter().enumerate() {
        writeln!(w, "{i} {x:.16e}")?;
    }
    Ok(())
}

/// Reads a measure file against a known chain.
pub fn read_measure<R: BufRead>(
    interface: impl Into<Arc<PolylineInterface>>,
    r: R,
) -> Result<BoundaryMeasure> {
    let mut d = None;
    let mut weights = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        let err = |m: &str| Error::Parse {
            line: k + 1,
            message: m.to_string(),
        };
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if d.is_none() && f.len() == 2 {
                if let Ok(v) = f[0].parse::<f64>() {
                    d = Some(v);
                }
            }
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 2 {
            return Err(err("expected `i weight`"));
        }
        let i: usize = f[0].parse().map_err(|_| err("bad index"))?;
        if i != weights.len() {
            return Err(err("segment indices must be consecutive"));
        }
        weights.push(f[1].parse::<f64>().map_err(|_| err("bad weight"))?);
    }
    let d = d.ok_or(Error::Parse {
        line: 1,
        message: "missing `# d total_mass` header".into(),
    })?;
    BoundaryMeasure::from_weights(interface, weights, d)
}
