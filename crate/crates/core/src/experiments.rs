//! Generation sweeps, recovery-sequence gaps, energy convergence and the
//! short-time heat-content exponent.

use crate::energy::{heat_content, j_t_energy, MeshParams, Quadrature};
use crate::error::{invalid, Error, Result};
use crate::geometry::index::EdgeIndex;
use crate::geometry::{
    build_two_sided_domain, flat_interface, koch_prefractal, minkowski_prefractal, Family, Point,
    PolylineInterface, Rect, Region, TwoSidedDomain,
};
use crate::measure::{hausdorff_like_measure, upper_regularity_scan, BoundaryMeasure, CenterSample, RadiusGrid};
use crate::mesh::{default_mode, triangulate, Side, TwoSidedMesh};
use crate::solver::{solve_trajectory, LambdaSpec, SolutionTrajectory, TransmissionProblem};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Chain of `family` at generation `g` on `base`. Flat chains ignore `g`.
pub fn prefractal_chain(family: Family, g: u32, base: [Point; 2]) -> Result<PolylineInterface> {
    match family {
        Family::Flat => flat_interface(base),
        Family::Minkowski => minkowski_prefractal(g, base),
        Family::Koch => koch_prefractal(g, base),
        Family::Custom => invalid("custom chains have no generations"),
    }
}

/// A field given separately on each side of the interface, both extended to
/// the whole box, stored as nodal values on a uniform triangulated grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceField {
    pub bounds: Rect,
    pub n: usize,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl ReferenceField {
    /// Samples two extensions at the nodes of an `n × n` cell grid.
    pub fn sample(
        bounds: Rect,
        n: usize,
        plus: impl Fn(Point) -> f64,
        minus: impl Fn(Point) -> f64,
    ) -> Self {
        let mut p = Vec::with_capacity((n + 1) * (n + 1));
        let mut m = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let q = Point::new(
                    bounds.min.x + bounds.width() * i as f64 / n as f64,
                    bounds.min.y + bounds.height() * j as f64 / n as f64,
                );
                p.push(plus(q));
                m.push(minus(q));
            }
        }
        ReferenceField {
            bounds,
            n,
            plus: p,
            minus: m,
        }
    }

    /// Piecewise-linear value on the grid triangle containing `q`.
    pub fn eval(&self, q: Point, side: Side) -> Result<f64> {
        let b = self.bounds;
        let tol = 1e-12 * b.diameter();
        if !b.contains(q, tol) {
            return Err(Error::InvalidInput(format!(
                "point ({}, {}) is outside the reference grid",
                q.x, q.y
            )));
        }
        let n = self.n;
        let sx = ((q.x - b.min.x) / b.width() * n as f64).clamp(0.0, n as f64);
        let sy = ((q.y - b.min.y) / b.height() * n as f64).clamp(0.0, n as f64);
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        let (fx, fy) = (sx - i as f64, sy - j as f64);
        let v = match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        };
        let at = |a: usize, c: usize| v[a + c * (n + 1)];
        // Cells split along the rising diagonal.
        Ok(if fx >= fy {
            at(i, j) + fx * (at(i + 1, j) - at(i, j)) + fy * (at(i + 1, j + 1) - at(i + 1, j))
        } else {
            at(i, j) + fy * (at(i, j + 1) - at(i, j)) + fx * (at(i + 1, j + 1) - at(i, j + 1))
        })
    }

    /// Nodal transfer onto a two-sided mesh using each vertex's side.
    pub fn transfer(&self, mesh: &TwoSidedMesh) -> Result<Vec<f64>> {
        let sides = mesh.vertex_sides();
        mesh.vertices
            .iter()
            .zip(&sides)
            .map(|(&p, s)| {
                let side = if s[0] { Side::Plus } else { Side::Minus };
                self.eval(p, side)
            })
            .collect()
    }
}

/// `J_T(Ω, μ)(u)` for a time-independent field `u`.
pub fn frozen_energy(mesh: &TwoSidedMesh, problem: &TransmissionProblem, u: Vec<f64>) -> Result<f64> {
    let t = problem.t_final;
    let traj = SolutionTrajectory::from_fields(mesh, problem, vec![0.0, t], vec![u.clone(), u])?;
    Ok(j_t_energy(&traj, Quadrature::Trapezoid)?.total)
}

pub(crate) fn with_measure(template: &TransmissionProblem, measure: BoundaryMeasure) -> Result<TransmissionProblem> {
    if matches!(template.lambda, LambdaSpec::PerSegment(_)) {
        return invalid("sweeps need a uniform conductance");
    }
    let mut p = template.clone();
    p.measure = measure;
    Ok(p)
}

/// `|J_T(fine)(u_fine) − J_T(coarse)(u_coarse)|` where both fields restrict
/// the extensions in `u` to the respective sides.
pub fn recovery_check(
    coarse: (&TwoSidedDomain, &BoundaryMeasure),
    fine: (&TwoSidedDomain, &BoundaryMeasure),
    u: &ReferenceField,
    problem: &TransmissionProblem,
    h: f64,
) -> Result<f64> {
    let mut e = [0.0; 2];
    for (k, (d, m)) in [coarse, fine].into_iter().enumerate() {
        if !u.bounds.contains(d.bounds.min, 0.0) || !u.bounds.contains(d.bounds.max, 0.0) {
            return invalid("reference grid does not cover the domain box");
        }
        let mesh = triangulate(d, h, default_mode(d, h))?;
        let p = with_measure(problem, m.clone())?;
        e[k] = frozen_energy(&mesh, &p, u.transfer(&mesh)?)?;
    }
    Ok((e[1] - e[0]).abs())
}

/// Area of `Ω_a Δ Ω_b` for the plus regions.
pub fn symmetric_difference_area(a: &Region, b: &Region) -> f64 {
    use geo::{Area, BooleanOps};
    let to_geo = |r: &Region| {
        let ring = |v: &[Point]| geo::LineString::from(v.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>());
        geo::Polygon::new(ring(&r.outer.vertices), r.holes.iter().map(|h| ring(&h.vertices)).collect())
    };
    to_geo(a).xor(&to_geo(b)).unsigned_area()
}

/// Sampled two-sided Hausdorff distance between chains, `samples` points
/// per segment. Never exceeds the true distance.
pub fn hausdorff_estimate(a: &PolylineInterface, b: &PolylineInterface, samples: usize) -> f64 {
    let directed = |p: &PolylineInterface, q: &PolylineInterface| {
        let idx = EdgeIndex::from_edges(q.segments().collect());
        p.segments()
            .flat_map(|(s, e)| (0..=samples).map(move |k| s.lerp(e, k as f64 / samples as f64)))
            .map(|x| idx.distance(x))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub family: Family,
    pub generations: Vec<u32>,
    pub base: [Point; 2],
    pub bounds: Rect,
    /// Measure rule: weight `length^d` per segment.
    pub exponent_d: f64,
    pub tstar: f64,
    /// Common mesh size; defaults to each generation's shortest segment over `h_ratio`.
    pub h: Option<f64>,
    pub h_ratio: f64,
    /// Common step; defaults to `h² / 4`.
    pub dt: Option<f64>,
    pub reference: ReferenceField,
    pub scan_centers: usize,
    pub scan_radii: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub generation: u32,
    pub h: f64,
    pub dt: f64,
    pub volume_plus: f64,
    pub chain_length: f64,
    pub measure_mass: f64,
    pub c_d_estimate: f64,
    pub script_j: f64,
    pub q_minus_at_tstar: f64,
    /// Recovery gap between this generation and the next one.
    pub recovery_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// `|Ω_g Δ Ω_next|` between consecutive listed generations.
    pub symmetric_differences: Vec<f64>,
}

struct Built {
    domain: TwoSidedDomain,
    measure: BoundaryMeasure,
}

fn build(cfg: &SweepConfig, g: u32) -> Result<Built> {
    let chain = Arc::new(prefractal_chain(cfg.family, g, cfg.base)?);
    let domain = build_two_sided_domain(chain.clone(), cfg.bounds)?;
    let measure = hausdorff_like_measure(chain, cfg.exponent_d)?;
    Ok(Built { domain, measure })
}

/// One row per generation, evaluated in parallel and returned in order.
pub fn mosco_sweep(cfg: &SweepConfig, template: &TransmissionProblem) -> Result<SweepTable> {
    if cfg.generations.is_empty() {
        return invalid("no generations requested");
    }
    if !(cfg.h_ratio > 0.0) {
        return invalid("h_ratio must be positive");
    }
    if cfg.generations.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("generations must be increasing");
    }
    if cfg.tstar > template.t_final {
        return invalid(format!("t* = {} exceeds T = {}", cfg.tstar, template.t_final));
    }
    let rows: Vec<Result<SweepRow>> = cfg
        .generations
        .par_iter()
        .enumerate()
        .map(|(k, &g)| {
            let b = build(cfg, g)?;
            let next_g = cfg.generations.get(k + 1).copied().unwrap_or(g + 1);
            let next = build(cfg, next_g)?;
            let chain = &b.domain.interface;
            let h = cfg.h.unwrap_or(chain.min_segment_length() / cfg.h_ratio);
            let dt = cfg.dt.unwrap_or(h * h / 4.0);
            let mut p = with_measure(template, b.measure.clone())?;
            p.dt = dt;
            let mesh = triangulate(&b.domain, h, default_mode(&b.domain, h))?;
            let traj = solve_trajectory(&mesh, &p)?;
            let energy = j_t_energy(&traj, Quadrature::Trapezoid)?;
            let scan = upper_regularity_scan(
                &b.measure,
                cfg.exponent_d,
                &CenterSample::ArcLengthAndVertices(cfg.scan_centers),
                RadiusGrid::new(chain.min_segment_length().min(1.0), 1.0, cfg.scan_radii),
            )?;
            let h_rec = h.min(next.domain.interface.min_segment_length());
            let gap = recovery_check(
                (&b.domain, &b.measure),
                (&next.domain, &next.measure),
                &cfg.reference,
                template,
                h_rec,
            )?;
            Ok(SweepRow {
                generation: g,
                h,
                dt: p.t_final / p.n_steps() as f64,
                volume_plus: b.domain.volume_plus,
                chain_length: chain.total_length(),
                measure_mass: b.measure.total_mass(),
                c_d_estimate: scan.estimate,
                script_j: energy.total,
                q_minus_at_tstar: heat_content(&traj, Side::Minus, cfg.tstar)?,
                recovery_gap: gap,
            })
        })
        .collect();
    let rows = rows
        .into_iter()
        .zip(&cfg.generations)
        .map(|(r, g)| {
            r.map_err(|e| Error::InvalidInput(format!("generation {g}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let regions: Vec<Region> = cfg
        .generations
        .iter()
        .map(|&g| Ok(build(cfg, g)?.domain.plus_region))
        .collect::<Result<_>>()?;
    let symmetric_differences = regions
        .windows(2)
        .map(|w| symmetric_difference_area(&w[0], &w[1]))
        .collect();
    Ok(SweepTable {
        rows,
        symmetric_differences,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceDiagnosis {
    /// `|J_{k+1} − J_k|`.
    pub differences: Vec<f64>,
    /// `|Δ_{k+1}| / |Δ_k|`; 0 when both vanish.
    pub ratios: Vec<f64>,
    pub cauchy_like: bool,
    pub verdict: String,
}

/// Successive differences of a sequence of energies. Cauchy-like when the
/// last two ratios are at most 0.8 (or the differences vanish).
pub fn energy_convergence(values: &[f64]) -> Result<ConvergenceDiagnosis> {
    if values.len() < 3 {
        return invalid("energy convergence needs at least three rows");
    }
    let differences: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let ratios: Vec<f64> = differences
        .windows(2)
        .map(|w| match (w[0] == 0.0, w[1] == 0.0) {
            (_, true) => 0.0,
            (true, false) => f64::INFINITY,
            _ => w[1] / w[0],
        })
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(2)..];
    let cauchy_like = tail.iter().all(|&r| r <= 0.8);
    let verdict = if cauchy_like { "convergent" } else { "not convergent" }.to_string();
    Ok(ConvergenceDiagnosis {
        differences,
        ratios,
        cauchy_like,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeGennesFit {
    pub alpha: f64,
    pub log_prefactor: f64,
    /// Root mean square of the residuals in `log Q`.
    pub residual: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Least-squares slope of `log Q⁻` against `log t` over the samples with
/// `t` in the closed window.
pub fn degennes_fit(curve: &[(f64, f64)], window: (f64, f64)) -> Result<DeGennesFit> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .copied()
        .collect();
    if pts.len() < 4 {
        return invalid(format!(
            "only {} samples in the window [{}, {}]; at least 4 needed",
            pts.len(),
            window.0,
            window.1
        ));
    }
    if let Some((t, q)) = pts.iter().find(|(t, q)| !(*t > 0.0 && *q > 0.0)) {
        return invalid(format!("nonpositive sample ({t}, {q}) in the fit window"));
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|(t, q)| (t.ln(), q.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return invalid("fit window holds a single time");
    }
    let alpha = sxy / sxx;
    let c = my - alpha * mx;
    let rss: f64 = xy.iter().map(|p| (p.1 - c - alpha * p.0).powi(2)).sum();
    Ok(DeGennesFit {
        alpha,
        log_prefactor: c,
        residual: (rss / n).sqrt(),
        window,
        n_points: pts.len(),
    })
}

pub fn write_sweep_csv<W: Write>(table: &SweepTable, comments: &[String], mut w: W) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "generation,h,dt,volume_plus,chain_length,measure_mass,c_d_estimate,script_j,q_minus_at_tstar,recovery_gap,symdiff_to_next"
    )?;
    for (k, r) in table.rows.iter().enumerate() {
        let sd = table
            .symmetric_differences
            .get(k)
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.generation,
            r.h,
            r.dt,
            r.volume_plus,
            r.chain_length,
            r.measure_mass,
            r.c_d_estimate,
            r.script_j,
            r.q_minus_at_tstar,
            r.recovery_gap,
            sd
        )?;
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(fit: &DeGennesFit, comments: &[String], mut w: W) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "alpha,residual,window_min,window_max,n_points")?;
    writeln!(
        w,
        "{:.16e},{:.16e},{:.16e},{:.16e},{}",
        fit.alpha, fit.residual, fit.window.0, fit.window.1, fit.n_points
    )?;
    Ok(())
}

/// Mesh parameters of a generation under the sweep's default size rule.
pub fn default_mesh_params(domain: &TwoSidedDomain) -> MeshParams {
    MeshParams {
        h: domain.interface.min_segment_length() / 4.0,
        mode: None,
    }
}
