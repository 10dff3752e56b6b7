//! Grid search for shapes minimizing `𝒥_T` over finite admissible families.

use crate::energy::{script_j, MeshParams};
use crate::error::{invalid, Error, Result};
use crate::experiments::{prefractal_chain, with_measure};
use crate::geometry::{
    build_two_sided_domain, check_admissible, signed_area, AdmissibilityConstraints,
    AdmissibilityMode, AdmissibilityReport, Family, Point, PolylineInterface, Rect,
    SamplingConfig, TwoSidedDomain,
};
use crate::measure::{arc_length_measure, hausdorff_like_measure, BoundaryMeasure};
use crate::solver::TransmissionProblem;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    PrefractalGeneration {
        family: Family,
        generations: Vec<u32>,
        base: [Point; 2],
    },
    /// Vertical offsets of the listed vertices of an open chain, each drawn
    /// from `offsets`. All interior vertices are then shifted by one common
    /// amount that restores the plus volume.
    PerturbedPolyline {
        base: PolylineInterface,
        moved: Vec<usize>,
        offsets: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureRule {
    ArcLength,
    /// `hausdorff_like_measure` with this exponent.
    Exponent(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFamily {
    pub kind: ShapeKind,
    pub bounds: Rect,
    pub constraints: AdmissibilityConstraints,
    pub measure: MeasureRule,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: usize,
    pub generation: Option<u32>,
    /// Position on the family's parameter grid.
    pub grid: Vec<usize>,
    pub params: Vec<f64>,
    pub domain: TwoSidedDomain,
    pub measure: BoundaryMeasure,
    pub report: AdmissibilityReport,
}

impl Candidate {
    pub fn admissible(&self) -> bool {
        self.report.admissible()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: usize,
    pub grid: Vec<usize>,
    pub params: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationStatus {
    Nonempty,
    Empty,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Every candidate that could be built, admissible or not.
    pub built: Vec<Candidate>,
    /// Candidates whose chain or domain could not be constructed.
    pub unbuildable: Vec<Rejection>,
    pub status: EnumerationStatus,
}

impl Enumeration {
    pub fn admissible(&self) -> impl Iterator<Item = &Candidate> {
        self.built.iter().filter(|c| c.admissible())
    }
}

/// Plus-side area below an open chain inside `bounds`.
fn area_below(chain: &[Point], bounds: Rect) -> f64 {
    let mut ring: Vec<Point> = chain.to_vec();
    if ring[0].x > ring[ring.len() - 1].x {
        ring.reverse();
    }
    ring.push(Point::new(bounds.max.x, bounds.min.y));
    ring.push(bounds.min);
    signed_area(&ring).abs()
}

fn perturbed(base: &PolylineInterface, moved: &[usize], params: &[f64], bounds: Rect, target: f64) -> Result<PolylineInterface> {
    let n = base.vertices.len();
    let mut v = base.vertices.clone();
    for (&i, &o) in moved.iter().zip(params) {
        v[i].y += o;
    }
    let shifted = |v: &[Point], s: f64| -> Vec<Point> {
        let mut w = v.to_vec();
        for p in &mut w[1..n - 1] {
            p.y += s;
        }
        w
    };
    let a0 = area_below(&v, bounds);
    let a1 = area_below(&shifted(&v, 1.0), bounds);
    if a1 == a0 {
        return Err(Error::Geometry("chain has no interior vertices to shift".into()));
    }
    let v = shifted(&v, (target - a0) / (a1 - a0));
    PolylineInterface::custom(v, false)
}

fn grid_points(dims: usize, per_axis: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..per_axis).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

/// Builds every grid candidate and attaches its admissibility report.
pub fn enumerate_admissible(family: &ShapeFamily) -> Result<Enumeration> {
    let c = &family.constraints;
    if matches!(c.mode, AdmissibilityMode::Lipschitz { .. }) && family.measure != MeasureRule::ArcLength {
        return invalid("Lipschitz families carry the arc-length measure");
    }
    struct Plan {
        generation: Option<u32>,
        grid: Vec<usize>,
        params: Vec<f64>,
    }
    let plans: Vec<Plan> = match &family.kind {
        ShapeKind::PrefractalGeneration { generations, .. } => generations
            .iter()
            .enumerate()
            .map(|(k, &g)| Plan {
                generation: Some(g),
                grid: vec![k],
                params: vec![g as f64],
            })
            .collect(),
        ShapeKind::PerturbedPolyline { base, moved, offsets } => {
            if base.closed {
                return invalid("perturbed families need an open chain");
            }
            if moved.iter().any(|&i| i == 0 || i + 1 >= base.vertices.len()) {
                return invalid("only interior vertices may move");
            }
            if offsets.is_empty() || moved.is_empty() {
                return invalid("empty parameter grid");
            }
            if moved.len() > 8 || offsets.len().pow(moved.len() as u32) > 100_000 {
                return Err(Error::ResourceBound {
                    what: "perturbation grid points",
                    requested: offsets.len().pow(moved.len().min(16) as u32),
                    cap: 100_000,
                });
            }
            grid_points(moved.len(), offsets.len())
                .into_iter()
                .map(|grid| Plan {
                    generation: None,
                    params: grid.iter().map(|&k| offsets[k]).collect(),
                    grid,
                })
                .collect()
        }
    };
    if plans.is_empty() {
        return invalid("empty family");
    }
    let results: Vec<std::result::Result<Candidate, Rejection>> = plans
        .into_par_iter()
        .enumerate()
        .map(|(id, p)| {
            let reject = |e: Error| Rejection {
                id,
                grid: p.grid.clone(),
                params: p.params.clone(),
                reason: e.to_string(),
            };
            let chain = match &family.kind {
                ShapeKind::PrefractalGeneration { family: f, base, .. } => {
                    prefractal_chain(*f, p.generation.unwrap_or(0), *base)
                }
                ShapeKind::PerturbedPolyline { base, moved, .. } => {
                    perturbed(base, moved, &p.params, family.bounds, c.volume)
                }
            }
            .map_err(reject)?;
            let chain = Arc::new(chain);
            let domain = build_two_sided_domain(chain.clone(), family.bounds).map_err(reject)?;
            let measure = match family.measure {
                MeasureRule::ArcLength => arc_length_measure(chain),
                MeasureRule::Exponent(d) => hausdorff_like_measure(chain, d).map_err(reject)?,
            };
            let report = check_admissible(&domain, Some(&measure), c, &family.sampling).map_err(reject)?;
            Ok(Candidate {
                id,
                generation: p.generation,
                grid: p.grid,
                params: p.params,
                domain,
                measure,
                report,
            })
        })
        .collect();
    let mut built = Vec::new();
    let mut unbuildable = Vec::new();
    for r in results {
        match r {
            Ok(c) => built.push(c),
            Err(r) => unbuildable.push(r),
        }
    }
    let status = if built.iter().any(Candidate::admissible) {
        EnumerationStatus::Nonempty
    } else {
        EnumerationStatus::Empty
    };
    Ok(Enumeration {
        built,
        unbuildable,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshRule {
    Fixed(MeshParams),
    /// `h = min(h_max, shortest segment / ratio)`.
    SegmentRatio { ratio: f64, h_max: f64 },
}

impl MeshRule {
    pub fn params(&self, domain: &TwoSidedDomain) -> MeshParams {
        match *self {
            MeshRule::Fixed(p) => p,
            MeshRule::SegmentRatio { ratio, h_max } => MeshParams {
                h: h_max.min(domain.interface.min_segment_length() / ratio),
                mode: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    Exhaustive,
    GreedyLocal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateStatus {
    Evaluated(f64),
    Failed(String),
    Inadmissible,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub id: usize,
    pub generation: Option<u32>,
    pub params: Vec<f64>,
    pub volume: f64,
    pub perimeter: f64,
    pub measure_mass: f64,
    pub admissibility: String,
    pub status: CandidateStatus,
}

impl RankEntry {
    pub fn energy(&self) -> Option<f64> {
        match self.status {
            CandidateStatus::Evaluated(j) => Some(j),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    /// Index into `ranking` of the minimizer.
    pub best: usize,
    pub best_energy: f64,
    /// Evaluated candidates by increasing energy, then the rest by id.
    pub ranking: Vec<RankEntry>,
    pub method: SearchMethod,
    pub evaluations: usize,
}

impl OptimizeResult {
    pub fn best_entry(&self) -> &RankEntry {
        &self.ranking[self.best]
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Energy first, then lowest generation, then lexicographic parameters.
fn tie_break(a: (f64, &Candidate), b: (f64, &Candidate)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.generation.unwrap_or(0).cmp(&b.1.generation.unwrap_or(0)))
        .then(lex(&a.1.params, &b.1.params))
}

fn evaluate(c: &Candidate, problem: &TransmissionProblem, mesh: &MeshRule) -> CandidateStatus {
    let run = || -> Result<f64> {
        let p = with_measure(problem, c.measure.clone())?;
        script_j(&c.domain, &p, &mesh.params(&c.domain))
    };
    match run() {
        Ok(j) if j.is_finite() => CandidateStatus::Evaluated(j),
        Ok(j) => CandidateStatus::Failed(format!("nonfinite energy {j}")),
        Err(e) => CandidateStatus::Failed(e.to_string()),
    }
}

/// Minimizes `𝒥_T` over the admissible candidates.
pub fn optimize_shape(
    family: &Enumeration,
    problem: &TransmissionProblem,
    mesh: &MeshRule,
    method: SearchMethod,
) -> Result<OptimizeResult> {
    let adm: Vec<&Candidate> = family.admissible().collect();
    if adm.is_empty() {
        return invalid("no admissible candidates");
    }
    let mut status: BTreeMap<usize, CandidateStatus> = BTreeMap::new();
    match method {
        SearchMethod::Exhaustive => {
            let evals: Vec<(usize, CandidateStatus)> =
                adm.par_iter().map(|c| (c.id, evaluate(c, problem, mesh))).collect();
            status.extend(evals);
        }
        SearchMethod::GreedyLocal => {
            let by_grid: BTreeMap<&[usize], &Candidate> = adm.iter().map(|c| (c.grid.as_slice(), *c)).collect();
            let energy_of = |c: &Candidate, status: &mut BTreeMap<usize, CandidateStatus>| -> Option<f64> {
                let s = status.entry(c.id).or_insert_with(|| evaluate(c, problem, mesh));
                match s {
                    CandidateStatus::Evaluated(j) => Some(*j),
                    _ => None,
                }
            };
            // Start from the first admissible grid point that evaluates.
            let mut current: Option<(&Candidate, f64)> = None;
            for c in by_grid.values() {
                if let Some(j) = energy_of(c, &mut status) {
                    current = Some((c, j));
                    break;
                }
            }
            if let Some((mut cur, mut j)) = current {
                loop {
                    let mut best: Option<(&Candidate, f64)> = None;
                    for axis in 0..cur.grid.len() {
                        for step in [-1isize, 1] {
                            let k = cur.grid[axis] as isize + step;
                            if k < 0 {
                                continue;
                            }
                            let mut g = cur.grid.clone();
                            g[axis] = k as usize;
                            let Some(nb) = by_grid.get(g.as_slice()) else { continue };
                            if let Some(jn) = energy_of(nb, &mut status) {
                                if best.is_none_or(|b| tie_break((jn, nb), (b.1, b.0)).is_lt()) {
                                    best = Some((nb, jn));
                                }
                            }
                        }
                    }
                    match best {
                        Some((nb, jn)) if tie_break((jn, nb), (j, cur)).is_lt() => {
                            cur = nb;
                            j = jn;
                        }
                        _ => break,
                    }
                }
            }
        }
    }
    let evaluations = status.len();
    let mut evaluated: Vec<(f64, &Candidate)> = family
        .built
        .iter()
        .filter_map(|c| match status.get(&c.id) {
            Some(CandidateStatus::Evaluated(j)) => Some((*j, c)),
            _ => None,
        })
        .collect();
    if evaluated.is_empty() {
        let reasons: Vec<String> = status
            .iter()
            .filter_map(|(id, s)| match s {
                CandidateStatus::Failed(m) => Some(format!("candidate {id}: {m}")),
                _ => None,
            })
            .collect();
        return invalid(format!("every evaluation failed: {}", reasons.join("; ")));
    }
    evaluated.sort_by(|a, b| tie_break(*a, *b).then(a.1.id.cmp(&b.1.id)));
    let entry = |c: &Candidate, s: CandidateStatus| RankEntry {
        id: c.id,
        generation: c.generation,
        params: c.params.clone(),
        volume: c.domain.volume_plus,
        perimeter: c.domain.interface.total_length(),
        measure_mass: c.measure.total_mass(),
        admissibility: c.report.summary(),
        status: s,
    };
    let best_energy = evaluated[0].0;
    let mut ranking: Vec<RankEntry> = evaluated
        .iter()
        .map(|(j, c)| entry(c, CandidateStatus::Evaluated(*j)))
        .collect();
    let mut rest: Vec<&Candidate> = family
        .built
        .iter()
        .filter(|c| !matches!(status.get(&c.id), Some(CandidateStatus::Evaluated(_))))
        .collect();
    rest.sort_by_key(|c| c.id);
    for c in rest {
        let s = if !c.admissible() {
            CandidateStatus::Inadmissible
        } else {
            status.get(&c.id).cloned().unwrap_or(CandidateStatus::Skipped)
        };
        ranking.push(entry(c, s));
    }
    Ok(OptimizeResult {
        best: 0,
        best_energy,
        ranking,
        method,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub inf_lipschitz: f64,
    pub min_uniform: f64,
    /// `inf_Lip − min_Unif`.
    pub gap: f64,
    /// Lipschitz candidates as `(perimeter, 𝒥_T)` by increasing perimeter.
    pub lipschitz_trend: Vec<(f64, f64)>,
    pub trend_nonincreasing: bool,
}

/// Compares the best Lipschitz and uniform shapes.
pub fn lipschitz_gap_study(
    lipschitz: &Enumeration,
    uniform: &Enumeration,
    problem: &TransmissionProblem,
    mesh: &MeshRule,
) -> Result<GapReport> {
    let lip = optimize_shape(lipschitz, problem, mesh, SearchMethod::Exhaustive)?;
    let uni = optimize_shape(uniform, problem, mesh, SearchMethod::Exhaustive)?;
    let mut trend: Vec<(f64, f64)> = lip
        .ranking
        .iter()
        .filter_map(|e| e.energy().map(|j| (e.perimeter, j)))
        .collect();
    trend.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let trend_nonincreasing = trend.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(GapReport {
        inf_lipschitz: lip.best_energy,
        min_uniform: uni.best_energy,
        gap: lip.best_energy - uni.best_energy,
        lipschitz_trend: trend,
        trend_nonincreasing,
    })
}

pub fn write_ranking_csv<W: Write>(result: &OptimizeResult, comments: &[String], mut w: W) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "rank,candidate_id,parameters,generation,volume,measure_mass,admissibility,script_j,status")?;
    for (k, e) in result.ranking.iter().enumerate() {
        let params: Vec<String> = e.params.iter().map(|p| format!("{p}")).collect();
        let (j, st) = match &e.status {
            CandidateStatus::Evaluated(j) => (format!("{j:.16e}"), "ok".to_string()),
            CandidateStatus::Failed(m) => (String::new(), format!("failed: {}", m.replace([',', '\n'], " "))),
            CandidateStatus::Inadmissible => (String::new(), "inadmissible".into()),
            CandidateStatus::Skipped => (String::new(), "skipped".into()),
        };
        writeln!(
            w,
            "{},{},{},{},{:.16e},{:.16e},{},{},{}",
            k,
            e.id,
            params.join(";"),
            e.generation.map(|g| g.to_string()).unwrap_or_default(),
            e.volume,
            e.measure_mass,
            e.admissibility.replace(' ', ";"),
            j,
            st
        )?;
    }
    Ok(())
}
