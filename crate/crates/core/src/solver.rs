//! Assembly and time stepping of the two-sided transmission problem.

use crate::error::{invalid, Error, Result};
use crate::fem;
use crate::geometry::Point;
use crate::linalg::{self, add_scaled, dot, matvec, pcg, CgOptions, CgReport, SparseMatrix};
use crate::measure::BoundaryMeasure;
use crate::mesh::{Side, TwoSidedMesh};
use std::fmt;
use std::sync::Arc;

/// Conductance on one interface segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Finite(f64),
    /// Perfect contact: the field is continuous across the segment.
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Uniform(Lambda),
    PerSegment(Vec<Lambda>),
}

impl LambdaSpec {
    pub fn uniform(v: f64) -> Self {
        LambdaSpec::Uniform(Lambda::Finite(v))
    }

    pub fn per_segment(&self, n: usize) -> Result<Vec<Lambda>> {
        let v = match self {
            LambdaSpec::Uniform(l) => vec![*l; n],
            LambdaSpec::PerSegment(v) => {
                if v.len() != n {
                    return invalid(format!(
                        "lambda has {} entries for {n} interface segments",
                        v.len()
                    ));
                }
                v.clone()
            }
        };
        for l in &v {
            if let Lambda::Finite(x) = l {
                if !(x.is_finite() && *x >= 0.0) {
                    return invalid(format!("lambda = {x} must be finite and nonnegative"));
                }
            }
        }
        Ok(v)
    }

    pub fn infinite_flags(&self, n: usize) -> Result<Vec<bool>> {
        Ok(self
            .per_segment(n)?
            .iter()
            .map(|l| matches!(l, Lambda::Infinite))
            .collect())
    }
}

pub type InitialField = Arc<dyn Fn(Point, Side) -> f64 + Send + Sync>;
pub type SourceField = Arc<dyn Fn(f64, Point, Side) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InitialCondition {
    /// 1 on plus vertices (including plus interface copies), 0 on minus ones.
    IndicatorPlus,
    Custom(InitialField),
}

#[derive(Clone)]
pub enum Source {
    Zero,
    Custom(SourceField),
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::IndicatorPlus => f.write_str("IndicatorPlus"),
            InitialCondition::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => f.write_str("Zero"),
            Source::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransmissionProblem {
    pub d_plus: f64,
    pub d_minus: f64,
    pub lambda: LambdaSpec,
    pub u0: InitialCondition,
    pub f: Source,
    pub t_final: f64,
    pub dt: f64,
    pub theta: f64,
    pub measure: BoundaryMeasure,
    /// Store every `snapshot_stride`-th step; 0 stores only the first and last.
    pub snapshot_stride: usize,
    pub lumped_mass: bool,
    pub cg: CgOptions,
    pub max_steps: usize,
}

impl TransmissionProblem {
    /// Unit diffusivities, implicit Euler, indicator initial data, no source.
    pub fn new(measure: BoundaryMeasure, lambda: LambdaSpec, t_final: f64, dt: f64) -> Self {
        TransmissionProblem {
            d_plus: 1.0,
            d_minus: 1.0,
            lambda,
            u0: InitialCondition::IndicatorPlus,
            f: Source::Zero,
            t_final,
            dt,
            theta: 1.0,
            measure,
            snapshot_stride: 1,
            lumped_mass: false,
            cg: CgOptions::default(),
            max_steps: 1_000_000,
        }
    }

    pub fn diffusivity(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.d_plus,
            Side::Minus => self.d_minus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.d_plus) || !pos(self.d_minus) {
            return invalid(format!(
                "diffusivities must be positive (got {} and {})",
                self.d_plus, self.d_minus
            ));
        }
        if !pos(self.t_final) || !pos(self.dt) {
            return invalid("T and dt must be positive");
        }
        if self.dt > self.t_final * (1.0 + 1e-12) {
            return invalid(format!("dt = {} exceeds T = {}", self.dt, self.t_final));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return invalid(format!("theta = {} must lie in [0, 1]", self.theta));
        }
        self.lambda.per_segment(self.measure.interface.segment_count())?;
        let n = self.n_steps();
        if n > self.max_steps {
            return Err(Error::ResourceBound {
                what: "time steps",
                requested: n,
                cap: self.max_steps,
            });
        }
        Ok(())
    }

    /// Number of uniform steps covering `[0, T]`; the step is then `T / n`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_final / self.dt;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            (n as usize).max(1)
        } else {
            r.ceil() as usize
        }
    }
}

/// Matrices of the semi-discrete system `M u' + (K + B) u = M f`.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub m: SparseMatrix,
    pub k: SparseMatrix,
    pub b: SparseMatrix,
    pub a: SparseMatrix,
}

fn check_interface(mesh: &TwoSidedMesh, measure: &BoundaryMeasure) -> Result<()> {
    let chain = &measure.interface;
    if mesh.interface_segments.len() != chain.segment_count() {
        return invalid(format!(
            "mesh was built on {} interface segments but the measure has {}",
            mesh.interface_segments.len(),
            chain.segment_count()
        ));
    }
    let tol = 1e-9 * chain.base_length;
    for (i, &(a, b)) in mesh.interface_segments.iter().enumerate() {
        let (c, d) = chain.segment(i);
        if a.dist(c) > tol || b.dist(d) > tol {
            return invalid(format!("interface segment {i} differs between mesh and measure"));
        }
    }
    Ok(())
}

/// Conductance times measure carried by each interface edge.
fn edge_weights(mesh: &TwoSidedMesh, problem: &TransmissionProblem) -> Result<Vec<f64>> {
    let lambdas = problem.lambda.per_segment(mesh.interface_segments.len())?;
    let lengths = problem.measure.interface.segment_lengths();
    mesh.interface_edges
        .iter()
        .map(|e| match lambdas[e.segment] {
            Lambda::Finite(l) => {
                Ok(l * problem.measure.segment_weights[e.segment] * e.length / lengths[e.segment])
            }
            Lambda::Infinite => Err(Error::InvalidInput(format!(
                "segment {} has infinite conductance; merge the mesh there first",
                e.segment
            ))),
        })
        .collect()
}

/// Assembles mass, stiffness and interface coupling.
pub fn assemble(mesh: &TwoSidedMesh, problem: &TransmissionProblem) -> Result<SystemMatrices> {
    check_interface(mesh, &problem.measure)?;
    let w = edge_weights(mesh, problem)?;
    let m = fem::mass(mesh, |_| 1.0, problem.lumped_mass);
    let k = fem::stiffness(mesh, |s| problem.diffusivity(s));
    let b = fem::coupling(mesh, &w);
    let a = &k + &b;
    Ok(SystemMatrices { m, k, b, a })
}

/// The mesh actually stepped: copies are identified on infinite segments.
pub fn working_mesh(mesh: &TwoSidedMesh, problem: &TransmissionProblem) -> Result<TwoSidedMesh> {
    let flags = problem.lambda.infinite_flags(mesh.interface_segments.len())?;
    if flags.iter().all(|&f| f) {
        Ok(mesh.merge_interface())
    } else if flags.iter().any(|&f| f) {
        Ok(mesh.merge_segments(&flags))
    } else {
        Ok(mesh.clone())
    }
}

/// Advances `(M + θ dt A) u' = (M − (1−θ) dt A) u + dt M f_eff`.
pub fn step(
    matrices: &SystemMatrices,
    state: &[f64],
    dt: f64,
    theta: f64,
    f_eff: Option<&[f64]>,
    cg: &CgOptions,
) -> Result<(Vec<f64>, CgReport)> {
    let stepper = Stepper::new(matrices, dt, theta);
    stepper.step(state, f_eff, cg)
}

struct Stepper<'a> {
    mat: &'a SystemMatrices,
    lhs: SparseMatrix,
    dt: f64,
    theta: f64,
}

impl<'a> Stepper<'a> {
    fn new(mat: &'a SystemMatrices, dt: f64, theta: f64) -> Self {
        Stepper {
            mat,
            lhs: add_scaled(1.0, &mat.m, theta * dt, &mat.a),
            dt,
            theta,
        }
    }

    fn step(&self, u: &[f64], f_eff: Option<&[f64]>, cg: &CgOptions) -> Result<(Vec<f64>, CgReport)> {
        let mut rhs = matvec(&self.mat.m, u);
        if self.theta < 1.0 {
            let au = matvec(&self.mat.a, u);
            let c = (1.0 - self.theta) * self.dt;
            for (r, a) in rhs.iter_mut().zip(&au) {
                *r -= c * a;
            }
        }
        if let Some(f) = f_eff {
            let mf = matvec(&self.mat.m, f);
            for (r, v) in rhs.iter_mut().zip(&mf) {
                *r += self.dt * v;
            }
        }
        let mut x = u.to_vec();
        let rep = pcg(&self.lhs, &rhs, &mut x, cg)?;
        Ok((x, rep))
    }
}

/// Per-step diagnostics. Step 0 describes the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `𝟙ᵀ M u`.
    pub mass: f64,
    /// `½ uᵀ M u`.
    pub half_l2_energy: f64,
    /// `uᵀ (K + B) u`.
    pub a_uu: f64,
    /// `(u − u_prev)ᵀ M (u − u_prev)`.
    pub increment_norm_sq: f64,
    /// `dt (M f_eff)ᵀ u` for the step ending here.
    pub source_work: f64,
    /// Unit-weight Dirichlet energy on the plus side.
    pub grad_plus: f64,
    /// `∫_{Ω⁺} u²`.
    pub l2_plus: f64,
    /// `uᵀ B u`: conductance-weighted squared jump.
    pub jump_energy: f64,
    pub heat_plus: f64,
    pub heat_minus: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    /// Mesh the fields live on (merged where the conductance is infinite).
    pub mesh: Arc<TwoSidedMesh>,
    pub dt: f64,
    pub theta: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<StepRecord>,
    pub source_free: bool,
}

impl SolutionTrajectory {
    pub fn final_state(&self) -> &[f64] {
        &self.snapshots.last().expect("trajectory has a final snapshot").values
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.snapshots[0].values
    }

    /// Builds a trajectory from given fields, e.g. for frozen-state audits.
    /// Every field becomes a snapshot.
    pub fn from_fields(
        mesh: &TwoSidedMesh,
        problem: &TransmissionProblem,
        times: Vec<f64>,
        fields: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return invalid("need one field per time and at least one time");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("times must be strictly increasing");
        }
        let mat = assemble(mesh, problem)?;
        let diag = Diagnostics::new(mesh, &mat);
        let mut records = Vec::with_capacity(times.len());
        for (k, (t, u)) in times.iter().zip(&fields).enumerate() {
            if u.len() != mesh.n_vertices() {
                return invalid("field length differs from the vertex count");
            }
            let prev = if k == 0 { u } else { &fields[k - 1] };
            records.push(diag.record(k, *t, u, prev, 0.0, 0));
        }
        let snapshots = times
            .iter()
            .zip(fields)
            .enumerate()
            .map(|(step, (&time, values))| Snapshot { step, time, values })
            .collect();
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(SolutionTrajectory {
            mesh: Arc::new(mesh.clone()),
            dt,
            theta: problem.theta,
            times,
            snapshots,
            records,
            source_free: true,
        })
    }
}

struct Diagnostics<'a> {
    mat: &'a SystemMatrices,
    k_plus: SparseMatrix,
    m_plus: SparseMatrix,
    w_plus: Vec<f64>,
    w_minus: Vec<f64>,
    ones_m: Vec<f64>,
}

impl<'a> Diagnostics<'a> {
    fn new(mesh: &TwoSidedMesh, mat: &'a SystemMatrices) -> Self {
        let plus = |s: Side| if s == Side::Plus { 1.0 } else { 0.0 };
        let minus = |s: Side| if s == Side::Minus { 1.0 } else { 0.0 };
        let m_plus = fem::mass(mesh, plus, false);
        let n = mesh.n_vertices();
        let ones = vec![1.0; n];
        Diagnostics {
            mat,
            k_plus: fem::stiffness(mesh, plus),
            w_plus: matvec(&m_plus, &ones),
            w_minus: matvec(&fem::mass(mesh, minus, false), &ones),
            m_plus,
            ones_m: matvec(&mat.m, &ones),
        }
    }

    fn record(&self, step: usize, time: f64, u: &[f64], prev: &[f64], source_work: f64, it: usize) -> StepRecord {
        let mu = matvec(&self.mat.m, u);
        let inc: Vec<f64> = u.iter().zip(prev).map(|(a, b)| a - b).collect();
        StepRecord {
            step,
            time,
            mass: dot(&self.ones_m, u),
            half_l2_energy: 0.5 * dot(&mu, u),
            a_uu: linalg::quad_form(&self.mat.a, u, u),
            increment_norm_sq: linalg::quad_form(&self.mat.m, &inc, &inc),
            source_work,
            grad_plus: linalg::quad_form(&self.k_plus, u, u),
            l2_plus: linalg::quad_form(&self.m_plus, u, u),
            jump_energy: linalg::quad_form(&self.mat.b, u, u),
            heat_plus: dot(&self.w_plus, u),
            heat_minus: dot(&self.w_minus, u),
            cg_iterations: it,
        }
    }
}

/// Nodal initial state on `mesh`.
pub fn initial_state(mesh: &TwoSidedMesh, u0: &InitialCondition) -> Vec<f64> {
    match u0 {
        InitialCondition::IndicatorPlus => {
            fem::interpolate(mesh, |_, s| if s == Side::Plus { 1.0 } else { 0.0 })
        }
        InitialCondition::Custom(f) => fem::interpolate(mesh, |p, s| f(p, s)),
    }
}

fn source_at(mesh: &TwoSidedMesh, f: &SourceField, t: f64) -> Vec<f64> {
    fem::interpolate(mesh, |p, s| f(t, p, s))
}

/// Runs the theta scheme from the interpolated initial state to `T`.
pub fn solve_trajectory(mesh: &TwoSidedMesh, problem: &TransmissionProblem) -> Result<SolutionTrajectory> {
    problem.validate()?;
    let work = working_mesh(mesh, problem)?;
    let mat = assemble(&work, problem)?;
    let n = problem.n_steps();
    let dt = problem.t_final / n as f64;
    let theta = problem.theta;
    let stepper = Stepper::new(&mat, dt, theta);
    let diag = Diagnostics::new(&work, &mat);
    let mut u = initial_state(&work, &problem.u0);
    let mut times = Vec::with_capacity(n + 1);
    let mut records = Vec::with_capacity(n + 1);
    let mut snapshots = vec![Snapshot {
        step: 0,
        time: 0.0,
        values: u.clone(),
    }];
    times.push(0.0);
    records.push(diag.record(0, 0.0, &u, &u, 0.0, 0));
    for k in 1..=n {
        let t0 = (k - 1) as f64 * dt;
        let t1 = if k == n { problem.t_final } else { k as f64 * dt };
        let f_eff = match &problem.f {
            Source::Zero => None,
            Source::Custom(f) => {
                let a = source_at(&work, f, t1);
                Some(if theta < 1.0 {
                    let b = source_at(&work, f, t0);
                    a.iter().zip(&b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect()
                } else {
                    a
                })
            }
        };
        let (next, rep) = stepper
            .step(&u, f_eff.as_deref(), &problem.cg)
            .map_err(|e| Error::Step {
                step: k,
                source: Box::new(e),
            })?;
        let work_done = match &f_eff {
            Some(f) => dt * dot(&matvec(&mat.m, f), &next),
            None => 0.0,
        };
        records.push(diag.record(k, t1, &next, &u, work_done, rep.iterations));
        u = next;
        times.push(t1);
        let stride = problem.snapshot_stride;
        if k == n || (stride > 0 && k % stride == 0) {
            snapshots.push(Snapshot {
                step: k,
                time: t1,
                values: u.clone(),
            });
        }
    }
    Ok(SolutionTrajectory {
        mesh: Arc::new(work),
        dt,
        theta,
        times,
        snapshots,
        records,
        source_free: matches!(problem.f, Source::Zero),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityOptions {
    /// Keep the `½ Σ ‖u^{k+1} − u^k‖²_M` term. Dropping it is a negative control.
    pub include_dissipation: bool,
    /// Pair the source with the solution, `Σ dt ⟨f, u^{k+1}⟩_M`. This reading
    /// of the source term is an interpretation.
    pub paired_source: bool,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            include_dissipation: true,
            paired_source: false,
        }
    }
}

/// Relative defect of the discrete implicit-Euler energy identity.
pub fn energy_identity_residual(traj: &SolutionTrajectory, opts: &IdentityOptions) -> Result<f64> {
    if traj.theta != 1.0 {
        return invalid(format!(
            "the energy identity needs theta = 1 (got {})",
            traj.theta
        ));
    }
    if !traj.source_free && !opts.paired_source {
        return invalid("a nonzero source needs the paired-source reading");
    }
    let r = &traj.records;
    let first = r.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let last = r.last().unwrap();
    let mut lhs = last.half_l2_energy;
    for w in r.windows(2) {
        let dt = w[1].time - w[0].time;
        lhs += dt * w[1].a_uu;
        if opts.include_dissipation {
            lhs += 0.5 * w[1].increment_norm_sq;
        }
        if opts.paired_source {
            lhs -= w[1].source_work;
        }
    }
    let rhs = first.half_l2_energy;
    let defect = (lhs - rhs).abs();
    Ok(if rhs > 0.0 { defect / rhs } else { defect })
}

fn v_norm_with(mesh: &TwoSidedMesh, problem: &TransmissionProblem, u: &[f64], power: i32) -> Result<f64> {
    if u.len() != mesh.n_vertices() {
        return invalid("field length differs from the vertex count");
    }
    let m = fem::mass(mesh, |_| 1.0, false);
    let k = fem::stiffness(mesh, |s| problem.diffusivity(s).powi(power));
    Ok((linalg::quad_form(&m, u, u) + linalg::quad_form(&k, u, u)).max(0.0).sqrt())
}

/// `√(‖u‖² + Σ_sides ‖D ∇u‖²)`.
pub fn v_norm(mesh: &TwoSidedMesh, problem: &TransmissionProblem, u: &[f64]) -> Result<f64> {
    v_norm_with(mesh, problem, u, 2)
}

/// `√(‖u‖² + Σ_sides ‖√D ∇u‖²)`, the energy-pairing variant.
pub fn v_norm_sqrt_d(mesh: &TwoSidedMesh, problem: &TransmissionProblem, u: &[f64]) -> Result<f64> {
    v_norm_with(mesh, problem, u, 1)
}

/// Writes the per-step diagnostics table.
pub fn write_diagnostics_csv<W: std::io::Write>(
    traj: &SolutionTrajectory,
    comments: &[String],
    mut w: W,
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "step,time,mass,half_l2_energy,a_uu,increment_norm_sq")?;
    for r in &traj.records {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step, r.time, r.mass, r.half_l2_energy, r.a_uu, r.increment_norm_sq
        )?;
    }
    Ok(())
}
