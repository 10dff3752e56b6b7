//! The time-integrated energy `J_T`, the shape energy `𝒥_T` and heat contents.

use crate::error::{invalid, Error, Result};
use crate::geometry::TwoSidedDomain;
use crate::mesh::{default_mode, triangulate, MeshMode, Side};
use crate::solver::{solve_trajectory, SolutionTrajectory, TransmissionProblem};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Trapezoid,
    LeftRect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `∫₀ᵀ∫_{Ω⁺} |∇u|²`.
    pub grad_term: f64,
    /// `∫₀ᵀ∫_{Ω⁺} u²`.
    pub l2_term: f64,
    /// `∫₀ᵀ∫_Γ Λ ⟦u⟧² dμ`; segments with infinite conductance add nothing.
    pub boundary_term: f64,
    pub total: f64,
    pub quadrature: Quadrature,
    pub n_time_nodes: usize,
    pub t_final: f64,
}

/// Integrates the per-step energy densities of a trajectory in time.
pub fn j_t_energy(traj: &SolutionTrajectory, quadrature: Quadrature) -> Result<EnergyReport> {
    let r = &traj.records;
    if r.is_empty() {
        return invalid("empty trajectory");
    }
    let (mut g, mut l, mut b) = (0.0, 0.0, 0.0);
    for w in r.windows(2) {
        let dt = w[1].time - w[0].time;
        let (c0, c1) = match quadrature {
            Quadrature::Trapezoid => (0.5 * dt, 0.5 * dt),
            Quadrature::LeftRect => (dt, 0.0),
        };
        g += c0 * w[0].grad_plus + c1 * w[1].grad_plus;
        l += c0 * w[0].l2_plus + c1 * w[1].l2_plus;
        b += c0 * w[0].jump_energy + c1 * w[1].jump_energy;
    }
    Ok(EnergyReport {
        grad_term: g,
        l2_term: l,
        boundary_term: b,
        total: g + l + b,
        quadrature,
        n_time_nodes: r.len(),
        t_final: r.last().unwrap().time - r[0].time,
    })
}

/// Mesh size and layout used when a shape is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub h: f64,
    /// `None` picks the structured grid when it fits the interface.
    pub mode: Option<MeshMode>,
}

/// Meshes, solves and integrates: the energy and the trajectory behind it.
pub fn evaluate_shape(
    domain: &TwoSidedDomain,
    problem: &TransmissionProblem,
    mesh: &MeshParams,
) -> Result<(EnergyReport, SolutionTrajectory)> {
    let mode = mesh.mode.unwrap_or_else(|| default_mode(domain, mesh.h));
    let m = triangulate(domain, mesh.h, mode)?;
    let traj = solve_trajectory(&m, problem)?;
    Ok((j_t_energy(&traj, Quadrature::Trapezoid)?, traj))
}

/// `𝒥_T(Ω, μ)`: `J_T` evaluated at the solution on `domain`.
pub fn script_j(domain: &TwoSidedDomain, problem: &TransmissionProblem, mesh: &MeshParams) -> Result<f64> {
    Ok(evaluate_shape(domain, problem, mesh)?.0.total)
}

/// `∫_side u(t)`, linear in time between recorded steps.
pub fn heat_content(traj: &SolutionTrajectory, side: Side, t: f64) -> Result<f64> {
    let r = &traj.records;
    let (t0, t1) = (r[0].time, r.last().unwrap().time);
    let eps = 1e-12 * t1.abs().max(1.0);
    if !(t >= t0 - eps && t <= t1 + eps) {
        return Err(Error::InvalidInput(format!(
            "time {t} is outside the trajectory range [{t0}, {t1}]"
        )));
    }
    let q = |k: usize| match side {
        Side::Plus => r[k].heat_plus,
        Side::Minus => r[k].heat_minus,
    };
    let k = r.partition_point(|x| x.time < t);
    if k == 0 {
        return Ok(q(0));
    }
    if k >= r.len() {
        return Ok(q(r.len() - 1));
    }
    let (a, b) = (r[k - 1].time, r[k].time);
    let s = (t - a) / (b - a);
    Ok(q(k - 1) * (1.0 - s) + q(k) * s)
}

/// `(t, Q⁻(t))` at every recorded time.
pub fn transfer_curve(traj: &SolutionTrajectory) -> Vec<(f64, f64)> {
    traj.records.iter().map(|r| (r.time, r.heat_minus)).collect()
}

/// Metadata columns of the energy CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMeta {
    pub dt: f64,
    pub h: f64,
    pub generation: u32,
    pub lambda_summary: String,
}

pub fn write_energy_csv<W: Write>(
    rows: &[(EnergyReport, EnergyMeta)],
    comments: &[String],
    mut w: W,
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "grad_term,l2_term,boundary_term,total,T,dt,h,generation,lambda_summary")?;
    for (r, m) in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.grad_term, r.l2_term, r.boundary_term, r.total, r.t_final, m.dt, m.h, m.generation,
            m.lambda_summary
        )?;
    }
    Ok(())
}

pub fn write_transfer_csv<W: Write>(curve: &[(f64, f64)], comments: &[String], mut w: W) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "time,q_minus")?;
    for (t, q) in curve {
        writeln!(w, "{t:.16e},{q:.16e}")?;
    }
    Ok(())
}
