//! Discrete one-sided traces, the minimum-extension trace norm and weak
//! normal derivatives on the interface.

use crate::error::{invalid, Error, Result};
use crate::fem;
use crate::geometry::Point;
use crate::linalg::{self, dot, matvec, pcg, CgOptions, SparseMatrix};
use crate::mesh::{Side, TwoSidedMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// One value per interface pair, in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    pub values: Vec<f64>,
}

/// Coefficients of a functional acting on boundary functions by
/// `⟨φ, f⟩ = Σ c_i f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunctional {
    pub coefficients: Vec<f64>,
}

impl BoundaryFunctional {
    pub fn pair(&self, f: &BoundaryFunction) -> f64 {
        dot(&self.coefficients, &f.values)
    }
}

fn check_field(mesh: &TwoSidedMesh, u: &[f64]) -> Result<()> {
    if u.len() != mesh.n_vertices() {
        return invalid(format!(
            "field has {} values for {} vertices",
            u.len(),
            mesh.n_vertices()
        ));
    }
    Ok(())
}

fn check_sided(mesh: &TwoSidedMesh) -> Result<()> {
    if mesh.merged {
        return invalid("merged mesh has no one-sided interface copies; use the shared values");
    }
    Ok(())
}

fn copy_of(p: &crate::mesh::InterfacePair, side: Side) -> usize {
    match side {
        Side::Plus => p.plus,
        Side::Minus => p.minus,
    }
}

/// Values of `u` at `side`'s interface copies.
pub fn nodal_trace(mesh: &TwoSidedMesh, u: &[f64], side: Side) -> Result<BoundaryFunction> {
    check_sided(mesh)?;
    check_field(mesh, u)?;
    Ok(BoundaryFunction {
        values: mesh.interface_pairs.iter().map(|p| u[copy_of(p, side)]).collect(),
    })
}

/// `Tr⁺u − Tr⁻u` per pair; identically zero on a merged mesh.
pub fn jump_trace(mesh: &TwoSidedMesh, u: &[f64]) -> Result<BoundaryFunction> {
    check_field(mesh, u)?;
    Ok(BoundaryFunction {
        values: mesh
            .interface_pairs
            .iter()
            .map(|p| u[p.plus] - u[p.minus])
            .collect(),
    })
}

fn side_weight(side: Side) -> impl Fn(Side) -> f64 + Sync {
    move |s| if s == side { 1.0 } else { 0.0 }
}

/// `K + M` restricted to one side's triangles.
pub fn h1_matrix(mesh: &TwoSidedMesh, side: Side) -> SparseMatrix {
    let k = fem::stiffness(mesh, side_weight(side));
    let m = fem::mass(mesh, side_weight(side), false);
    &k + &m
}

/// Discrete `‖w‖_{H¹(Ω±)}`.
pub fn h1_norm(mesh: &TwoSidedMesh, w: &[f64], side: Side) -> Result<f64> {
    check_field(mesh, w)?;
    Ok(linalg::quad_form(&h1_matrix(mesh, side), w, w).max(0.0).sqrt())
}

/// Degrees of freedom of one side split into interface copies and the rest.
struct SideDofs {
    on_side: Vec<bool>,
    /// Dense index of each free vertex.
    free: Vec<Option<usize>>,
    n_free: usize,
    interface: Vec<usize>,
}

impl SideDofs {
    fn new(mesh: &TwoSidedMesh, side: Side) -> Self {
        let on_side: Vec<bool> = mesh.vertex_sides().iter().map(|s| s[side as usize]).collect();
        let interface: Vec<usize> = mesh.interface_pairs.iter().map(|p| copy_of(p, side)).collect();
        let mut fixed = vec![false; on_side.len()];
        for &k in &interface {
            fixed[k] = true;
        }
        let mut n_free = 0;
        let free = (0..on_side.len())
            .map(|k| {
                (on_side[k] && !fixed[k]).then(|| {
                    n_free += 1;
                    n_free - 1
                })
            })
            .collect();
        SideDofs {
            on_side,
            free,
            n_free,
            interface,
        }
    }
}

fn tight_cg(n: usize) -> CgOptions {
    CgOptions {
        rel_tol: 1e-13,
        max_iter: Some(4 * n + 100),
    }
}

/// Solves `A_ff x_f = rhs_f` on the free DOFs of `dofs`.
fn solve_free(a: &SparseMatrix, dofs: &SideDofs, rhs: &[f64], x: &mut [f64]) -> Result<()> {
    let n = dofs.n_free;
    if n == 0 {
        return Ok(());
    }
    let aff = linalg::restrict(a, &dofs.free, &dofs.free, (n, n));
    let mut b = vec![0.0; n];
    let mut xf = vec![0.0; n];
    for (k, f) in dofs.free.iter().enumerate() {
        if let Some(i) = f {
            b[*i] = rhs[k];
            xf[*i] = x[k];
        }
    }
    pcg(&aff, &b, &mut xf, &tight_cg(n))?;
    for (k, f) in dofs.free.iter().enumerate() {
        if let Some(i) = f {
            x[k] = xf[*i];
        }
    }
    Ok(())
}

/// Minimizer of the discrete H¹ norm on `side` with the given interface
/// values. Vertices not on `side` are left at zero.
pub fn one_harmonic_extension(mesh: &TwoSidedMesh, data: &BoundaryFunction, side: Side) -> Result<Vec<f64>> {
    check_sided(mesh)?;
    if data.values.len() != mesh.interface_pairs.len() {
        return invalid(format!(
            "boundary data has {} values for {} interface pairs",
            data.values.len(),
            mesh.interface_pairs.len()
        ));
    }
    let dofs = SideDofs::new(mesh, side);
    let a = h1_matrix(mesh, side);
    let mut u = vec![0.0; mesh.n_vertices()];
    for (&k, &v) in dofs.interface.iter().zip(&data.values) {
        u[k] = v;
    }
    let au = matvec(&a, &u);
    let rhs: Vec<f64> = au.iter().map(|v| -v).collect();
    let mut x = vec![0.0; mesh.n_vertices()];
    solve_free(&a, &dofs, &rhs, &mut x)?;
    for (k, f) in dofs.free.iter().enumerate() {
        if f.is_some() {
            u[k] = x[k];
        }
    }
    Ok(u)
}

/// `‖f‖_{Tr±}`: the H¹ norm of the 1-harmonic extension.
pub fn trace_norm(mesh: &TwoSidedMesh, data: &BoundaryFunction, side: Side) -> Result<f64> {
    let u = one_harmonic_extension(mesh, data, side)?;
    h1_norm(mesh, &u, side)
}

/// Discrete Laplacian of `u` on `side`: `M_ff L_f = −(K u)_f` on vertices
/// off the interface, zero at the interface copies.
pub fn discrete_laplacian(mesh: &TwoSidedMesh, u: &[f64], side: Side) -> Result<Vec<f64>> {
    check_sided(mesh)?;
    check_field(mesh, u)?;
    let dofs = SideDofs::new(mesh, side);
    let k = fem::stiffness(mesh, side_weight(side));
    let m = fem::mass(mesh, side_weight(side), false);
    let rhs: Vec<f64> = matvec(&k, u).iter().map(|v| -v).collect();
    let mut l = vec![0.0; mesh.n_vertices()];
    solve_free(&m, &dofs, &rhs, &mut l)?;
    Ok(l)
}

/// Interface-restricted residual `K u + M Δu` at `side`'s copies, the
/// variationally consistent outward flux from `Ω±`.
pub fn weak_normal_derivative(
    mesh: &TwoSidedMesh,
    u: &[f64],
    laplacian: &[f64],
    side: Side,
) -> Result<BoundaryFunctional> {
    check_sided(mesh)?;
    check_field(mesh, u)?;
    if laplacian.len() != u.len() {
        return invalid(format!(
            "laplacian has {} values for {} vertices",
            laplacian.len(),
            u.len()
        ));
    }
    let k = fem::stiffness(mesh, side_weight(side));
    let m = fem::mass(mesh, side_weight(side), false);
    let ku = matvec(&k, u);
    let ml = matvec(&m, laplacian);
    Ok(BoundaryFunctional {
        coefficients: mesh
            .interface_pairs
            .iter()
            .map(|p| {
                let c = copy_of(p, side);
                ku[c] + ml[c]
            })
            .collect(),
    })
}

fn clip_convex(poly: &[Point], a: Point, b: Point) -> Vec<Point> {
    // Keep the part left of a->b.
    let side = |p: Point| (b - a).cross(p - a);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            out.push(p.lerp(q, sp / (sp - sq)));
        }
    }
    out
}

fn polygon_moments(poly: &[Point]) -> (f64, Point) {
    let mut a = 0.0;
    let mut c = Point::default();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let w = p.cross(q);
        a += w;
        c = c + (p + q) * w;
    }
    a *= 0.5;
    if a.abs() < 1e-300 {
        return (0.0, Point::default());
    }
    (a, c * (1.0 / (6.0 * a)))
}

/// Sides of the regular polygon standing in for a disk.
pub const DISK_SIDES: usize = 512;

/// Volume average of `u` over `Ω± ∩ B_r(x)`, extrapolated linearly in `r`
/// to `r = 0`.
///
/// The disk is a regular polygon with [`DISK_SIDES`] sides and the same
/// area; the clipped piecewise-linear integrals are exact.
pub fn averaged_trace(mesh: &TwoSidedMesh, u: &[f64], x: Point, side: Side, radii: &[f64]) -> Result<f64> {
    check_field(mesh, u)?;
    if radii.len() < 2 {
        return invalid("averaged trace needs at least two radii");
    }
    if let Some(r) = radii.iter().find(|&&r| !(r >= 2.0 * mesh.h)) {
        return invalid(format!("radius {r} is below 2h = {}", 2.0 * mesh.h));
    }
    let pts = radii
        .iter()
        .map(|&r| Ok((r, ball_average(mesh, u, x, side, r)?)))
        .collect::<Result<Vec<_>>>()?;
    // Least-squares line through (r, average).
    let nr = pts.len() as f64;
    let mr = pts.iter().map(|p| p.0).sum::<f64>() / nr;
    let ma = pts.iter().map(|p| p.1).sum::<f64>() / nr;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mr) * (p.1 - ma)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mr).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("radii must not all be equal");
    }
    Ok(ma - sxy / sxx * mr)
}

/// `(1/|Ω±∩B_r|) ∫_{Ω±∩B_r} u` with the polygonal disk of [`averaged_trace`].
pub fn ball_average(mesh: &TwoSidedMesh, u: &[f64], x: Point, side: Side, r: f64) -> Result<f64> {
    check_field(mesh, u)?;
    let n = DISK_SIDES;
    let half = std::f64::consts::PI / n as f64;
    let rr = r * (std::f64::consts::PI / (n as f64 * half.sin() * half.cos())).sqrt();
    let disk: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * half * k as f64;
            x + Point::new(t.cos(), t.sin()) * rr
        })
        .collect();
    let (mut vol, mut int) = (0.0, 0.0);
    for t in mesh.triangles.iter().filter(|t| t.side == side) {
        let p = t.v.map(|k| mesh.vertices[k]);
        let inside = (0..3).all(|i| (p[(i + 1) % 3] - p[i]).cross(x - p[i]) >= 0.0);
        let gap = (0..3)
            .map(|i| crate::geometry::point_segment_distance(x, p[i], p[(i + 1) % 3]))
            .fold(f64::INFINITY, f64::min);
        if !inside && gap > rr {
            continue;
        }
        let mut poly = p.to_vec();
        for k in 0..n {
            poly = clip_convex(&poly, disk[k], disk[(k + 1) % n]);
            if poly.len() < 3 {
                break;
            }
        }
        if poly.len() < 3 {
            continue;
        }
        let (area, c) = polygon_moments(&poly);
        let (g, _) = fem::hat_gradients(p);
        let val_c = u[t.v[0]] + (0..3).map(|i| u[t.v[i]] * g[i].dot(c - p[0])).sum::<f64>();
        vol += area;
        int += area * val_c;
    }
    if vol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "the {side} side does not meet the disk of radius {r}"
        )));
    }
    Ok(int / vol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub side: Side,
    pub fields_checked: usize,
    /// Largest trace value over fields vanishing on the interface.
    pub max_zero_trace: f64,
    /// Largest trace norm over those fields.
    pub max_zero_norm: f64,
    /// Smallest trace norm over fields with nonzero interface values.
    pub min_nonzero_norm: f64,
    pub passed: bool,
}

/// Random fields vanishing on the interface have zero trace and zero trace
/// norm; fields that do not vanish there have positive trace norm.
pub fn kernel_check(mesh: &TwoSidedMesh, side: Side, n_random: usize, seed: u64) -> Result<KernelReport> {
    check_sided(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dofs = SideDofs::new(mesh, side);
    let (mut max_zero_trace, mut max_zero_norm) = (0.0_f64, 0.0_f64);
    let mut min_nonzero_norm = f64::INFINITY;
    for _ in 0..n_random {
        let mut w: Vec<f64> = (0..mesh.n_vertices())
            .map(|k| if dofs.on_side[k] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        for &k in &dofs.interface {
            w[k] = 0.0;
        }
        let tr = nodal_trace(mesh, &w, side)?;
        max_zero_trace = tr.values.iter().fold(max_zero_trace, |m, v| m.max(v.abs()));
        max_zero_norm = max_zero_norm.max(trace_norm(mesh, &tr, side)?);
        for &k in &dofs.interface {
            w[k] = rng.gen_range(-1.0..1.0);
        }
        let tr = nodal_trace(mesh, &w, side)?;
        min_nonzero_norm = min_nonzero_norm.min(trace_norm(mesh, &tr, side)?);
    }
    Ok(KernelReport {
        side,
        fields_checked: n_random,
        max_zero_trace,
        max_zero_norm,
        min_nonzero_norm,
        passed: max_zero_trace == 0.0 && max_zero_norm == 0.0 && min_nonzero_norm > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed defect for the property.
    pub defect: f64,
    pub tolerance: f64,
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Runs the discrete trace invariants on both sides with `n_random` samples.
pub fn property_suite(mesh: &TwoSidedMesh, n_random: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    check_sided(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let np = mesh.interface_pairs.len();
    let nv = mesh.n_vertices();
    let mut out = Vec::new();
    let mut push = |name: String, defect: f64, tolerance: f64| {
        out.push(PropertyResult {
            name,
            passed: defect <= tolerance,
            defect,
            tolerance,
        })
    };
    for side in [Side::Plus, Side::Minus] {
        let a = h1_matrix(mesh, side);
        let dofs = SideDofs::new(mesh, side);
        let (mut iso, mut opnorm, mut orth, mut green) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for _ in 0..n_random {
            let f = BoundaryFunction {
                values: random_vec(&mut rng, np),
            };
            let e = one_harmonic_extension(mesh, &f, side)?;
            let nrm2 = linalg::quad_form(&a, &e, &e);
            let phi = weak_normal_derivative(mesh, &e, &e, side)?;
            iso = iso.max((phi.pair(&f) - nrm2).abs() / nrm2);

            let w: Vec<f64> = random_vec(&mut rng, nv)
                .into_iter()
                .zip(&dofs.on_side)
                .map(|(v, &o)| if o { v } else { 0.0 })
                .collect();
            let tw = nodal_trace(mesh, &w, side)?;
            let ratio = trace_norm(mesh, &tw, side)? / h1_norm(mesh, &w, side)?;
            opnorm = opnorm.max(ratio - 1.0);

            let mut z = w.clone();
            for &k in &dofs.interface {
                z[k] = 0.0;
            }
            let ip = linalg::quad_form(&a, &e, &z);
            let scale = nrm2.sqrt() * linalg::quad_form(&a, &z, &z).sqrt();
            orth = orth.max(ip.abs() / scale.max(f64::MIN_POSITIVE));

            let lap = discrete_laplacian(mesh, &w, side)?;
            let phi = weak_normal_derivative(mesh, &w, &lap, side)?;
            let v: Vec<f64> = random_vec(&mut rng, nv)
                .into_iter()
                .zip(&dofs.on_side)
                .map(|(x, &o)| if o { x } else { 0.0 })
                .collect();
            let k = fem::stiffness(mesh, side_weight(side));
            let m = fem::mass(mesh, side_weight(side), false);
            let lhs = phi.pair(&nodal_trace(mesh, &v, side)?);
            let rhs = linalg::quad_form(&m, &v, &lap) + linalg::quad_form(&k, &v, &w);
            let s = linalg::quad_form(&k, &v, &v).sqrt() * linalg::quad_form(&k, &w, &w).sqrt();
            green = green.max((lhs - rhs).abs() / s.max(f64::MIN_POSITIVE));
        }
        push(format!("{side}: isometry <dnu E f, f> = |f|^2"), iso, 1e-9);
        push(format!("{side}: trace operator norm <= 1"), opnorm.max(0.0), 1e-10);
        push(format!("{side}: extension orthogonal to zero-trace fields"), orth, 1e-10);
        push(format!("{side}: Green compatibility"), green, 1e-10);
        let kr = kernel_check(mesh, side, n_random.min(10), seed ^ 0x5eed)?;
        push(
            format!("{side}: kernel of the trace"),
            if kr.passed { 0.0 } else { 1.0 },
            0.0,
        );
        let c = vec![2.5; nv];
        let tc = nodal_trace(mesh, &c, side)?;
        push(
            format!("{side}: constant field has constant trace"),
            tc.values.iter().fold(0.0, |m, v| m.max((v - 2.5).abs())),
            0.0,
        );
    }
    let u = random_vec(&mut rng, nv);
    let w = random_vec(&mut rng, nv);
    let (a, b) = (0.7, -1.3);
    let comb: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
    let (ju, jw, jc) = (jump_trace(mesh, &u)?, jump_trace(mesh, &w)?, jump_trace(mesh, &comb)?);
    let lin = (0..np)
        .map(|i| (jc.values[i] - a * ju.values[i] - b * jw.values[i]).abs())
        .fold(0.0, f64::max);
    push("jump is linear".into(), lin, 1e-12);
    Ok(out)
}

/// CSV with columns `pair_index,x,y,value`.
pub fn write_boundary_csv<W: Write>(
    mesh: &TwoSidedMesh,
    values: &[f64],
    comments: &[String],
    mut w: W,
) -> Result<()> {
    if values.len() != mesh.interface_pairs.len() {
        return invalid("one value per interface pair expected");
    }
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "pair_index,x,y,value")?;
    for (i, (p, v)) in mesh.interface_pairs.iter().zip(values).enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", p.point.x, p.point.y, v)?;
    }
    Ok(())
}
