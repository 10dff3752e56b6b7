//! The five verbs. Each returns `Ok(false)` when a hard check fails.

use crate::scenario::{ClassName, Format, MethodName, Scenario};
use crate::Common;
use fractalflux::energy::{j_t_energy, transfer_curve, write_energy_csv, write_transfer_csv, EnergyMeta, MeshParams, Quadrature};
use fractalflux::experiments::{
    degennes_fit, energy_convergence, mosco_sweep, write_fit_csv, write_sweep_csv, ReferenceField, SweepConfig,
};
use fractalflux::geometry::{check_admissible, write_polyline, SamplingConfig};
use fractalflux::measure::write_measure;
use fractalflux::mesh::{write_mesh, write_vtk};
use fractalflux::optimize::{
    enumerate_admissible, optimize_shape, write_ranking_csv, EnumerationStatus, MeasureRule, MeshRule, SearchMethod,
    ShapeFamily, ShapeKind,
};
use fractalflux::solver::{energy_identity_residual, solve_trajectory, write_diagnostics_csv, IdentityOptions, Lambda, LambdaSpec};
use fractalflux::trace::property_suite;
use fractalflux::{Error, Result};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

struct Run {
    scenario: Scenario,
    hash: String,
    out: PathBuf,
    max_dof: Option<usize>,
    seed: u64,
}

impl Run {
    fn load(c: &Common) -> Result<Self> {
        let text = fs::read_to_string(&c.scenario)
            .map_err(|e| Error::Io(format!("{}: {e}", c.scenario.display())))?;
        let scenario = Scenario::parse(&text)?;
        let out = match (&c.out, &scenario.outputs.directory) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => PathBuf::from(d),
            (None, None) => PathBuf::from("."),
        };
        let max_dof = match std::env::var("FRACTALFLUX_MAX_DOF") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::InvalidInput(format!("FRACTALFLUX_MAX_DOF must be a nonnegative integer, got \"{v}\""))
            })?),
            Err(_) => None,
        };
        fs::create_dir_all(&out)?;
        Ok(Run {
            hash: scenario.hash(),
            scenario,
            out,
            max_dof,
            seed: c.seed,
        })
    }

    fn comments(&self) -> Vec<String> {
        vec![format!("scenario sha256 {}", self.hash)]
    }

    fn file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok((path, BufWriter::new(f)))
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
        let (path, mut w) = self.file(name)?;
        body(&mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            seed: self.seed,
            ..SamplingConfig::default()
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.scenario.outputs.formats.contains(&f)
    }
}

pub fn generate(c: &Common) -> Result<bool> {
    let run = Run::load(c)?;
    let s = &run.scenario;
    let domain = s.domain(s.geometry.generation)?;
    let measure = s.measure_for(domain.interface.clone())?;
    let mesh = s.triangulate(&domain, run.max_dof)?;
    let cm = run.comments();
    run.write("interface.txt", |w| write_polyline(&domain.interface, &cm, w))?;
    run.write("measure.txt", |w| write_measure(&measure, &cm, w))?;
    run.write("mesh.txt", |w| write_mesh(&mesh, &cm, w))?;
    let constraints = s.constraints(&domain, &measure)?;
    let report = check_admissible(&domain, Some(&measure), &constraints, &run.sampling())?;
    println!(
        "domain: {} generation {}, {} segments, volume_plus {:.12}, {} mesh vertices",
        domain.interface.family.name(),
        domain.interface.generation,
        domain.interface.segment_count(),
        domain.volume_plus,
        mesh.n_vertices()
    );
    println!("admissibility: {}", report.summary());
    let ok = report.admissible();
    println!("admissible: {}", if ok { "yes" } else { "no" });
    // Without declared constraints the report is informational.
    Ok(ok || s.admissibility.is_none())
}

pub fn solve(c: &Common) -> Result<bool> {
    let run = Run::load(c)?;
    let s = &run.scenario;
    let domain = s.domain(s.geometry.generation)?;
    let measure = s.measure_for(domain.interface.clone())?;
    let mesh = s.triangulate(&domain, run.max_dof)?;
    let problem = s.problem(measure)?;
    let traj = solve_trajectory(&mesh, &problem)?;
    let cm = run.comments();
    run.write("diagnostics.csv", |w| write_diagnostics_csv(&traj, &cm, w))?;
    let energy = j_t_energy(&traj, Quadrature::Trapezoid)?;
    let meta = EnergyMeta {
        dt: traj.dt,
        h: mesh.h,
        generation: domain.interface.generation,
        lambda_summary: lambda_summary(&problem.lambda),
    };
    run.write("energy.csv", |w| write_energy_csv(&[(energy.clone(), meta.clone())], &cm, w))?;
    run.write("transfer.csv", |w| write_transfer_csv(&transfer_curve(&traj), &cm, w))?;
    let mesh_out = &traj.mesh;
    if run.wants(Format::Csv) {
        run.write("snapshots.csv", |w| {
            for line in &cm {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "step,time,vertex,x,y,side,value")?;
            let sides = mesh_out.vertex_sides();
            for snap in &traj.snapshots {
                for (k, (p, v)) in mesh_out.vertices.iter().zip(&snap.values).enumerate() {
                    let side = match sides[k] {
                        [true, true] => "both",
                        [true, false] => "plus",
                        _ => "minus",
                    };
                    writeln!(w, "{},{:.16e},{},{:.16e},{:.16e},{},{:.16e}", snap.step, snap.time, k, p.x, p.y, side, v)?;
                }
            }
            Ok(())
        })?;
    }
    if run.wants(Format::Vtk) {
        for snap in &traj.snapshots {
            let title = format!("step {} time {:e} scenario sha256 {}", snap.step, snap.time, run.hash);
            run.write(&format!("snapshot_{:06}.vtk", snap.step), |w| {
                write_vtk(mesh_out, &title, &[("u", &snap.values)], w)
            })?;
        }
    }
    let m0 = traj.records[0].mass;
    let drift = traj
        .records
        .iter()
        .map(|r| (r.mass - m0).abs())
        .fold(0.0, f64::max)
        / m0.abs().max(f64::MIN_POSITIVE);
    let residual = match energy_identity_residual(&traj, &IdentityOptions::default()) {
        Ok(r) => format!("{r:.3e}"),
        Err(e) => format!("n/a ({e})"),
    };
    println!("J_T {:.12e} (grad {:.6e}, l2 {:.6e}, boundary {:.6e})", energy.total, energy.grad_term, energy.l2_term, energy.boundary_term);
    println!("mass drift {drift:.3e} energy-identity residual {residual}");
    Ok(true)
}

fn lambda_summary(l: &LambdaSpec) -> String {
    let one = |x: &Lambda| match x {
        Lambda::Finite(v) => format!("{v}"),
        Lambda::Infinite => "inf".to_string(),
    };
    match l {
        LambdaSpec::Uniform(x) => one(x),
        LambdaSpec::PerSegment(v) => format!("per-segment({})", v.len()),
    }
}

pub fn mosco(c: &Common, generations: Option<Vec<u32>>) -> Result<bool> {
    let run = Run::load(c)?;
    let s = &run.scenario;
    let block = s.mosco.clone();
    let generations = generations
        .or_else(|| block.as_ref().map(|b| b.generations.clone()))
        .ok_or_else(|| Error::InvalidInput("mosco needs --generations or a mosco block".into()))?;
    let tstar = block.as_ref().and_then(|b| b.tstar).unwrap_or(0.5 * s.problem.t_final);
    if let Some(cap) = run.max_dof {
        for &g in &generations {
            let d = s.domain(g)?;
            let h = s.mesh_size(&d);
            let r = s.bounds();
            let est = ((r.width() / h + 1.0) * (r.height() / h + 1.0)) as usize;
            if est > cap {
                return Err(Error::ResourceBound {
                    what: "mesh vertices (FRACTALFLUX_MAX_DOF)",
                    requested: est,
                    cap,
                });
            }
        }
    }
    let bounds = s.bounds();
    let (w, h) = (bounds.width(), bounds.height());
    let (x0, y0) = (bounds.min.x, bounds.min.y);
    let pi = std::f64::consts::PI;
    let reference = ReferenceField::sample(
        bounds,
        128,
        move |p| 1.0 + (pi * (p.x - x0) / w).cos() * (p.y - y0) / h,
        move |p| 0.5 * (pi * (p.y - y0) / h).sin(),
    );
    let cfg = SweepConfig {
        family: s.geometry.family.family(),
        generations: generations.clone(),
        base: s.anchors(),
        bounds,
        exponent_d: s.exponent(),
        tstar,
        h: s.mesh.h,
        h_ratio: s.mesh.h_ratio.unwrap_or(4.0),
        dt: Some(s.problem.dt),
        reference,
        scan_centers: 200,
        scan_radii: 12,
    };
    let base = s.domain(generations[0])?;
    let template = s.problem(s.measure_for(base.interface.clone())?)?;
    let table = mosco_sweep(&cfg, &template)?;
    let mut cm = run.comments();
    cm.push(format!("tstar {tstar:e}"));
    run.write("sweep.csv", |w| write_sweep_csv(&table, &cm, w))?;
    for r in &table.rows {
        println!(
            "g={} h={:.4e} J={:.10e} Q-(t*)={:.10e} recovery_gap={:.3e}",
            r.generation, r.h, r.script_j, r.q_minus_at_tstar, r.recovery_gap
        );
    }
    if table.rows.len() >= 3 {
        let j: Vec<f64> = table.rows.iter().map(|r| r.script_j).collect();
        let d = energy_convergence(&j)?;
        println!("energy convergence: {} (ratios {:?})", d.verdict, d.ratios);
    }
    if let Some([t0, t1]) = block.as_ref().and_then(|b| b.fit_window) {
        let g = *generations.last().unwrap();
        let d = s.domain(g)?;
        let mesh = s.triangulate(&d, run.max_dof)?;
        let mut p = s.problem(s.measure_for(d.interface.clone())?)?;
        p.snapshot_stride = 0;
        let traj = solve_trajectory(&mesh, &p)?;
        let fit = degennes_fit(&transfer_curve(&traj), (t0, t1))?;
        let mut cm = run.comments();
        cm.push(format!("generation {g}"));
        run.write("fit.csv", |w| write_fit_csv(&fit, &cm, w))?;
        println!("de Gennes fit at g={g}: alpha {:.4} residual {:.3e} over {} points", fit.alpha, fit.residual, fit.n_points);
    }
    Ok(true)
}

pub fn optimize(c: &Common) -> Result<bool> {
    let run = Run::load(c)?;
    let s = &run.scenario;
    let block = s
        .optimize
        .clone()
        .ok_or_else(|| Error::InvalidInput("optimize needs an optimize block".into()))?;
    let kind = match (&block.generations, &block.moved, &block.offsets) {
        (Some(g), None, None) => ShapeKind::PrefractalGeneration {
            family: s.geometry.family.family(),
            generations: g.clone(),
            base: s.anchors(),
        },
        (None, Some(m), Some(o)) => ShapeKind::PerturbedPolyline {
            base: s.chain(s.geometry.generation)?,
            moved: m.clone(),
            offsets: o.clone(),
        },
        _ => {
            return Err(Error::InvalidInput(
                "optimize block needs either generations, or moved and offsets".into(),
            ))
        }
    };
    let base = s.domain(s.geometry.generation)?;
    let base_measure = s.measure_for(base.interface.clone())?;
    let constraints = s.constraints(&base, &base_measure)?;
    let lipschitz = s.admissibility.as_ref().is_some_and(|a| a.class == ClassName::Lipschitz);
    let family = ShapeFamily {
        kind,
        bounds: s.bounds(),
        constraints,
        measure: if lipschitz { MeasureRule::ArcLength } else { MeasureRule::Exponent(s.exponent()) },
        sampling: run.sampling(),
    };
    let e = enumerate_admissible(&family)?;
    for r in &e.unbuildable {
        println!("candidate {} {:?}: not built: {}", r.id, r.params, r.reason);
    }
    for cand in &e.built {
        println!("candidate {} {:?}: {}", cand.id, cand.params, cand.report.summary());
    }
    if e.status == EnumerationStatus::Empty {
        println!("no admissible candidates");
        return Ok(false);
    }
    if let Some(cap) = run.max_dof {
        for cand in e.admissible() {
            let h = s.mesh_size(&cand.domain);
            let r = s.bounds();
            let est = ((r.width() / h + 1.0) * (r.height() / h + 1.0)) as usize;
            if est > cap {
                return Err(Error::ResourceBound {
                    what: "mesh vertices (FRACTALFLUX_MAX_DOF)",
                    requested: est,
                    cap,
                });
            }
        }
    }
    let rule = match (s.mesh.h, s.mesh.h_ratio) {
        (Some(h), _) => MeshRule::Fixed(MeshParams { h, mode: s.mesh_mode() }),
        (None, Some(r)) => MeshRule::SegmentRatio { ratio: r, h_max: f64::INFINITY },
        _ => unreachable!("validated"),
    };
    let method = match block.method {
        MethodName::Exhaustive => SearchMethod::Exhaustive,
        MethodName::Greedy => SearchMethod::GreedyLocal,
    };
    let template = s.problem(base_measure)?;
    let result = optimize_shape(&e, &template, &rule, method)?;
    run.write("ranking.csv", |w| write_ranking_csv(&result, &run.comments(), w))?;
    let b = result.best_entry();
    println!(
        "best: candidate {} generation {:?} params {:?} J_T {:.12e} ({} evaluations)",
        b.id, b.generation, b.params, result.best_energy, result.evaluations
    );
    Ok(true)
}

pub fn trace_check(c: &Common) -> Result<bool> {
    let run = Run::load(c)?;
    let s = &run.scenario;
    let domain = s.domain(s.geometry.generation)?;
    let mesh = s.triangulate(&domain, run.max_dof)?;
    let (n, seed) = s.trace.as_ref().map(|t| (t.n_random, t.seed)).unwrap_or((20, 0));
    let results = property_suite(&mesh, n, seed)?;
    let cm = run.comments();
    run.write("trace_properties.csv", |w| {
        for line in &cm {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "property,passed,defect,tolerance")?;
        for r in &results {
            writeln!(w, "{},{},{:.6e},{:.1e}", r.name.replace(',', ";"), r.passed, r.defect, r.tolerance)?;
        }
        Ok(())
    })?;
    let mut all = true;
    for r in &results {
        println!("{} {} (defect {:.3e}, tolerance {:.1e})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.defect, r.tolerance);
        all &= r.passed;
    }
    Ok(all)
}
