mod common;

use common::base;
use fractalflux::energy::{script_j, MeshParams};
use fractalflux::geometry::{
    AdmissibilityConstraints, AdmissibilityMode, Family, Point, PolylineInterface, Rect, SamplingConfig,
};
use fractalflux::measure::arc_length_measure;
use fractalflux::optimize::*;
use fractalflux::solver::{LambdaSpec, TransmissionProblem};

fn sampling() -> SamplingConfig {
    SamplingConfig {
        n_pairs: 200,
        n_centers: 300,
        ..Default::default()
    }
}

fn band() -> Option<Rect> {
    Some(Rect::new(0.0, 0.1, 1.0, 0.9))
}

fn minkowski_family(mode: AdmissibilityMode, measure: MeasureRule, generations: Vec<u32>) -> ShapeFamily {
    ShapeFamily {
        kind: ShapeKind::PrefractalGeneration {
            family: Family::Minkowski,
            generations,
            base: base(),
        },
        bounds: Rect::unit(),
        constraints: AdmissibilityConstraints {
            volume: 0.5,
            confinement: band(),
            eps: 0.01,
            mode,
        },
        measure,
        sampling: sampling(),
    }
}

fn lipschitz(c_hat: f64) -> AdmissibilityMode {
    AdmissibilityMode::Lipschitz { c_hat }
}

fn uniform() -> AdmissibilityMode {
    AdmissibilityMode::Uniform {
        d: 1.0,
        s: 1.5,
        c_d: 3.0,
        c_s: 0.5,
    }
}

fn five_point_chain() -> PolylineInterface {
    let v = (0..=4).map(|k| Point::new(k as f64 / 4.0, 0.5)).collect();
    PolylineInterface::custom(v, false).unwrap()
}

fn perturbed_family(moved: Vec<usize>, offsets: Vec<f64>) -> ShapeFamily {
    ShapeFamily {
        kind: ShapeKind::PerturbedPolyline {
            base: five_point_chain(),
            moved,
            offsets,
        },
        bounds: Rect::unit(),
        constraints: AdmissibilityConstraints {
            volume: 0.5,
            confinement: band(),
            eps: 0.01,
            mode: lipschitz(10.0),
        },
        measure: MeasureRule::ArcLength,
        sampling: sampling(),
    }
}

fn problem() -> TransmissionProblem {
    let m = arc_length_measure(five_point_chain());
    TransmissionProblem::new(m, LambdaSpec::uniform(1.0), 0.02, 0.002)
}

fn mesh() -> MeshRule {
    MeshRule::Fixed(MeshParams { h: 1.0 / 16.0, mode: None })
}

#[test]
fn uniform_class_admits_all_minkowski_generations() {
    let e = enumerate_admissible(&minkowski_family(uniform(), MeasureRule::Exponent(1.5), vec![0, 1, 2, 3])).unwrap();
    assert_eq!(e.status, EnumerationStatus::Nonempty);
    assert_eq!(e.admissible().count(), 4);
}

#[test]
fn lipschitz_cutoff_in_generation() {
    // A flat chain already has perimeter density 2, so ĉ = 1.5 admits nothing.
    let cutoff = |c_hat: f64| -> Vec<u32> {
        let e = enumerate_admissible(&minkowski_family(lipschitz(c_hat), MeasureRule::ArcLength, vec![0, 1, 2, 3])).unwrap();
        e.admissible().map(|c| c.generation.unwrap()).collect()
    };
    assert!(cutoff(1.5).is_empty());
    assert_eq!(cutoff(3.0), vec![0]);
    assert_eq!(cutoff(6.0), vec![0, 1]);
    let e = enumerate_admissible(&minkowski_family(lipschitz(1.5), MeasureRule::ArcLength, vec![0])).unwrap();
    assert_eq!(e.status, EnumerationStatus::Empty);
    assert!(optimize_shape(&e, &problem(), &mesh(), SearchMethod::Exhaustive).is_err());
}

#[test]
fn lipschitz_families_must_use_arc_length() {
    assert!(enumerate_admissible(&minkowski_family(lipschitz(3.0), MeasureRule::Exponent(1.5), vec![0])).is_err());
}

#[test]
fn perturbations_restore_the_volume_and_respect_the_band() {
    let e = enumerate_admissible(&perturbed_family(vec![1, 2], vec![-0.3, 0.0, 0.7])).unwrap();
    assert_eq!(e.built.len() + e.unbuildable.len(), 9);
    for c in &e.built {
        assert!((c.domain.volume_plus - 0.5).abs() < 1e-12, "{}", c.domain.volume_plus);
    }
    // After the volume shift a 0.7 offset still ends outside the band [0.1, 0.9].
    for c in &e.built {
        let out = c.params.contains(&0.7);
        assert_eq!(c.admissible(), !out, "{:?} {}", c.params, c.report.summary());
    }
}

#[test]
fn exhaustive_matches_independent_reevaluation() {
    let fam = perturbed_family(vec![2], vec![-0.2, -0.1, 0.0, 0.1, 0.2]);
    let e = enumerate_admissible(&fam).unwrap();
    assert_eq!(e.admissible().count(), 5);
    let r = optimize_shape(&e, &problem(), &mesh(), SearchMethod::Exhaustive).unwrap();
    assert_eq!(r.evaluations, 5);
    let mut best = (f64::INFINITY, usize::MAX);
    for c in e.admissible() {
        let mut p = problem();
        p.measure = c.measure.clone();
        let j = script_j(&c.domain, &p, &MeshParams { h: 1.0 / 16.0, mode: None }).unwrap();
        let entry = r.ranking.iter().find(|x| x.id == c.id).unwrap();
        let recorded = entry.energy().unwrap();
        assert!((recorded - j).abs() <= 1e-12 * j.abs(), "{recorded} vs {j}");
        if j < best.0 {
            best = (j, c.id);
        }
    }
    assert_eq!(r.best_entry().id, best.1);
    assert_eq!(r.best_energy, best.0);
    assert!(r.ranking.windows(2).all(|w| w[0].energy().unwrap() <= w[1].energy().unwrap()));
}

#[test]
fn argmin_ignores_candidate_order() {
    let fam = perturbed_family(vec![2], vec![-0.2, -0.1, 0.0, 0.1, 0.2]);
    let e = enumerate_admissible(&fam).unwrap();
    let r = optimize_shape(&e, &problem(), &mesh(), SearchMethod::Exhaustive).unwrap();
    let mut rev = e.clone();
    rev.built.reverse();
    let r2 = optimize_shape(&rev, &problem(), &mesh(), SearchMethod::Exhaustive).unwrap();
    assert_eq!(r.best_entry().params, r2.best_entry().params);
    assert_eq!(r.best_energy, r2.best_energy);
}

#[test]
fn greedy_never_beats_exhaustive_and_stops_at_a_local_minimum() {
    let fam = perturbed_family(vec![1, 3], vec![-0.2, 0.0, 0.2]);
    let e = enumerate_admissible(&fam).unwrap();
    let ex = optimize_shape(&e, &problem(), &mesh(), SearchMethod::Exhaustive).unwrap();
    let gr = optimize_shape(&e, &problem(), &mesh(), SearchMethod::GreedyLocal).unwrap();
    assert!(gr.best_energy >= ex.best_energy);
    assert!(gr.evaluations <= ex.evaluations);
    let best = e.built.iter().find(|c| c.id == gr.best_entry().id).unwrap();
    for c in &e.built {
        let dist: usize = c.grid.iter().zip(&best.grid).map(|(a, b)| a.abs_diff(*b)).sum();
        if dist == 1 {
            let j = ex.ranking.iter().find(|x| x.id == c.id).unwrap().energy().unwrap();
            assert!(j >= gr.best_energy);
        }
    }
}

#[test]
fn single_candidate_family() {
    let e = enumerate_admissible(&perturbed_family(vec![2], vec![0.1])).unwrap();
    for m in [SearchMethod::Exhaustive, SearchMethod::GreedyLocal] {
        let r = optimize_shape(&e, &problem(), &mesh(), m).unwrap();
        assert_eq!(r.ranking.len(), 1);
        assert_eq!(r.best_entry().params, vec![0.1]);
    }
}

#[test]
fn gap_study_of_identical_families_is_zero() {
    let e = enumerate_admissible(&perturbed_family(vec![2], vec![-0.1, 0.0, 0.1])).unwrap();
    let g = lipschitz_gap_study(&e, &e, &problem(), &mesh()).unwrap();
    assert_eq!(g.gap, 0.0);
    assert_eq!(g.lipschitz_trend.len(), 3);
}

#[test]
fn ranking_csv_lists_inadmissible_candidates() {
    let e = enumerate_admissible(&perturbed_family(vec![2], vec![0.0, 0.7])).unwrap();
    let r = optimize_shape(&e, &problem(), &mesh(), SearchMethod::Exhaustive).unwrap();
    let mut out = Vec::new();
    write_ranking_csv(&r, &["hash abc".into()], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("rank,candidate_id,"));
    assert!(lines[2].ends_with(",ok"));
    assert!(lines[3].ends_with(",inadmissible"));
    assert!(lines.iter().all(|l| !l.contains('\r')));
}
