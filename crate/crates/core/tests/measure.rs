mod common;

use common::base;
use fractalflux::geometry::{flat_interface, koch_prefractal, minkowski_prefractal, Point};
use fractalflux::measure::*;
use proptest::prelude::*;
use std::sync::Arc;

fn mink(g: u32, d: f64) -> BoundaryMeasure {
    hausdorff_like_measure(minkowski_prefractal(g, base()).unwrap(), d).unwrap()
}

fn unit_flat() -> BoundaryMeasure {
    arc_length_measure(flat_interface([Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap())
}

#[test]
fn normalized_masses() {
    let f = unit_flat();
    assert_eq!(f.segment_weights, vec![1.0]);
    for g in 0..=4 {
        let m = mink(g, 1.5);
        let w = 8f64.powi(-(g as i32));
        assert!(m.segment_weights.iter().all(|x| (x - w).abs() < 1e-15));
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!(m.has_full_support());
        let k = hausdorff_like_measure(koch_prefractal(g, base()).unwrap(), 4f64.ln() / 3f64.ln()).unwrap();
        assert!((k.total_mass() - 1.0).abs() < 1e-12, "{}", k.total_mass());
    }
    assert!((arc_length_measure(minkowski_prefractal(3, base()).unwrap()).total_mass() - 8.0).abs() < 1e-12);
}

#[test]
fn exponent_range_is_enforced() {
    let c = flat_interface(base()).unwrap();
    assert!(hausdorff_like_measure(c.clone(), 0.9).is_err());
    assert!(hausdorff_like_measure(c.clone(), 2.0).is_err());
    assert!(BoundaryMeasure::from_weights(c.clone(), vec![1.0, 2.0], 1.0).is_err());
    assert!(BoundaryMeasure::from_weights(c, vec![-1.0], 1.0).is_err());
}

#[test]
fn flat_scans() {
    let m = unit_flat();
    let radii = RadiusGrid::new(0.01, 0.4, 12);
    let up = upper_regularity_scan(&m, 1.0, &CenterSample::ArcLength(41), radii).unwrap();
    assert!((up.estimate - 2.0).abs() < 1e-12, "{}", up.estimate);
    let lo = lower_regularity_scan(&m, 1.0, &CenterSample::ArcLength(41), radii).unwrap();
    assert!((lo.estimate - 1.0).abs() < 1e-12, "{}", lo.estimate);
    let inner = CenterSample::Points(vec![Point::new(0.5, 0.0)]);
    let lo = lower_regularity_scan(&m, 1.0, &inner, radii).unwrap();
    assert!(lo.estimate >= 1.0);
    assert!(upper_regularity_scan(&m, 1.0, &inner, RadiusGrid::new(0.1, 2.0, 3)).is_err());
}

#[test]
fn minkowski_regularity_constants_stabilize() {
    let radii = |g: u32| RadiusGrid::new(0.25f64.powi(g as i32), 1.0, 20);
    let scan_up = |g: u32, d: f64, m: &BoundaryMeasure| {
        upper_regularity_scan(m, d, &CenterSample::ArcLengthAndVertices(1000), radii(g)).unwrap().estimate
    };
    let (u2, u3) = (scan_up(2, 1.5, &mink(2, 1.5)), scan_up(3, 1.5, &mink(3, 1.5)));
    assert!(u3 <= 8.0 && u3 / u2 <= 2.0 && u2 / u3 <= 2.0, "{u2} {u3}");
    let lo = |g: u32| {
        lower_regularity_scan(&mink(g, 1.5), 1.5, &CenterSample::ArcLengthAndVertices(1000), radii(g)).unwrap().estimate
    };
    let (l2, l3) = (lo(2), lo(3));
    assert!(l2 > 0.0 && l3 > 0.0 && l3 / l2 <= 2.0 && l2 / l3 <= 2.0, "{l2} {l3}");
    // Arc length is not uniformly 1-upper regular along the family.
    let arc: Vec<f64> = (1..=3)
        .map(|g| scan_up(g, 1.0, &arc_length_measure(minkowski_prefractal(g, base()).unwrap())))
        .collect();
    assert!(arc[0] < arc[1] && arc[1] < arc[2], "{arc:?}");
    assert!(arc[2] / arc[0] >= 2.0, "{arc:?}");
}

#[test]
fn missing_mass_shows_in_the_lower_scan() {
    let c = Arc::new(minkowski_prefractal(1, base()).unwrap());
    let mut w = vec![1.0; 8];
    w[3] = 0.0;
    let m = BoundaryMeasure::from_weights(c.clone(), w, 1.0).unwrap();
    assert!(!m.has_full_support());
    let (a, b) = c.segment(3);
    let centers = CenterSample::Points(vec![a.lerp(b, 0.5)]);
    let s = lower_regularity_scan(&m, 1.0, &centers, RadiusGrid::new(0.01, 0.1, 5)).unwrap();
    assert_eq!(s.estimate, 0.0);
}

#[test]
fn open_and_closed_balls_differ_on_tangency() {
    let m = unit_flat();
    let c = Point::new(0.5, 0.25);
    assert_eq!(m.ball_mass(c, 0.25, false), 0.0);
    assert_eq!(m.ball_mass(c, 0.25, true), 0.0);
    assert!(m.ball_mass(c, 0.3, false) > 0.0);
}

#[test]
fn integration_examples() {
    let m = unit_flat();
    assert!((integrate_against(&m, |_| 1.0) - 1.0).abs() < 1e-15);
    assert!((integrate_against(&m, |p| p.x) - 0.5).abs() < 1e-15);
    let at_zero = minkowski_prefractal(1, [Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
    let mu = arc_length_measure(at_zero);
    assert!(integrate_against(&mu, |p| p.y).abs() < 1e-15);
}

#[test]
fn weak_convergence_gap_examples() {
    let ms: Vec<BoundaryMeasure> = (1..=4).map(|g| mink(g, 1.5)).collect();
    let one = |_: Point| 1.0;
    let x = |p: Point| p.x;
    let x2 = |p: Point| p.x * p.x;
    let gaps = weak_convergence_gaps(&ms, &[&one, &x, &x2]).unwrap();
    assert_eq!(gaps.len(), 3);
    assert!(gaps[0].iter().all(|&v| v < 1e-14));
    assert!(gaps[1].iter().all(|&v| v < 1e-14));
    for w in gaps[2].windows(2) {
        assert!(w[1] * 2.0 <= w[0], "{:?}", gaps[2]);
    }
    let same = vec![mink(2, 1.5); 3];
    let g = weak_convergence_gaps(&same, &[&x2]).unwrap();
    assert!(g[0].iter().all(|&v| v == 0.0));
    assert!(weak_convergence_gaps(&ms, &[]).is_err());
    assert!(weak_convergence_gaps(&ms[..1], &[&one]).is_err());
}

#[test]
fn measure_round_trip() {
    let c = Arc::new(koch_prefractal(2, base()).unwrap());
    let m = hausdorff_like_measure(c.clone(), 1.2).unwrap();
    let mut buf = Vec::new();
    write_measure(&m, &["abc".into()], &mut buf).unwrap();
    let back = read_measure(c.clone(), buf.as_slice()).unwrap();
    assert_eq!(back.segment_weights, m.segment_weights);
    assert_eq!(back.exponent_d, m.exponent_d);
    let short = arc_length_measure(flat_interface(base()).unwrap());
    let mut buf = Vec::new();
    write_measure(&short, &[], &mut buf).unwrap();
    assert!(read_measure(c, buf.as_slice()).is_err());
}

#[test]
fn scans_do_not_depend_on_the_thread_count() {
    let m = mink(3, 1.5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            upper_regularity_scan(&m, 1.5, &CenterSample::ArcLength(500), RadiusGrid::new(0.01, 1.0, 10)).unwrap()
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.center, b.center);
}

proptest! {
    #[test]
    fn chord_lengths(h in -0.9..0.9f64, r in 0.0..1.9f64) {
        let l = clipped_length(Point::new(-2.0, h), Point::new(2.0, h), Point::new(0.0, 0.0), r);
        let want = if r > h.abs() { 2.0 * (r * r - h * h).sqrt() } else { 0.0 };
        prop_assert!((l - want).abs() < 1e-12, "{l} vs {want}");
    }

    #[test]
    fn integration_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, s in 0.1..2.0f64) {
        let m = mink(2, 1.5);
        let f = |p: Point| p.x.sin() + p.y;
        let g = |p: Point| p.x * p.y;
        let lhs = integrate_against(&m, |p| a * f(p) + b * g(p));
        let rhs = a * integrate_against(&m, f) + b * integrate_against(&m, g);
        prop_assert!((lhs - rhs).abs() < 1e-12);
        let scaled = BoundaryMeasure::from_weights(
            m.interface.clone(),
            m.segment_weights.iter().map(|w| s * w).collect(),
            1.5,
        ).unwrap();
        prop_assert!((integrate_against(&scaled, f) - s * integrate_against(&m, f)).abs() < 1e-12);
    }

    #[test]
    fn weights_survive_reorientation(g in 0u32..4, d in 1.0..1.99f64) {
        let m = mink(g, d);
        let r = m.reoriented();
        prop_assert_eq!(r.interface.vertices.first(), m.interface.vertices.last());
        let f = |p: Point| p.x * p.x + p.y;
        prop_assert!((integrate_against(&r, f) - integrate_against(&m, f)).abs() < 1e-13);
        prop_assert!((r.total_mass() - m.total_mass()).abs() < 1e-14);
    }

    #[test]
    fn upper_scan_monotone_in_exponent(d in 1.2..1.9f64, dp in 1.0..1.2f64) {
        let m = mink(2, 1.5);
        let c = CenterSample::ArcLength(200);
        let radii = RadiusGrid::new(0.01, 0.5, 8);
        let hi = upper_regularity_scan(&m, d, &c, radii).unwrap().estimate;
        let lo = upper_regularity_scan(&m, dp, &c, radii).unwrap().estimate;
        // mu / r^dp = (mu / r^d) r^(d - dp) with r in [r_min, r_max].
        prop_assert!(lo <= hi * 0.5f64.powf(d - dp) * (1.0 + 1e-12));
        prop_assert!(hi <= lo * 0.01f64.powf(dp - d) * (1.0 + 1e-12));
    }
}
