use std::f64::consts::{FRAC_PI_2, PI};

use psdim_core::bowen::*;
use psdim_core::raster::*;
use psdim_core::transfer::transfer_one;
use psdim_core::tree::TreeParams;
use psdim_core::*;
use proptest::prelude::*;

fn half() -> MapSpec {
    MapSpec::tangent(C::new(0.5, 0.0)).unwrap()
}

#[test]
fn cantor_case_root_lies_below_one() {
    let f = half();
    let r = pressure_root(&f, None, &RootParams::default(), &TruncationPolicy::default(), &TreeParams::default()).unwrap();
    let (lo, hi) = r.bracket;
    assert!(0.5 < lo && lo <= r.h && r.h <= hi && hi <= 1.0, "{:?}", r);
    assert!(hi - lo <= 0.01);
    assert!(!r.julia_likely_sphere);
    assert!(bounds_check(f.rho(), r.h, Regime::Hyperbolic).pass);
}

#[test]
fn degenerate_tolerance_evaluates_once() {
    let f = half();
    let rp = RootParams { bisect_tol: 2.0, ..Default::default() };
    let r = pressure_root(&f, None, &rp, &TruncationPolicy::default(), &TreeParams::default()).unwrap();
    assert_eq!(r.evaluations.len(), 1);
    assert_eq!(r.bracket, (0.52, 2.0));
}

#[test]
fn base_point_avoids_the_postsingular_set() {
    let f = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    let b = choose_base(&f);
    for p in psdim_core::transfer::postsingular_prefix(&f, 30) {
        assert!(chordal_dist(b, p) >= 0.05);
    }
}

#[test]
fn single_bin_ulam_is_the_transfer_operator() {
    let f = half();
    let pol = TruncationPolicy::default();
    for t in [0.7, 1.0, 1.6] {
        let u = ulam_pressure(&f, t, 1, &pol).unwrap();
        let op = transfer_one(&f, t, SpherePoint::new(0.0, 0.0), &pol).unwrap();
        assert!((u.log_eigenvalue - op.midpoint().ln()).abs() < 1e-12);
    }
}

#[test]
fn ulam_pressure_decreases() {
    let f = half();
    let pol = TruncationPolicy::default();
    let ps: Vec<f64> = [0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0]
        .iter()
        .map(|&t| ulam_pressure(&f, t, 2000, &pol).unwrap().log_eigenvalue)
        .collect();
    assert!(ps.windows(2).all(|w| w[1] < w[0]), "{ps:?}");
}

#[test]
fn ulam_agrees_with_tree_pressure() {
    let f = half();
    let pol = TruncationPolicy::default();
    let tree = psdim_core::pressure::pressure_estimate(&f, 0.7, SpherePoint::new(0.3, 0.2), 12, &pol, &TreeParams::default())
        .unwrap();
    let u = ulam_pressure(&f, 0.7, 8000, &pol).unwrap();
    assert!((u.log_eigenvalue - tree.extrapolated).abs() < 0.01, "{} vs {}", u.log_eigenvalue, tree.extrapolated);
}

#[test]
fn ulam_needs_real_parameter() {
    let f = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    assert_eq!(ulam_pressure(&f, 1.0, 100, &TruncationPolicy::default()).unwrap_err(), Error::ComplexParameter);
}

#[test]
fn bounds_chain() {
    let r = bounds_check(1.0, 2.0, Regime::SubExpanding);
    assert!(r.pass);
    assert_eq!(r.checks.len(), 2);
    let r = bounds_check(1.0, 0.8, Regime::Hyperbolic);
    assert!(r.pass);
    assert_eq!(r.checks.len(), 1);
    for reg in [Regime::Hyperbolic, Regime::SubExpanding, Regime::Unsupported] {
        assert!(!bounds_check(1.0, 0.4, reg).pass);
    }
    assert!(!bounds_check(1.0, 0.9, Regime::SubExpanding).pass);
}

#[test]
fn classify_points_by_attraction() {
    let f = half();
    let reg = classify_regime(&f, 20, 1e6).unwrap();
    assert_eq!(classify_point(&f, SpherePoint::new(0.1, 0.0), 200, &reg), PointClass::Fatou(0));
    assert_eq!(classify_point(&f, SpherePoint::new(0.0, 10.0), 200, &reg), PointClass::Fatou(0));
    assert_eq!(classify_point(&f, SpherePoint::new(FRAC_PI_2, 0.0), 200, &reg), PointClass::Julia);
    assert_eq!(classify_point(&f, SpherePoint::Infinity, 200, &reg), PointClass::Julia);
    let g = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    let reg = classify_regime(&g, 20, 1e6).unwrap();
    assert_eq!(classify_point(&g, SpherePoint::new(0.0, 10.0), 200, &reg), PointClass::Undecided);
}

#[test]
fn raster_writes_plain_pgm() {
    let f = half();
    let reg = classify_regime(&f, 20, 1e6).unwrap();
    let region = Region { xmin: -3.0, xmax: 3.0, ymin: -1.0, ymax: 1.0 };
    let r = render_raster(&f, &reg, region, 30, 11, 100).unwrap();
    assert_eq!(r.pixels.len(), 330);
    // the middle row lies on the real axis, which meets the basin of 0
    assert!(r.pixels[5 * 30..6 * 30].contains(&255));
    let mut buf = Vec::new();
    write_pgm(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some("30 11"));
    assert_eq!(lines.next(), Some("255"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn real_julia_cover_is_nested() {
    let f = half();
    let c0 = refine_real_julia(&f, 0, 1e-3).unwrap();
    let xs = c0.fixed_point;
    assert!((0.5 * xs.tan() - xs).abs() < 1e-12);
    assert_eq!(c0.intervals, vec![(-FRAC_PI_2, -xs), (xs, FRAC_PI_2)]);
    let mut prev = c0;
    for d in 1..=3 {
        let c = refine_real_julia(&f, d, 1e-3).unwrap();
        assert!(c.total_length() < prev.total_length());
        for &(a, b) in &c.intervals {
            assert!(a <= b);
            assert!(prev.intervals.iter().any(|&(u, v)| u - 1e-12 <= a && b <= v + 1e-12), "depth {d}: ({a}, {b})");
        }
        prev = c;
    }
}

#[test]
fn real_julia_cover_maps_into_itself() {
    // λ tan sends every refined interval onto its parent, modulo the period;
    // intervals below the resolution are carried over or lumped and exempt
    let f = half();
    let outer = refine_real_julia(&f, 2, 1e-4).unwrap();
    let inner = refine_real_julia(&f, 3, 1e-4).unwrap();
    let inside = |x: f64| {
        let y = x - PI * (x / PI).round();
        outer.intervals.iter().any(|&(u, v)| u - 1e-9 <= y && y <= v + 1e-9)
    };
    let mut checked = 0;
    for &(a, b) in inner.intervals.iter().filter(|(a, b)| b - a >= 1e-4) {
        checked += 1;
        for x in [a, 0.5 * (a + b), b] {
            if (x.abs() - FRAC_PI_2).abs() < 1e-9 {
                continue;
            }
            let y = 0.5 * x.tan();
            if y.abs() > 1e6 {
                continue;
            }
            assert!(inside(y), "{x} -> {y}");
        }
    }
    assert!(checked > 50, "{checked}");
}

#[test]
fn box_count_fixtures() {
    let seg = Primitives::Points(segment_points(C::new(0.0, 0.0), C::new(1.0, 0.5), 200_000));
    let r = box_count(&seg, &log_scales(0.1, 1e-4, 10)).unwrap();
    assert!((r.slope - 1.0).abs() <= 0.02, "segment {}", r.slope);

    let n = 1024;
    let square: Vec<[f64; 2]> = (0..n * n).map(|i| [(i % n) as f64 / n as f64, (i / n) as f64 / n as f64]).collect();
    let scales: Vec<f64> = (1..=8).map(|j| 2f64.powi(-j)).collect();
    let r = box_count(&Primitives::Points(square), &scales).unwrap();
    assert!((r.slope - 2.0).abs() <= 0.02, "square {}", r.slope);

    let mut cantor = vec![(0.0, 1.0)];
    for _ in 0..12 {
        cantor = cantor.iter().flat_map(|&(a, b): &(f64, f64)| {
            let l = (b - a) / 3.0;
            [(a, a + l), (b - l, b)]
        })
        .collect();
    }
    let scales: Vec<f64> = (1..=10).map(|j| 3f64.powi(-j) * (1.0 - 1e-9)).collect();
    let r = box_count(&Primitives::Intervals(cantor), &scales).unwrap();
    assert!((r.slope - 2f64.ln() / 3f64.ln()).abs() <= 0.02, "cantor {}", r.slope);
}

#[test]
fn box_count_rejects_degenerate_input() {
    let pts = Primitives::Points(segment_points(C::new(0.0, 0.0), C::new(1.0, 0.0), 2000));
    let few = Primitives::Points(segment_points(C::new(0.0, 0.0), C::new(1.0, 0.0), 999));
    assert!(matches!(box_count(&few, &log_scales(0.1, 1e-3, 6)), Err(Error::DegenerateScales(_))));
    assert!(matches!(box_count(&pts, &log_scales(0.1, 1e-3, 4)), Err(Error::DegenerateScales(_))));
    assert!(matches!(box_count(&pts, &log_scales(0.1, 2e-3, 6)), Err(Error::DegenerateScales(_))));
}

#[test]
fn cover_slope_settles_with_depth() {
    let f = half();
    let a = real_julia_dimension(&f, 10, 1e-5).unwrap().slope;
    let b = real_julia_dimension(&f, 12, 1e-5).unwrap().slope;
    assert!((a - b).abs() <= 0.02, "{a} vs {b}");
}

fn cantor_points() -> Vec<[f64; 2]> {
    let mut set = vec![(0.0, 1.0)];
    for _ in 0..10 {
        set = set.iter().flat_map(|&(a, b): &(f64, f64)| {
            let l = (b - a) / 3.0;
            [(a, a + l), (b - l, b)]
        })
        .collect();
    }
    set.iter().flat_map(|&(a, b)| [[a, 0.0], [b, 0.0]]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_count_slope_is_rigid_motion_invariant(angle in 0.0f64..std::f64::consts::TAU, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let scales = log_scales(0.1, 1e-3, 8);
        let pts = cantor_points();
        let base = box_count(&Primitives::Points(pts.clone()), &scales).unwrap().slope;
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<[f64; 2]> = pts.iter().map(|&[x, y]| [c * x - s * y + dx, s * x + c * y + dy]).collect();
        let r = box_count(&Primitives::Points(moved), &scales).unwrap().slope;
        prop_assert!((r - base).abs() <= 0.01, "{} vs {}", r, base);
    }
}
