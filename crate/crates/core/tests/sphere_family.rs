use std::f64::consts::PI;

use proptest::prelude::*;
use psdim_core::family::lattice_tail;
use psdim_core::sphere::{schwarzian, schwarzian_fd, spherical_derivative, Identity, Meromorphic, MobiusMap};
use psdim_core::*;

#[test]
fn chordal_examples() {
    let o = SpherePoint::new(0.0, 0.0);
    assert_eq!(chordal_dist(o, SpherePoint::Infinity), 1.0);
    assert_eq!(chordal_dist(SpherePoint::new(2.0, 3.0), SpherePoint::new(2.0, 3.0)), 0.0);
    let d = chordal_dist(o, SpherePoint::new(1.0, 0.0));
    assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn xyz_round_trip() {
    for z in [C::new(0.3, -2.0), C::new(1e6, 3.0), C::new(0.0, 0.0), C::new(-0.9, 0.1)] {
        let p = SpherePoint::Finite(z);
        let back = SpherePoint::from_xyz(p.to_xyz()).finite().unwrap();
        assert!((back - z).norm() <= 1e-12 * (1.0 + z.norm_sqr()));
    }
    assert_eq!(SpherePoint::from_xyz([0.0, 0.0, 1.0]), SpherePoint::Infinity);
}

#[test]
fn xyz_distance_is_chordal() {
    let p = SpherePoint::new(0.7, -1.3);
    let q = SpherePoint::new(-4.0, 2.5);
    let (a, b) = (p.to_xyz(), q.to_xyz());
    let e = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    assert!((e - chordal_dist(p, q)).abs() < 1e-15);
}

#[test]
fn identity_is_isometric() {
    for z in [SpherePoint::new(3.0, 1.0), SpherePoint::Infinity] {
        assert_eq!(spherical_derivative(&Identity, z).unwrap(), 1.0);
    }
}

#[test]
fn mobius_schwarzian_vanishes() {
    let m = MobiusMap::new(C::new(1.0, 2.0), C::new(0.5, 0.0), C::new(-1.0, 0.3), C::new(2.0, 1.0))
        .unwrap();
    let s = schwarzian(&m, SpherePoint::new(0.4, 0.2), 1e-3).unwrap();
    assert!(s.norm() < 1e-12);
}

#[test]
fn rotation_is_isometric() {
    // z -> (z - b)/(conj(b) z + 1) is a rotation of the sphere
    let b = C::new(0.3, 0.8);
    let m = MobiusMap::new(C::new(1.0, 0.0), -b, b.conj(), C::new(1.0, 0.0)).unwrap();
    for z in [SpherePoint::new(2.0, -1.0), SpherePoint::Infinity, SpherePoint::new(0.0, 0.1)] {
        assert!((m.sigma_deriv(z).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn degenerate_mobius_rejected() {
    let one = C::new(1.0, 0.0);
    assert!(MobiusMap::new(one, one, one, one).is_err());
}

#[test]
fn finite_difference_schwarzian_of_exp() {
    // S(exp(k z)) = -k^2 / 2
    let k = C::new(0.0, 2.0);
    let s = schwarzian_fd(|z| (k * z).exp(), C::new(0.3, 0.1), 1e-2).unwrap();
    assert!((s - C::new(2.0, 0.0)).norm() < 1e-6);
}

fn tan1() -> MapSpec {
    MapSpec::tangent(C::new(1.0, 0.0)).unwrap()
}

#[test]
fn eval_examples() {
    let f = tan1();
    let v = f.eval_finite(C::new(PI / 4.0, 0.0)).finite().unwrap();
    assert!((v - C::new(1.0, 0.0)).norm() < 1e-15);
    let g = MapSpec::tangent(C::new(0.3, -2.0)).unwrap();
    assert_eq!(g.eval_finite(C::new(PI / 2.0, 0.0)), SpherePoint::Infinity);
    let h = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    assert_eq!(h.eval_finite(C::new(PI, 0.0)), SpherePoint::Finite(C::new(0.0, 0.0)));
    assert_eq!(f.eval(SpherePoint::Infinity), Err(Error::EssentialSingularity));
}

#[test]
fn eval_matches_library_tan() {
    let l = C::new(0.7, 0.4);
    let f = MapSpec::tangent(l).unwrap();
    for z in [C::new(0.3, 0.2), C::new(-2.1, -0.7), C::new(5.0, 3.0), C::new(1.0, -30.0)] {
        let v = f.eval_finite(z).finite().unwrap();
        let r = l * z.tan();
        assert!((v - r).norm() <= 1e-13 * (1.0 + r.norm()), "{z}: {v} vs {r}");
    }
}

#[test]
fn mobius_exp_matches_formula() {
    let (a, b, c, d) = (C::new(1.0, 0.5), C::new(-0.3, 1.0), C::new(0.2, 0.0), C::new(1.0, -1.0));
    let f = MapSpec::mobius_exp(a, b, c, d).unwrap();
    for z in [C::new(0.3, 0.2), C::new(-1.1, 2.7), C::new(4.0, -1.0)] {
        let (e, ei) = (z.exp(), (-z).exp());
        let r = (a * e + b * ei) / (c * e + d * ei);
        let v = f.eval_finite(z).finite().unwrap();
        assert!((v - r).norm() <= 1e-13 * (1.0 + r.norm()));
    }
    let s = schwarzian(&f, SpherePoint::new(0.1, 0.3), 1e-3).unwrap();
    assert!((s - C::new(-2.0, 0.0)).norm() < 1e-10);
}

#[test]
fn spherical_derivative_examples() {
    let f = tan1();
    assert!((spherical_derivative(&f, SpherePoint::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    for k in [-3i32, 1, 2, 5] {
        let z = k as f64 * PI;
        let d = spherical_derivative(&f, SpherePoint::new(z, 0.0)).unwrap();
        assert!((d - (1.0 + z * z)).abs() < 1e-12 * (1.0 + z * z));
    }
    assert!(matches!(
        spherical_derivative(&f, SpherePoint::new(PI / 2.0, 0.0)),
        Err(Error::PoleAt(_))
    ));
}

#[test]
fn pole_chart_value() {
    // |f'|_σ at a pole is (1+|p|^2)/|lambda|
    let l = C::new(0.5, 0.0);
    let f = MapSpec::tangent(l).unwrap();
    let p = SpherePoint::new(PI / 2.0, 0.0);
    let d = f.sigma_deriv(p).unwrap();
    let want = (1.0 + PI * PI / 4.0) / 0.5;
    assert!((d - want).abs() < 1e-12 * want);
}

#[test]
fn preimage_examples() {
    let f = tan1();
    let pol = TruncationPolicy::with_k_max(5);
    let s = f.preimages(SpherePoint::new(0.0, 0.0), &pol).unwrap();
    assert_eq!(s.branches.len(), 11);
    for b in &s.branches {
        assert!((b.z - C::new(b.k as f64 * PI, 0.0)).norm() < 1e-14 * (1.0 + b.z.norm()));
    }
    assert_eq!(s.branches[0].k, 0);
    let s = f.preimages(SpherePoint::new(1.0, 0.0), &pol).unwrap();
    for b in &s.branches {
        assert!((b.z - C::new(PI / 4.0 + b.k as f64 * PI, 0.0)).norm() < 1e-13);
    }
    let s = f.preimages(SpherePoint::Infinity, &pol).unwrap();
    for b in &s.branches {
        assert!((b.z - C::new(PI / 2.0 + b.k as f64 * PI, 0.0)).norm() < 1e-13);
        assert_eq!(f.eval_finite(b.z), SpherePoint::Infinity);
    }
}

#[test]
fn preimage_errors() {
    let f = tan1();
    let pol = TruncationPolicy::default();
    assert_eq!(f.preimages(SpherePoint::new(0.0, 1.0), &pol).unwrap_err(), Error::BranchPointConflict);
    assert!(matches!(
        f.preimages(SpherePoint::new(1e-13, 1.0), &pol),
        Err(Error::AsymptoticValue(_))
    ));
}

#[test]
fn sorted_and_consistent_derivatives() {
    let f = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    let s = f.preimages(SpherePoint::new(0.4, -1.2), &TruncationPolicy::with_k_max(20)).unwrap();
    for w in s.branches.windows(2) {
        assert!(w[0].z.norm() <= w[1].z.norm());
    }
    for b in &s.branches {
        let d = f.sigma_deriv(SpherePoint::Finite(b.z)).unwrap();
        assert!((d - b.sigma_deriv).abs() < 1e-9 * d);
    }
}

#[test]
fn tail_brackets_brute_force() {
    let base = C::new(0.4, 0.9);
    let period = C::new(PI, 0.0);
    for t in [0.6, 1.0, 2.5] {
        let (lo, hi) = lattice_tail(base, period, 10, t);
        let brute: f64 = (11..200_000i64)
            .flat_map(|k| [k, -k])
            .map(|k| (1.0 + (base + period * k as f64).norm_sqr()).powf(-t))
            .sum();
        // the brute sum itself misses a tail beyond 2e5 for small t
        let (rest_lo, _) = lattice_tail(base, period, 199_999, t);
        assert!(lo <= brute + rest_lo && brute <= hi, "t={t}: {lo} {brute} {hi}");
    }
    assert_eq!(lattice_tail(base, period, 10, 0.5).1, f64::INFINITY);
}

#[test]
fn mobius_exp_preimages_round_trip() {
    let f = MapSpec::mobius_exp(C::new(2.0, 0.0), C::new(0.0, 1.0), C::new(1.0, 0.0), C::new(1.0, 1.0))
        .unwrap();
    let w = SpherePoint::new(0.3, 0.4);
    let s = f.preimages(w, &TruncationPolicy::with_k_max(6)).unwrap();
    for b in &s.branches {
        assert!(chordal_dist(f.eval_finite(b.z), w) < 1e-12);
    }
}

#[test]
fn asymptotic_values_of_tangent() {
    let l = C::new(0.5, 0.25);
    let f = MapSpec::tangent(l).unwrap();
    let av = f.asymptotic_values();
    assert!((av[0] - C::i() * l).norm() < 1e-15);
    assert!((av[1] + C::i() * l).norm() < 1e-15);
}

fn away_from_poles(re: f64, im: f64) -> Option<SpherePoint> {
    let d = (re - PI / 2.0).rem_euclid(PI).min(PI - (re - PI / 2.0).rem_euclid(PI));
    (d.hypot(im) > 0.05).then_some(SpherePoint::new(re, im))
}

proptest! {
    #[test]
    fn tangent_schwarzian_is_two(lr in -3.0f64..3.0, li in -3.0f64..3.0, re in -10.0f64..10.0, im in -3.0f64..3.0) {
        prop_assume!(lr.hypot(li) > 0.05);
        let Some(z) = away_from_poles(re, im) else { return Ok(()) };
        let f = MapSpec::tangent(C::new(lr, li)).unwrap();
        let s = schwarzian(&f, z, 1e-3).unwrap();
        prop_assert!((s - C::new(2.0, 0.0)).norm() <= 1e-8, "{}", s);
    }

    #[test]
    fn schwarzian_is_invariant_under_post_composition(re in -3.0f64..3.0, im in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let Some(z) = away_from_poles(re, im) else { return Ok(()) };
        let f = MapSpec::tangent(C::new(0.4, 1.1)).unwrap();
        let m = MobiusMap::new(C::new(1.0, 0.0), C::new(b, 0.0), C::new(0.0, c), C::new(1.0, 0.0)).unwrap();
        let g = psdim_core::sphere::Composed { outer: m, inner: &f };
        if let (Ok(a), Ok(s)) = (schwarzian(&f, z, 1e-3), schwarzian(&g, z, 1e-3)) {
            prop_assert!((a - s).norm() <= 1e-8 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn chordal_distance_is_a_bounded_metric(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -5.0f64..5.0, d in -5.0f64..5.0, e in -1.0f64..1.0, g in -1.0f64..1.0) {
        let (p, q, r) = (SpherePoint::new(a, b), SpherePoint::new(c, d), SpherePoint::new(e, g));
        prop_assert_eq!(chordal_dist(p, q), chordal_dist(q, p));
        prop_assert!(chordal_dist(p, q) <= 1.0 + 1e-15);
        prop_assert!(chordal_dist(p, r) <= chordal_dist(p, q) + chordal_dist(q, r) + 1e-15);
    }

    #[test]
    fn preimages_map_back(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let f = MapSpec::tangent(C::new(0.0, PI)).unwrap();
        let w = SpherePoint::new(re, im);
        prop_assume!(f.asymptotic_values().iter().all(|a| (a - C::new(re, im)).norm() > 1e-3));
        let s = f.preimages(w, &TruncationPolicy::with_k_max(8)).unwrap();
        for b in &s.branches {
            prop_assert!(chordal_dist(f.eval(SpherePoint::Finite(b.z)).unwrap(), w) < 1e-10);
        }
    }
}

#[test]
fn orbit_derivative_is_a_product() {
    let f = MapSpec::tangent(C::new(0.7, 0.2)).unwrap();
    let z = SpherePoint::new(0.3, 0.4);
    let one = psdim_core::sphere::orbit_spherical_derivative(&f, z, 1).unwrap();
    assert!((one - spherical_derivative(&f, z).unwrap()).abs() < 1e-14 * one);
    let three = psdim_core::sphere::orbit_spherical_derivative(&f, z, 3).unwrap();
    let (z1, z2) = (f.eval(z).unwrap(), f.eval(f.eval(z).unwrap()).unwrap());
    let want = one * f.sigma_deriv(z1).unwrap() * f.sigma_deriv(z2).unwrap();
    assert!((three - want).abs() < 1e-12 * want);
    // neutral fixed point of tan
    let g = MapSpec::tangent(C::new(1.0, 0.0)).unwrap();
    let d = psdim_core::sphere::orbit_spherical_derivative(&g, SpherePoint::new(0.0, 0.0), 5).unwrap();
    assert!((d - 1.0).abs() < 1e-14);
}
