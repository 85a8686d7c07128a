use std::f64::consts::PI;

use psdim_core::regime::{classify_regime, Regime};
use psdim_core::tract::{derivative_growth, tract_cells, tract_fit, tract_ratio_band};
use psdim_core::{Error, MapSpec, SpherePoint, C};

fn tan(re: f64, im: f64) -> MapSpec {
    MapSpec::tangent(C::new(re, im)).unwrap()
}

#[test]
fn half_lambda_is_hyperbolic() {
    let r = classify_regime(&tan(0.5, 0.0), 50, 1e6).unwrap();
    assert_eq!(r.regime, Regime::Hyperbolic, "{}", r.reason);
    let c: Vec<_> = r.attracting_cycles().collect();
    assert_eq!(c.len(), 1);
    assert!(c[0].points[0].norm() < 1e-9);
    assert!((c[0].multiplier - 0.5).abs() < 1e-9);
    assert!(r.fatou_nonempty);
}

#[test]
fn i_pi_is_sub_expanding() {
    let r = classify_regime(&tan(0.0, PI), 20, 1e6).unwrap();
    assert_eq!(r.regime, Regime::SubExpanding, "{}", r.reason);
    let e = r.expansion_check.unwrap();
    assert_eq!(e.p, 1);
    assert!(e.min_deriv > 2.0);
    // both singular orbits land exactly on the repelling fixed point 0
    for o in &r.singular_orbits {
        assert_eq!(o.points[1], SpherePoint::new(0.0, 0.0));
    }
    assert_eq!(r.postsingular(), vec![SpherePoint::new(0.0, 0.0)]);
    assert!(r.safety.separated && r.safety.clear_of_asymptotic && r.safety.isolated_preimages);
    assert!(!r.fatou_nonempty);
}

#[test]
fn lambda_one_is_unsupported() {
    let r = classify_regime(&tan(1.0, 0.0), 50, 1e6).unwrap();
    assert_eq!(r.regime, Regime::Unsupported);
}

#[test]
fn short_orbits_rejected() {
    assert!(matches!(classify_regime(&tan(0.5, 0.0), 5, 1e6), Err(Error::OutOfRange(_))));
}

#[test]
fn singular_orbit_on_a_pole_is_reported() {
    // e^z / (e^z - e^{-z}) has asymptotic value 0, which is a pole
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    let f = MapSpec::mobius_exp(one, zero, one, -one).unwrap();
    let r = classify_regime(&f, 20, 1e6);
    assert_eq!(r.unwrap_err(), Error::OrbitHitPole { value: zero, step: 1 });
}

#[test]
fn tract_base_cell_orientation() {
    let f = tan(0.0, PI);
    let a = f.asymptotic_values()[0];
    assert!((a - C::new(-PI, 0.0)).norm() < 1e-15);
    let cells = tract_cells(&f, a, 0.1, 0, 0).unwrap();
    assert!(cells[0].z.im > 0.0);
    let fz = f.eval_finite(cells[0].z).finite().unwrap();
    assert!(((fz - a).norm() / (0.1 * (1.0 + PI * PI)) - 1.0).abs() < 1e-9);
}

#[test]
fn tract_slope_is_inverse_order() {
    let f = tan(0.0, PI);
    let a = f.asymptotic_values()[0];
    let cells = tract_cells(&f, a, 0.13, 50, 50).unwrap();
    let fit = tract_fit(&cells, f.rho()).unwrap();
    assert!((fit.slope - 1.0).abs() <= 0.05, "{fit:?}");
    let z34 = cells.iter().find(|c| c.n == 3 && c.k == 4).unwrap();
    let r = z34.z.norm() / 5.0;
    assert!(r >= 1.0 / fit.c && r <= fit.c);
}

#[test]
fn not_an_asymptotic_value() {
    let f = tan(0.0, PI);
    assert!(matches!(tract_cells(&f, C::new(1.0, 0.0), 0.1, 3, 3), Err(Error::NotAsymptoticValue(_))));
}

#[test]
fn derivative_grows_like_order_plus_one() {
    for f in [tan(0.0, PI), tan(0.5, 0.0)] {
        let g = derivative_growth(&f, SpherePoint::new(0.3, 0.2), 1000).unwrap();
        assert!((g.slope - 2.0).abs() <= 0.05, "{g:?}");
    }
}

#[test]
fn tract_ratio_is_comparable() {
    let f = tan(0.0, PI);
    for a in f.asymptotic_values() {
        let b = tract_ratio_band(&f, a, 0.1, 1000, 7).unwrap();
        assert!(b.c <= 4.0, "{b:?}");
    }
}
