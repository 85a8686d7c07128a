//! Quick checks of the exactly known cases of every module.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use psdim_core::bowen::{bounds_check, pressure_root, ulam_pressure, RootParams};
use psdim_core::invariant::*;
use psdim_core::measure::*;
use psdim_core::poincare::poincare_partial;
use psdim_core::pressure::pressure_estimate;
use psdim_core::raster::{box_count, classify_point, log_scales, refine_real_julia, segment_points, PointClass, Primitives};
use psdim_core::sphere::{orbit_spherical_derivative, schwarzian, spherical_derivative, Composed, Identity, Meromorphic, MobiusMap};
use psdim_core::tract::tract_cells;
use psdim_core::transfer::{distortion_probe, transfer_one, uniform_bound_scan};
use psdim_core::tree::TreeParams;
use psdim_core::*;
use serde_json::{json, Value};

use crate::commands::Outcome;
use crate::output::{record, Uncertainty};

struct Checks {
    records: Vec<Value>,
}

impl Checks {
    fn run(&mut self, module: &str, name: &str, check: impl FnOnce() -> Result<(bool, Value)>) {
        let (pass, value) = match check() {
            Ok(r) => r,
            Err(e) => (false, json!({ "error": e.name(), "message": e.to_string() })),
        };
        self.records.push(record("selftest", json!(pass), Uncertainty::Exact, json!({}), json!({ "module": module, "check": name, "observed": value })));
    }
}

fn tan(re: f64, im: f64) -> MapSpec {
    MapSpec::tangent(C::new(re, im)).expect("valid parameter")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn selftest(seed: u64) -> Result<Outcome> {
    let mut c = Checks { records: Vec::new() };
    let pol = TruncationPolicy::default();
    let tp = TreeParams::default();
    let o = SpherePoint::new(0.0, 0.0);

    c.run("sphere-geom", "chordal distance 0 to infinity", || {
        let d = chordal_dist(o, SpherePoint::Infinity);
        Ok((d == 1.0, json!(d)))
    });
    c.run("sphere-geom", "chordal distance to itself", || {
        let z = SpherePoint::new(2.0, -3.0);
        Ok((chordal_dist(z, z) == 0.0, json!(chordal_dist(z, z))))
    });
    c.run("sphere-geom", "chordal distance 0 to 1", || {
        let d = chordal_dist(o, SpherePoint::new(1.0, 0.0));
        Ok((close(d, FRAC_1_SQRT_2, 1e-15), json!(d)))
    });
    c.run("sphere-geom", "identity is isometric", || {
        let d = spherical_derivative(&Identity, SpherePoint::new(3.0, 1.0))?;
        Ok((d == 1.0, json!(d)))
    });
    c.run("sphere-geom", "tan at 0", || {
        let d = spherical_derivative(&tan(1.0, 0.0), o)?;
        Ok((close(d, 1.0, 1e-15), json!(d)))
    });
    c.run("sphere-geom", "one-step orbit derivative", || {
        let f = tan(0.7, 0.2);
        let z = SpherePoint::new(0.3, 0.4);
        let (a, b) = (orbit_spherical_derivative(&f, z, 1)?, spherical_derivative(&f, z)?);
        Ok((close(a, b, 1e-14 * b), json!([a, b])))
    });
    c.run("sphere-geom", "orbit derivative at a neutral fixed point", || {
        let d = orbit_spherical_derivative(&tan(1.0, 0.0), o, 5)?;
        Ok((close(d, 1.0, 1e-14), json!(d)))
    });
    let m = MobiusMap::new(C::new(1.0, 2.0), C::new(0.5, 0.0), C::new(-1.0, 0.3), C::new(2.0, 1.0))?;
    c.run("sphere-geom", "Mobius Schwarzian vanishes", || {
        let s = schwarzian(&m, SpherePoint::new(0.4, 0.2), 1e-3)?;
        Ok((s.norm() < 1e-10, json!(s.norm())))
    });
    c.run("sphere-geom", "Schwarzian is Mobius invariant", || {
        let f = tan(0.4, 1.1);
        let z = SpherePoint::new(0.3, 0.25);
        let a = schwarzian(&f, z, 1e-3)?;
        let b = schwarzian(&Composed { outer: m, inner: &f }, z, 1e-3)?;
        Ok(((a - b).norm() <= 1e-8, json!([a.re, a.im, b.re, b.im])))
    });

    c.run("map-family", "tan at pi/4", || {
        let v = tan(1.0, 0.0).eval(SpherePoint::new(FRAC_PI_4, 0.0))?.finite().unwrap_or_default();
        Ok(((v - C::new(1.0, 0.0)).norm() < 1e-15, json!([v.re, v.im])))
    });
    c.run("map-family", "pole at pi/2", || {
        let v = tan(0.3, 0.7).eval(SpherePoint::new(FRAC_PI_2, 0.0))?;
        Ok((v.is_infinite(), json!(v.is_infinite())))
    });
    for (name, w, offset) in [
        ("preimages of 0", o, 0.0),
        ("preimages of 1", SpherePoint::new(1.0, 0.0), FRAC_PI_4),
        ("preimages of infinity", SpherePoint::Infinity, FRAC_PI_2),
    ] {
        c.run("map-family", name, || {
            let p = tan(1.0, 0.0).preimages(w, &pol)?;
            let worst = p
                .branches
                .iter()
                .map(|b| (b.z - C::new(offset + b.k as f64 * PI, 0.0)).norm())
                .fold(0.0, f64::max);
            Ok((worst < 1e-12 && !p.branches.is_empty(), json!(worst)))
        });
    }
    c.run("map-family", "neutral fixed point is unsupported", || {
        let r = classify_regime(&tan(1.0, 0.0), 20, 1e6)?;
        Ok((r.regime == Regime::Unsupported, json!(format!("{:?}", r.regime))))
    });
    c.run("map-family", "tract base cell orientation", || {
        let f = tan(0.0, PI);
        let a = f.asymptotic_values()[0];
        let cells = tract_cells(&f, a, 0.1, 0, 0)?;
        Ok((cells[0].z.im > 0.0, json!(cells[0].z.im)))
    });

    let ipi = tan(0.0, PI);
    let half = tan(0.5, 0.0);
    c.run("transfer-op", "large exponent is dominated by one branch", || {
        let f = tan(1.0, 0.0);
        let w = SpherePoint::new(0.3, 0.0);
        let t = 40.0;
        let v = transfer_one(&f, t, w, &pol)?;
        let top = f.preimages(w, &pol)?.branches.iter().map(|b| b.sigma_deriv.powf(-t)).fold(0.0, f64::max);
        Ok((close(v.midpoint() / top, 1.0, 1e-6), json!([v.midpoint(), top])))
    });
    c.run("transfer-op", "exponent below threshold", || {
        let e = uniform_bound_scan(&ipi, 0.4, &[o], &pol).unwrap_err();
        Ok((matches!(e, Error::BelowBorelThreshold(_)), json!(e.name())))
    });
    c.run("transfer-op", "first pressure term", || {
        let w = SpherePoint::new(0.3, 0.2);
        let p = pressure_estimate(&half, 1.0, w, 3, &pol, &tp)?;
        let one = transfer_one(&half, 1.0, w, &pol)?.midpoint().ln();
        Ok((close(p.per_depth[0], one, 1e-6), json!([p.per_depth[0], one])))
    });
    c.run("transfer-op", "distortion of the empty composition", || {
        let r = distortion_probe(&ipi, SpherePoint::new(0.9, 0.6), 0.01, 0, 20, seed)?;
        Ok((r.k == 1.0, json!(r.k)))
    });
    c.run("transfer-op", "distortion vanishes with the disk", || {
        let a = distortion_probe(&ipi, SpherePoint::new(0.9, 0.6), 1e-2, 3, 50, seed)?;
        let b = distortion_probe(&ipi, SpherePoint::new(0.9, 0.6), 1e-5, 3, 50, seed)?;
        Ok((b.k <= a.k && b.k - 1.0 < 1e-3, json!([a.k, b.k])))
    });

    c.run("poincare-measure", "first Poincare term is the sum over poles", || {
        let s = poincare_partial(&ipi, 1.3, 1, &pol, &tp)?;
        let op = transfer_one(&ipi, 1.3, SpherePoint::Infinity, &pol)?;
        let v = s.log_terms[0].exp();
        Ok((op.low() * (1.0 - 1e-12) <= v && v <= op.high() * (1.0 + 1e-12), json!([v, op.low(), op.high()])))
    });
    c.run("poincare-measure", "Poincare series below threshold", || {
        let e = poincare_partial(&half, 0.5, 3, &pol, &tp).unwrap_err();
        Ok((matches!(e, Error::BelowBorelThreshold(_)), json!(e.name())))
    });
    c.run("poincare-measure", "hyperbolic bracket skips the sub-expanding bound", || {
        let reg = classify_regime(&half, 20, 1e6)?;
        let grid: Vec<f64> = (0..8).map(|i| 0.6 + 0.2 * i as f64).collect();
        let e = psdim_core::poincare::estimate_h(&half, &grid, 8, &pol, &tp, &Default::default(), Some(&reg))?;
        Ok((!e.sub_expanding_bound && 0.5 < e.bracket.0 && e.bracket.1 <= 2.0, json!(e.bracket)))
    });
    c.run("poincare-measure", "depth-one atoms sit on poles", || {
        let m = build_ps_measure(&ipi, 2.05, 2.0, 1, &pol, &TreeParams { cell: 1e-4, ..Default::default() })?;
        let worst = m
            .atoms
            .iter()
            .map(|a| {
                let k = ((a.z.re - FRAC_PI_2) / PI).round();
                (a.z - C::new(FRAC_PI_2 + k * PI, 0.0)).norm()
            })
            .fold(0.0, f64::max);
        Ok((worst < 1e-12, json!(worst)))
    });
    let m8 = build_ps_measure(&ipi, 2.05, 2.0, 8, &pol, &tp)?;
    c.run("poincare-measure", "measure is normalized", || {
        let t = m8.total_mass();
        Ok((close(t, 1.0, 1e-9), json!(t)))
    });
    c.run("poincare-measure", "identity cell ratio", || {
        let cell = Cell { centre: SpherePoint::new(FRAC_PI_2, 0.0), radius: 0.2 };
        let r = cell_ratio(&Identity, &m8, &cell, 1.7, |i| {
            let z = m8.atoms[i].z;
            cell.contains(z.into()).then_some(z)
        }, false)?;
        Ok((r.ratio == 1.0, json!(r.ratio)))
    });
    c.run("poincare-measure", "tail mass at the extremes", || {
        let min = m8.atoms.iter().map(|a| a.z.norm()).fold(f64::INFINITY, f64::min);
        let max = m8.atoms.iter().map(|a| a.z.norm()).fold(0.0, f64::max);
        let p = tightness_profile(&m8, &[0.5 * min, 2.0 * max]);
        Ok((close(p.mass[0], 1.0, 1e-9) && p.mass[1] == 0.0, json!(p.mass)))
    });

    c.run("bowen-dim", "degenerate tolerance evaluates once", || {
        let rp = RootParams { depth: 6, bisect_tol: 2.0, ..Default::default() };
        let r = pressure_root(&half, None, &rp, &pol, &tp)?;
        Ok((r.evaluations.len() == 1 && r.bracket == (0.52, 2.0), json!(r.bracket)))
    });
    c.run("bowen-dim", "single-bin Ulam is the transfer operator", || {
        let u = ulam_pressure(&half, 1.0, 1, &pol)?;
        let op = transfer_one(&half, 1.0, o, &pol)?.midpoint().ln();
        Ok((close(u.log_eigenvalue, op, 1e-12), json!([u.log_eigenvalue, op])))
    });
    c.run("bowen-dim", "bounds gating", || {
        let a = bounds_check(1.0, 0.8, Regime::Hyperbolic);
        let b = bounds_check(1.0, 0.4, Regime::SubExpanding);
        Ok((a.pass && a.checks.len() == 1 && !b.pass, json!([a.pass, b.pass])))
    });

    c.run("invariant-lab", "boundary of the finiteness criterion", || {
        let v = finiteness_criterion(1.0, 1.5)?;
        Ok((v == Finiteness::Infinite, json!(format!("{v:?}"))))
    });
    let reg = classify_regime(&ipi, 20, 1e6)?;
    let a = Cell { centre: SpherePoint::new(0.9, 0.6), radius: 0.05 };
    let b = Cell { centre: SpherePoint::new(-0.8, -0.7), radius: 0.05 };
    c.run("invariant-lab", "Martens ratio of a cell with itself", || {
        let r = martens_ratio(&ipi, &m8, &reg, a, a, 6)?;
        Ok((r.ratios.iter().all(|&x| x == 1.0), json!(r.limit)))
    });
    c.run("invariant-lab", "Martens ratio swap", || {
        let ab = martens_ratio(&ipi, &m8, &reg, a, b, 8)?;
        let ba = martens_ratio(&ipi, &m8, &reg, b, a, 8)?;
        let inv = 1.0 / ab.limit;
        let pass = (ba.limit - inv).abs() <= ba.error + ab.error * inv * inv;
        Ok((pass, json!([ab.limit, ba.limit])))
    });
    c.run("invariant-lab", "decay probe protocol", || {
        let d = gamma_decay_probe(&ipi, &m8, &NestedDomainSpec::from_regime(&reg), 8)?;
        let pass = d.masses[0] <= 1.0 && d.masses.iter().all(|&x| x >= 0.0) && d.atoms.iter().all(|&n| n >= 30);
        Ok((pass, json!(d.gamma)))
    });
    let domain = InducedDomain::from_regime(&ipi, &reg);
    c.run("invariant-lab", "one-step return", || {
        let z = SpherePoint::new(0.9, 0.6);
        let r = induced_return(&ipi, &domain, z, 100)?;
        Ok((r.tau == 1 && r.point == ipi.eval(z)?, json!(r.tau)))
    });
    c.run("invariant-lab", "returns compose by the chain rule", || {
        let z = SpherePoint::new(0.9, 0.6);
        let r1 = induced_return(&ipi, &domain, z, 100)?;
        let r2 = induced_return(&ipi, &domain, r1.point, 100)?;
        let direct = psdim_core::sphere::orbit_log_spherical_derivative(&ipi, z, r1.tau + r2.tau)?;
        let sum = r1.log_deriv + r2.log_deriv;
        Ok((close(sum, direct, 1e-9), json!([sum, direct])))
    });
    c.run("invariant-lab", "Lyapunov seeds agree", || {
        let l1 = lyapunov_induced(&ipi, &m8, &domain, 100, 50, 10_000, seed)?;
        let l2 = lyapunov_induced(&ipi, &m8, &domain, 100, 50, 10_000, seed.wrapping_add(1))?;
        let tol = 2.0 * (l1.std_err.powi(2) + l2.std_err.powi(2)).sqrt();
        Ok(((l1.chi - l2.chi).abs() <= tol, json!([l1.chi, l2.chi, tol])))
    });

    c.run("julia-raster", "pole is in the Julia set", || {
        let reg = classify_regime(&half, 20, 1e6)?;
        let p = classify_point(&half, SpherePoint::new(FRAC_PI_2, 0.0), 200, &reg);
        Ok((p == PointClass::Julia, json!(format!("{p:?}"))))
    });
    c.run("julia-raster", "depth zero is the fundamental pair", || {
        let r = refine_real_julia(&half, 0, 1e-3)?;
        let x = r.fixed_point;
        Ok((r.intervals == vec![(-FRAC_PI_2, -x), (x, FRAC_PI_2)], json!(r.intervals.len())))
    });
    c.run("julia-raster", "refinement shrinks the cover", || {
        let lens = (0..4).map(|d| refine_real_julia(&half, d, 1e-3).map(|r| r.total_length())).collect::<Result<Vec<f64>>>()?;
        Ok((lens.windows(2).all(|w| w[1] < w[0]), json!(lens)))
    });
    c.run("julia-raster", "segment box count", || {
        let r = box_count(&Primitives::Points(segment_points(C::new(0.0, 0.0), C::new(1.0, 0.5), 100_000)), &log_scales(0.1, 1e-4, 10))?;
        Ok((close(r.slope, 1.0, 0.02), json!(r.slope)))
    });
    c.run("julia-raster", "square box count", || {
        let n = 1024;
        let pts: Vec<[f64; 2]> = (0..n * n).map(|i| [(i % n) as f64 / n as f64, (i / n) as f64 / n as f64]).collect();
        let scales: Vec<f64> = (1..=8).map(|j| 2f64.powi(-j)).collect();
        let r = box_count(&Primitives::Points(pts), &scales)?;
        Ok((close(r.slope, 2.0, 0.02), json!(r.slope)))
    });

    Ok(Outcome { records: c.records, ..Default::default() })
}
