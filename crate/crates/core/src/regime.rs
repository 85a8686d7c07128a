//! Dynamical regime of a family instance, read off the orbits of its
//! asymptotic values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MapSpec;
use crate::sphere::{chordal_dist, orbit_spherical_derivative, Meromorphic, SpherePoint, C};
use crate::transfer::chordal_offset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Every asymptotic value is attracted to an attracting cycle.
    Hyperbolic,
    /// Singular orbits are bounded, non-recurrent and `f` expands on them.
    SubExpanding,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularOrbit {
    pub value: C,
    /// `a, f(a), f^2(a), ...`
    pub points: Vec<SpherePoint>,
    /// Index into [`RegimeReport::cycles`] of the cycle the orbit settles on.
    pub cycle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub points: Vec<C>,
    pub multiplier: f64,
}

impl Cycle {
    pub fn is_attracting(&self) -> bool {
        self.multiplier < 1.0 - MULTIPLIER_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub p: usize,
    /// Minimum of `|(f^p)'|_σ` over the sample grid around the postsingular set.
    pub min_deriv: f64,
}

/// Outcome of the numerical check of the safety-radius conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyChecks {
    /// `4T` below the distance between asymptotic values.
    pub separated: bool,
    /// The `4T` neighbourhood of the postsingular set misses the asymptotic values.
    pub clear_of_asymptotic: bool,
    /// No preimage of the singular set sits near it except the set itself,
    /// verified over branches `|k| <= verified_k`.
    pub isolated_preimages: bool,
    pub verified_k: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub singular_orbits: Vec<SingularOrbit>,
    pub cycles: Vec<Cycle>,
    /// Chordal safety radius `T`.
    pub safety_radius: f64,
    pub safety: SafetyChecks,
    pub expansion_check: Option<ExpansionCheck>,
    /// For this class a Fatou component needs an attracting cycle, so this
    /// is the same as having found one.
    pub fatou_nonempty: bool,
    pub reason: String,
}

impl RegimeReport {
    /// Distinct points `f^j(a)`, `j >= 1`, over all singular orbits.
    pub fn postsingular(&self) -> Vec<SpherePoint> {
        let mut out: Vec<SpherePoint> = Vec::new();
        for o in &self.singular_orbits {
            for &p in &o.points[1..] {
                if out.iter().all(|&q| chordal_dist(p, q) > DISTINCT_TOL) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn attracting_cycles(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(|c| c.is_attracting())
    }
}

const MULTIPLIER_TOL: f64 = 1e-6;
const CYCLE_CLOSE: f64 = 1e-10;
const MAX_PERIOD: usize = 20;
const DISTINCT_TOL: f64 = 1e-9;
const MAX_EXPANSION_P: usize = 8;
const SAFETY_CHECK_K: u64 = 20;

pub fn classify_regime(f: &MapSpec, orbit_len: usize, escape_box: f64) -> Result<RegimeReport> {
    if orbit_len < 10 {
        return Err(Error::OutOfRange("orbit_len must be at least 10".into()));
    }
    let mut orbits = Vec::new();
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut indifferent = false;
    let mut escaped = false;
    for a in f.asymptotic_values() {
        let mut points = vec![SpherePoint::Finite(a)];
        let mut cur = a;
        let budget = 20 * orbit_len.max(MAX_PERIOD);
        let mut tail: Vec<C> = vec![a];
        let mut cycle = None;
        for step in 1..=budget {
            let next = match f.eval_finite(cur) {
                SpherePoint::Finite(z) => z,
                SpherePoint::Infinity => return Err(Error::OrbitHitPole { value: a, step }),
            };
            if step <= orbit_len {
                points.push(SpherePoint::Finite(next));
            }
            if next.norm() > escape_box {
                escaped = true;
                break;
            }
            cur = next;
            tail.push(cur);
            if tail.len() > MAX_PERIOD + 1 {
                tail.remove(0);
            }
            if step >= orbit_len.min(MAX_PERIOD) {
                if let Some(c) = detect_cycle(f, &tail) {
                    let idx = match cycles
                        .iter()
                        .position(|k| k.points.iter().any(|&p| (p - c.points[0]).norm() < 1e-6))
                    {
                        Some(i) => i,
                        None => {
                            cycles.push(c);
                            cycles.len() - 1
                        }
                    };
                    cycle = Some(idx);
                    if step >= orbit_len {
                        break;
                    }
                }
            }
        }
        if let Some(i) = cycle {
            if (cycles[i].multiplier - 1.0).abs() <= MULTIPLIER_TOL {
                indifferent = true;
            }
        }
        orbits.push(SingularOrbit { value: a, points, cycle });
    }

    let (safety_radius, safety) = safety_radius(f, &orbits);
    let attracted = |o: &SingularOrbit| o.cycle.map(|i| cycles[i].is_attracting()).unwrap_or(false);
    let fatou_nonempty = cycles.iter().any(|c| c.is_attracting());
    let mut report = RegimeReport {
        regime: Regime::Unsupported,
        singular_orbits: orbits.clone(),
        cycles: cycles.clone(),
        safety_radius,
        safety,
        expansion_check: None,
        fatou_nonempty,
        reason: String::new(),
    };
    if indifferent {
        report.reason = "singular orbit converges to an indifferent cycle".into();
        return Ok(report);
    }
    if orbits.iter().all(attracted) {
        report.regime = Regime::Hyperbolic;
        report.reason = "all asymptotic values are attracted to attracting cycles".into();
        return Ok(report);
    }
    if escaped {
        report.reason = format!("a singular orbit leaves the box of radius {escape_box}");
        return Ok(report);
    }
    let av = f.asymptotic_values();
    let recurrent = orbits.iter().filter(|o| !attracted(o)).any(|o| {
        o.points[1..]
            .iter()
            .any(|&p| av.iter().any(|&a| chordal_dist(p, a.into()) < 1e-6))
    });
    if recurrent {
        report.reason = "a singular orbit returns to an asymptotic value".into();
        return Ok(report);
    }
    let repelling: Vec<SpherePoint> = {
        let mut out: Vec<SpherePoint> = Vec::new();
        for o in orbits.iter().filter(|o| !attracted(o)) {
            for &p in &o.points[1..] {
                if out.iter().all(|&q| chordal_dist(p, q) > DISTINCT_TOL) {
                    out.push(p);
                }
            }
        }
        out
    };
    match expansion_check(f, &repelling, safety_radius, orbit_len.min(MAX_EXPANSION_P)) {
        Some(e) => {
            report.regime = Regime::SubExpanding;
            report.expansion_check = Some(e);
            report.reason = format!("|(f^{})'|_σ > 2 near the postsingular set", e.p);
        }
        None => {
            report.reason = "no iterate expands by 2 near the postsingular set".into();
        }
    }
    Ok(report)
}

/// Look for `z_n ≈ z_{n-p}` at the end of the window and measure the cycle's multiplier.
fn detect_cycle(f: &MapSpec, tail: &[C]) -> Option<Cycle> {
    let n = tail.len() - 1;
    let last = tail[n];
    for p in 1..=MAX_PERIOD.min(n) {
        let prev = tail[n - p];
        if chordal_dist(last.into(), prev.into()) >= CYCLE_CLOSE {
            continue;
        }
        let pts: Vec<C> = tail[n - p + 1..=n].to_vec();
        let mut mult = 1.0;
        for &z in &pts {
            mult *= f.jet(z).ok()?.d1.norm();
        }
        return Some(Cycle { points: pts, multiplier: mult });
    }
    None
}

fn expansion_check(f: &MapSpec, post: &[SpherePoint], radius: f64, p_max: usize) -> Option<ExpansionCheck> {
    let mut grid = Vec::new();
    for &p in post {
        grid.push(p);
        for r in [0.5 * radius, radius] {
            for j in 0..8 {
                grid.push(chordal_offset(p, r, j as f64 * std::f64::consts::FRAC_PI_4));
            }
        }
    }
    for p in 1..=p_max {
        let mut min = f64::INFINITY;
        for &z in &grid {
            match orbit_spherical_derivative(f, z, p) {
                Ok(d) => min = min.min(d),
                Err(_) => {
                    min = 0.0;
                    break;
                }
            }
        }
        if min > 2.0 {
            return Some(ExpansionCheck { p, min_deriv: min });
        }
    }
    None
}

/// A quarter of the closest approach between asymptotic values and of the
/// postsingular set to them, shrunk until the safety conditions verify.
fn safety_radius(f: &MapSpec, orbits: &[SingularOrbit]) -> (f64, SafetyChecks) {
    let av = f.asymptotic_values();
    let post: Vec<SpherePoint> = {
        let mut out: Vec<SpherePoint> = Vec::new();
        for o in orbits {
            for &p in &o.points[1..] {
                if out.iter().all(|&q| chordal_dist(p, q) > DISTINCT_TOL) {
                    out.push(p);
                }
            }
        }
        out
    };
    let a_sep = chordal_dist(av[0].into(), av[1].into());
    let a_post = post
        .iter()
        .flat_map(|&p| av.iter().map(move |&a| chordal_dist(p, a.into())))
        .fold(f64::INFINITY, f64::min);
    let mut t = 0.25 * a_sep.min(a_post);
    let mut singular: Vec<SpherePoint> = av.iter().map(|&a| a.into()).collect();
    singular.extend(post.iter().copied());
    let mut checks = SafetyChecks {
        separated: false,
        clear_of_asymptotic: false,
        isolated_preimages: false,
        verified_k: SAFETY_CHECK_K,
    };
    for _ in 0..200 {
        checks.separated = 4.0 * t < a_sep;
        checks.clear_of_asymptotic = 4.0 * t < a_post;
        checks.isolated_preimages = isolated_preimages(f, &singular, &post, 4.0 * t);
        if checks.separated && checks.clear_of_asymptotic && checks.isolated_preimages {
            break;
        }
        t *= 0.9;
    }
    (t, checks)
}

fn isolated_preimages(f: &MapSpec, singular: &[SpherePoint], post: &[SpherePoint], r: f64) -> bool {
    for &w in post {
        let Ok(lat) = f.lattice(w) else { continue };
        for k in -(SAFETY_CHECK_K as i64)..=SAFETY_CHECK_K as i64 {
            let z = SpherePoint::Finite(lat.at(k));
            let d = singular.iter().map(|&s| chordal_dist(z, s)).fold(f64::INFINITY, f64::min);
            if d > DISTINCT_TOL && d < r {
                return false;
            }
        }
    }
    true
}
