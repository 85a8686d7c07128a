//! Hausdorff dimension of the radial Julia set as the zero of the pressure.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MapSpec, TruncationPolicy};
use crate::pressure::{pressure_estimate, PressureEstimate};
use crate::raster::{cantor_lambda, interval_is_fatou, repelling_fixed_point};
use crate::regime::Regime;
use crate::sphere::{chordal_dist, SpherePoint};
use crate::transfer::postsingular_prefix;
use crate::tree::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimensionMethod {
    PressureRoot,
    Ulam,
    BoxCount,
    PoincareCutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressurePoint {
    pub t: f64,
    pub pressure: f64,
    pub error: f64,
}

impl PressurePoint {
    fn sign(&self) -> i8 {
        if self.pressure - self.error > 0.0 {
            1
        } else if self.pressure + self.error < 0.0 {
            -1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub h: f64,
    pub bracket: (f64, f64),
    pub method: DimensionMethod,
    /// `|P|` at the evaluation closest to `h`.
    pub residual: f64,
    pub evaluations: Vec<PressurePoint>,
    /// The pressure could not be shown negative at `t = 2`.
    pub julia_likely_sphere: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootParams {
    pub depth: usize,
    /// Stop once the bracket is this narrow.
    pub bisect_tol: f64,
    /// Distance above the convergence threshold of the lower search end.
    pub lower_margin: f64,
    pub max_evaluations: usize,
}

impl Default for RootParams {
    fn default() -> Self {
        RootParams { depth: 12, bisect_tol: 0.01, lower_margin: 0.02, max_evaluations: 40 }
    }
}

const BASE_CANDIDATES: [(f64, f64); 3] = [(0.3, 0.2), (-0.7, 0.45), (1.1, -0.35)];

/// First candidate base point at chordal distance at least `0.05` from
/// the postsingular prefix; infinity as the last resort.
pub fn choose_base(f: &MapSpec) -> SpherePoint {
    let ps = postsingular_prefix(f, 30);
    let clear = |p: SpherePoint| ps.iter().all(|&q| chordal_dist(p, q) >= 0.05);
    BASE_CANDIDATES
        .iter()
        .map(|&(x, y)| SpherePoint::new(x, y))
        .chain(std::iter::once(SpherePoint::Infinity))
        .find(|&p| clear(p))
        .unwrap_or(SpherePoint::Infinity)
}

fn evaluate(f: &MapSpec, t: f64, base: SpherePoint, rp: &RootParams, policy: &TruncationPolicy, params: &TreeParams) -> Result<PressurePoint> {
    let e: PressureEstimate = pressure_estimate(f, t, base, rp.depth, policy, params)?;
    Ok(PressurePoint { t, pressure: e.extrapolated, error: e.error })
}

/// Bisection for the zero of the decreasing pressure on
/// `[threshold + margin, 2]`. Evaluations whose error bar straddles zero
/// are kept inside the bracket, whose ends are then refined separately.
pub fn pressure_root(
    f: &MapSpec,
    base: Option<SpherePoint>,
    rp: &RootParams,
    policy: &TruncationPolicy,
    params: &TreeParams,
) -> Result<DimensionEstimate> {
    let thr = f.borel_threshold();
    let (a, b) = (thr + rp.lower_margin, 2.0);
    if !(rp.bisect_tol > 0.0) {
        return Err(Error::OutOfRange("bisect_tol must be positive".into()));
    }
    let base = base.unwrap_or_else(|| choose_base(f));
    let mut evals = Vec::new();
    if rp.bisect_tol >= b - a {
        let m = evaluate(f, 0.5 * (a + b), base, rp, policy, params)?;
        evals.push(m);
        return Ok(DimensionEstimate {
            h: m.t,
            bracket: (a, b),
            method: DimensionMethod::PressureRoot,
            residual: m.pressure.abs(),
            evaluations: evals,
            julia_likely_sphere: false,
        });
    }
    let pb = evaluate(f, b, base, rp, policy, params)?;
    evals.push(pb);
    if pb.sign() > 0 {
        return Err(Error::NoSignChange { julia_likely_sphere: true });
    }
    let pa = evaluate(f, a, base, rp, policy, params)?;
    evals.push(pa);
    if pa.sign() < 0 {
        return Err(Error::NoSignChange { julia_likely_sphere: false });
    }
    let (mut lo, mut hi) = (a, b);
    // the straddling stretch [s_lo, s_hi], if any evaluation straddled zero
    let mut straddle: Option<(f64, f64)> = None;
    for p in [pa, pb] {
        if p.sign() == 0 {
            straddle = Some(straddle.map_or((p.t, p.t), |(l, h): (f64, f64)| (l.min(p.t), h.max(p.t))));
        }
    }
    while evals.len() < rp.max_evaluations {
        let m = match straddle {
            None if hi - lo > rp.bisect_tol => 0.5 * (lo + hi),
            None => break,
            Some((sl, _)) if sl - lo > 0.5 * rp.bisect_tol => 0.5 * (lo + sl),
            Some((_, sh)) if hi - sh > 0.5 * rp.bisect_tol => 0.5 * (sh + hi),
            Some(_) => break,
        };
        let pm = evaluate(f, m, base, rp, policy, params)?;
        evals.push(pm);
        match pm.sign() {
            1 => lo = lo.max(m),
            -1 => hi = hi.min(m),
            _ => straddle = Some(straddle.map_or((m, m), |(l, h)| (l.min(m), h.max(m)))),
        }
        if let Some((sl, sh)) = straddle {
            straddle = Some((sl.max(lo), sh.min(hi)));
        }
    }
    assert!(thr < lo && hi <= 2.0, "pressure root bracket left (rho/(rho+1), 2]");
    let mut sorted = evals.clone();
    sorted.sort_by(|x, y| x.t.total_cmp(&y.t));
    let mut h = 0.5 * (lo + hi);
    for w in sorted.windows(2) {
        if w[0].pressure > 0.0 && w[1].pressure <= 0.0 {
            let x = w[0].t + (w[1].t - w[0].t) * w[0].pressure / (w[0].pressure - w[1].pressure);
            h = x.clamp(lo, hi);
        }
    }
    let residual = sorted
        .iter()
        .min_by(|x, y| (x.t - h).abs().total_cmp(&(y.t - h).abs()))
        .map(|p| p.pressure.abs())
        .unwrap_or(f64::NAN);
    Ok(DimensionEstimate {
        h,
        bracket: (lo, hi),
        method: DimensionMethod::PressureRoot,
        residual,
        evaluations: evals,
        julia_likely_sphere: pb.sign() == 0 && hi == b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlamEstimate {
    pub t: f64,
    pub log_eigenvalue: f64,
    pub bins: usize,
    /// Bins left after removing those inside the basin of the attracting cycle.
    pub bins_kept: usize,
    pub iterations: usize,
}

/// Iterations of the interval map used to prove a bin lies in the Fatou set.
const FATOU_STEPS: usize = 60;
const POWER_TOL: f64 = 1e-11;
const POWER_MAX_ITER: usize = 20_000;

/// Ulam discretisation of the transfer operator on the extended real line,
/// for real tangent parameters in `(0, 1)`.
///
/// Bins are equal arcs of the angle `2 arctan x`, so the last bin holds
/// infinity. Bins provably attracted to 0 are removed: the operator there
/// only sees the attracting cycle. Branches past the truncation are not
/// dropped but lumped into the bin at infinity with their tail mass.
pub fn ulam_pressure(f: &MapSpec, t: f64, bins: usize, policy: &TruncationPolicy) -> Result<UlamEstimate> {
    let lambda = cantor_lambda(f)?;
    policy.check_exponent(f, t)?;
    if bins == 0 {
        return Err(Error::OutOfRange("need at least one bin".into()));
    }
    let xs = repelling_fixed_point(lambda);
    let width = 2.0 * PI / bins as f64;
    let edge = |i: usize| -PI + i as f64 * width;
    let to_x = |theta: f64| (0.5 * theta).tan();
    let keep: Vec<bool> = (0..bins)
        .into_par_iter()
        .map(|i| {
            // the outer bins hold infinity
            if i == 0 || i + 1 == bins {
                return true;
            }
            !interval_is_fatou(lambda, xs, to_x(edge(i)), to_x(edge(i + 1)), FATOU_STEPS)
        })
        .collect();
    let mut pos = vec![usize::MAX; bins];
    let mut n = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            pos[i] = n;
            n += 1;
        }
    }
    let bin_of = |x: f64| (((2.0 * x.atan() + PI) / width) as usize).min(bins - 1);
    let cut = f.branch_cut(policy);
    let rows: Vec<Vec<(usize, f64)>> = (0..bins)
        .into_par_iter()
        .filter(|&i| keep[i])
        .map(|i| {
            let w = SpherePoint::new(to_x(edge(i) + 0.5 * width), 0.0);
            let lat = f.lattice(w)?;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * cut as usize + 2);
            lat.for_each_weight(t, cut, |_, z, wt| {
                let j = bin_of(z.re);
                if keep[j] {
                    row.push((pos[j], wt));
                }
            });
            let (tl, th) = lat.tail(t, cut);
            if keep[bins - 1] {
                row.push((pos[bins - 1], 0.5 * (tl + th)));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    // v <- v M, with row i collecting the preimages of the bin-i midpoint
    let mut v = vec![1.0 / n as f64; n];
    let mut ev = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let u: Vec<f64> = rows.iter().map(|r| r.iter().map(|&(j, w)| w * v[j]).sum()).collect();
        let su: f64 = u.iter().sum();
        let sv: f64 = v.iter().sum();
        if !(su > 0.0 && su.is_finite()) {
            return Err(Error::PowerIterationStall);
        }
        let ev2 = su / sv;
        v = u.into_iter().map(|x| x / su).collect();
        if (ev2 - ev).abs() < POWER_TOL * ev2 {
            return Ok(UlamEstimate { t, log_eigenvalue: ev2.ln(), bins, bins_kept: n, iterations: it });
        }
        ev = ev2;
    }
    Err(Error::PowerIterationStall)
}

/// Zero of the Ulam pressure by bisection on `[threshold + 0.02, 2]`.
pub fn ulam_root(f: &MapSpec, bins: usize, policy: &TruncationPolicy, tol: f64) -> Result<DimensionEstimate> {
    let thr = f.borel_threshold();
    let (mut lo, mut hi) = (thr + 0.02, 2.0);
    let mut evals = Vec::new();
    let mut eval = |t: f64| -> Result<f64> {
        let p = ulam_pressure(f, t, bins, policy)?.log_eigenvalue;
        evals.push(PressurePoint { t, pressure: p, error: 0.0 });
        Ok(p)
    };
    let (plo, phi) = (eval(lo)?, eval(hi)?);
    if phi > 0.0 {
        return Err(Error::NoSignChange { julia_likely_sphere: true });
    }
    if plo < 0.0 {
        return Err(Error::NoSignChange { julia_likely_sphere: false });
    }
    let (mut p_lo, mut p_hi) = (plo, phi);
    while hi - lo > tol {
        let m = 0.5 * (lo + hi);
        let pm = eval(m)?;
        if pm > 0.0 {
            lo = m;
            p_lo = pm;
        } else {
            hi = m;
            p_hi = pm;
        }
    }
    let h = lo + (hi - lo) * p_lo / (p_lo - p_hi);
    Ok(DimensionEstimate {
        h,
        bracket: (lo, hi),
        method: DimensionMethod::Ulam,
        residual: p_lo.abs().min(p_hi.abs()),
        evaluations: evals,
        julia_likely_sphere: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// The check is `lower < value <= upper`.
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub checks: Vec<BoundCheck>,
    pub pass: bool,
}

/// A priori bounds a dimension estimate must respect: above the
/// convergence threshold always, and above `2 rho/(rho+1)` for
/// sub-expanding maps.
pub fn bounds_check(rho: f64, h: f64, regime: Regime) -> BoundsReport {
    let mut checks = vec![BoundCheck {
        name: "threshold".into(),
        lower: rho / (rho + 1.0),
        value: h,
        upper: 2.0,
        pass: rho / (rho + 1.0) < h && h <= 2.0,
    }];
    if regime == Regime::SubExpanding {
        let lb = 2.0 * rho / (rho + 1.0);
        checks.push(BoundCheck { name: "sub_expanding".into(), lower: lb, value: h, upper: 2.0, pass: lb < h && h <= 2.0 });
    }
    let pass = checks.iter().all(|c| c.pass);
    BoundsReport { checks, pass }
}
