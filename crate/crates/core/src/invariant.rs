//! The σ-finite invariant measure: finiteness criteria, the lattice sums
//! behind them, Martens ratios, the nested-domain decay probe, and the
//! first-return map with its Lyapunov exponent.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{tail_integral, MapSpec};
use crate::measure::{AtomicMeasure, Cell};
use crate::regime::RegimeReport;
use crate::rng::task_rng;
use crate::sphere::{chordal_dist, Meromorphic, SpherePoint, C};
use crate::sum::{linear_fit, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finiteness {
    Finite,
    Infinite,
}

/// The invariant measure equivalent to the `h`-conformal one is finite
/// exactly when `h > 3 rho/(rho+1)`.
pub fn finiteness_criterion(rho: f64, h: f64) -> Result<Finiteness> {
    if !(rho > 0.0) {
        return Err(Error::OutOfRange(format!("order must be positive, got {rho}")));
    }
    let thr = rho / (rho + 1.0);
    if !(h > thr && h <= 2.0) {
        return Err(Error::OutOfRange(format!("h = {h} outside ({thr}, 2]")));
    }
    Ok(if h > 3.0 * rho / (rho + 1.0) { Finiteness::Finite } else { Finiteness::Infinite })
}

/// The same criterion at `h = 2` in terms of the degree of the polynomial
/// Schwarzian: finite for degree 0 and 1 only.
pub fn schwarzian_degree_criterion(deg_p: u32) -> Finiteness {
    if deg_p <= 1 {
        Finiteness::Finite
    } else {
        Finiteness::Infinite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convergence {
    Converges,
    Diverges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    pub s: f64,
    pub n_cap: u64,
    pub class: Convergence,
    pub partial: f64,
    /// Integral-test bracket on the omitted terms; `None` when divergent.
    pub tail: Option<(f64, f64)>,
}

impl LatticeSum {
    /// Bracket on the full sum, when it converges.
    pub fn value_bracket(&self) -> Option<(f64, f64)> {
        self.tail.map(|(lo, hi)| (self.partial + lo, self.partial + hi))
    }
}

fn lattice_power(q: f64, s: f64) -> f64 {
    // integer exponents are common and much cheaper than powf
    if s == 1.0 {
        1.0 / q
    } else if s == 2.0 {
        1.0 / (q * q)
    } else {
        q.powf(-s)
    }
}

/// `Σ_{n,k >= 1} (n^2+k^2)^{-s}` over the quarter disk `n^2+k^2 <= n_cap^2`,
/// summed row by row, with an integral-test bracket on the rest.
pub fn lattice_sum_2d(s: f64, n_cap: u64) -> Result<LatticeSum> {
    if !(s > 0.0) || n_cap == 0 {
        return Err(Error::OutOfRange("need s > 0 and a positive cap".into()));
    }
    let cap2 = (n_cap as f64) * (n_cap as f64);
    let partial = (1..=n_cap)
        .into_par_iter()
        .map(|n| {
            let nn = (n as f64) * (n as f64);
            let kmax = (cap2 - nn).max(0.0).sqrt().floor() as u64;
            // smallest terms first
            let mut row = 0.0;
            for k in (1..=kmax).rev() {
                row += lattice_power(nn + (k as f64) * (k as f64), s);
            }
            row
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .collect::<NeumaierSum>()
        .value();
    if s <= 1.0 {
        return Ok(LatticeSum { s, n_cap, class: Convergence::Diverges, partial, tail: None });
    }
    // each omitted point dominates the unit square below-left of it and is
    // dominated by the one above-right of it
    let r = n_cap as f64;
    let quarter = |rad: f64| FRAC_PI_2 * rad.powf(2.0 - 2.0 * s) / (2.0 * s - 2.0);
    let hi = quarter((r - SQRT_2).max(1.0));
    let strips = 2.0 * r.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0);
    let lo = (quarter(r + SQRT_2) - strips).max(0.0);
    Ok(LatticeSum { s, n_cap, class: Convergence::Converges, partial, tail: Some((lo, hi)) })
}

/// `∫_v^∞ (N^2 + x^2)^{-s} dx`.
fn row_tail(nn: f64, v: f64, s: f64) -> f64 {
    let n = nn.sqrt();
    n.powf(1.0 - 2.0 * s) * tail_integral(v / n, s)
}

/// `Σ_{n >= 1} Σ_{N >= n} Σ_{k >= 1} (N^2+k^2)^{-s} = Σ_N N Σ_k (N^2+k^2)^{-s}`,
/// the tract bookkeeping of the invariant density near the asymptotic
/// values. Converges exactly for `s > 3/2`.
pub fn lattice_sum_triple(s: f64, n_cap: u64) -> Result<LatticeSum> {
    if !(s > 0.0) || n_cap == 0 {
        return Err(Error::OutOfRange("need s > 0 and a positive cap".into()));
    }
    let cap = n_cap as f64;
    let rows: Vec<(f64, f64, f64)> = (1..=n_cap)
        .into_par_iter()
        .map(|big_n| {
            let nn = (big_n as f64) * (big_n as f64);
            let mut row = 0.0;
            for k in (1..=n_cap).rev() {
                row += lattice_power(nn + (k as f64) * (k as f64), s);
            }
            let w = big_n as f64;
            if s > 0.5 {
                (w * row, w * row_tail(nn, cap + 1.0, s), w * row_tail(nn, cap, s))
            } else {
                (w * row, f64::INFINITY, f64::INFINITY)
            }
        })
        .collect();
    let partial = rows.iter().map(|r| r.0).collect::<NeumaierSum>().value();
    if s <= 1.5 {
        return Ok(LatticeSum { s, n_cap, class: Convergence::Diverges, partial, tail: None });
    }
    let k_lo = rows.iter().map(|r| r.1).collect::<NeumaierSum>().value();
    let k_hi = rows.iter().map(|r| r.2).collect::<NeumaierSum>().value();
    // rows beyond the cap: N Σ_k (N^2+k^2)^{-s} lies in
    // [c N^{2-2s} - N^{1-2s}, c N^{2-2s}] with c = ∫_0^∞ (1+u^2)^{-s} du
    let c = tail_integral(0.0, s);
    let p = 3.0 - 2.0 * s;
    let n_hi = c * cap.powf(p) / -p;
    let n_lo = (c * (cap + 1.0).powf(p) / -p - cap.powf(2.0 - 2.0 * s) / (2.0 * s - 2.0)).max(0.0);
    Ok(LatticeSum { s, n_cap, class: Convergence::Converges, partial, tail: Some((k_lo + n_lo, k_hi + n_hi)) })
}

fn check_cells(f: &MapSpec, regime: &RegimeReport, cells: &[&Cell]) -> Result<()> {
    let t = regime.safety_radius;
    let mut singular = regime.postsingular();
    singular.extend(f.asymptotic_values().iter().map(|&a| SpherePoint::Finite(a)));
    for cell in cells {
        if singular.iter().any(|&p| chordal_dist(p, cell.centre) < cell.radius + t) {
            return Err(Error::CellTooCloseToSingular);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartensEstimate {
    pub cell: Cell,
    pub reference: Cell,
    /// `Σ_{k<=n} m(f^{-k} A) / Σ_{k<=n} m(f^{-k} A0)` for `n = 0..=n_max`.
    pub ratios: Vec<f64>,
    /// Mean of the second half of the ratios.
    pub limit: f64,
    /// Largest deviation from the limit over that half, or the share of the
    /// largest single atom in either sum if that is larger.
    pub error: f64,
}

/// Masses `m(f^{-k} E)` for `k = 0..=n_max`, by iterating every atom forward,
/// and the largest share of `Σ_k m(f^{-k} E)` carried by a single atom.
fn pullback_masses(f: &MapSpec, m: &AtomicMeasure, cells: &[Cell], n_max: usize) -> Vec<(Vec<f64>, f64)> {
    let hits: Vec<Vec<Vec<bool>>> = m
        .atoms
        .par_iter()
        .map(|a| {
            let mut out = vec![vec![false; n_max + 1]; cells.len()];
            let mut z = SpherePoint::Finite(a.z);
            for k in 0..=n_max {
                for (c, cell) in cells.iter().enumerate() {
                    out[c][k] = cell.contains(z);
                }
                z = match z {
                    SpherePoint::Finite(w) => f.eval_finite(w),
                    SpherePoint::Infinity => break,
                };
            }
            out
        })
        .collect();
    (0..cells.len())
        .map(|c| {
            let masses: Vec<f64> = (0..=n_max)
                .map(|k| {
                    m.atoms
                        .iter()
                        .zip(&hits)
                        .filter(|(_, h)| h[c][k])
                        .map(|(a, _)| a.weight)
                        .collect::<NeumaierSum>()
                        .value()
                })
                .collect();
            let total: f64 = masses.iter().sum();
            let largest = m
                .atoms
                .iter()
                .zip(&hits)
                .map(|(a, h)| a.weight * h[c].iter().filter(|&&x| x).count() as f64)
                .fold(0.0, f64::max);
            (masses, if total > 0.0 { largest / total } else { 1.0 })
        })
        .collect()
}

/// Ratio of the mean pulled-back masses of two cells, which converges to
/// the ratio of their invariant masses.
pub fn martens_ratio(
    f: &MapSpec,
    m: &AtomicMeasure,
    regime: &RegimeReport,
    cell: Cell,
    reference: Cell,
    n_max: usize,
) -> Result<MartensEstimate> {
    if m.atoms.len() < 10_000 {
        return Err(Error::OutOfRange(format!("need at least 10^4 atoms, got {}", m.atoms.len())));
    }
    check_cells(f, regime, &[&cell, &reference])?;
    let pulled = pullback_masses(f, m, &[cell, reference], n_max);
    let (masses, shares): (Vec<Vec<f64>>, Vec<f64>) = pulled.into_iter().unzip();
    if masses[1][0] <= 0.0 || masses[0][0] <= 0.0 {
        return Err(Error::EmptyCell);
    }
    let (mut num, mut den) = (NeumaierSum::new(), NeumaierSum::new());
    let ratios: Vec<f64> = (0..=n_max)
        .map(|k| {
            num.add(masses[0][k]);
            den.add(masses[1][k]);
            num.value() / den.value()
        })
        .collect();
    let tail = &ratios[ratios.len() / 2..];
    let limit = tail.iter().sum::<f64>() / tail.len() as f64;
    let spread = tail.iter().map(|r| (r - limit).abs()).fold(0.0, f64::max);
    // a sum dominated by one atom is only known to the size of that atom
    let error = spread.max(limit * (shares[0] + shares[1]));
    Ok(MartensEstimate { cell, reference, ratios, limit, error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedDomainSpec {
    /// Centres of the disks making up `Ω_0`.
    pub centres: Vec<SpherePoint>,
    pub radius: f64,
    /// `g = f^p`.
    pub p: usize,
}

impl NestedDomainSpec {
    /// Disks of the safety radius around the postsingular prefix, with the
    /// iterate from the expansion check.
    pub fn from_regime(regime: &RegimeReport) -> Self {
        NestedDomainSpec {
            centres: regime.postsingular(),
            radius: regime.safety_radius,
            p: regime.expansion_check.map(|e| e.p).unwrap_or(1),
        }
    }

    fn in_base(&self, z: SpherePoint) -> bool {
        self.centres.iter().any(|&c| chordal_dist(c, z) < self.radius)
    }

    /// Preimages of `w` under `g` that land in `Ω_0`, each with the factor
    /// `|(g^{-1})'(w)|_σ^s`. The branch into the disk around a centre `c`
    /// follows the orbit of `c`, taking the preimage nearest it at each step.
    pub fn pull_back(&self, f: &MapSpec, w: C, s: f64) -> Vec<(C, f64)> {
        let mut out = Vec::new();
        for &c in &self.centres {
            let Some(c) = c.finite() else { continue };
            let mut orbit = vec![c];
            for _ in 0..self.p {
                match orbit.last().and_then(|&o| f.eval_finite(o).finite()) {
                    Some(o) => orbit.push(o),
                    None => break,
                }
            }
            if orbit.len() != self.p + 1 || chordal_dist(orbit[self.p].into(), w.into()) >= self.radius {
                continue;
            }
            let mut z = w;
            let mut factor = 1.0;
            let mut ok = true;
            for j in (0..self.p).rev() {
                let Ok(lat) = f.lattice(z.into()) else {
                    ok = false;
                    break;
                };
                let k0 = ((orbit[j] - lat.base) / lat.period).re.round() as i64;
                let Some(y) = (k0 - 1..=k0 + 1).map(|k| lat.at(k)).min_by(|p, q| (p - orbit[j]).norm().total_cmp(&(q - orbit[j]).norm()))
                else {
                    ok = false;
                    break;
                };
                match f.sigma_deriv(y.into()) {
                    Ok(d) if d > 0.0 => factor *= d.powf(-s),
                    _ => {
                        ok = false;
                        break;
                    }
                }
                z = y;
            }
            if ok && chordal_dist(c.into(), z.into()) < self.radius {
                out.push((z, factor));
            }
        }
        out
    }

    /// Largest `n` with `z ∈ Ω_n`, capped at `cap`; `None` outside `Ω_0`.
    ///
    /// `Ω_n` is taken along the branches of `g^{-n}` that stay in `Ω_0`,
    /// so `z ∈ Ω_n` exactly when `g^j(z) ∈ Ω_0` for `j = 0..=n`.
    pub fn level(&self, f: &MapSpec, z: SpherePoint, cap: usize) -> Option<usize> {
        if !self.in_base(z) {
            return None;
        }
        let mut w = z;
        for n in 0..cap {
            for _ in 0..self.p {
                w = match w {
                    SpherePoint::Finite(c) => f.eval_finite(c),
                    SpherePoint::Infinity => return Some(n),
                };
            }
            if !self.in_base(w) {
                return Some(n);
            }
        }
        Some(cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub spec: NestedDomainSpec,
    /// `m(Γ_n)` for `n = 0..=n_max`.
    pub masses: Vec<f64>,
    pub atoms: Vec<usize>,
    /// `exp` of the slope of `log m(Γ_n)` against `n`.
    pub gamma: f64,
    pub r2: f64,
    pub pass: bool,
}

/// Mass of the shells `Γ_n = Ω_n \ Ω_{n+1}` of the nested neighbourhoods
/// of the postsingular set, and their geometric decay rate.
///
/// The shells shrink geometrically, far below the cell size the measure is
/// merged over, so only the atoms of `Γ_0` are taken from `m`. The deeper
/// shells are filled by carrying them down the branches of `g^{-1}` into
/// `Ω_0`, weighted by the conformal factor `|(g^{-1})'|^s`, and each carried
/// atom is then placed by the forward membership test.
pub fn gamma_decay_probe(f: &MapSpec, m: &AtomicMeasure, spec: &NestedDomainSpec, n_max: usize) -> Result<DecayProbe> {
    let mut generation: Vec<(C, f64)> = m
        .atoms
        .par_iter()
        .filter(|a| spec.level(f, a.z.into(), 1) == Some(0))
        .map(|a| (a.z, a.weight))
        .collect();
    let mut masses = vec![NeumaierSum::new(); n_max + 1];
    let mut atoms = vec![0usize; n_max + 1];
    for n in 0..=n_max {
        let levels: Vec<Option<usize>> = generation.par_iter().map(|&(z, _)| spec.level(f, z.into(), n_max + 1)).collect();
        for (&(_, w), l) in generation.iter().zip(&levels) {
            if let Some(k) = *l {
                if k <= n_max {
                    masses[k].add(w);
                    atoms[k] += 1;
                }
            }
        }
        if n < n_max {
            generation = generation.par_iter().flat_map_iter(|&(z, w)| spec.pull_back(f, z, m.s).into_iter().map(move |(y, c)| (y, w * c))).collect();
        }
    }
    if let Some(n) = atoms.iter().position(|&c| c < 30) {
        return Err(Error::InsufficientAtoms { n, count: atoms[n] });
    }
    let masses: Vec<f64> = masses.iter().map(|s| s.value()).collect();
    let xs: Vec<f64> = (0..=n_max).map(|n| n as f64).collect();
    let ys: Vec<f64> = masses.iter().map(|v| v.ln()).collect();
    let (_, slope, r2) = linear_fit(&xs, &ys);
    let gamma = slope.exp();
    Ok(DecayProbe { spec: spec.clone(), masses, atoms, gamma, r2, pass: gamma < 1.0 && r2 >= 0.8 })
}

/// `X = J \ (B(P_f, T) ∪ ⋃_a f_a^{-1}(D(f(a), T)))`, with `f_a^{-1}` the
/// branch sending `f(a)` back to the asymptotic value `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedDomain {
    pub postsingular: Vec<SpherePoint>,
    pub asymptotic: Vec<C>,
    pub radius: f64,
}

impl InducedDomain {
    pub fn from_regime(f: &MapSpec, regime: &RegimeReport) -> Self {
        InducedDomain {
            postsingular: regime.postsingular(),
            asymptotic: f.asymptotic_values().to_vec(),
            radius: regime.safety_radius,
        }
    }

    /// No exclusions: every return takes one step.
    pub fn whole() -> Self {
        InducedDomain { postsingular: Vec::new(), asymptotic: Vec::new(), radius: 0.0 }
    }

    pub fn contains(&self, f: &MapSpec, z: SpherePoint) -> bool {
        if self.postsingular.iter().any(|&p| chordal_dist(p, z) <= self.radius) {
            return false;
        }
        let Some(zc) = z.finite() else { return self.asymptotic.is_empty() || self.radius == 0.0 };
        let fz = f.eval_finite(zc);
        for &a in &self.asymptotic {
            let fa = f.eval_finite(a);
            if chordal_dist(fz, fa) >= self.radius {
                continue;
            }
            // z lies in the excluded piece iff it is the preimage of f(z) nearest a
            let Ok(lat) = f.lattice(fz) else { return false };
            let k0 = ((a - lat.base) / lat.period).re.round() as i64;
            let nearest = (k0 - 1..=k0 + 1).map(|k| lat.at(k)).min_by(|p, q| (p - a).norm().total_cmp(&(q - a).norm()));
            if let Some(p) = nearest {
                if (p - zc).norm() <= 1e-9 * (1.0 + zc.norm()) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducedReturn {
    pub tau: usize,
    pub point: SpherePoint,
    /// `log |(f^τ)'(z)|_σ`.
    pub log_deriv: f64,
}

/// Offsets from an asymptotic value below this (relative) are carried
/// separately instead of being added to it.
const NEAR_ASYMPTOTIC: f64 = 1e-6;

/// First return of `z ∈ X` to `X`.
///
/// Deep in a tract `f(z)` is closer to the asymptotic value than double
/// precision resolves; the step through that point is then taken with the
/// offset kept apart, so the orbit does not collapse onto `f(a)`.
pub fn induced_return(f: &MapSpec, domain: &InducedDomain, z: SpherePoint, max_steps: usize) -> Result<InducedReturn> {
    if !domain.contains(f, z) {
        return Err(Error::OutOfRange("start point outside the induced domain".into()));
    }
    let mut w = z.finite().ok_or(Error::LeftDomain)?;
    let mut log = NeumaierSum::new();
    let mut tau = 0;
    while tau < max_steps {
        log.add(f.sigma_deriv(SpherePoint::Finite(w))?.ln());
        tau += 1;
        let (which, delta) = f.asymptotic_offset(w);
        let a = f.asymptotic_values()[which];
        if delta == C::new(0.0, 0.0) {
            // so deep in a tract that the offset underflows
            return Err(Error::NumericallyUnstable);
        }
        let next = if delta.norm() < NEAR_ASYMPTOTIC * (1.0 + a.norm()) {
            let rounded = SpherePoint::Finite(a + delta);
            if domain.contains(f, rounded) {
                return Ok(InducedReturn { tau, point: rounded, log_deriv: log.value() });
            }
            if tau == max_steps {
                break;
            }
            log.add(f.sigma_deriv(SpherePoint::Finite(a))?.ln());
            tau += 1;
            f.eval_near_asymptotic(which, delta)
        } else {
            f.eval_finite(w)
        };
        let SpherePoint::Finite(c) = next else { return Err(Error::LeftDomain) };
        if domain.contains(f, next) {
            return Ok(InducedReturn { tau, point: next, log_deriv: log.value() });
        }
        w = c;
    }
    Err(Error::NoReturnWithin(max_steps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Nats per return.
    pub chi: f64,
    pub std_err: f64,
    pub n_samples: usize,
    pub n_orbits: usize,
    pub tau_histogram: BTreeMap<usize, usize>,
}

/// Orbits from the given starts, `len` returns each, longest return `max_steps`.
pub fn lyapunov_orbits(
    f: &MapSpec,
    domain: &InducedDomain,
    starts: &[SpherePoint],
    len: usize,
    max_steps: usize,
) -> Result<LyapunovEstimate> {
    if len == 0 || starts.is_empty() {
        return Err(Error::OutOfRange("need at least one orbit of positive length".into()));
    }
    let runs: Vec<Option<(f64, Vec<usize>)>> = starts
        .par_iter()
        .map(|&z| {
            let mut sum = NeumaierSum::new();
            let mut taus = Vec::with_capacity(len);
            let mut w = z;
            for _ in 0..len {
                let r = induced_return(f, domain, w, max_steps).ok()?;
                sum.add(r.log_deriv);
                taus.push(r.tau);
                w = r.point;
            }
            Some((sum.value() / len as f64, taus))
        })
        .collect();
    let done: Vec<&(f64, Vec<usize>)> = runs.iter().flatten().collect();
    if 2 * done.len() < starts.len() {
        return Err(Error::TooFewSurvivingOrbits { survived: done.len(), total: starts.len() });
    }
    let n = done.len() as f64;
    let chi = done.iter().map(|r| r.0).collect::<NeumaierSum>().value() / n;
    let var = if done.len() > 1 { done.iter().map(|r| (r.0 - chi).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut tau_histogram = BTreeMap::new();
    for r in &done {
        for &t in &r.1 {
            *tau_histogram.entry(t).or_insert(0) += 1;
        }
    }
    Ok(LyapunovEstimate { chi, std_err: (var / n).sqrt(), n_samples: done.len() * len, n_orbits: done.len(), tau_histogram })
}

/// Relative chordal size of the jitter applied to sampled atoms, on the
/// scale of the cells atoms are merged over. Atoms are exact preimages of
/// infinity, so their own forward orbits end on a pole.
const START_JITTER: f64 = 1e-2;

/// Lyapunov exponent of the first-return map, starting from atoms of `m`
/// in `X` drawn by weight; orbit `i` draws from the stream `(seed, i)`.
pub fn lyapunov_induced(
    f: &MapSpec,
    m: &AtomicMeasure,
    domain: &InducedDomain,
    n_orbits: usize,
    len: usize,
    max_steps: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    let pool: Vec<(C, f64)> = m
        .atoms
        .iter()
        .filter(|a| domain.contains(f, a.z.into()))
        .map(|a| (a.z, a.weight))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyCell);
    }
    let mut cum = Vec::with_capacity(pool.len());
    let mut acc = 0.0;
    for &(_, w) in &pool {
        acc += w;
        cum.push(acc);
    }
    let starts: Vec<SpherePoint> = (0..n_orbits as u64)
        .map(|i| {
            let mut rng = task_rng(seed, i);
            let u = rng.random::<f64>() * acc;
            let j = cum.partition_point(|&c| c < u).min(pool.len() - 1);
            let z = pool[j].0;
            let r = START_JITTER * rng.random::<f64>() * (1.0 + z.norm_sqr());
            SpherePoint::Finite(z + C::from_polar(r, TAU * rng.random::<f64>()))
        })
        .collect();
    lyapunov_orbits(f, domain, &starts, len, max_steps)
}
