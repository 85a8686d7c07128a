//! One application of the spherical transfer operator
//! `L_t 1(w) = Σ_{f(z)=w} |f'(z)|_σ^{-t}` with a rigorous tail bracket,
//! uniform-bound scans, and empirical Koebe distortion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{lattice_tail, MapSpec, TruncationPolicy};
use crate::sphere::{chordal_dist, Meromorphic, SpherePoint, C};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorEval {
    pub t: f64,
    pub w: SpherePoint,
    pub partial: f64,
    pub tail_low: f64,
    pub tail_high: f64,
    pub branches_used: usize,
    /// Tail upper bound exceeds `rel_tail_tol` of the bracketed total.
    pub tail_dominated: bool,
}

impl OperatorEval {
    pub fn low(&self) -> f64 {
        self.partial + self.tail_low
    }
    pub fn high(&self) -> f64 {
        self.partial + self.tail_high
    }
    pub fn midpoint(&self) -> f64 {
        self.partial + 0.5 * (self.tail_low + self.tail_high)
    }
    pub fn contains(&self, x: f64) -> bool {
        self.low() <= x && x <= self.high()
    }
}

pub fn transfer_one(
    f: &MapSpec,
    t: f64,
    w: SpherePoint,
    policy: &TruncationPolicy,
) -> Result<OperatorEval> {
    policy.check_exponent(f, t)?;
    let lat = f.lattice(w)?;
    let cut = f.branch_cut(policy);
    let mut acc = NeumaierSum::new();
    let mut used = 0;
    lat.for_each_weight(t, cut, |_, _, wt| {
        acc.add(wt);
        used += 1;
    });
    let (tail_low, tail_high) = lat.tail(t, cut);
    let partial = acc.value();
    Ok(OperatorEval {
        t,
        w,
        partial,
        tail_low,
        tail_high,
        branches_used: used,
        tail_dominated: tail_high > policy.rel_tail_tol * (partial + tail_high),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub t: f64,
    pub sup: f64,
    pub median: f64,
    pub argmax: SpherePoint,
    /// Set when the supremum exceeds ten times the median.
    pub unbounded: bool,
    pub values: Vec<f64>,
}

/// Bare sum `Σ (1 + |z|^{rho+1})^{-t}` over the preimages of `w`, as an upper bound.
pub fn bare_sum(f: &MapSpec, t: f64, w: SpherePoint, policy: &TruncationPolicy) -> Result<f64> {
    policy.check_exponent(f, t)?;
    let mut lat = f.lattice(w)?;
    lat.dw = 1.0;
    let cut = f.branch_cut(policy);
    let mut acc = NeumaierSum::new();
    lat.for_each_weight(t, cut, |_, _, wt| acc.add(wt));
    let (_, hi) = lattice_tail(lat.base, lat.period, cut, t);
    Ok(acc.value() + hi)
}

pub fn uniform_bound_scan(
    f: &MapSpec,
    t: f64,
    w_grid: &[SpherePoint],
    policy: &TruncationPolicy,
) -> Result<ScanReport> {
    policy.check_exponent(f, t)?;
    let values = w_grid.iter().map(|&w| bare_sum(f, t, w, policy)).collect::<Result<Vec<f64>>>()?;
    let (imax, &sup) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::OutOfRange("empty grid".into()))?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok(ScanReport { t, sup, median, argmax: w_grid[imax], unbounded: sup > 10.0 * median, values })
}

/// Near-uniform points on the sphere (Fibonacci spiral in the xyz picture).
pub fn sphere_grid(n: usize) -> Vec<SpherePoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let h = (i as f64 + 0.5) / n as f64 - 0.5;
            let r = (0.25 - h * h).sqrt();
            let a = golden * i as f64;
            SpherePoint::from_xyz([r * a.cos(), r * a.sin(), h + 0.5])
        })
        .collect()
}

/// Orbits of the asymptotic values, starting with their first images.
pub fn postsingular_prefix(f: &MapSpec, len: usize) -> Vec<SpherePoint> {
    let mut out = Vec::new();
    for a in f.asymptotic_values() {
        let mut cur = f.eval_finite(a);
        for _ in 0..len {
            out.push(cur);
            match cur {
                SpherePoint::Finite(z) => cur = f.eval_finite(z),
                SpherePoint::Infinity => break,
            }
        }
    }
    out
}

/// A point at chordal distance about `r` from `w`, in direction `angle`.
pub(crate) fn chordal_offset(w: SpherePoint, r: f64, angle: f64) -> SpherePoint {
    match w {
        SpherePoint::Infinity => {
            // chordal distance to infinity of 1/(s e^{ia}) is about s
            SpherePoint::Finite(1.0 / C::from_polar(r.max(1e-300), angle))
        }
        SpherePoint::Finite(z) => SpherePoint::Finite(z + C::from_polar(r * (1.0 + z.norm_sqr()), angle)),
    }
}

/// Continue the inverse branch that sends `from` to `seed` along the
/// straight path to `to`, by nearest-lattice selection in small steps.
pub(crate) fn continue_branch(f: &MapSpec, seed: C, from: C, to: C, steps: usize) -> Result<C> {
    let mut cur = seed;
    let period = f.period();
    for s in 1..=steps {
        let target = from + (to - from) * (s as f64 / steps as f64);
        let lat = f.lattice(SpherePoint::Finite(target)).map_err(|_| Error::BranchLost)?;
        let k = ((cur - lat.base) / period).re.round();
        let next = lat.base + period * k;
        if (next - cur).norm() > 0.3 * period.norm() {
            return Err(Error::BranchLost);
        }
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub k: f64,
    pub samples: usize,
    pub depth: usize,
    pub delta: f64,
}

/// Largest observed ratio of spherical derivatives of inverse branches of
/// `f^n`, `n <= depth`, between two points of the chordal disk `D(w, delta)`.
pub fn distortion_probe(
    f: &MapSpec,
    w: SpherePoint,
    delta: f64,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if !(delta > 0.0) {
        return Err(Error::OutOfRange("delta must be positive".into()));
    }
    let wz = w.finite().ok_or_else(|| Error::OutOfRange("probe centre must be finite".into()))?;
    for p in postsingular_prefix(f, 20) {
        if chordal_dist(p, w) < 2.0 * delta {
            return Err(Error::OutOfRange("probe disk meets the postsingular set".into()));
        }
    }
    let mut k_max: f64 = 1.0;
    if depth == 0 {
        return Ok(DistortionReport { k: 1.0, samples, depth, delta });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = f.period();
    for _ in 0..samples {
        let n = rng.random_range(1..=depth);
        let x = chordal_offset(w, delta * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
        let y = chordal_offset(w, delta * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
        let (x, y) = (x.finite().unwrap(), y.finite().unwrap());
        // inverse branch chain anchored at w
        let (mut cw, mut cx, mut cy) = (wz, x, y);
        let mut log_ratio = 0.0;
        for _ in 0..n {
            let lat = f.lattice(SpherePoint::Finite(cw))?;
            let k: i64 = rng.random_range(-3..=3);
            let nw = lat.base + period * k as f64;
            let nx = continue_branch(f, nw, cw, cx, 16)?;
            let ny = continue_branch(f, nw, cw, cy, 16)?;
            let dx = f.sigma_deriv(SpherePoint::Finite(nx))?;
            let dy = f.sigma_deriv(SpherePoint::Finite(ny))?;
            // (f^{-n})' at y over at x is the reciprocal ratio of forward derivatives
            log_ratio += dx.ln() - dy.ln();
            cw = nw;
            cx = nx;
            cy = ny;
        }
        k_max = k_max.max(log_ratio.abs().exp());
    }
    Ok(DistortionReport { k: k_max, samples, depth, delta })
}
