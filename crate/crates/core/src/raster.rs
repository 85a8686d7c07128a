//! Independent geometry: Fatou/Julia classification by attraction, the
//! real-line Cantor structure of hyperbolic tangent maps, and box counting.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MapSpec;
use crate::regime::{Regime, RegimeReport};
use crate::sphere::{chordal_dist, SpherePoint, C};
use crate::sum::{compensated_sum, linear_fit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    /// Attracted to the cycle with this index in [`RegimeReport::cycles`].
    Fatou(usize),
    Julia,
    Undecided,
}

/// Chordal radius of the disks around attracting cycle points that count as captured.
pub const TRAP_RADIUS: f64 = 1e-4;

/// Attraction-based classification, sound only for hyperbolic maps; any
/// other regime yields `Undecided`.
pub fn classify_point(f: &MapSpec, z: SpherePoint, max_iter: usize, regime: &RegimeReport) -> PointClass {
    if regime.regime != Regime::Hyperbolic {
        return PointClass::Undecided;
    }
    let traps: Vec<(usize, SpherePoint)> = regime
        .cycles
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_attracting())
        .flat_map(|(i, c)| c.points.iter().map(move |&p| (i, SpherePoint::Finite(p))))
        .collect();
    let mut cur = z;
    for step in 0..=max_iter {
        let c = match cur {
            // infinity and the prepoles belong to the Julia set
            SpherePoint::Infinity => return PointClass::Julia,
            SpherePoint::Finite(c) => c,
        };
        if let Some(&(i, _)) = traps.iter().find(|(_, p)| chordal_dist(cur, *p) < TRAP_RADIUS) {
            // captures in the last tenth of the budget are too slow to trust
            return if step * 10 < max_iter * 9 { PointClass::Fatou(i) } else { PointClass::Undecided };
        }
        cur = f.eval_finite(c);
    }
    PointClass::Julia
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub region: Region,
    /// Row-major, top row first: 0 Julia, 255 Fatou, 128 undecided.
    pub pixels: Vec<u8>,
    pub undecided_fraction: f64,
}

pub fn render_raster(
    f: &MapSpec,
    regime: &RegimeReport,
    region: Region,
    width: usize,
    height: usize,
    max_iter: usize,
) -> Result<Raster> {
    if regime.regime != Regime::Hyperbolic {
        return Err(Error::UnsupportedRegime("rasterization needs a hyperbolic map".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::OutOfRange("raster must be non-empty".into()));
    }
    let pixels: Vec<u8> = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = region.ymax - (row as f64 + 0.5) / height as f64 * (region.ymax - region.ymin);
            (0..width).map(move |col| {
                let x = region.xmin + (col as f64 + 0.5) / width as f64 * (region.xmax - region.xmin);
                match classify_point(f, SpherePoint::new(x, y), max_iter, regime) {
                    PointClass::Julia => 0u8,
                    PointClass::Fatou(_) => 255,
                    PointClass::Undecided => 128,
                }
            })
        })
        .collect();
    let undecided = pixels.iter().filter(|&&p| p == 128).count();
    Ok(Raster { width, height, region, undecided_fraction: undecided as f64 / pixels.len() as f64, pixels })
}

/// Plain PGM ("P2").
pub fn write_pgm<W: Write>(r: &Raster, mut out: W) -> Result<()> {
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", r.width, r.height)?;
    writeln!(out, "255")?;
    for row in r.pixels.chunks(r.width) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Real tangent parameter in `(0, 1)`, the regime where the Julia set is a
/// Cantor subset of the extended real line.
pub(crate) fn cantor_lambda(f: &MapSpec) -> Result<f64> {
    let l = f.real_lambda().ok_or(Error::ComplexParameter)?;
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::UnsupportedRegime(format!("real Julia set needs lambda in (0, 1), got {l}")));
    }
    Ok(l)
}

/// The repelling fixed point `x*` of `lambda tan x` in `(0, π/2)`; `(-x*, x*)`
/// is the real trace of the immediate basin of 0.
pub fn repelling_fixed_point(lambda: f64) -> f64 {
    // lambda tan x - x changes sign once on (0, π/2)
    let (mut lo, mut hi) = (1e-9, FRAC_PI_2 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lambda * mid.tan() - mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// True when every point of `[a, b]` is attracted to 0 within `max_iter`
/// steps, decided by iterating the interval (`lambda tan` is increasing
/// between poles). Intervals that meet a pole meet the Julia set.
pub(crate) fn interval_is_fatou(lambda: f64, xstar: f64, mut a: f64, mut b: f64, max_iter: usize) -> bool {
    for _ in 0..max_iter {
        if !(a.is_finite() && b.is_finite()) {
            return false;
        }
        if ((a - FRAC_PI_2) / PI).floor() != ((b - FRAC_PI_2) / PI).floor() {
            return false;
        }
        a = lambda * a.tan();
        b = lambda * b.tan();
        if -xstar < a && b < xstar {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealJuliaCover {
    /// Disjoint-or-touching subintervals of `[-π/2, π/2]`, sorted.
    pub intervals: Vec<(f64, f64)>,
    pub depth: usize,
    pub fixed_point: f64,
    /// Branches refined individually.
    pub k_refine: i64,
    /// Beyond this branch the preimages are covered by one interval ending at the pole.
    pub k_hull: i64,
}

impl RealJuliaCover {
    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Nested covers of one period `J ∩ [-π/2, π/2]` of the real Julia set.
///
/// `J` is π-periodic on the real line, so one period is the limit set of
/// the branches `g_k(y) = arctan((y + kπ)/λ)` acting on the fundamental
/// set `[-π/2, -x*] ∪ [x*, π/2]`. Intervals shorter than `min_len` stop
/// being refined, and branch images shorter than `min_len` are taken whole,
/// so the cover is exact down to that resolution.
pub fn refine_real_julia(f: &MapSpec, depth: usize, min_len: f64) -> Result<RealJuliaCover> {
    let lambda = cantor_lambda(f)?;
    if !(min_len > 0.0) {
        return Err(Error::OutOfRange("min_len must be positive".into()));
    }
    let xs = repelling_fixed_point(lambda);
    let g = |k: i64, y: f64| ((y + k as f64 * PI) / lambda).atan();
    let mut k_refine: i64 = 1;
    while g(k_refine, FRAC_PI_2) - g(k_refine, -FRAC_PI_2) >= min_len {
        k_refine += 1;
    }
    let mut k_hull = k_refine;
    while FRAC_PI_2 - g(k_hull, -FRAC_PI_2) > min_len {
        k_hull += 1;
    }
    // whole images of the fundamental set under far branches, then the hull at the pole
    let mut far = Vec::new();
    for k in k_refine..=k_hull {
        far.push((g(k, -FRAC_PI_2), g(k, FRAC_PI_2)));
        far.push((-g(k, FRAC_PI_2), -g(k, -FRAC_PI_2)));
    }
    far.push((g(k_hull + 1, -FRAC_PI_2), FRAC_PI_2));
    far.push((-FRAC_PI_2, -g(k_hull + 1, -FRAC_PI_2)));
    let mut set = vec![(-FRAC_PI_2, -xs), (xs, FRAC_PI_2)];
    for _ in 0..depth {
        let mut next: Vec<(f64, f64)> = set
            .par_iter()
            .flat_map_iter(|&(u, v)| {
                let small = v - u < min_len;
                let ks = if small { 0..=0 } else { -(k_refine - 1)..=(k_refine - 1) };
                ks.map(move |k| if small { (u, v) } else { (g(k, u), g(k, v)) })
            })
            .collect();
        next.extend_from_slice(&far);
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        set = next;
    }
    Ok(RealJuliaCover { intervals: set, depth, fixed_point: xs, k_refine, k_hull })
}

#[derive(Debug, Clone)]
pub enum Primitives {
    Points(Vec<[f64; 2]>),
    Intervals(Vec<(f64, f64)>),
}

impl Primitives {
    fn len(&self) -> usize {
        match self {
            Primitives::Points(p) => p.len(),
            Primitives::Intervals(i) => i.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountResult {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r2: f64,
    pub region: Region,
}

/// Least-squares slope of `log N(ε)` against `log 1/ε`, boxes anchored at
/// the lower-left corner of the bounding box. Point sets are counted in
/// their principal-axis frame, so the slope does not change when the set
/// is moved rigidly; `region` is the bounding box in that frame.
pub fn box_count(prims: &Primitives, scales: &[f64]) -> Result<BoxCountResult> {
    if prims.len() < 1000 {
        return Err(Error::DegenerateScales(format!("need at least 1000 primitives, got {}", prims.len())));
    }
    if scales.len() < 5 || scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateScales("need at least five positive scales".into()));
    }
    let smax = scales.iter().copied().fold(0.0, f64::max);
    let smin = scales.iter().copied().fold(f64::INFINITY, f64::min);
    if smax / smin < 100.0 {
        return Err(Error::DegenerateScales("scales must span at least two decades".into()));
    }
    let framed;
    let prims = match prims {
        Primitives::Points(p) => {
            framed = Primitives::Points(principal_frame(p));
            &framed
        }
        iv => iv,
    };
    let region = match prims {
        Primitives::Points(p) => p.iter().fold(
            Region { xmin: f64::INFINITY, xmax: f64::NEG_INFINITY, ymin: f64::INFINITY, ymax: f64::NEG_INFINITY },
            |r, q| Region { xmin: r.xmin.min(q[0]), xmax: r.xmax.max(q[0]), ymin: r.ymin.min(q[1]), ymax: r.ymax.max(q[1]) },
        ),
        Primitives::Intervals(iv) => Region {
            xmin: iv.iter().map(|i| i.0).fold(f64::INFINITY, f64::min),
            xmax: iv.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max),
            ymin: 0.0,
            ymax: 0.0,
        },
    };
    let counts: Vec<usize> = scales
        .par_iter()
        .map(|&e| match prims {
            Primitives::Points(p) => {
                let (bx, by) = (cell(region.xmin, region.xmax, e), cell(region.ymin, region.ymax, e));
                let set: HashSet<(i64, i64)> = p.iter().map(|q| (bx(q[0]), by(q[1]))).collect();
                set.len()
            }
            Primitives::Intervals(iv) => {
                let bx = cell(region.xmin, region.xmax, e);
                let mut set: HashSet<i64> = HashSet::new();
                for &(a, b) in iv {
                    set.extend(bx(a)..=bx(b));
                }
                set.len()
            }
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (_, slope, r2) = linear_fit(&xs, &ys);
    Ok(BoxCountResult { scales: scales.to_vec(), counts, slope, r2: r2.clamp(0.0, 1.0), region })
}

/// Box index along one axis of the grid anchored at `lo`. The far edge
/// `hi` belongs to the last box rather than opening one of its own, also
/// when rounding puts it a hair past a box edge.
fn cell(lo: f64, hi: f64, e: f64) -> impl Fn(f64) -> i64 {
    let last = (((hi - lo) / e - 1e-9).ceil() as i64 - 1).max(0);
    move |x| (((x - lo) / e).floor() as i64).min(last)
}

/// Rotates centred points so the major axis of their covariance is the x
/// axis, with positive third moment along it. Isotropic sets keep their
/// orientation, since they have no preferred axis.
fn principal_frame(p: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = p.len() as f64;
    let mx = compensated_sum(p.iter().map(|q| q[0])) / n;
    let my = compensated_sum(p.iter().map(|q| q[1])) / n;
    let cxx = compensated_sum(p.iter().map(|q| (q[0] - mx).powi(2))) / n;
    let cyy = compensated_sum(p.iter().map(|q| (q[1] - my).powi(2))) / n;
    let cxy = compensated_sum(p.iter().map(|q| (q[0] - mx) * (q[1] - my))) / n;
    let (d, off) = (cxx - cyy, 2.0 * cxy);
    if d.hypot(off) <= 1e-9 * (cxx + cyy) {
        return p.to_vec();
    }
    let phi = 0.5 * off.atan2(d);
    let (c, s) = (phi.cos(), phi.sin());
    let mut out: Vec<[f64; 2]> = p.iter().map(|q| {
        let (x, y) = (q[0] - mx, q[1] - my);
        [c * x + s * y, -s * x + c * y]
    })
    .collect();
    let skew = compensated_sum(out.iter().map(|q| q[0].powi(3)));
    if skew < -1e-9 * cxx.max(cyy).powf(1.5) * n {
        for q in &mut out {
            *q = [-q[0], -q[1]];
        }
    }
    out
}

/// `n` scales spaced evenly in log between `hi` and `lo`.
pub fn log_scales(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1).max(1) as f64)).collect()
}

/// Box-count dimension of one period of the real Julia set.
pub fn real_julia_dimension(f: &MapSpec, depth: usize, min_len: f64) -> Result<BoxCountResult> {
    let cover = refine_real_julia(f, depth, min_len)?;
    let scales = log_scales(0.1, 10.0 * min_len, 13);
    box_count(&Primitives::Intervals(cover.intervals), &scales)
}

/// Real points on a uniform grid, useful for fixtures.
pub fn segment_points(a: C, b: C, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let z = a + (b - a) * (i as f64 / (n - 1).max(1) as f64);
            [z.re, z.im]
        })
        .collect()
}
