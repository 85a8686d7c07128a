//! Geometry of the logarithmic tracts over the asymptotic values, and the
//! growth of the spherical derivative at infinity.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MapSpec;
use crate::sphere::{Meromorphic, SpherePoint, C};
use crate::sum::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractCell {
    pub asym_value: C,
    /// Radial index: the cell maps to chordal distance `T 2^{-n}` from the value.
    pub n: u32,
    /// Lateral index in periods.
    pub k: i64,
    pub z: C,
    /// `1 / |f'(z)|_σ`.
    pub weight_scale: f64,
}

fn which_value(f: &MapSpec, a: C) -> Result<usize> {
    let av = f.asymptotic_values();
    let tol = 1e-12 * a.norm().max(1.0);
    av.iter().position(|&v| (v - a).norm() <= tol).ok_or(Error::NotAsymptoticValue(a))
}

/// Representatives `z_{n,k}` of the cells of the tract over `a`, for
/// `0 <= n <= n_max` and `|k| <= k_max`.
pub fn tract_cells(f: &MapSpec, a: C, radius: f64, n_max: u32, k_max: u32) -> Result<Vec<TractCell>> {
    let which = which_value(f, a)?;
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::OutOfRange("tract radius must lie in (0, 1)".into()));
    }
    let mut out = Vec::with_capacity((n_max as usize + 1) * (2 * k_max as usize + 1));
    for n in 0..=n_max {
        // chordal radius r around a is the Euclidean radius r (1 + |a|^2) to first order
        let delta = C::new(radius * (-(n as f64)).exp2() * (1.0 + a.norm_sqr()), 0.0);
        for k in -(k_max as i64)..=k_max as i64 {
            let z = f.tract_point(which, delta, k);
            let d = f.sigma_deriv(SpherePoint::Finite(z))?;
            out.push(TractCell { asym_value: a, n, k, z, weight_scale: 1.0 / d });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractFit {
    /// Slope of `log|z_{n,k}|` against `log (n^2+k^2)^{1/2}`; `1/rho` in theory.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Every cell has `|z| / (n^2+k^2)^{1/(2 rho)}` in `[1/C, C]`.
    pub c: f64,
    pub cells_used: usize,
}

/// Regression over the cells with `0 < n^2 + k^2 <= N^2`, `N` the smaller
/// index range. A square index window would over-weight its corners, where
/// the anisotropy between the radial and lateral steps biases the slope.
pub fn tract_fit(cells: &[TractCell], rho: f64) -> Result<TractFit> {
    let n_max = cells.iter().map(|c| c.n as i64).max().unwrap_or(0);
    let k_max = cells.iter().map(|c| c.k.abs()).max().unwrap_or(0);
    let r = n_max.min(k_max);
    let used: Vec<&TractCell> = cells
        .iter()
        .filter(|c| {
            let q = c.n as i64 * c.n as i64 + c.k * c.k;
            q > 0 && q <= r * r
        })
        .collect();
    if used.len() < 3 {
        return Err(Error::OutOfRange("need at least three tract cells".into()));
    }
    let xs: Vec<f64> = used.iter().map(|c| 0.5 * ((c.n as f64).powi(2) + (c.k as f64).powi(2)).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|c| c.z.norm().ln()).collect();
    let (intercept, slope, r2) = linear_fit(&xs, &ys);
    let mut c: f64 = 1.0;
    for (x, y) in xs.iter().zip(&ys) {
        let ratio = y - x / rho;
        c = c.max(ratio.abs().exp());
    }
    Ok(TractFit { slope, intercept, r2, c, cells_used: used.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Slope of `log|f'(z)|_σ` against `log|z|` over the `count` preimages of
/// `w` nearest the origin; `rho + 1` away from the tracts.
pub fn derivative_growth(f: &MapSpec, w: SpherePoint, count: usize) -> Result<GrowthFit> {
    let lat = f.lattice(w)?;
    let half = (count / 2) as i64;
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for k in -half..(count as i64 - half) {
        let z = lat.at(k);
        if z.norm() == 0.0 {
            continue;
        }
        xs.push(z.norm().ln());
        ys.push(f.sigma_deriv(SpherePoint::Finite(z))?.ln());
    }
    let (_, slope, r2) = linear_fit(&xs, &ys);
    Ok(GrowthFit { slope, r2, samples: xs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractRatioBand {
    /// Geometric centre of the observed ratios.
    pub centre: f64,
    /// All ratios lie in `[centre / c, centre * c]`.
    pub c: f64,
    pub samples: usize,
}

/// Spread of `|f'(z)|_σ / ((1 + |z|^{rho+1}) |f(z) - a|)` over random points
/// of the tract over `a` that map into the chordal disk of radius `radius`.
pub fn tract_ratio_band(f: &MapSpec, a: C, radius: f64, samples: usize, seed: u64) -> Result<TractRatioBand> {
    let which = which_value(f, a)?;
    if samples == 0 {
        return Err(Error::OutOfRange("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 + a.norm_sqr();
    let exp = f.rho() + 1.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let r = radius * rng.random::<f64>().sqrt().max(1e-6);
        let delta = C::from_polar(r * scale, rng.random::<f64>() * TAU);
        let k: i64 = rng.random_range(-50..=50);
        let z = f.tract_point(which, delta, k);
        let fz = f.eval_finite(z).finite().ok_or(Error::PoleAt(z))?;
        let d = f.sigma_deriv(SpherePoint::Finite(z))?;
        let ratio = d / ((1.0 + z.norm().powf(exp)) * (fz - a).norm());
        lo = lo.min(ratio.ln());
        hi = hi.max(ratio.ln());
    }
    Ok(TractRatioBand { centre: (0.5 * (lo + hi)).exp(), c: (0.5 * (hi - lo)).exp(), samples })
}
