//! Topological pressure `P(t) = lim (1/n) log L_t^n 1(w)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MapSpec, TruncationPolicy};
use crate::sphere::{chordal_dist, SpherePoint};
use crate::transfer::postsingular_prefix;
use crate::tree::{BackwardTree, LevelStats, Node, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extrapolation {
    /// Last increment `log V_n - log V_{n-1}` taken as is.
    Increment,
    /// Aitken Δ² on increments that shrink geometrically.
    Aitken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub t: f64,
    pub base: SpherePoint,
    /// `P_n = (1/n) log L_t^n 1(base)` for `n = 1..=depth`.
    pub per_depth: Vec<f64>,
    /// `log L_t^n 1 - log L_t^{n-1} 1`.
    pub increments: Vec<f64>,
    pub extrapolated: f64,
    pub error: f64,
    pub method: Extrapolation,
    /// Cumulative fraction of mass discarded by pruning.
    pub discarded: f64,
    pub levels: Vec<LevelStats>,
}

impl PressureEstimate {
    pub fn low(&self) -> f64 {
        self.extrapolated - self.error
    }
    pub fn high(&self) -> f64 {
        self.extrapolated + self.error
    }
}

/// Limit of a sequence of increments with an error bar.
///
/// The increments converge geometrically in the expanding regime, where
/// Aitken's Δ² applies; otherwise the last increment is used with a bar
/// that assumes no better than `1/n` convergence.
pub fn extrapolate(d: &[f64]) -> (f64, f64, Extrapolation) {
    let n = d.len();
    match n {
        0 => (f64::NAN, f64::INFINITY, Extrapolation::Increment),
        1 | 2 => {
            let err = if n == 2 { 2.0 * (d[1] - d[0]).abs() } else { f64::INFINITY };
            (d[n - 1], err, Extrapolation::Increment)
        }
        _ => {
            let d1 = d[n - 2] - d[n - 3];
            let d2 = d[n - 1] - d[n - 2];
            // a `c/n^a` tail with a < 1 is underestimated by n|Δd|, hence the 2
            let slow = 2.0
                * (n.saturating_sub(3).max(1)..n)
                    .map(|j| (j + 1) as f64 * (d[j] - d[j - 1]).abs())
                    .fold(0.0, f64::max);
            if d1 != 0.0 {
                let r = d2 / d1;
                if r > 0.0 && r < 0.9 {
                    let corr = d2 * r / (1.0 - r);
                    // keep a floor from the last step in case the ratio is noise
                    return (d[n - 1] + corr, 2.0 * corr.abs() + d2.abs() * 0.1, Extrapolation::Aitken);
                }
                if r > -0.9 && r <= 0.0 {
                    // oscillating but contracting: the limit lies between the last two
                    return (0.5 * (d[n - 1] + d[n - 2]), d2.abs(), Extrapolation::Increment);
                }
            }
            if d2 == 0.0 {
                return (d[n - 1], 0.0, Extrapolation::Increment);
            }
            (d[n - 1], slow, Extrapolation::Increment)
        }
    }
}

pub fn pressure_estimate(
    f: &MapSpec,
    t: f64,
    base: SpherePoint,
    depth: usize,
    policy: &TruncationPolicy,
    params: &TreeParams,
) -> Result<PressureEstimate> {
    if depth == 0 {
        return Err(Error::OutOfRange("depth must be positive".into()));
    }
    for p in postsingular_prefix(f, 30) {
        if chordal_dist(p, base) < 1e-6 {
            return Err(Error::OutOfRange("base point lies on the postsingular set".into()));
        }
    }
    let mut tree = BackwardTree::new(f, t, vec![Node { z: base, weight: 1.0 }], policy, *params)?;
    iterate(&mut tree, t, base, depth)
}

pub(crate) fn iterate(tree: &mut BackwardTree<'_>, t: f64, base: SpherePoint, depth: usize) -> Result<PressureEstimate> {
    let mut levels = Vec::with_capacity(depth);
    let mut increments = Vec::with_capacity(depth);
    let mut per_depth = Vec::with_capacity(depth);
    let mut log_v = 0.0;
    let mut kept = 1.0;
    for n in 1..=depth {
        let s = tree.step()?;
        kept *= 1.0 - s.discarded;
        if 1.0 - kept > 0.1 {
            return Err(Error::PruningOverflow(1.0 - kept));
        }
        log_v += s.log_growth;
        increments.push(s.log_growth);
        per_depth.push(log_v / n as f64);
        levels.push(s);
    }
    let (extrapolated, err, method) = extrapolate(&increments);
    // pruning and tail-bracket slack perturb each increment by at most this much
    let slack = levels.iter().rev().take(3).map(|s| s.discarded + s.tail_uncertainty).fold(0.0, f64::max);
    Ok(PressureEstimate {
        t,
        base,
        per_depth,
        increments,
        extrapolated,
        error: err + slack,
        method,
        discarded: 1.0 - kept,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub t_grid: Vec<f64>,
    pub estimates: Vec<PressureEstimate>,
    pub base_points: Vec<SpherePoint>,
}

impl PressureCurve {
    /// Extrapolated values strictly decrease, allowing overlap of error bars.
    pub fn is_decreasing(&self) -> bool {
        self.estimates.windows(2).all(|w| w[1].low() < w[0].high())
    }
}

pub fn pressure_curve(
    f: &MapSpec,
    t_grid: &[f64],
    base: SpherePoint,
    depth: usize,
    policy: &TruncationPolicy,
    params: &TreeParams,
) -> Result<PressureCurve> {
    let estimates = t_grid
        .iter()
        .map(|&t| pressure_estimate(f, t, base, depth, policy, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(PressureCurve { t_grid: t_grid.to_vec(), estimates, base_points: vec![base] })
}
