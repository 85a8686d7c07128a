//! Poincaré series at infinity and its convergence exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MapSpec, TruncationPolicy};
use crate::pressure::{extrapolate, Extrapolation};
use crate::regime::{Regime, RegimeReport};
use crate::sphere::SpherePoint;
use crate::sum::{linear_fit, log_sum_exp};
use crate::tree::{BackwardTree, LevelStats, Node, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSeries {
    pub t: f64,
    /// `log L_t^n 1(inf)` for `n = 1..=n_max`.
    pub log_terms: Vec<f64>,
    /// `log Σ_{j<=n} L_t^j 1(inf)`.
    pub log_partial_sums: Vec<f64>,
    /// Limit of the per-step log ratio of consecutive terms.
    pub log_ratio: f64,
    pub log_ratio_error: f64,
    pub method: Extrapolation,
    /// Least-squares slope of the log terms over the second half of the range.
    pub tail_slope: f64,
    pub levels: Vec<LevelStats>,
}

impl PoincareSeries {
    pub fn terms(&self) -> Vec<f64> {
        self.log_terms.iter().map(|l| l.exp()).collect()
    }

    pub fn ratio(&self) -> f64 {
        self.log_ratio.exp()
    }
}

/// Terms `L_t^n 1(inf)`; the first level of the tree is the pole lattice.
pub fn poincare_partial(
    f: &MapSpec,
    t: f64,
    n_max: usize,
    policy: &TruncationPolicy,
    params: &TreeParams,
) -> Result<PoincareSeries> {
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be positive".into()));
    }
    let root = vec![Node { z: SpherePoint::Infinity, weight: 1.0 }];
    let mut tree = BackwardTree::new(f, t, root, policy, *params)?;
    let mut log_terms = Vec::with_capacity(n_max);
    let mut log_partial_sums = Vec::with_capacity(n_max);
    let mut increments = Vec::with_capacity(n_max);
    let mut levels = Vec::with_capacity(n_max);
    let mut acc = 0.0;
    let mut kept = 1.0;
    for _ in 0..n_max {
        let s = tree.step()?;
        kept *= 1.0 - s.discarded;
        if 1.0 - kept > 0.1 {
            return Err(Error::PruningOverflow(1.0 - kept));
        }
        acc += s.log_growth;
        // the first term is the bare sum over poles, not a ratio
        if !log_terms.is_empty() {
            increments.push(s.log_growth);
        }
        log_terms.push(acc);
        log_partial_sums.push(log_sum_exp(&log_terms));
        levels.push(s);
    }
    let (log_ratio, err, method) = if increments.is_empty() {
        (f64::NAN, f64::INFINITY, Extrapolation::Increment)
    } else {
        extrapolate(&increments)
    };
    let slack = levels.iter().rev().take(3).map(|s| s.discarded + s.tail_uncertainty).fold(0.0, f64::max);
    let half = log_terms.len() / 2;
    let tail_slope = if log_terms.len() - half >= 2 {
        let xs: Vec<f64> = (half..log_terms.len()).map(|n| n as f64).collect();
        linear_fit(&xs, &log_terms[half..]).1
    } else {
        f64::NAN
    };
    Ok(PoincareSeries {
        t,
        log_terms,
        log_partial_sums,
        log_ratio,
        log_ratio_error: err + slack,
        method,
        tail_slope,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentMethod {
    PoincareCutoff,
    PressureRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioClass {
    pub t: f64,
    pub log_ratio: f64,
    pub error: f64,
    /// Half-width of the undecided band around `log ratio = 0`.
    pub band: f64,
    pub class: Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub h: f64,
    pub bracket: (f64, f64),
    pub method: ExponentMethod,
    pub diagnostics: Vec<RatioClass>,
    /// Whether the lower bound `2 rho/(rho+1)` for sub-expanding maps was applied.
    pub sub_expanding_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Largest relative deviation of the ratio from 1 still called undecided.
    pub sigma: f64,
    /// The band shrinks to this many error bars when the estimate is sharper than `sigma`.
    pub significance: f64,
    /// Smallest band, whatever the error bar says.
    pub min_band: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { sigma: 0.05, significance: 3.0, min_band: 0.005 }
    }
}

impl ClassifyParams {
    pub fn classify(&self, t: f64, log_ratio: f64, error: f64) -> RatioClass {
        let up = (1.0 + self.sigma).ln().min((self.significance * error).max(self.min_band));
        let down = (-(1.0 - self.sigma).ln()).min((self.significance * error).max(self.min_band));
        let class = if !log_ratio.is_finite() {
            Divergence::Inconclusive
        } else if log_ratio > up {
            Divergence::Divergent
        } else if log_ratio < -down {
            Divergence::Convergent
        } else {
            Divergence::Inconclusive
        };
        RatioClass { t, log_ratio, error, band: up.max(down), class }
    }
}

/// Bracket the convergence exponent of the Poincaré series from the
/// divergence class of each grid exponent.
pub fn estimate_h(
    f: &MapSpec,
    t_grid: &[f64],
    n_max: usize,
    policy: &TruncationPolicy,
    params: &TreeParams,
    classify: &ClassifyParams,
    regime: Option<&RegimeReport>,
) -> Result<ExponentEstimate> {
    let thr = f.borel_threshold();
    if t_grid.is_empty() {
        return Err(Error::OutOfRange("empty exponent grid".into()));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::OutOfRange("exponent grid must be strictly increasing".into()));
    }
    if t_grid[0] <= thr || *t_grid.last().unwrap() > 2.0 {
        return Err(Error::OutOfRange(format!("exponent grid must lie in ({thr}, 2]")));
    }
    let diagnostics = t_grid
        .iter()
        .map(|&t| {
            let s = poincare_partial(f, t, n_max, policy, params)?;
            Ok(classify.classify(t, s.log_ratio, s.log_ratio_error))
        })
        .collect::<Result<Vec<_>>>()?;
    bracket_from_classes(f, diagnostics, regime)
}

/// Shared by [`estimate_h`] and callers that classify their own series.
pub fn bracket_from_classes(
    f: &MapSpec,
    diagnostics: Vec<RatioClass>,
    regime: Option<&RegimeReport>,
) -> Result<ExponentEstimate> {
    let rho = f.rho();
    let thr = rho / (rho + 1.0);
    for w in diagnostics.windows(2) {
        if w[0].class == Divergence::Inconclusive && w[1].class == Divergence::Inconclusive {
            return Err(Error::InconclusiveRatio(w[0].t));
        }
    }
    let first_conv = diagnostics.iter().position(|d| d.class == Divergence::Convergent);
    let last_div = diagnostics.iter().rposition(|d| d.class == Divergence::Divergent);
    if let (Some(c), Some(d)) = (first_conv, last_div) {
        if d > c {
            return Err(Error::InconsistentRegime(format!(
                "series converges at t = {} but diverges at t = {}",
                diagnostics[c].t, diagnostics[d].t
            )));
        }
    }
    let mut low = last_div.map(|i| diagnostics[i].t).unwrap_or(thr);
    let high = first_conv.map(|i| diagnostics[i].t).unwrap_or(2.0);
    let sub_expanding = regime.map(|r| r.regime == Regime::SubExpanding).unwrap_or(false);
    if sub_expanding {
        let bound = 2.0 * rho / (rho + 1.0);
        if high <= bound {
            return Err(Error::InconsistentRegime(format!(
                "series converges at t = {high}, below the sub-expanding bound {bound}"
            )));
        }
        low = low.max(bound);
    }
    // zero of the interpolated log ratio inside the bracket, else its midpoint
    let mut h = 0.5 * (low + high);
    for w in diagnostics.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.log_ratio > 0.0 && b.log_ratio <= 0.0 && a.log_ratio.is_finite() && b.log_ratio.is_finite() {
            let x = a.t + (b.t - a.t) * a.log_ratio / (a.log_ratio - b.log_ratio);
            if x >= low && x <= high {
                h = x;
            }
        }
    }
    Ok(ExponentEstimate {
        h,
        bracket: (low, high),
        method: ExponentMethod::PoincareCutoff,
        diagnostics,
        sub_expanding_bound: sub_expanding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingExponent {
    pub exponent: f64,
    pub r2: f64,
}

/// Convergence exponent of `Σ w_k^t` from the counting function
/// `#{k : w_k >= ε} ≈ ε^{-h}`, fitted over the upper half of the ranks.
pub fn counting_exponent(weights: &[f64]) -> Result<CountingExponent> {
    let mut w: Vec<f64> = weights.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if w.len() < 10 {
        return Err(Error::OutOfRange("need at least ten positive weights".into()));
    }
    w.sort_by(|a, b| b.total_cmp(a));
    let start = w.len() / 2;
    let xs: Vec<f64> = w[start..].iter().map(|x| -x.ln()).collect();
    let ys: Vec<f64> = (start..w.len()).map(|r| ((r + 1) as f64).ln()).collect();
    let (_, slope, r2) = linear_fit(&xs, &ys);
    Ok(CountingExponent { exponent: slope, r2 })
}
