//! Atomic approximations of the Patterson–Sullivan conformal measure and
//! the diagnostics run on them.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MapSpec, TruncationPolicy};
use crate::sphere::{chordal_dist, Meromorphic, SpherePoint, C};
use crate::sum::{linear_fit, NeumaierSum};
use crate::tree::{BackwardTree, Node, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: C,
    pub weight: f64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// Sorted by depth, then by position in the canonical cell order.
    pub atoms: Vec<Atom>,
    pub s: f64,
    /// `log Z`, the log of the truncated Poincaré sum used to normalize.
    pub log_norm: f64,
    pub depth_max: u32,
    /// Mass lost to pruning and to the lumped far-branch node at infinity,
    /// relative to `Z`.
    pub discarded_mass_bound: f64,
}

impl AtomicMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).collect::<NeumaierSum>().value()
    }

    pub fn mass_where(&self, pred: impl Fn(&Atom) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(a)).map(|a| a.weight).collect::<NeumaierSum>().value()
    }

    pub fn in_disk(&self, centre: SpherePoint, radius: f64) -> Vec<&Atom> {
        self.atoms.iter().filter(|a| chordal_dist(a.z.into(), centre) < radius).collect()
    }
}

/// Atoms merged when closer than this (chordal).
const MERGE_TOL: f64 = 1e-9;

/// `ν_s = (1/Z) Σ_{n <= depth_max} Σ_{f^n(z) = inf} |(f^n)'(z)|_σ^{-s} δ_z`.
///
/// `h_high` is the upper end of an exponent bracket; the series at `s`
/// must converge, so `s` has to clear it by 0.02.
pub fn build_ps_measure(
    f: &MapSpec,
    s: f64,
    h_high: f64,
    depth_max: u32,
    policy: &TruncationPolicy,
    params: &TreeParams,
) -> Result<AtomicMeasure> {
    if s < h_high + 0.02 {
        return Err(Error::SubcriticalExponent { s, high: h_high });
    }
    if depth_max == 0 {
        return Err(Error::OutOfRange("depth_max must be positive".into()));
    }
    let root = vec![Node { z: SpherePoint::Infinity, weight: 1.0 }];
    let mut tree = BackwardTree::new(f, s, root, policy, *params)?;
    let mut log_v = 0.0;
    let mut raw: Vec<(C, f64, u32)> = Vec::new();
    let mut lost = NeumaierSum::new();
    let mut total = NeumaierSum::new();
    // weights are kept relative to the first level to stay in range
    let mut first = None;
    for depth in 1..=depth_max {
        let st = tree.step()?;
        log_v += st.log_growth;
        let base = *first.get_or_insert(log_v);
        let scale = (log_v - base).exp();
        // pruned and asymptotic-value mass never became a node
        lost.add(scale * st.discarded / (1.0 - st.discarded).max(f64::MIN_POSITIVE));
        for n in tree.nodes() {
            let w = n.weight * scale;
            total.add(w);
            match n.z {
                SpherePoint::Finite(z) => raw.push((z, w, depth)),
                SpherePoint::Infinity => lost.add(w),
            }
        }
    }
    let z_rel = total.value();
    let atoms = merge_close(raw);
    let kept: f64 = atoms.iter().map(|a| a.1).collect::<NeumaierSum>().value();
    let atoms: Vec<Atom> = atoms.into_iter().map(|(z, w, depth)| Atom { z, weight: w / kept, depth }).collect();
    Ok(AtomicMeasure {
        atoms,
        s,
        log_norm: z_rel.ln() + first.unwrap_or(0.0),
        depth_max,
        discarded_mass_bound: lost.value() / z_rel,
    })
}

/// Merge atoms closer than [`MERGE_TOL`] into the earlier one, keeping order.
fn merge_close(raw: Vec<(C, f64, u32)>) -> Vec<(C, f64, u32)> {
    let q = |x: f64| (x / MERGE_TOL).floor() as i64;
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut out: Vec<(C, f64, u32)> = Vec::with_capacity(raw.len());
    'atoms: for (z, w, d) in raw {
        let xyz = SpherePoint::Finite(z).to_xyz();
        let key = (q(xyz[0]), q(xyz[1]), q(xyz[2]));
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dh in -1..=1 {
                    if let Some(list) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dh)) {
                        for &i in list {
                            if chordal_dist(out[i].0.into(), z.into()) < MERGE_TOL {
                                out[i].1 += w;
                                continue 'atoms;
                            }
                        }
                    }
                }
            }
        }
        grid.entry(key).or_default().push(out.len());
        out.push((z, w, d));
    }
    out
}

/// A chordal disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub centre: SpherePoint,
    pub radius: f64,
}

impl Cell {
    pub fn contains(&self, z: SpherePoint) -> bool {
        chordal_dist(z, self.centre) < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRatio {
    pub cell: Cell,
    /// `m(f(E)) / ∫_E |f'|_σ^h dm`.
    pub ratio: f64,
    pub atoms: usize,
    /// `log |f'|_σ` at the centre, the variable the ratio drifts with when
    /// `h` is wrong.
    pub log_deriv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalityReport {
    pub h_test: f64,
    pub cells: Vec<CellRatio>,
    /// `max(ratio, 1/ratio)` over the cells.
    pub c: f64,
    /// Slope of `log ratio` against `log |f'|_σ`; about `s - h_test` for a
    /// Patterson–Sullivan measure at exponent `s`.
    pub drift: f64,
    pub non_conformal: bool,
}

/// Cells are accepted as conformal when every ratio is within this factor.
pub const CONFORMAL_C: f64 = 2.0;
/// ... and the ratio does not drift with the derivative faster than this.
pub const CONFORMAL_DRIFT: f64 = 0.25;
const MIN_CELL_ATOMS: usize = 50;

/// Compare `m(f(E))` with `∫_E |f'|_σ^{h_test} dm` on each cell.
///
/// Atoms of depth `n` in `E` are preimages of atoms of depth `n - 1` in
/// `f(E)`, so both sides are restricted to matching depths: the integral
/// runs over depths `2..=depth_max` and the image mass over depths
/// `1..depth_max`. Membership in `f(E)` is decided by pulling each atom
/// back along the branch that lands in `E`.
pub fn conformality_check(f: &MapSpec, m: &AtomicMeasure, cells: &[Cell], h_test: f64) -> Result<ConformalityReport> {
    let period = f.period();
    // first preimage of every atom, reused for all cells
    let bases: Vec<Option<C>> = m
        .atoms
        .par_iter()
        .map(|a| f.lattice(SpherePoint::Finite(a.z)).ok().map(|l| l.base))
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let centre = cell.centre.finite().ok_or(Error::NotInjectiveOnCell)?;
        // injective iff no two points of E differ by a period
        let euclid_radius = cell.radius * (1.0 + centre.norm_sqr());
        if cell.radius >= 0.5 || 2.5 * euclid_radius >= period.norm() {
            return Err(Error::NotInjectiveOnCell);
        }
        let pull_back = |i: usize| {
            let b = bases[i]?;
            let k = ((centre - b) / period).re.round();
            (-1..=1)
                .map(|j| b + period * (k + j as f64))
                .find(|&z| cell.contains(SpherePoint::Finite(z)))
        };
        out.push(cell_ratio(f, m, cell, h_test, pull_back, true)?);
    }
    let c = out.iter().map(|r| r.ratio.max(1.0 / r.ratio)).fold(1.0, f64::max);
    let drift = if out.len() >= 2 {
        let xs: Vec<f64> = out.iter().map(|r| r.log_deriv).collect();
        let ys: Vec<f64> = out.iter().map(|r| r.ratio.ln()).collect();
        let (_, slope, _) = linear_fit(&xs, &ys);
        if slope.is_finite() { slope } else { 0.0 }
    } else {
        0.0
    };
    Ok(ConformalityReport { h_test, cells: out, c, drift, non_conformal: c > CONFORMAL_C || drift.abs() > CONFORMAL_DRIFT })
}

/// Ratio on one cell for any map, given the inverse branch into the cell
/// (`pull_back(i)` for atom `i`, `None` when that atom is not in `f(E)`).
/// With `depth_matched`, only atom depths that correspond under one
/// backward step are compared, as needed for measures built by
/// [`build_ps_measure`].
pub fn cell_ratio<F: Meromorphic>(
    f: &F,
    m: &AtomicMeasure,
    cell: &Cell,
    h_test: f64,
    pull_back: impl Fn(usize) -> Option<C> + Sync,
    depth_matched: bool,
) -> Result<CellRatio> {
    let inside: Vec<&Atom> = m.atoms.iter().filter(|a| cell.contains(a.z.into())).collect();
    if inside.len() < MIN_CELL_ATOMS {
        return Err(Error::CellTooThin(inside.len()));
    }
    let min_depth = if depth_matched { 2 } else { 0 };
    let mut integral = NeumaierSum::new();
    for a in inside.iter().filter(|a| a.depth >= min_depth) {
        let d = f.sigma_deriv(SpherePoint::Finite(a.z))?;
        integral.add(a.weight * d.powf(h_test));
    }
    let image = (0..m.atoms.len())
        .into_par_iter()
        .filter(|&i| !depth_matched || m.atoms[i].depth < m.depth_max)
        .filter_map(|i| pull_back(i).map(|_| m.atoms[i].weight))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<NeumaierSum>()
        .value();
    let den = integral.value();
    if !(den > 0.0) {
        return Err(Error::EmptyCell);
    }
    Ok(CellRatio { cell: *cell, ratio: image / den, atoms: inside.len(), log_deriv: f.sigma_deriv(cell.centre)?.ln() })
}

/// Disks of the given radius around atoms of the median depth, greedily
/// spread out, skipping disks on which `f` is not injective, that come
/// within `clearance` of `avoid`, or that hold fewer than 50 atoms.
pub fn median_depth_cells(
    f: &MapSpec,
    m: &AtomicMeasure,
    count: usize,
    radius: f64,
    avoid: &[SpherePoint],
    clearance: f64,
) -> Vec<Cell> {
    let mut depths: Vec<u32> = m.atoms.iter().map(|a| a.depth).collect();
    depths.sort_unstable();
    let median = depths.get(depths.len() / 2).copied().unwrap_or(1);
    let mut cands: Vec<&Atom> = m.atoms.iter().filter(|a| a.depth == median).collect();
    cands.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    let period = f.period().norm();
    let mut cells: Vec<Cell> = Vec::new();
    for a in cands {
        if cells.len() >= count {
            break;
        }
        let c = SpherePoint::Finite(a.z);
        if 2.5 * radius * (1.0 + a.z.norm_sqr()) >= period {
            continue;
        }
        if avoid.iter().any(|&p| chordal_dist(p, c) < clearance + radius) {
            continue;
        }
        if cells.iter().any(|e| chordal_dist(e.centre, c) < 2.0 * radius) {
            continue;
        }
        let cell = Cell { centre: c, radius };
        if m.atoms.iter().filter(|b| cell.contains(b.z.into())).count() < MIN_CELL_ATOMS {
            continue;
        }
        cells.push(cell);
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessProfile {
    pub radii: Vec<f64>,
    /// `m({|z| > R})`.
    pub mass: Vec<f64>,
    /// Slope of `log mass` against `log R` over radii with positive mass.
    pub decay_exponent: f64,
    /// Largest single atom beyond each radius, as a fraction of that tail mass.
    pub max_atom_share: Vec<f64>,
}

pub fn tightness_profile(m: &AtomicMeasure, radii: &[f64]) -> TightnessProfile {
    let mut sorted: Vec<(f64, f64)> = m.atoms.iter().map(|a| (a.z.norm(), a.weight)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut mass = Vec::with_capacity(radii.len());
    let mut share = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut acc = NeumaierSum::new();
        let mut big: f64 = 0.0;
        for &(_, w) in sorted.iter().take_while(|(n, _)| *n > r) {
            acc.add(w);
            big = big.max(w);
        }
        let v = acc.value();
        mass.push(v.clamp(0.0, 1.0));
        share.push(if v > 0.0 { big / v } else { 0.0 });
    }
    // the running sums are exact prefix sums, so monotonicity only needs clamping
    for i in 1..mass.len() {
        if radii[i] >= radii[i - 1] && mass[i] > mass[i - 1] {
            mass[i] = mass[i - 1];
        }
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&mass)
        .filter(|(r, v)| **r > 0.0 && **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    let decay_exponent = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys).1
    } else {
        f64::NAN
    };
    TightnessProfile { radii: radii.to_vec(), mass, decay_exponent, max_atom_share: share }
}

const HEADER: &str = "# psdim atomic measure v1";

/// Columnar text: a header, `key=value` comment lines, then `re im weight depth`.
pub fn write_measure<W: Write>(m: &AtomicMeasure, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "# s={:?}", m.s)?;
    writeln!(out, "# log_norm={:?}", m.log_norm)?;
    writeln!(out, "# depth_max={}", m.depth_max)?;
    writeln!(out, "# discarded_mass_bound={:?}", m.discarded_mass_bound)?;
    writeln!(out, "# columns: re im weight depth")?;
    for a in &m.atoms {
        writeln!(out, "{:?} {:?} {:?} {}", a.z.re, a.z.im, a.weight, a.depth)?;
    }
    Ok(())
}

pub fn read_measure<R: BufRead>(input: R) -> Result<AtomicMeasure> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != HEADER {
        return Err(Error::Io(format!("not an atomic measure file: {first:?}")));
    }
    let bad = |what: &str| Error::Io(format!("malformed measure file: {what}"));
    let mut m = AtomicMeasure { atoms: Vec::new(), s: f64::NAN, log_norm: f64::NAN, depth_max: 0, discarded_mass_bound: 0.0 };
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "s" => m.s = v.parse().map_err(|_| bad("s"))?,
                    "log_norm" => m.log_norm = v.parse().map_err(|_| bad("log_norm"))?,
                    "depth_max" => m.depth_max = v.parse().map_err(|_| bad("depth_max"))?,
                    "discarded_mass_bound" => m.discarded_mass_bound = v.parse().map_err(|_| bad("discarded_mass_bound"))?,
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(bad(line));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        m.atoms.push(Atom {
            z: C::new(p(cols[0])?, p(cols[1])?),
            weight: p(cols[2])?,
            depth: cols[3].parse().map_err(|_| bad(line))?,
        });
    }
    Ok(m)
}
