//! Level-synchronous backward-orbit tree for iterating the transfer operator.
//!
//! Each level holds weighted points; the next level is the set of all their
//! preimages with weights multiplied by `|f'|_σ^{-t}`. Preimages that fall
//! into the same small cell of the sphere are merged into one node at the
//! weighted centroid, which keeps the level size bounded by the resolution
//! instead of growing like `(2k+1)^n`. Cells shrink geometrically near the
//! asymptotic values, where the weights blow up, and near the first points
//! of their orbits. Branches beyond the cutoff
//! are lumped into a single node at infinity carrying the tail-bracket
//! midpoint; its preimages are the poles.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MapSpec, TruncationPolicy};
use crate::sphere::{chordal_dist, SpherePoint};
use crate::sum::NeumaierSum;
use crate::transfer::postsingular_prefix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Merge cell edge in chordal units.
    pub cell: f64,
    /// Cells shrink by half per octave of approach inside this chordal
    /// radius of an asymptotic value or a point of the postsingular prefix.
    pub near_radius: f64,
    /// Nodes lighter than this fraction of their level are discarded. Kept
    /// tiny on purpose: light nodes next to a postsingular point have heavy
    /// grandchildren, and merging already bounds the level size.
    pub prune_rel: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { cell: 1e-2, near_radius: 0.05, prune_rel: 1e-30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub z: SpherePoint,
    /// Weight relative to the level total (levels are normalized).
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    /// `log(V_n / V_{n-1})` for the unnormalized level totals.
    pub log_growth: f64,
    /// Mass fraction dropped by pruning or at asymptotic values.
    pub discarded: f64,
    /// Mass fraction routed through the lumped tail node.
    pub tail: f64,
    /// Half-width of the tail bracket relative to the level total.
    pub tail_uncertainty: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Key {
    octave: i32,
    x: i64,
    y: i64,
    h: i64,
}

const INF_KEY: Key = Key { octave: i32::MAX, x: 0, y: 0, h: 0 };

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    w: NeumaierSum,
    xyz: [f64; 3],
}

/// Chunks are fixed-size so that the reduction order, and therefore every
/// bit of the result, is independent of the number of worker threads.
const CHUNK: usize = 512;

/// Orbit points per asymptotic value that get refined cells.
const SINGULAR_PREFIX: usize = 4;

pub struct BackwardTree<'a> {
    f: &'a MapSpec,
    t: f64,
    cut: u64,
    params: TreeParams,
    /// Asymptotic values and the start of their orbits. The weights are
    /// singular at the former, and the latter feed them through repelling
    /// cycles, so both need scale-adapted cells.
    singular: Vec<SpherePoint>,
    nodes: Vec<Node>,
    depth: usize,
}

impl<'a> BackwardTree<'a> {
    pub fn new(
        f: &'a MapSpec,
        t: f64,
        roots: Vec<Node>,
        policy: &TruncationPolicy,
        params: TreeParams,
    ) -> Result<Self> {
        policy.check_exponent(f, t)?;
        let mut singular: Vec<SpherePoint> = f.asymptotic_values().iter().map(|&a| a.into()).collect();
        for p in postsingular_prefix(f, SINGULAR_PREFIX) {
            if singular.iter().all(|&s| chordal_dist(s, p) > 1e-9) {
                singular.push(p);
            }
        }
        Ok(BackwardTree {
            f,
            t,
            cut: f.branch_cut(policy),
            params,
            singular,
            nodes: roots,
            depth: 0,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn key(&self, z: SpherePoint, xyz: &[f64; 3]) -> Key {
        if z.is_infinite() {
            return INF_KEY;
        }
        let d = self.singular.iter().map(|&s| chordal_dist(z, s)).fold(f64::INFINITY, f64::min);
        let octave = if d < self.params.near_radius {
            ((self.params.near_radius / d).log2().floor() as i32 + 1).min(60)
        } else {
            0
        };
        let cell = self.params.cell * (-(octave as f64)).exp2();
        Key {
            octave,
            x: (xyz[0] / cell).floor() as i64,
            y: (xyz[1] / cell).floor() as i64,
            h: (xyz[2] / cell).floor() as i64,
        }
    }

    fn expand_chunk(&self, chunk: &[Node]) -> (HashMap<Key, Acc>, NeumaierSum, NeumaierSum, NeumaierSum) {
        let mut map: HashMap<Key, Acc> = HashMap::with_capacity(chunk.len() * 8);
        let mut lost = NeumaierSum::new();
        let mut tail = NeumaierSum::new();
        let mut unc = NeumaierSum::new();
        for node in chunk {
            let lat = match self.f.lattice(node.z) {
                Ok(l) => l,
                Err(_) => {
                    lost.add(node.weight);
                    continue;
                }
            };
            lat.for_each_weight(self.t, self.cut, |_, z, wt| {
                let p = SpherePoint::Finite(z);
                let xyz = p.to_xyz();
                let w = node.weight * wt;
                let e = map.entry(self.key(p, &xyz)).or_default();
                e.w.add(w);
                for i in 0..3 {
                    e.xyz[i] += w * xyz[i];
                }
            });
            let (lo, hi) = lat.tail(self.t, self.cut);
            let mid = node.weight * 0.5 * (lo + hi);
            if mid > 0.0 && mid.is_finite() {
                let e = map.entry(INF_KEY).or_default();
                e.w.add(mid);
                e.xyz[2] += mid;
                tail.add(mid);
                unc.add(node.weight * 0.5 * (hi - lo));
            }
        }
        (map, lost, tail, unc)
    }

    /// Replace the current level by its preimages.
    pub fn step(&mut self) -> Result<LevelStats> {
        let parts: Vec<_> = self.nodes.par_chunks(CHUNK).map(|c| self.expand_chunk(c)).collect();
        let mut merged: HashMap<Key, Acc> = HashMap::new();
        let mut lost = NeumaierSum::new();
        let mut tail = NeumaierSum::new();
        let mut unc = NeumaierSum::new();
        for (map, l, t, u) in parts {
            lost.merge(&l);
            tail.merge(&t);
            unc.merge(&u);
            for (k, a) in map {
                let e = merged.entry(k).or_default();
                e.w.merge(&a.w);
                for i in 0..3 {
                    e.xyz[i] += a.xyz[i];
                }
            }
        }
        let mut cells: Vec<(Key, Acc)> = merged.into_iter().collect();
        cells.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let kept_total: f64 = cells.iter().map(|(_, a)| a.w.value()).collect::<NeumaierSum>().value();
        let gross = kept_total + lost.value();
        if !(kept_total > 0.0) || !gross.is_finite() {
            return Err(Error::PruningOverflow(1.0));
        }
        let floor = self.params.prune_rel * kept_total;
        let mut pruned = NeumaierSum::new();
        let mut nodes = Vec::with_capacity(cells.len());
        for (k, a) in cells {
            let w = a.w.value();
            if w < floor {
                pruned.add(w);
                continue;
            }
            let z = if k == INF_KEY {
                SpherePoint::Infinity
            } else {
                let s = 1.0 / w;
                SpherePoint::from_xyz([a.xyz[0] * s, a.xyz[1] * s, a.xyz[2] * s])
            };
            nodes.push(Node { z, weight: w });
        }
        let total: f64 = nodes.iter().map(|n| n.weight).collect::<NeumaierSum>().value();
        for n in &mut nodes {
            n.weight /= total;
        }
        let discarded = (lost.value() + pruned.value()) / gross;
        self.nodes = nodes;
        self.depth += 1;
        Ok(LevelStats {
            log_growth: total.ln(),
            discarded,
            tail: tail.value() / gross,
            tail_uncertainty: unc.value() / gross,
            nodes: self.nodes.len(),
        })
    }
}
