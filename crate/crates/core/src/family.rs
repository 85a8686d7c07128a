//! The two built-in families with constant Schwarzian derivative.
//!
//! Both are written as `f(z) = M(exp(kappa z))` with `M` a Möbius map:
//! `lambda tan z = M(e^{2iz})` with `M(q) = -i lambda (q - 1)/(q + 1)`, and the
//! exponential quotient is `M(e^{2z})` directly. Preimages of a point are then
//! a single translate of the period lattice, and `|f'|` is constant on it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::sphere::{chordal_dist, Jet, Meromorphic, MobiusMap, SpherePoint, C};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Tangent,
    MobiusExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    family: Family,
    lambda: Option<C>,
    outer: MobiusMap,
    kappa: C,
    period: C,
    schwarzian_degree: u32,
}

/// Chordal radius inside which a point counts as an asymptotic value.
pub const ASYMPTOTIC_TOL: f64 = 1e-12;

/// Inputs this close to the tan lattice snap to exact zeros and poles.
const SNAP_TOL: f64 = 1e-14;

impl MapSpec {
    /// `lambda tan z`.
    pub fn tangent(lambda: C) -> Result<Self> {
        if lambda == C::new(0.0, 0.0) || !lambda.is_finite() {
            return Err(Error::Config("lambda must be finite and nonzero".into()));
        }
        let i = C::i();
        let one = C::new(1.0, 0.0);
        Ok(MapSpec {
            family: Family::Tangent,
            lambda: Some(lambda),
            outer: MobiusMap::new(-i * lambda, i * lambda, one, one)?,
            kappa: C::new(0.0, 2.0),
            period: C::new(PI, 0.0),
            schwarzian_degree: 0,
        })
    }

    /// `(a e^z + b e^{-z}) / (c e^z + d e^{-z})`.
    pub fn mobius_exp(a: C, b: C, c: C, d: C) -> Result<Self> {
        let outer = MobiusMap::new(a, b, c, d).map_err(|e| Error::Config(e.to_string()))?;
        let zero = C::new(0.0, 0.0);
        if c == zero || d == zero {
            // one of the asymptotic values a/c, b/d would be infinite
            return Err(Error::Config("c and d must be nonzero (finite asymptotic values)".into()));
        }
        Ok(MapSpec {
            family: Family::MobiusExp,
            lambda: None,
            outer,
            kappa: C::new(2.0, 0.0),
            period: C::new(0.0, PI),
            schwarzian_degree: 0,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> Option<C> {
        self.lambda
    }

    pub fn mobius_data(&self) -> MobiusMap {
        self.outer
    }

    pub fn schwarzian_degree(&self) -> u32 {
        self.schwarzian_degree
    }

    pub fn rho(&self) -> f64 {
        (self.schwarzian_degree as f64 + 2.0) / 2.0
    }

    /// `rho / (rho + 1)`: the transfer operator is finite exactly above it.
    pub fn borel_threshold(&self) -> f64 {
        let r = self.rho();
        r / (r + 1.0)
    }

    pub fn period(&self) -> C {
        self.period
    }

    /// Real tangent parameter, if any.
    pub fn real_lambda(&self) -> Option<f64> {
        match self.lambda {
            Some(l) if self.family == Family::Tangent && l.im == 0.0 => Some(l.re),
            _ => None,
        }
    }

    /// `[M(0), M(inf)]`; for the tangent family `[i lambda, -i lambda]`.
    pub fn asymptotic_values(&self) -> [C; 2] {
        let m = &self.outer;
        [m.b / m.d, m.a / m.c]
    }

    pub fn nearest_asymptotic(&self, w: SpherePoint) -> (C, f64) {
        let av = self.asymptotic_values();
        let d0 = chordal_dist(w, av[0].into());
        let d1 = chordal_dist(w, av[1].into());
        if d0 <= d1 {
            (av[0], d0)
        } else {
            (av[1], d1)
        }
    }

    fn snap(&self, z: C) -> Option<SpherePoint> {
        if self.family != Family::Tangent {
            return None;
        }
        let m = (2.0 * z.re / PI).round();
        if m == 0.0 {
            // 0 is exact, and tan is accurate near it
            return None;
        }
        let node = m * PI / 2.0;
        let tol = SNAP_TOL * node.abs().max(1.0);
        if z.im.abs() <= tol && (z.re - node).abs() <= tol {
            if m.rem_euclid(2.0) == 0.0 {
                Some(SpherePoint::Finite(C::new(0.0, 0.0)))
            } else {
                Some(SpherePoint::Infinity)
            }
        } else {
            None
        }
    }

    /// `(numerator, denominator, |e^{±kappa z}|)` in whichever chart keeps
    /// the exponential bounded by 1.
    #[inline]
    fn parts(&self, z: C) -> (C, C, C, bool) {
        let kz = self.kappa * z;
        let m = &self.outer;
        if kz.norm_sqr() < 0.25 {
            // near q = 1 write q = 1 + e so that a zero of M at 1 stays exact
            return if kz.re <= 0.0 {
                let e = expm1(kz);
                ((m.a + m.b) + m.a * e, (m.c + m.d) + m.c * e, C::new(1.0, 0.0) + e, false)
            } else {
                let e = expm1(-kz);
                ((m.a + m.b) + m.b * e, (m.c + m.d) + m.d * e, C::new(1.0, 0.0) + e, true)
            };
        }
        if kz.re <= 0.0 {
            let q = kz.exp();
            (m.a * q + m.b, m.c * q + m.d, q, false)
        } else {
            let p = (-kz).exp();
            (m.a + m.b * p, m.c + m.d * p, p, true)
        }
    }

    pub fn eval_finite(&self, z: C) -> SpherePoint {
        if let Some(s) = self.snap(z) {
            return s;
        }
        let (num, den, _, _) = self.parts(z);
        if den == C::new(0.0, 0.0) {
            SpherePoint::Infinity
        } else {
            SpherePoint::Finite(num / den)
        }
    }

    /// `|f'(z)| / (1 + |f(z)|^2)`, finite everywhere in the plane.
    #[inline]
    pub fn deriv_over_image(&self, z: C) -> f64 {
        let (num, den, e, _) = self.parts(z);
        self.kappa.norm() * e.norm() * self.outer.det().norm() / (num.norm_sqr() + den.norm_sqr())
    }

    /// Pole lattice: the preimages of infinity.
    pub fn pole_base(&self) -> C {
        let m = &self.outer;
        (-m.d / m.c).ln() / self.kappa
    }

    pub(crate) fn lattice(&self, w: SpherePoint) -> Result<Lattice> {
        let m = &self.outer;
        let det = m.det().norm();
        let kn = self.kappa.norm();
        match w {
            SpherePoint::Infinity => Ok(Lattice {
                base: self.pole_base(),
                period: self.period,
                dw: kn * m.c.norm() * m.d.norm() / det,
            }),
            SpherePoint::Finite(w) => {
                let num = m.d * w - m.b;
                let den = m.a - m.c * w;
                let zero = C::new(0.0, 0.0);
                if num == zero || den == zero {
                    return Err(Error::BranchPointConflict);
                }
                let (_, dist) = self.nearest_asymptotic(SpherePoint::Finite(w));
                if dist < ASYMPTOTIC_TOL {
                    return Err(Error::AsymptoticValue(w));
                }
                let q = num / den;
                let base = q.ln() / self.kappa;
                let dw = if q.norm_sqr() <= 1.0 {
                    kn * q.norm() * det / ((m.a * q + m.b).norm_sqr() + (m.c * q + m.d).norm_sqr())
                } else {
                    let p = 1.0 / q;
                    kn * p.norm() * det / ((m.a + m.b * p).norm_sqr() + (m.c + m.d * p).norm_sqr())
                };
                Ok(Lattice { base, period: self.period, dw })
            }
        }
    }

    /// Branch index cutoff for the given policy.
    pub fn branch_cut(&self, policy: &TruncationPolicy) -> u64 {
        let by_radius = (policy.radius_cut / self.period.norm()).ceil().max(0.0) as u64;
        policy.k_max.max(by_radius).max(1)
    }

    /// All preimages `z_k = base + k * period` with `|k| <= cut`, sorted by modulus.
    pub fn preimages(&self, w: SpherePoint, policy: &TruncationPolicy) -> Result<PreimageSet> {
        let lat = self.lattice(w)?;
        let cut = self.branch_cut(policy);
        let deriv_abs = match w {
            SpherePoint::Infinity => f64::INFINITY,
            SpherePoint::Finite(w) => lat.dw * (1.0 + w.norm_sqr()),
        };
        let mut branches: Vec<Branch> = (-(cut as i64)..=cut as i64)
            .map(|k| {
                let z = lat.at(k);
                Branch { k, z, deriv_abs, sigma_deriv: lat.dw * (1.0 + z.norm_sqr()) }
            })
            .collect();
        branches.sort_by(|a, b| a.z.norm().total_cmp(&b.z.norm()).then(a.k.cmp(&b.k)));
        let min_omitted = lat.at(cut as i64 + 1).norm().min(lat.at(-(cut as i64) - 1).norm());
        Ok(PreimageSet {
            w,
            branches,
            tail: TailMeta {
                cut,
                min_omitted_modulus: min_omitted,
                growth_exponent: self.rho() + 1.0,
                base: lat.base,
                period: lat.period,
                dw: lat.dw,
            },
        })
    }

    /// Preimage `base + k period` of `a + delta`, where `a` is asymptotic
    /// value `which` (index into [`asymptotic_values`](Self::asymptotic_values)).
    /// Solving with `delta` directly avoids the cancellation in `w - a`.
    pub fn tract_point(&self, which: usize, delta: C, k: i64) -> C {
        let m = &self.outer;
        let det = m.det();
        let q = if which == 0 {
            m.d * m.d * delta / (det - m.c * m.d * delta)
        } else {
            (det / m.c + m.d * delta) / (-m.c * delta)
        };
        q.ln() / self.kappa + self.period * k as f64
    }

    /// `(which, f(z) - a)` for the asymptotic value `a` the exponential
    /// chart of `z` points to, computed without cancellation deep in a tract.
    pub fn asymptotic_offset(&self, z: C) -> (usize, C) {
        let m = &self.outer;
        let kz = self.kappa * z;
        if kz.re <= 0.0 {
            let q = kz.exp();
            (0, m.det() * q / (m.d * (m.c * q + m.d)))
        } else {
            let p = (-kz).exp();
            (1, -m.det() * p / (m.c * (m.c + m.d * p)))
        }
    }

    /// `f(a + delta)` for the asymptotic value `a` with index `which`, for
    /// offsets too small to survive the addition `a + delta`.
    pub fn eval_near_asymptotic(&self, which: usize, delta: C) -> SpherePoint {
        let a = self.asymptotic_values()[which];
        let m = &self.outer;
        let u0 = (self.kappa * a).exp();
        let den0 = m.c * u0 + m.d;
        let SpherePoint::Finite(fa) = self.eval_finite(a) else { return self.eval_finite(a + delta) };
        if den0.norm() == 0.0 {
            return self.eval_finite(a + delta);
        }
        let eta = u0 * expm1(self.kappa * delta);
        let den1 = den0 + m.c * eta;
        if den1.norm() == 0.0 {
            return SpherePoint::Infinity;
        }
        // M(u0 + eta) - M(u0) = det eta / ((c u0 + d)(c (u0 + eta) + d))
        SpherePoint::Finite(fa + m.det() * eta / (den0 * den1))
    }

    fn nearest_on_lattice(&self, base: C, z: C) -> C {
        let k = ((z - base) / self.period).re.round();
        base + self.period * k
    }
}

impl Meromorphic for MapSpec {
    fn eval(&self, z: SpherePoint) -> Result<SpherePoint> {
        match z {
            SpherePoint::Infinity => Err(Error::EssentialSingularity),
            SpherePoint::Finite(z) => Ok(self.eval_finite(z)),
        }
    }

    fn jet(&self, z: C) -> Result<Jet> {
        let val = self.eval_finite(z);
        let f = val.finite().ok_or(Error::PoleAt(z))?;
        let m = &self.outer;
        let (_, den, e, flipped) = self.parts(z);
        // r = c q / (c q + d) and f' = det kappa q / (c q + d)^2 in either chart
        let (r, d1) = if flipped {
            (m.c / den, m.det() * self.kappa * e / (den * den))
        } else {
            (m.c * e / den, m.det() * self.kappa * e / (den * den))
        };
        if !d1.is_finite() || !r.is_finite() {
            return Err(Error::PoleAt(z));
        }
        let k = self.kappa;
        let d2 = d1 * k * (1.0 - 2.0 * r);
        let d3 = d1 * k * k * (6.0 * r * r - 6.0 * r + 1.0);
        Ok(Jet { f, d1, d2, d3 })
    }

    fn sigma_deriv(&self, z: SpherePoint) -> Result<f64> {
        match z {
            SpherePoint::Infinity => Err(Error::EssentialSingularity),
            SpherePoint::Finite(z) => Ok(self.deriv_over_image(z) * (1.0 + z.norm_sqr())),
        }
    }

    fn nearest_pole(&self, z: C) -> Option<SpherePoint> {
        Some(SpherePoint::Finite(self.nearest_on_lattice(self.pole_base(), z)))
    }
}

/// Preimages of one point: `base + k * period`, all with the same
/// `dw = |f'| / (1 + |w|^2)`, so `|f'(z_k)|_σ = dw (1 + |z_k|^2)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lattice {
    pub base: C,
    pub period: C,
    pub dw: f64,
}

impl Lattice {
    #[inline]
    pub fn at(&self, k: i64) -> C {
        self.base + self.period * k as f64
    }

    /// Visit `(k, z_k, (1+|z_k|^2)^{-t} dw^{-t})` for `|k| <= cut` in order of
    /// increasing `|z_k|`, i.e. decreasing weight.
    pub fn for_each_weight(&self, t: f64, cut: u64, mut sink: impl FnMut(i64, C, f64)) {
        let lnd = self.dw.ln();
        let weight = |z: C| (-t * (lnd + (1.0 + z.norm_sqr()).ln())).exp();
        let (mut kp, mut kn) = (0i64, -1i64);
        let cut = cut as i64;
        while kp <= cut || kn >= -cut {
            let zp = self.at(kp);
            let zn = self.at(kn);
            let take_pos = kn < -cut || (kp <= cut && zp.norm_sqr() <= zn.norm_sqr());
            if take_pos {
                sink(kp, zp, weight(zp));
                kp += 1;
            } else {
                sink(kn, zn, weight(zn));
                kn -= 1;
            }
        }
    }

    /// Bracket on the weights of all branches with `|k| > cut`.
    pub fn tail(&self, t: f64, cut: u64) -> (f64, f64) {
        let (lo, hi) = lattice_tail(self.base, self.period, cut, t);
        let s = (-t * self.dw.ln()).exp();
        (lo * s, hi * s)
    }
}

/// `∫_v^∞ (1 + x^2)^{-t} dx` for `v >= 0`, `t > 1/2`.
pub(crate) fn tail_integral(v: f64, t: f64) -> f64 {
    debug_assert!(v >= 0.0 && t > 0.5);
    let a = t - 0.5;
    let s0 = 1.0 / (1.0 + v * v);
    0.5 * ln_beta(a, 0.5).exp() * beta_reg(a, 0.5, s0)
}

/// Integral-test bracket on `Σ_{|k| > cut} (1 + |base + k period|^2)^{-t}`.
///
/// Both half-lattices are monotone beyond `cut` once `cut` exceeds the
/// offset of `base` along the period, which holds for reduced bases. The
/// sum diverges for `t <= 1/2`, reported as an infinite bracket.
pub fn lattice_tail(base: C, period: C, cut: u64, t: f64) -> (f64, f64) {
    if t <= 0.5 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let len = period.norm();
    let u = period / len;
    let rel = base * u.conj();
    let (x0, y0) = (rel.re, rel.im);
    let a = 1.0 + y0 * y0;
    let sa = a.sqrt();
    let scale = a.powf(0.5 - t) / len;
    let mut lo = NeumaierSum::new();
    let mut hi = NeumaierSum::new();
    for x in [x0, -x0] {
        // the first omitted term sits at x + (cut + 1) len
        let k = cut as f64;
        let start = x + k * len;
        if start < 0.0 {
            // unreduced base; fall back to the loosest valid bound
            hi.add(f64::INFINITY);
            continue;
        }
        hi.add(scale * tail_integral(start / sa, t));
        lo.add(scale * tail_integral((start + len) / sa, t));
    }
    (lo.value(), hi.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Explicit branches have `|k| <= k_max`.
    pub k_max: u64,
    /// Also keep every branch with `|z| <= radius_cut` (0 disables).
    pub radius_cut: f64,
    /// Tail-to-total ratio above which a sum is flagged as tail dominated.
    pub rel_tail_tol: f64,
    /// Required distance of `t` above the convergence threshold.
    pub borel_margin: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { k_max: 30, radius_cut: 0.0, rel_tail_tol: 1e-3, borel_margin: 0.01 }
    }
}

impl TruncationPolicy {
    pub fn with_k_max(k_max: u64) -> Self {
        TruncationPolicy { k_max, ..Default::default() }
    }

    pub fn check_exponent(&self, f: &MapSpec, t: f64) -> Result<()> {
        let thr = f.borel_threshold();
        if !(t > thr) || t < thr + self.borel_margin - 1e-12 {
            return Err(Error::BelowBorelThreshold(t));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub k: i64,
    pub z: C,
    /// `|f'(z_k)|`, infinite at poles.
    pub deriv_abs: f64,
    /// `|f'(z_k)|_σ`
    pub sigma_deriv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMeta {
    pub cut: u64,
    pub min_omitted_modulus: f64,
    /// Omitted spherical derivatives grow like `|z|^growth_exponent`.
    pub growth_exponent: f64,
    pub base: C,
    pub period: C,
    pub dw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageSet {
    pub w: SpherePoint,
    pub branches: Vec<Branch>,
    pub tail: TailMeta,
}

impl PreimageSet {
    /// Bracket on `Σ_{omitted} |f'(z)|_σ^{-t}`.
    pub fn tail_bracket(&self, t: f64) -> (f64, f64) {
        Lattice { base: self.tail.base, period: self.tail.period, dw: self.tail.dw }.tail(t, self.tail.cut)
    }
}

/// `e^z - 1`, accurate for small `z`.
fn expm1(z: C) -> C {
    let (s, c) = (0.5 * z.im).sin_cos();
    let e = z.re.exp_m1();
    // cos y - 1 = -2 sin^2(y/2)
    C::new(e * (1.0 - 2.0 * s * s) - 2.0 * s * s, (e + 1.0) * 2.0 * s * c)
}
