//! Riemann-sphere primitives.
//!
//! The metric is `|dz| / (1 + |z|^2)` (no factor 2), so the sphere has
//! diameter 1 and the chordal distance never exceeds 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(C),
    Infinity,
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        SpherePoint::Finite(C::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<C> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// Point on the sphere of diameter 1 touching the plane at the origin.
    pub fn to_xyz(&self) -> [f64; 3] {
        match *self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let r2 = z.norm_sqr();
                if r2 <= 1.0 {
                    let s = 1.0 / (1.0 + r2);
                    [z.re * s, z.im * s, r2 * s]
                } else {
                    // 1/z chart keeps the north-pole side accurate
                    let w = 1.0 / z;
                    let s = 1.0 / (1.0 + w.norm_sqr());
                    [w.re * s, -w.im * s, s]
                }
            }
        }
    }

    /// Inverse of [`to_xyz`](Self::to_xyz). The input is first projected
    /// radially onto the sphere, so centroids of nearby points are fine.
    pub fn from_xyz(p: [f64; 3]) -> Self {
        let (x, y, h) = (p[0], p[1], p[2] - 0.5);
        let n = (x * x + y * y + h * h).sqrt();
        if n == 0.0 {
            return SpherePoint::Finite(C::new(0.0, 0.0));
        }
        let (x, y, h) = (0.5 * x / n, 0.5 * y / n, 0.5 * h / n);
        if h <= 0.0 {
            // z = (x + iy) / (1 - Z) with Z = h + 1/2
            SpherePoint::Finite(C::new(x, y) / (0.5 - h))
        } else {
            // 1/z = (x - iy) / Z
            let w = C::new(x, -y) / (0.5 + h);
            if w == C::new(0.0, 0.0) {
                SpherePoint::Infinity
            } else {
                SpherePoint::Finite(1.0 / w)
            }
        }
    }
}

impl From<C> for SpherePoint {
    fn from(z: C) -> Self {
        SpherePoint::Finite(z)
    }
}

impl std::fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{z}"),
            SpherePoint::Infinity => write!(f, "inf"),
        }
    }
}

pub fn chordal_dist(p: SpherePoint, q: SpherePoint) -> f64 {
    match (p, q) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
            let r = z.norm();
            if r <= 1.0 {
                1.0 / (1.0 + r * r).sqrt()
            } else {
                let s = 1.0 / r;
                s / (1.0 + s * s).sqrt()
            }
        }
        (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
            if a.norm_sqr() > 1.0 && b.norm_sqr() > 1.0 {
                // invariant under z -> 1/z, which keeps large moduli in range
                let (a, b) = (1.0 / a, 1.0 / b);
                (a - b).norm() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr())).sqrt()
            } else {
                (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
            }
        }
    }
}

/// Value and first three derivatives of a holomorphic germ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub f: C,
    pub d1: C,
    pub d2: C,
    pub d3: C,
}

impl Jet {
    /// `(f''/f')' - (f''/f')^2 / 2 = f'''/f' - 3/2 (f''/f')^2`
    pub fn schwarzian(&self) -> C {
        let a = self.d2 / self.d1;
        self.d3 / self.d1 - 1.5 * a * a
    }
}

/// A map of the sphere that can be evaluated with derivatives.
pub trait Meromorphic: Sync {
    fn eval(&self, z: SpherePoint) -> Result<SpherePoint>;

    /// Closed-form jet at a finite point where the value is finite.
    fn jet(&self, z: C) -> Result<Jet>;

    /// `|f'(z)| (1+|z|^2) / (1+|f(z)|^2)`, continued through poles by the
    /// chart `w -> 1/w`.
    fn sigma_deriv(&self, z: SpherePoint) -> Result<f64>;

    /// A pole of the map closest to `z`, if the map has poles.
    fn nearest_pole(&self, _z: C) -> Option<SpherePoint> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Meromorphic for Identity {
    fn eval(&self, z: SpherePoint) -> Result<SpherePoint> {
        Ok(z)
    }
    fn jet(&self, z: C) -> Result<Jet> {
        let zero = C::new(0.0, 0.0);
        Ok(Jet { f: z, d1: C::new(1.0, 0.0), d2: zero, d3: zero })
    }
    fn sigma_deriv(&self, _z: SpherePoint) -> Result<f64> {
        Ok(1.0)
    }
}

/// `z -> (a z + b) / (c z + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl MobiusMap {
    pub fn new(a: C, b: C, c: C, d: C) -> Result<Self> {
        let m = MobiusMap { a, b, c, d };
        let det = m.det();
        if det == C::new(0.0, 0.0) || !det.is_finite() {
            return Err(Error::OutOfRange("Mobius determinant ad - bc must be nonzero".into()));
        }
        Ok(m)
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: SpherePoint) -> SpherePoint {
        let zero = C::new(0.0, 0.0);
        match z {
            SpherePoint::Infinity => {
                if self.c == zero {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(self.a / self.c)
                }
            }
            SpherePoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den == zero {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Jet of the map at a point `w` where it is finite.
    pub fn jet_at(&self, w: C) -> Result<Jet> {
        let den = self.c * w + self.d;
        if den == C::new(0.0, 0.0) {
            return Err(Error::PoleAt(w));
        }
        let det = self.det();
        let inv = 1.0 / den;
        let d1 = det * inv * inv;
        let d2 = -2.0 * self.c * d1 * inv;
        let d3 = -3.0 * self.c * d2 * inv;
        Ok(Jet { f: (self.a * w + self.b) * inv, d1, d2, d3 })
    }
}

impl Meromorphic for MobiusMap {
    fn eval(&self, z: SpherePoint) -> Result<SpherePoint> {
        Ok(self.apply(z))
    }
    fn jet(&self, z: C) -> Result<Jet> {
        self.jet_at(z)
    }
    fn sigma_deriv(&self, z: SpherePoint) -> Result<f64> {
        let det = self.det().norm();
        Ok(match z {
            SpherePoint::Infinity => det / (self.a.norm_sqr() + self.c.norm_sqr()),
            SpherePoint::Finite(z) => {
                let num = (self.a * z + self.b).norm_sqr() + (self.c * z + self.d).norm_sqr();
                det * (1.0 + z.norm_sqr()) / num
            }
        })
    }
    fn nearest_pole(&self, _z: C) -> Option<SpherePoint> {
        if self.c == C::new(0.0, 0.0) {
            Some(SpherePoint::Infinity)
        } else {
            Some(SpherePoint::Finite(-self.d / self.c))
        }
    }
}

/// Post-composition `outer ∘ inner`.
pub struct Composed<'a, F: ?Sized> {
    pub outer: MobiusMap,
    pub inner: &'a F,
}

impl<F: Meromorphic + ?Sized> Meromorphic for Composed<'_, F> {
    fn eval(&self, z: SpherePoint) -> Result<SpherePoint> {
        Ok(self.outer.apply(self.inner.eval(z)?))
    }
    fn jet(&self, z: C) -> Result<Jet> {
        let g = self.inner.jet(z)?;
        let m = self.outer.jet_at(g.f)?;
        // Faa di Bruno up to third order
        Ok(Jet {
            f: m.f,
            d1: m.d1 * g.d1,
            d2: m.d2 * g.d1 * g.d1 + m.d1 * g.d2,
            d3: m.d3 * g.d1 * g.d1 * g.d1 + 3.0 * m.d2 * g.d1 * g.d2 + m.d1 * g.d3,
        })
    }
    fn sigma_deriv(&self, z: SpherePoint) -> Result<f64> {
        let w = self.inner.eval(z)?;
        Ok(self.outer.sigma_deriv(w)? * self.inner.sigma_deriv(z)?)
    }
    fn nearest_pole(&self, z: C) -> Option<SpherePoint> {
        self.inner.nearest_pole(z)
    }
}

/// Spherical derivative at a non-pole. Poles are rejected here; use
/// [`Meromorphic::sigma_deriv`] directly to continue through them.
pub fn spherical_derivative<F: Meromorphic + ?Sized>(f: &F, z: SpherePoint) -> Result<f64> {
    if let SpherePoint::Finite(c) = z {
        if f.eval(z)?.is_infinite() {
            return Err(Error::PoleAt(c));
        }
    }
    f.sigma_deriv(z)
}

/// Product of spherical derivatives along `z, f(z), ..., f^{n-1}(z)`.
pub fn orbit_spherical_derivative<F: Meromorphic + ?Sized>(
    f: &F,
    z: SpherePoint,
    n: usize,
) -> Result<f64> {
    Ok(orbit_log_spherical_derivative(f, z, n)?.exp())
}

/// Log of [`orbit_spherical_derivative`], safe against overflow for long orbits.
pub fn orbit_log_spherical_derivative<F: Meromorphic + ?Sized>(
    f: &F,
    z: SpherePoint,
    n: usize,
) -> Result<f64> {
    let mut acc = crate::sum::NeumaierSum::new();
    let mut cur = z;
    for step in 0..n {
        let d = f.sigma_deriv(cur).map_err(|_| Error::OrbitEscaped { step })?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::OrbitEscaped { step });
        }
        acc.add(d.ln());
        if step + 1 < n {
            cur = f.eval(cur).map_err(|_| Error::OrbitEscaped { step })?;
        }
    }
    Ok(acc.value())
}

/// Below this |f'| the Schwarzian quotient is not trusted.
pub const DERIVATIVE_FLOOR: f64 = 1e-150;

/// Schwarzian derivative from the closed-form jet. `step` only sets the
/// exclusion radius around poles.
pub fn schwarzian<F: Meromorphic + ?Sized>(f: &F, z: SpherePoint, step: f64) -> Result<C> {
    let c = z.finite().ok_or(Error::NearPole)?;
    if let Some(p) = f.nearest_pole(c) {
        if chordal_dist(z, p) <= 2.0 * step {
            return Err(Error::NearPole);
        }
    }
    let j = f.jet(c).map_err(|_| Error::NearPole)?;
    if j.d1.norm() < DERIVATIVE_FLOOR {
        return Err(Error::NumericallyUnstable);
    }
    Ok(j.schwarzian())
}

/// Fourth-order central-difference Schwarzian for maps known only by values.
pub fn schwarzian_fd<G: Fn(C) -> C>(g: G, z: C, step: f64) -> Result<C> {
    let h = C::new(step, 0.0);
    let v = |k: f64| g(z + h * k);
    let (m3, m2, m1, p1, p2, p3) = (v(-3.0), v(-2.0), v(-1.0), v(1.0), v(2.0), v(3.0));
    let f0 = g(z);
    let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    let d2 = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
    let d3 = (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * h * h * h);
    if !(d1.is_finite() && d2.is_finite() && d3.is_finite()) {
        return Err(Error::NearPole);
    }
    if d1.norm() < DERIVATIVE_FLOOR {
        return Err(Error::NumericallyUnstable);
    }
    Ok(Jet { f: f0, d1, d2, d3 }.schwarzian())
}
