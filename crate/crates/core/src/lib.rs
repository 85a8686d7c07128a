//! Thermodynamic formalism for meromorphic maps with constant Schwarzian
//! derivative: spherical transfer operators, pressure, conformal measures,
//! Bowen-formula dimension and invariant-measure diagnostics.

pub mod bowen;
pub mod error;
pub mod family;
pub mod invariant;
pub mod measure;
pub mod poincare;
pub mod pressure;
pub mod raster;
pub mod regime;
pub mod rng;
pub mod sphere;
pub mod sum;
pub mod tract;
pub mod transfer;
pub mod tree;

pub use error::{Error, Result};
pub use family::{Family, MapSpec, TruncationPolicy};
pub use regime::{classify_regime, Regime, RegimeReport};
pub use sphere::{chordal_dist, SpherePoint, C};
