use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the numerics can report. Variant names double as the
/// `error` field of JSON error records, see [`Error::name`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {0} is a pole")]
    PoleAt(Complex64),
    #[error("orbit could not be continued at step {step}")]
    OrbitEscaped { step: usize },
    #[error("evaluation point too close to a pole")]
    NearPole,
    #[error("|f'| below the stability floor")]
    NumericallyUnstable,
    #[error("f is not defined at infinity")]
    EssentialSingularity,
    #[error("{0} lies on an asymptotic value")]
    AsymptoticValue(Complex64),
    #[error("preimage equation degenerates (branch point)")]
    BranchPointConflict,
    #[error("singular orbit of {value} lands on a pole at step {step}")]
    OrbitHitPole { value: Complex64, step: usize },
    #[error("{0} is not an asymptotic value of the map")]
    NotAsymptoticValue(Complex64),
    #[error("exponent t = {0} is at or below the convergence threshold rho/(rho+1)")]
    BelowBorelThreshold(f64),
    #[error("discarded mass fraction {0:.3e} exceeds 10% of the total")]
    PruningOverflow(f64),
    #[error("inverse branch lost during Newton continuation")]
    BranchLost,
    #[error("divergence classification inconclusive near t = {0}")]
    InconclusiveRatio(f64),
    #[error("regime inconsistent with the exponent bracket: {0}")]
    InconsistentRegime(String),
    #[error("exponent s = {s} is not above the h bracket high {high}")]
    SubcriticalExponent { s: f64, high: f64 },
    #[error("cell carries {0} atoms, need at least 50")]
    CellTooThin(usize),
    #[error("map is not injective on the cell")]
    NotInjectiveOnCell,
    #[error("pressure does not change sign on the interval")]
    NoSignChange { julia_likely_sphere: bool },
    #[error("operation needs a real parameter")]
    ComplexParameter,
    #[error("power iteration did not converge")]
    PowerIterationStall,
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("cell carries no mass")]
    EmptyCell,
    #[error("cell lies within the safety radius of the singular set")]
    CellTooCloseToSingular,
    #[error("annulus {n} holds {count} atoms, need at least 30")]
    InsufficientAtoms { n: usize, count: usize },
    #[error("no return to the induced domain within {0} steps")]
    NoReturnWithin(usize),
    #[error("orbit left the domain (hit a pole)")]
    LeftDomain,
    #[error("only {survived} of {total} orbits completed")]
    TooFewSurvivingOrbits { survived: usize, total: usize },
    #[error("box-count scales are degenerate: {0}")]
    DegenerateScales(String),
    #[error("unsupported regime for this operation: {0}")]
    UnsupportedRegime(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::PoleAt(_) => "PoleAt",
            Error::OrbitEscaped { .. } => "OrbitEscaped",
            Error::NearPole => "NearPole",
            Error::NumericallyUnstable => "NumericallyUnstable",
            Error::EssentialSingularity => "EssentialSingularity",
            Error::AsymptoticValue(_) => "AsymptoticValue",
            Error::BranchPointConflict => "BranchPointConflict",
            Error::OrbitHitPole { .. } => "OrbitHitPole",
            Error::NotAsymptoticValue(_) => "NotAsymptoticValue",
            Error::BelowBorelThreshold(_) => "BelowBorelThreshold",
            Error::PruningOverflow(_) => "PruningOverflow",
            Error::BranchLost => "BranchLost",
            Error::InconclusiveRatio(_) => "InconclusiveRatio",
            Error::InconsistentRegime(_) => "InconsistentRegime",
            Error::SubcriticalExponent { .. } => "SubcriticalExponent",
            Error::CellTooThin(_) => "CellTooThin",
            Error::NotInjectiveOnCell => "NotInjectiveOnCell",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::ComplexParameter => "ComplexParameter",
            Error::PowerIterationStall => "PowerIterationStall",
            Error::OutOfRange(_) => "OutOfRange",
            Error::EmptyCell => "EmptyCell",
            Error::CellTooCloseToSingular => "CellTooCloseToSingular",
            Error::InsufficientAtoms { .. } => "InsufficientAtoms",
            Error::NoReturnWithin(_) => "NoReturnWithin",
            Error::LeftDomain => "LeftDomain",
            Error::TooFewSurvivingOrbits { .. } => "TooFewSurvivingOrbits",
            Error::DegenerateScales(_) => "DegenerateScales",
            Error::UnsupportedRegime(_) => "UnsupportedRegime",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }

    /// Config problems exit with 2, numeric failures with 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
