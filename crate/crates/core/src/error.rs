use thiserror::Error;

use crate::geometry::Family;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size L={l}, M={m} is degenerate (need L >= 2 and M >= 2)")]
    DegenerateLattice { l: usize, m: usize },

    #[error("probability {name}={value} outside [0, 0.5)")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("measurement error rate q=0 collapses the stacked model to its 2D limit; simulate that limit directly")]
    PerfectMeasurements,

    #[error("bit-flip rate p=0 gives an infinite qubit coupling and cannot be simulated at finite temperature")]
    InfiniteCoupling,

    #[error("shape mismatch: {what} has length {found}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i8),

    #[error("couplings must be finite and non-negative")]
    InvalidCouplings,

    #[error("invalid Wilson patch: {0}")]
    InvalidPatch(String),

    #[error("invalid temperature ladder: {0}")]
    InvalidLadder(String),

    #[error("insufficient history: {found} complete bins, need at least {needed}")]
    InsufficientHistory { needed: usize, found: usize },

    #[error("need at least {needed} values, got {found}")]
    TooFewValues { needed: usize, found: usize },

    #[error("enumeration limited to {cap} spins, model has {found}")]
    EnumerationCap { cap: usize, found: usize },

    #[error("disorder sample belongs to {found:?} L={found_l} M={found_m}, model is {expected:?} L={expected_l} M={expected_m}")]
    ModelMismatch {
        expected: Family,
        expected_l: usize,
        expected_m: usize,
        found: Family,
        found_l: usize,
        found_m: usize,
    },

    #[error("no sign change of Tc - T_N on the grid: {hint}")]
    NoCrossing { hint: String },

    #[error("all disorder samples were flagged as not equilibrated ({flagged} of {flagged})")]
    NoUsableSamples { flagged: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Bincode(#[from] bincode::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
