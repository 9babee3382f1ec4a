//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("mode shapes do not match: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("duplicate mode index {mode}")]
    DuplicateMode { mode: usize },

    #[error("operation would discard every mode")]
    DiscardAll,

    #[error("operation requires at least two modes")]
    SingleMode,

    #[error("Fock cutoff {dim} too small (minimum {min})")]
    DimTooSmall { dim: usize, min: usize },

    #[error("truncated tail mass {mass:.3e} exceeds budget {budget:.1e}; raise the cutoff")]
    Truncation { mass: f64, budget: f64 },

    #[error("beamsplitter pushed {mass:.3e} of the state above the Fock cutoffs")]
    CutoffOverflow { mass: f64 },

    #[error("conditioning outcome has zero probability")]
    ZeroProbability,

    #[error("cannot subtract a photon from a state with no photons")]
    VacuumInput,

    #[error("parameter {name} = {value} outside [{lo}, {hi}]")]
    ParamRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("parameter {name} must be finite")]
    NonFinite { name: &'static str },

    #[error("no balancing transmissivity exists in (0, 1)")]
    NoCrossing,

    #[error("phase-space grid spacing {spacing:.3} too coarse; use steps of at most {max}")]
    GridTooCoarse { spacing: f64, max: f64 },

    #[error("quadrature grid point {x:.2} outside the validated range |x| <= {max}")]
    QuadratureRange { x: f64, max: f64 },

    #[error("no quadrature records supplied")]
    EmptyRecords,

    #[error("not a density operator: {reason}")]
    NotDensity { reason: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FockError>;
