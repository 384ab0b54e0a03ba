//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown species {0}")]
    UnknownSpecies(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("molecule is not planar: max out-of-plane deviation {deviation:.6} A exceeds tolerance {tol:.6} A")]
    NonPlanar { deviation: f64, tol: f64 },
    #[error("atoms {i} and {j} are {dist:.4} A apart, below the 0.05 A guard")]
    AtomClash { i: usize, j: usize, dist: f64 },
    #[error("molecule has no atoms")]
    Empty,
    #[error("molecule {index} has no energy label")]
    MissingLabel { index: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("unknown species {0}")]
    UnknownSpecies(String),
    #[error("no radial profile for species {0}")]
    MissingProfile(String),
    #[error("atom {index} at ({x:.3}, {y:.3}) lies outside the safe box [-{limit:.3}, {limit:.3}]^2 (margin {margin:.3} A)")]
    AtomOutsideBox { index: usize, x: f64, y: f64, limit: f64, margin: f64 },
    #[error("profile line {line}: {msg}")]
    ProfileParse { line: usize, msg: String },
    #[error("profile for {species} integrates to {total:.4}, expected {expected}")]
    BadNormalization { species: String, total: f64, expected: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("grid side {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("grid side {grid} does not match filter bank side {bank}")]
    SizeMismatch { grid: usize, bank: usize },
    #[error("angular axis length {axis} does not match bank angle count {bank}")]
    AngleMismatch { axis: usize, bank: usize },
}

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("need at least {need} training rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("predictions and truths have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("kernel system is ill-conditioned (non positive-definite at lambda={lambda:.3e})")]
    IllConditioned { lambda: f64 },
    #[error("non-finite value in design matrix")]
    NonFinite,
    #[error("molecule has {atoms} atoms, exceeding the model maximum {max}")]
    TooManyAtoms { atoms: usize, max: usize },
    #[error("model parse at line {line}: {msg}")]
    ModelParse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    ConfigValue(String),
    #[error("feature cache is corrupt: {0}")]
    CorruptCache(String),
    #[error("feature cache fingerprint mismatch: cache was built with a different configuration")]
    FingerprintMismatch,
    #[error("cache has {rows} rows but {labels} labels are present; labelled data required")]
    LabelMismatch { rows: usize, labels: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
