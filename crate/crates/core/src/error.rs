use thiserror::Error;

use crate::monge::SplitPlan;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: String },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(String),
    #[error("atom {0} has positive mass but no kernel row")]
    MissingKernelRow(usize),
    #[error("ambient dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("test-function family is empty")]
    EmptyFamily,
    #[error("cell mass {source_mass} does not match target mass {target_mass}")]
    MassMismatch {
        source_mass: String,
        target_mass: String,
    },
    #[error("cell measure is not representable by an atom-to-atom map ({} atoms must be split)", .0.split_atoms.len())]
    NotRepresentable(SplitPlan),
    #[error("level {level}: cell {cell} is not representable at this granularity; refine the grid")]
    Granularity { level: usize, cell: usize },
    #[error("level {level} exceeds partition depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("conditioning path has zero probability")]
    NullPath,
    #[error("adapted map undefined on prefix {0:?}")]
    UndefinedPrefix(Vec<usize>),
    #[error("joint law is not compatible (max violation {0})")]
    NotCompatible(String),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("not a randomized stopping time (max violation {0})")]
    NotRandomizedSt(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag, used in the CLI's JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpace(_) => "InvalidSpace",
            Error::InvalidMeasure(_) => "InvalidMeasure",
            Error::NegativeWeight { .. } => "NegativeWeight",
            Error::NotNormalized(_) => "NotNormalized",
            Error::MissingKernelRow(_) => "MissingKernelRow",
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyFamily => "EmptyFamily",
            Error::MassMismatch { .. } => "MassMismatch",
            Error::NotRepresentable(_) => "NotRepresentable",
            Error::Granularity { .. } => "GranularityError",
            Error::LevelOutOfRange { .. } => "LevelOutOfRange",
            Error::NullPath => "NullPath",
            Error::UndefinedPrefix(_) => "UndefinedPrefix",
            Error::NotCompatible(_) => "NotCompatible",
            Error::InstanceTooLarge(_) => "InstanceTooLarge",
            Error::NotRandomizedSt(_) => "NotRandomizedST",
            Error::Infeasible => "Infeasible",
            Error::Unbounded => "Unbounded",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
