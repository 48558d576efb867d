use alloc::string::String;

use crate::reader::DensityRole;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid text line {text_id}: {reason}")]
    InvalidText { text_id: String, reason: &'static str },
    #[error("invalid scanpath for reader {reader_id} on text {text_id}: {reason}")]
    InvalidScanpath {
        reader_id: String,
        text_id: String,
        reason: String,
    },
    #[error("position {position} cannot be attributed to any word")]
    NoCurrentWord { position: f64 },
    #[error("saccade type requires a next word but the current word is the last one")]
    MissingNextWord,
    #[error("fixation {index}: {source}")]
    AtFixation {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("gamma fit failed: {0}")]
    Fit(&'static str),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("truncation interval [{left}, {right}] carries no probability mass")]
    InfeasibleTruncation { left: f64, right: f64 },
    #[error("observation {index}: {source}")]
    AtObservation {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("density {role}: {source}")]
    AtRole {
        role: DensityRole,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("grid mismatch between posterior samples")]
    GridMismatch,
    #[error("no scanpaths to fit")]
    NoScanpaths,
    #[error("text {0} is not known")]
    UnknownText(String),
    #[error("no saccade type is feasible at the first fixation")]
    NoFeasibleType,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("requested {requested} readers but only {available} exist")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("verification needs at least one genuine and one impostor pair")]
    DegenerateTruth,
    #[error("prediction and truth cover different test units")]
    UnitMismatch,
}

impl Error {
    pub(crate) fn at_fixation(self, index: usize) -> Self {
        Error::AtFixation {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }

    pub(crate) fn at_observation(self, index: usize) -> Self {
        Error::AtObservation {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }

    pub(crate) fn at_role(self, role: DensityRole) -> Self {
        Error::AtRole {
            role,
            source: alloc::boxed::Box::new(self),
        }
    }
}
