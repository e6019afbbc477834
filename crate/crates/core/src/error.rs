use thiserror::Error;

use crate::io::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of an [`Error`], used by front ends to pick exit
/// codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
    Provenance,
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("{what} index {index} out of range (length {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error(
        "degenerate geometry: antenna {antenna} and transmitter position {position} are \
         {distance:.3e} m apart (minimum {min_distance:.3e} m)"
    )]
    DegenerateGeometry {
        antenna: usize,
        position: usize,
        distance: f64,
        min_distance: f64,
    },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("phase undefined: {0}")]
    UndefinedPhase(String),

    #[error("missing subcarriers {0:?}")]
    MissingSubcarriers(Vec<usize>),

    #[error("input digest mismatch: calibration was computed from {expected}, bundle has {found}")]
    ProvenanceMismatch { expected: String, found: String },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::IndexOutOfRange { .. }
            | Error::Invalid { .. }
            | Error::DegenerateGeometry { .. }
            | Error::ShapeMismatch { .. }
            | Error::MissingSubcarriers(_) => ErrorKind::Validation,
            Error::Degenerate(_) | Error::UndefinedPhase(_) => ErrorKind::Numerical,
            Error::ProvenanceMismatch { .. } => ErrorKind::Provenance,
            Error::Format(e) => e.kind(),
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn shape(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, len })
    }
}
