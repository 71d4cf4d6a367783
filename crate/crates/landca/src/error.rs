//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::calibrate::TransitionKey;
use crate::raster::ClassId;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed grid file: bad header, wrong cell count, unparsable token.
    /// `line` is 1-based within the file.
    #[error("{path}:{line}: {message}")]
    Grid {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("rasters are not aligned ({context}): headers must share ncols, nrows, xllcorner, yllcorner and cellsize")]
    Misaligned { context: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no cells of class {class} present; distance target is empty")]
    NoTargetCells { class: ClassId },

    #[error("transition {transition}: no eligible source cells")]
    NoEligibleCells { transition: TransitionKey },

    #[error("transition {transition}: no transitioned cells; weights are undefined")]
    NoTransitionedCells { transition: TransitionKey },

    #[error("transition {transition}, variable {variable:?}: bin {bin} has no weight entry (binning mismatch between model and inputs)")]
    MissingWeightBin {
        transition: TransitionKey,
        variable: String,
        bin: i32,
    },

    #[error("transition {transition}: no prior rate available in the transition matrix")]
    MissingPrior { transition: TransitionKey },

    #[error("contingency table is degenerate (fewer than two occupied rows or columns); association is undefined")]
    DegenerateContingency,

    #[error("legend mismatch: {0}")]
    LegendMismatch(String),

    #[error("model file error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn grid(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Grid {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn misaligned(context: impl Into<String>) -> Self {
        Error::Misaligned {
            context: context.into(),
        }
    }
}
