use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid box ({x0},{y0})-({x1},{y1}): need x1 > x0 and y1 > y0")]
    InvalidBox {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    },

    #[error("box {bbox:?} lies outside the {width}x{height} grid")]
    OutOfBounds {
        bbox: crate::raster::BBox,
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("band does not match target: {0}")]
    BandMismatch(String),

    #[error("non-finite loss component `{name}`: {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("infeasible layout: {0}")]
    InfeasibleLayout(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    SchemaVersion {
        what: String,
        found: u32,
        expected: u32,
    },

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
