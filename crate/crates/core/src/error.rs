use thiserror::Error;

/// Errors raised by the imaging, cipher and analysis stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("index ({i}, {j}) out of range for a {p}x{q} array")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        p: usize,
        q: usize,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("depth conversion impossible: {0}")]
    DepthNotConvertible(String),

    #[error("pixel index {index} out of range for {m} pixels per elemental image")]
    InvalidPixelIndex { index: usize, m: usize },

    #[error("cellular automaton seed must be nonzero")]
    ZeroSeed,

    #[error("invalid rule {0}: only rules 90 and 150 are supported")]
    InvalidRule(u16),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("length mismatch: permutation has {expected} entries, raster has {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index array is not a bijection on 0..{0}")]
    NotABijection(usize),

    #[error("fraction {0} outside (0, 1)")]
    FractionOutOfRange(f64),

    #[error("no cipher stage selected")]
    NoStageSelected,

    #[error("key file line {line}, field `{field}`: {message}")]
    KeyParse {
        line: usize,
        field: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dims(w: usize, h: usize) -> String {
    format!("{w}x{h}")
}
